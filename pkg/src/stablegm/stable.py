"""Univariate alpha-stable laws: parameters, closure rules, sampling, estimators.

Parametrization follows the characteristic function

    phi(q) = exp(i*mu*q - gamma*|q|**alpha * (1 - i*beta*sign(q)*r(q, alpha)))

with r = tan(alpha*pi/2) for alpha != 1 and r = -(2/pi)*log|q| for alpha == 1.
``gamma`` is the dispersion (scale**alpha), so a Gaussian has variance 2*gamma.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

#: trigamma(1), the variance of log|X| contributed by the Gumbel part
PSI1 = math.pi ** 2 / 6.0

ALPHA_MIN = 0.1
ALPHA_MAX = 2.0


class EstimationWarning(UserWarning):
    """Estimator input was thinned or small enough to make the result unreliable."""


@dataclass(frozen=True)
class StableParams:
    """One univariate stable law S_alpha(beta, gamma, mu)."""

    alpha: float
    beta: float = 0.0
    gamma: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not -1.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [-1, 1], got {self.beta}")
        if not self.gamma > 0.0 or not math.isfinite(self.gamma):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")

    @property
    def theta(self) -> float:
        """Skew reparametrized as arctan(beta * tan(alpha*pi/2))."""
        return math.atan(self.beta * _tan_half_pi(self.alpha))


@dataclass(frozen=True)
class StandardizedSample:
    values: np.ndarray
    source: StableParams


@dataclass(frozen=True)
class EstimatorReport:
    alpha_hat: float
    theta_hat: float
    gamma_hat: float
    n_used: int


def make_rng(seed) -> np.random.Generator:
    """Counter-based (Philox) generator; passes an existing Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(int(seed)))


def _tan_half_pi(alpha: float) -> float:
    # tan(pi) is ~-1.2e-16 in floating point; the Gaussian has no skew term.
    if alpha == 2.0:
        return 0.0
    return math.tan(alpha * math.pi / 2.0)


def scale_shift(params: StableParams, c: float, d: float) -> StableParams:
    """Law of ``c*X + d`` for ``X ~ params``."""
    if c == 0:
        raise ValueError("c = 0 maps the law onto a point mass")
    a, b, g, m = params.alpha, params.beta, params.gamma, params.mu
    sgn = 1.0 if c > 0 else -1.0
    if a == 1.0:
        mu = c * (m - 2.0 * g * b * math.log(abs(c)) / math.pi) + d
        return StableParams(a, sgn * b, abs(c) * g, mu)
    return StableParams(a, sgn * b, abs(c) ** a * g, c * m + d)


def aggregate(a: StableParams, b: StableParams) -> StableParams:
    """Law of the sum of two independent stable variables with a shared alpha."""
    if a.alpha != b.alpha:
        raise ValueError(f"cannot aggregate alpha={a.alpha} with alpha={b.alpha}")
    gamma = a.gamma + b.gamma
    beta = (a.beta * a.gamma + b.beta * b.gamma) / gamma
    return StableParams(a.alpha, min(1.0, max(-1.0, beta)), gamma, a.mu + b.mu)


def _standard_location(params: StableParams) -> float:
    a, b, g, m = params.alpha, params.beta, params.gamma, params.mu
    if a == 1.0:
        return m / g + 2.0 * b * math.log(g) / math.pi
    return m / g ** (1.0 / a)


def standardize(values, params: StableParams) -> StandardizedSample:
    """Map draws of ``params`` onto the standard law S_alpha(beta, 1, 0)."""
    x = np.asarray(values, dtype=float)
    scale = params.gamma ** (1.0 / params.alpha)
    return StandardizedSample(x / scale - _standard_location(params), params)


def destandardize(sample: StandardizedSample) -> np.ndarray:
    """Inverse of :func:`standardize`."""
    params = sample.source
    scale = params.gamma ** (1.0 / params.alpha)
    return (np.asarray(sample.values, dtype=float) + _standard_location(params)) * scale


def _standard_cms(alpha: float, beta: float, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Chambers-Mallows-Stuck transform to S_alpha(beta, 1, 0).

    ``u`` is uniform on (-pi/2, pi/2), ``w`` is unit exponential.
    """
    if alpha == 1.0:
        half_pi = math.pi / 2.0
        bu = half_pi + beta * u
        return (2.0 / math.pi) * (bu * np.tan(u) - beta * np.log(half_pi * w * np.cos(u) / bu))
    zeta = beta * _tan_half_pi(alpha)
    b = math.atan(zeta) / alpha
    s = (1.0 + zeta * zeta) ** (1.0 / (2.0 * alpha))
    au = alpha * (u + b)
    return (
        s
        * np.sin(au)
        / np.cos(u) ** (1.0 / alpha)
        * (np.cos(u - au) / w) ** ((1.0 - alpha) / alpha)
    )


def sample(params: StableParams, n: int, seed=0) -> np.ndarray:
    """Draw ``n`` i.i.d. values from ``params``.

    ``seed`` is an integer or a ``numpy.random.Generator``; integer seeds give a
    Philox stream so results are reproducible across platforms.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = make_rng(seed)
    u = rng.uniform(-math.pi / 2.0, math.pi / 2.0, size=n)
    w = rng.standard_exponential(size=n)
    x = _standard_cms(params.alpha, params.beta, u, w)
    c = params.gamma ** (1.0 / params.alpha)
    shifted = scale_shift(StableParams(params.alpha, params.beta), c, 0.0)
    return c * x + (params.mu - shifted.mu)


def char_function(q, params: StableParams):
    """Univariate characteristic function, vectorized over ``q``."""
    q = np.asarray(q, dtype=float)
    return np.exp(log_char_function(q, params))


def log_char_function(q, params: StableParams):
    q = np.asarray(q, dtype=float)
    a, b, g, m = params.alpha, params.beta, params.gamma, params.mu
    absq = np.abs(q)
    if a == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(absq > 0, -(2.0 / math.pi) * np.log(absq), 0.0)
    else:
        r = _tan_half_pi(a)
    return 1j * m * q - g * absq ** a * (1.0 - 1j * b * np.sign(q) * r)


def closed_form_pdf(family: str, x, params: StableParams):
    """Exact density of the Levy, Cauchy or Normal member of the stable family."""
    x = np.asarray(x, dtype=float)
    g, m = params.gamma, params.mu
    _check_family(family, params)
    if family == "cauchy":
        return g / (math.pi * (g * g + (x - m) ** 2))
    if family == "normal":
        return np.exp(-((x - m) ** 2) / (4.0 * g)) / (2.0 * math.sqrt(math.pi * g))
    z = x - m
    out = np.zeros_like(z)
    pos = z > 0
    zp = z[pos]
    out[pos] = g / math.sqrt(2.0 * math.pi) * zp ** -1.5 * np.exp(-(g * g) / (2.0 * zp))
    return out


def closed_form_cdf(family: str, x, params: StableParams):
    x = np.asarray(x, dtype=float)
    g, m = params.gamma, params.mu
    _check_family(family, params)
    if family == "cauchy":
        return 0.5 + np.arctan((x - m) / g) / math.pi
    if family == "normal":
        return 0.5 * special.erfc(-(x - m) / (2.0 * math.sqrt(g)))
    z = x - m
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = special.erfc(g / np.sqrt(2.0 * z[pos]))
    return out


_FAMILIES = {"levy": (0.5, 1.0), "cauchy": (1.0, 0.0), "normal": (2.0, 0.0)}


def _check_family(family: str, params: StableParams):
    try:
        alpha, beta = _FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown closed-form family {family!r}") from None
    if params.alpha != alpha or params.beta != beta:
        raise ValueError(
            f"{family} requires alpha={alpha}, beta={beta}; got "
            f"alpha={params.alpha}, beta={params.beta}"
        )


def tail_constant(alpha: float) -> float:
    return math.gamma(alpha) * math.sin(alpha * math.pi / 2.0) / math.pi


def tail_asymptote(params: StableParams, x: float) -> float:
    """Pareto approximation of Pr(X > x) for large ``x`` (alpha < 2)."""
    if params.alpha >= 2.0:
        raise ValueError("the Gaussian law has no Pareto tail")
    if x <= 0:
        raise ValueError("x must be positive")
    return (1.0 + params.beta) * params.gamma * tail_constant(params.alpha) * x ** -params.alpha


def flom_constant(p: float, alpha: float) -> float:
    """C(p, alpha) with E|Z|^p = C(p, alpha) * gamma**(p/alpha) for symmetric Z.

    The textbook form Gamma(1-p/alpha) / (Gamma(1-p) cos(p*pi/2)) has a
    removable singularity at p = 1 (and p = 0). Applying the reflection
    formula gives Gamma(1+p) * sinc(p/2) * Gamma(1-p/alpha), which is smooth on
    the whole range -1 < p < alpha.
    """
    if not -1.0 < p < alpha:
        raise ValueError(f"p must lie in (-1, alpha={alpha}), got {p}")
    return math.gamma(1.0 + p) * float(np.sinc(p / 2.0)) * math.gamma(1.0 - p / alpha)


def alpha_from_log_variance(l2: float) -> float:
    """Invert Var(log|X|) = psi1 * (1/alpha^2 + 1/2), clamped to (0.1, 2]."""
    ratio = l2 / PSI1 - 0.5
    if ratio <= 0.25:
        return ALPHA_MAX
    return max(ALPHA_MIN, ratio ** -0.5)


def estimate_alpha(values) -> float:
    """Log-statistics estimate of alpha from symmetric, zero-location draws."""
    x = np.asarray(values, dtype=float).ravel()
    nonzero = x[x != 0]
    if nonzero.size == 0:
        raise ValueError("cannot estimate alpha from an all-zero sample")
    dropped = x.size - nonzero.size
    if dropped:
        warnings.warn(f"estimate_alpha: dropped {dropped} exact zeros", EstimationWarning, stacklevel=2)
    if nonzero.size < 50:
        warnings.warn(f"estimate_alpha: only {nonzero.size} usable values", EstimationWarning, stacklevel=2)
    if nonzero.size < 2:
        return ALPHA_MAX
    logs = np.log(np.abs(nonzero))
    return alpha_from_log_variance(float(np.var(logs, ddof=1)))


def estimate_theta(values, alpha: float) -> float:
    """Zeroth-order signed-moment estimate of theta = arctan(beta tan(alpha pi/2))."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    return alpha * math.pi / (2.0 * x.size) * float(np.sum(np.sign(x)))


def estimate_gamma(values, alpha: float, p: float) -> float:
    """Dispersion from the fractional lower-order moment of order ``p``."""
    if p == 0:
        raise ValueError("p = 0 carries no scale information")
    x = np.asarray(values, dtype=float).ravel()
    moment = float(np.mean(np.abs(x) ** p))
    if not moment > 0 or not math.isfinite(moment):
        raise ValueError("mean absolute power is zero or non-finite")
    return (moment / flom_constant(p, alpha)) ** (alpha / p)


def beta_from_theta(theta: float, alpha: float) -> float:
    t = _tan_half_pi(alpha)
    if alpha == 1.0 or abs(t) < 1e-12 or not math.isfinite(t):
        return 0.0
    return max(-1.0, min(1.0, math.tan(theta) / t))


def estimate(values, p_divisor: float = 10.0) -> EstimatorReport:
    """All three estimators on one sample.

    alpha and gamma come from the symmetrized sample (pairwise differences),
    with the doubled dispersion halved; theta comes from the raw signs.
    """
    x = np.asarray(values, dtype=float).ravel()
    m = x.size // 2
    if m < 1:
        raise ValueError("need at least two values")
    sym = x[1 : 2 * m : 2] - x[0 : 2 * m : 2]
    alpha = estimate_alpha(sym)
    theta = estimate_theta(x, alpha)
    gamma = estimate_gamma(sym, alpha, alpha / p_divisor) / 2.0
    return EstimatorReport(alpha, theta, gamma, int(x.size))
