"""Readers and writers for model, data, topology and report files.

Every written text file starts with ``#`` comment lines echoing the resolved
configuration; readers skip such lines. JSON has no comment syntax, so model
files carry the same information under a leading ``"meta"`` key.
"""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .model import CycleError, Dag, DataMatrix, SGModel


class FileFormatError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        loc = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{loc}: {message}")


def fmt(x) -> str:
    """Shortest round-trip text for a float; integers and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def header_lines(config: dict) -> list:
    lines = [f"# stablegm {__version__}"]
    for key in sorted(config):
        lines.append(f"# {key}={fmt(config[key])}")
    return lines


def _open_out(path):
    return open(path, "w", encoding="utf-8", newline="")


# -- data ------------------------------------------------------------------


def read_data_csv(path) -> DataMatrix:
    names = None
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            cells = next(csv.reader([stripped]))
            if names is None:
                names = [c.strip() for c in cells]
                if any(not c for c in names):
                    raise FileFormatError(path, "empty variable name in header", lineno)
                if len(set(names)) != len(names):
                    raise FileFormatError(path, "duplicate variable names in header", lineno)
                continue
            if len(cells) != len(names):
                raise FileFormatError(
                    path, f"expected {len(names)} cells, found {len(cells)}", lineno
                )
            try:
                row = [float(c) for c in cells]
            except ValueError as exc:
                raise FileFormatError(path, f"non-numeric cell ({exc})", lineno) from None
            if not all(math.isfinite(v) for v in row):
                raise FileFormatError(path, "non-finite cell", lineno)
            rows.append(row)
    if names is None:
        raise FileFormatError(path, "no header row")
    values = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return DataMatrix(tuple(names), values)


def format_data_csv(data: DataMatrix, config: dict | None = None) -> str:
    buf = io.StringIO()
    if config is not None:
        buf.write("\n".join(header_lines(config)) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(data.variable_names)
    for row in data.values:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_data_csv(path, data: DataMatrix, config: dict | None = None):
    with _open_out(path) as fh:
        fh.write(format_data_csv(data, config))


# -- models ----------------------------------------------------------------


def model_to_dict(model: SGModel, meta: dict | None = None) -> dict:
    out = {}
    if meta is not None:
        out["meta"] = {"version": __version__, **{k: meta[k] for k in sorted(meta)}}
    out["alpha"] = model.alpha
    nodes = []
    for j, name in enumerate(model.names):
        b, g, m = model.noise[j]
        nodes.append(
            {
                "name": name,
                "parents": [model.names[k] for k in model.dag.parent_sets[j]],
                "weights": list(model.weights[j]),
                "beta": b,
                "gamma": g,
                "mu": m,
            }
        )
    out["nodes"] = nodes
    return out


def model_from_dict(doc: dict, path="<model>") -> SGModel:
    try:
        alpha = float(doc["alpha"])
        nodes = doc["nodes"]
        names = [str(n["name"]) for n in nodes]
        index = {n: i for i, n in enumerate(names)}
        parent_sets, weights, noise = [], [], []
        for node in nodes:
            pnames = [str(p) for p in node.get("parents", [])]
            ws = [float(w) for w in node.get("weights", [])]
            if len(pnames) != len(ws):
                raise FileFormatError(path, f"node {node['name']}: parents and weights differ in length")
            unknown = [p for p in pnames if p not in index]
            if unknown:
                raise FileFormatError(path, f"node {node['name']}: unknown parents {unknown}")
            # store parents sorted by index, keeping weights aligned
            pairs = sorted(zip((index[p] for p in pnames), ws))
            parent_sets.append(tuple(k for k, _ in pairs))
            weights.append(tuple(w for _, w in pairs))
            noise.append(
                (float(node.get("beta", 0.0)), float(node.get("gamma", 1.0)), float(node.get("mu", 0.0)))
            )
        dag = Dag(tuple(names), tuple(parent_sets))
        return SGModel(dag, alpha, tuple(weights), tuple(noise))
    except FileFormatError:
        raise
    except CycleError as exc:
        raise FileFormatError(path, str(exc)) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(path, f"invalid model: {exc}") from None


def read_model_json(path) -> SGModel:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(path, exc.msg, exc.lineno) from None
    return model_from_dict(doc, path)


def write_model_json(path, model: SGModel, meta: dict | None = None):
    with _open_out(path) as fh:
        json.dump(model_to_dict(model, meta), fh, indent=2)
        fh.write("\n")


# -- topologies ------------------------------------------------------------


def read_topology(path) -> Dag:
    """Edge list with one ``parent,child`` pair per line.

    ``path`` may also name a bundled topology (currently ``child``).
    """
    p = Path(path)
    if not p.exists() and str(path) in bundled_topologies():
        p = resources.files("stablegm") / "data" / f"{path}.edges"
    names, edges = [], []
    seen = set()
    with p.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [s.strip() for s in line.split(",")]
            if len(parts) != 2 or not all(parts):
                raise FileFormatError(path, "expected 'parent,child'", lineno)
            for name in parts:
                if name not in seen:
                    seen.add(name)
                    names.append(name)
            edges.append(tuple(parts))
    if len(set(edges)) != len(edges):
        raise FileFormatError(path, "duplicate edge")
    try:
        return Dag.from_edges(names, edges)
    except ValueError as exc:
        raise FileFormatError(path, str(exc)) from None


def bundled_topologies() -> list:
    return ["child"]


def write_topology(path, dag: Dag):
    with _open_out(path) as fh:
        for k, j in dag.edges():
            fh.write(f"{dag.node_names[k]},{dag.node_names[j]}\n")


# -- delimited reports -----------------------------------------------------


def format_table(columns, rows, config: dict | None = None, delimiter: str = "\t") -> str:
    lines = header_lines(config) if config is not None else []
    lines.append(delimiter.join(columns))
    for row in rows:
        lines.append(delimiter.join(fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def write_table(path, columns, rows, config: dict | None = None, delimiter: str = "\t"):
    with _open_out(path) as fh:
        fh.write(format_table(columns, rows, config, delimiter))


def read_table(path, delimiter: str = "\t"):
    """Returns (columns, rows-as-string-lists), skipping comment lines."""
    columns, rows = None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cells = line.split(delimiter)
            if columns is None:
                columns = cells
            else:
                rows.append(cells)
    return columns, rows


def read_labels(path) -> list:
    """One group label per data row; a first line ``group`` is treated as a header."""
    labels = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            labels.append(line.split(",")[0].strip())
    if labels and labels[0].lower() in ("group", "label"):
        labels = labels[1:]
    return labels
