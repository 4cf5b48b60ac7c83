"""Reading and writing datasets in the plain-text directory format.

A dataset directory holds::

    edges.tsv      u<TAB>v[<TAB>w]          (w defaults to 1.0)
    features.tsv   row<TAB>col<TAB>value     (sparse triplets), or
    features.csv   one comma-separated dense row per node
    labels.tsv     node<TAB>class            (optional)
    meta           key=value lines: n_nodes, n_features, n_classes, directed
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import Dataset, from_edges

__all__ = ["DatasetFormatError", "load_dataset", "save_dataset", "read_meta"]

_FLOAT_FMT = "%.17g"


class DatasetFormatError(ValueError):
    """A dataset file is missing or malformed."""

    def __init__(self, path, message, line=None):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = Path(path)
        self.line = line


def _parse_float(tok, path, lineno):
    try:
        val = float(tok)
    except ValueError:
        raise DatasetFormatError(path, f"cannot parse {tok!r} as a number", lineno) from None
    if not math.isfinite(val):
        raise DatasetFormatError(path, f"non-finite value {tok!r}", lineno)
    return val


def _parse_int(tok, path, lineno, upper, what):
    try:
        val = int(tok)
    except ValueError:
        raise DatasetFormatError(path, f"cannot parse {what} {tok!r} as an integer", lineno) from None
    if not 0 <= val < upper:
        raise DatasetFormatError(path, f"{what} {val} out of range [0, {upper})", lineno)
    return val


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line and not line.startswith("#"):
                yield lineno, line


def read_meta(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(path, "missing meta file")
    meta = {}
    for lineno, line in _lines(path):
        if "=" not in line:
            raise DatasetFormatError(path, "expected key=value", lineno)
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    for key in ("n_nodes", "n_features"):
        if key not in meta:
            raise DatasetFormatError(path, f"missing key {key!r}")
    return meta


def _read_edges(path, n):
    if not path.exists():
        raise DatasetFormatError(path, "missing edges file")
    edges = []
    for lineno, line in _lines(path):
        toks = line.split()
        if len(toks) not in (2, 3):
            raise DatasetFormatError(path, f"expected 2 or 3 fields, got {len(toks)}", lineno)
        u = _parse_int(toks[0], path, lineno, n, "node id")
        v = _parse_int(toks[1], path, lineno, n, "node id")
        w = _parse_float(toks[2], path, lineno) if len(toks) == 3 else 1.0
        edges.append((u, v, w))
    return edges


def _read_features(root, n, f):
    tsv, csv = root / "features.tsv", root / "features.csv"
    if tsv.exists():
        rows, cols, vals = [], [], []
        for lineno, line in _lines(tsv):
            toks = line.split()
            if len(toks) != 3:
                raise DatasetFormatError(tsv, f"expected 3 fields, got {len(toks)}", lineno)
            rows.append(_parse_int(toks[0], tsv, lineno, n, "row"))
            cols.append(_parse_int(toks[1], tsv, lineno, f, "column"))
            vals.append(_parse_float(toks[2], tsv, lineno))
        x = sp.csr_matrix((vals, (rows, cols)), shape=(n, f), dtype=np.float64)
        x.sum_duplicates()
        return x
    if csv.exists():
        try:
            x = np.loadtxt(csv, delimiter=",", ndmin=2, dtype=np.float64, comments="#")
            if x.shape == (n, f) and np.all(np.isfinite(x)):
                return x
        except ValueError:
            pass
        # slow path pinpoints the offending line
        x = np.zeros((n, f))
        count = 0
        for lineno, line in _lines(csv):
            toks = line.split(",")
            if len(toks) != f:
                raise DatasetFormatError(csv, f"expected {f} columns, got {len(toks)}", lineno)
            if count >= n:
                raise DatasetFormatError(csv, f"more than n_nodes={n} rows", lineno)
            x[count] = [_parse_float(t, csv, lineno) for t in toks]
            count += 1
        if count != n:
            raise DatasetFormatError(csv, f"expected {n} rows, got {count}")
        return x
    raise DatasetFormatError(tsv, "missing features file (features.tsv or features.csv)")


def _read_labels(path, n, k):
    labels = np.full(n, -1, dtype=np.int64)
    for lineno, line in _lines(path):
        toks = line.split()
        if len(toks) != 2:
            raise DatasetFormatError(path, f"expected 2 fields, got {len(toks)}", lineno)
        node = _parse_int(toks[0], path, lineno, n, "node id")
        labels[node] = _parse_int(toks[1], path, lineno, k, "class id")
    missing = np.flatnonzero(labels < 0)
    if missing.size:
        raise DatasetFormatError(path, f"no label for node {missing[0]}")
    return labels


def load_dataset(path) -> Dataset:
    """Load a dataset directory; edges are canonicalized and deduplicated."""
    root = Path(path)
    if not root.is_dir():
        raise DatasetFormatError(root, "not a directory")
    meta = read_meta(root / "meta")
    try:
        n = int(meta["n_nodes"])
        f = int(meta["n_features"])
        k = int(meta["n_classes"]) if "n_classes" in meta else None
    except ValueError as err:
        raise DatasetFormatError(root / "meta", str(err)) from None
    directed = meta.get("directed", "false").lower() in ("1", "true", "yes")
    graph = from_edges(n, _read_edges(root / "edges.tsv", n), directed=directed)
    features = _read_features(root, n, f)
    labels = None
    labels_path = root / "labels.tsv"
    if labels_path.exists():
        if k is None:
            raise DatasetFormatError(root / "meta", "labels.tsv present but n_classes missing")
        labels = _read_labels(labels_path, n, k)
    extra = {key: v for key, v in meta.items() if key not in ("n_nodes", "n_features", "n_classes", "directed")}
    extra.setdefault("symmetrization", "max_abs")
    return Dataset(graph, features, labels, k, name=meta.get("name", root.name), meta=extra)


def save_dataset(d: Dataset, path) -> None:
    """Write ``d`` in the directory format; floats keep 17 significant digits."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "edges.tsv", "w", encoding="utf-8") as fh:
        for u, v, w in d.graph.edges():
            fh.write(f"{u}\t{v}\t{_FLOAT_FMT % w}\n")
    x = d.features
    if sp.issparse(x):
        (root / "features.csv").unlink(missing_ok=True)
        coo = sp.coo_matrix(x)
        order = np.lexsort((coo.col, coo.row))
        with open(root / "features.tsv", "w", encoding="utf-8") as fh:
            for i in order:
                fh.write(f"{coo.row[i]}\t{coo.col[i]}\t{_FLOAT_FMT % coo.data[i]}\n")
    else:
        (root / "features.tsv").unlink(missing_ok=True)
        np.savetxt(root / "features.csv", np.asarray(x), fmt=_FLOAT_FMT, delimiter=",")
    if d.labels is not None:
        with open(root / "labels.tsv", "w", encoding="utf-8") as fh:
            for i, c in enumerate(d.labels):
                fh.write(f"{i}\t{c}\n")
    else:
        (root / "labels.tsv").unlink(missing_ok=True)
    meta = {
        "name": d.name,
        "n_nodes": d.n_nodes,
        "n_features": d.n_features,
        "directed": str(d.graph.directed).lower(),
    }
    if d.n_classes is not None:
        meta["n_classes"] = d.n_classes
    for key, value in d.meta.items():
        meta.setdefault(key, value)
    with open(root / "meta", "w", encoding="utf-8") as fh:
        for key, value in meta.items():
            fh.write(f"{key}={value}\n")
