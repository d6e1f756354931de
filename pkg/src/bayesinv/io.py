"""CSV/JSON emission with a fixed 17-significant-digit float format."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from bayesinv.errors import IoError


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


def write_rows(path, header, rows):
    """Write a header line and rows; every float gets 17 significant digits."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def write_matrix_csv(path, header, matrix):
    return write_rows(path, header, np.asarray(matrix))


def read_matrix_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    header, body = rows[0], rows[1:]
    data = np.array([[float(s) for s in r] for r in body], dtype=float).reshape(len(body), len(header))
    return header, data


def write_json(path, obj):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
        path.write_text(text + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # JSON has no inf/nan; emit the same tokens as the CSV files
        return v if math.isfinite(v) else fmt(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def emit_csv(obj, path):
    """Write a posterior, prior ensemble, or convergence report as CSV.

    Layouts (see docs/formats.md):
      PosteriorParticles  index,log_weight,weight
      PriorEnsemble       c0..c{N-1} (or t0.. for paths), one particle per row
      ConvergenceReport   level,metric,value
    """
    from bayesinv.convergence import ConvergenceReport
    from bayesinv.posterior import PosteriorParticles
    from bayesinv.priors import PriorEnsemble, write_ensemble_csv

    if isinstance(obj, PosteriorParticles):
        rows = zip(range(obj.M), obj.log_weights, obj.norm_weights)
        return write_rows(path, ["index", "log_weight", "weight"], rows)
    if isinstance(obj, PriorEnsemble):
        write_ensemble_csv(obj, path)
        return Path(path)
    if isinstance(obj, ConvergenceReport):
        return write_rows(path, ["level", "metric", "value"], obj.rows())
    raise IoError(f"no CSV layout for {type(obj).__name__}")
