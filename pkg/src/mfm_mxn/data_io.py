"""File formats: matrix files, label sidecars, shot event tables, hyperparameter
configs, chain traces and run results."""
from __future__ import annotations

import csv
import json
import math
import warnings
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .prior import Hyperparams, default_hyperparams

COURT_WIDTH = 50.0  # sideline to sideline, feet
COURT_DEPTH = 36.0  # distance from the baseline kept for analysis, feet
DEFAULT_EPSILON = 0.1


def _fmt(x) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------- matrices

def save_matrices(path, data) -> None:
    """Write ``n`` matrices as a ``p q n`` header followed by ``n`` blocks of ``p`` rows."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 2:
        data = data[None]
    n, p, q = data.shape
    lines = [f"{p} {q} {n}"]
    for Y in data:
        lines.extend(" ".join(_fmt(v) for v in row) for row in Y)
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrices(path) -> np.ndarray:
    """Read a matrix file into an ``(n, p, q)`` array."""
    text = Path(path).read_text()
    rows = [(i + 1, line.split()) for i, line in enumerate(text.splitlines()) if line.strip()]
    if not rows:
        raise DataFormatError(f"{path}: empty matrix file", line=1)
    lineno, header = rows[0]
    try:
        p, q, n = (int(tok) for tok in header)
    except ValueError:
        raise DataFormatError(f"malformed header {' '.join(header)!r}, expected 'p q n'", line=lineno) from None
    if p < 1 or q < 1 or n < 1:
        raise DataFormatError("header dimensions must be positive", line=lineno)
    body = rows[1:]
    if len(body) != n * p:
        last = body[-1][0] if body else lineno
        raise DataFormatError(f"expected {n * p} data rows for {n} blocks of {p} rows, found {len(body)}", line=last)
    out = np.empty((n, p, q))
    for k, (lineno, toks) in enumerate(body):
        if len(toks) != q:
            raise DataFormatError(f"expected {q} values, found {len(toks)}", line=lineno)
        try:
            vals = [float(t) for t in toks]
        except ValueError:
            raise DataFormatError(f"non-numeric value in {' '.join(toks)!r}", line=lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise DataFormatError("non-finite value", line=lineno)
        out[k // p, k % p] = vals
    return out


def save_labels(path, labels) -> None:
    Path(path).write_text("".join(f"{int(z)}\n" for z in labels))


def load_labels(path) -> np.ndarray:
    labels = []
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            labels.append(int(line))
        except ValueError:
            raise DataFormatError(f"label {line!r} is not an integer", line=i) from None
    if not labels:
        raise DataFormatError(f"{path}: no labels", line=1)
    return np.array(labels)


def save_delimited_matrix(path, M, delimiter=",") -> None:
    Path(path).write_text("".join(delimiter.join(_fmt(v) for v in row) + "\n" for row in np.atleast_2d(M)))


def load_delimited_matrix(path, delimiter=",") -> np.ndarray:
    return np.array([[float(v) for v in line.split(delimiter)]
                     for line in Path(path).read_text().splitlines() if line.strip()])


# --------------------------------------------------------------------------- shots

def load_shots(path, depth=COURT_DEPTH):
    """Read a comma-separated ``entity_id,x,y,games_played`` table.

    Shots farther than ``depth`` feet from the baseline are dropped with a
    warning; any other out-of-window coordinate is an error.
    """
    ids, xs, ys, games = [], [], [], {}
    dropped = 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["entity_id", "x", "y", "games_played"]
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
            raise DataFormatError(f"header must be {','.join(expected)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            try:
                ent = row["entity_id"].strip()
                x, y = float(row["x"]), float(row["y"])
                g = int(row["games_played"])
            except (TypeError, ValueError, AttributeError):
                raise DataFormatError(f"malformed row {row}", line=lineno) from None
            if not ent:
                raise DataFormatError("empty entity_id", line=lineno)
            if not (math.isfinite(x) and math.isfinite(y)) or not 0 <= x <= COURT_WIDTH or y < 0:
                raise DataFormatError(f"shot ({x}, {y}) outside the court window", line=lineno)
            if g < 1:
                raise DataFormatError("games_played must be >= 1", line=lineno)
            if games.setdefault(ent, g) != g:
                raise DataFormatError(f"inconsistent games_played for {ent!r}", line=lineno)
            if y > depth:
                dropped += 1
                continue
            ids.append(ent)
            xs.append(x)
            ys.append(y)
    if dropped:
        warnings.warn(f"dropped {dropped} shots beyond {depth} ft from the baseline", stacklevel=2)
    return {"entity_id": np.array(ids, dtype=object), "x": np.array(xs), "y": np.array(ys), "games": games}


def _bin_index(v, upper, bins):
    # half-open [lo, hi) cells with the last cell closed
    edges = np.linspace(0.0, upper, bins + 1)
    return np.clip(np.searchsorted(edges, v, side="right") - 1, 0, bins - 1)


def bin_shots(events, p: int = 25, q: int = 18, epsilon: float = DEFAULT_EPSILON):
    """Per-entity log shot-rate matrices.

    Rows split the 50 ft court width into ``p`` cells and columns split the
    36 ft depth into ``q`` cells.  Counts are divided by games played and
    mapped through ``log(rate + epsilon)``.  Returns ``(entity_ids, matrices)``
    with entities in sorted order.
    """
    if p < 1 or q < 1:
        raise ConfigError("p and q must be positive")
    if epsilon < 0:
        raise ConfigError("epsilon must be non-negative")
    ids = np.asarray(events["entity_id"])
    rows = _bin_index(np.asarray(events["x"], dtype=float), COURT_WIDTH, p)
    cols = _bin_index(np.asarray(events["y"], dtype=float), COURT_DEPTH, q)
    entities = sorted(events["games"])
    out_ids, mats = [], []
    for ent in entities:
        mask = ids == ent
        if not mask.any():
            warnings.warn(f"entity {ent!r} has no shots in the window; skipped", stacklevel=2)
            continue
        counts = np.zeros((p, q))
        np.add.at(counts, (rows[mask], cols[mask]), 1.0)
        with np.errstate(divide="ignore"):
            mats.append(np.log(counts / events["games"][ent] + epsilon))
        out_ids.append(ent)
    return out_ids, np.array(mats).reshape(len(mats), p, q)


# --------------------------------------------------------------------------- hyperparameters

_MATRIX_FIELDS = ("M0", "Sigma0", "Omega0", "beta_scale", "rho_scale")
_SCALAR_FIELDS = ("gamma", "tau", "alpha", "psi")


def save_hyperparams(path, hyper: Hyperparams) -> None:
    """``key = value`` lines; matrices are JSON nested lists."""
    lines = []
    for name in _SCALAR_FIELDS + _MATRIX_FIELDS:
        value = getattr(hyper, name)
        text = json.dumps(np.asarray(value).tolist()) if name in _MATRIX_FIELDS else _fmt(value)
        lines.append(f"{name} = {text}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_hyperparam_overrides(path) -> dict:
    overrides = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise DataFormatError(f"expected 'key = value', got {line!r}", line=i)
        if key not in _SCALAR_FIELDS + _MATRIX_FIELDS:
            raise DataFormatError(f"unknown hyperparameter {key!r}", line=i)
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            raise DataFormatError(f"cannot parse value for {key!r}", line=i) from None
        overrides[key] = np.array(parsed, dtype=float) if key in _MATRIX_FIELDS else float(parsed)
    return overrides


def load_hyperparams(path, data=None) -> Hyperparams:
    """Hyperparameters from a config file; fields it omits come from the data defaults."""
    overrides = read_hyperparam_overrides(path)
    if data is None:
        missing = set(_SCALAR_FIELDS + _MATRIX_FIELDS) - set(overrides)
        if missing:
            raise ConfigError(f"config lacks {sorted(missing)} and no data was given for defaults")
        return Hyperparams(**overrides)
    return default_hyperparams(data).replace(**overrides)


# --------------------------------------------------------------------------- traces and results

def write_trace(path, trace, all_states: bool = False) -> None:
    """One JSON record per retained state.  Means and covariances are included
    for the final state, and for every state when ``all_states`` is set."""
    with open(path, "w") as fh:
        last = len(trace.states) - 1
        for k, s in enumerate(trace.states):
            rec = {
                "iteration": s.iteration,
                "labels": [int(z) for z in s.labels],
                "n_clusters": int(s.n_clusters),
                "log_joint": float(s.log_joint),
            }
            if all_states or k == last:
                rec["means"] = s.means.tolist()
                rec["U"] = s.U.tolist()
                rec["V"] = s.V.tolist()
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_trace(path) -> list:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
