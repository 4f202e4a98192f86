"""Dataset CSV, hazard-grid CSV, summary records and run configuration."""
from __future__ import annotations

import copy
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .posterior import DataError, SurvivalData

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on the interpreter
    import tomli as tomllib

#: Every configuration key with its default; ``None`` means "derive from data".
DEFAULTS = {
    "crm.tau": None,
    "prior.theta.low": None,
    "prior.theta.high": None,
    "proposal.theta.low": None,
    "proposal.theta.high": None,
    "mc.M": 10_000,
    "mc.burn_in": 5000,
    "mc.thin": 5,
    "mc.seed": None,
    "mc.workers": 1,
    "grid.t_min": 0.0,
    "grid.t_max": None,
    "grid.points": 100,
    "test.pi0": 0.5,
    "cox.beta_prior_sd": 1.0,
    "cox.proposal_sd_theta": None,
    "cox.proposal_sd_beta": None,
}

INT_KEYS = {"mc.M", "mc.burn_in", "mc.thin", "mc.seed", "mc.workers", "grid.points"}


def _flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def coerce(key: str, value):
    if value is None:
        return None
    if key not in DEFAULTS:
        raise KeyError(f"unknown configuration key {key!r}")
    if key in INT_KEYS:
        return int(value)
    return float(value)


def load_config(path=None, overrides: dict | None = None, env=None) -> dict:
    """Defaults, then the TOML file, then ``BFR_SEED``, then explicit overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        with open(path, "rb") as fh:
            for k, v in _flatten(tomllib.load(fh)).items():
                cfg[k] = coerce(k, v)
    env = os.environ if env is None else env
    if env.get("BFR_SEED"):
        cfg["mc.seed"] = int(env["BFR_SEED"])
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = coerce(k, v)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    for a in ("prior.theta", "proposal.theta"):
        lo, hi = cfg[f"{a}.low"], cfg[f"{a}.high"]
        if lo is not None and hi is not None and not hi > lo:
            raise ValueError(f"{a}: empty interval [{lo}, {hi}]")
    if cfg["mc.M"] < 1:
        raise ValueError("mc.M must be >= 1")
    if cfg["grid.points"] < 2:
        raise ValueError("grid.points must be >= 2")
    if cfg["mc.thin"] < 1 or cfg["mc.burn_in"] < 0:
        raise ValueError("mc.thin must be >= 1 and mc.burn_in >= 0")
    if not 0.0 <= cfg["test.pi0"] <= 1.0:
        raise ValueError("test.pi0 must lie in [0, 1]")


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

def write_dataset(data: SurvivalData, path) -> None:
    cols = ["time", "status"]
    X = data.covariates
    if X is not None:
        cols += [f"x{i + 1}" for i in range(X.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(data.N):
            row = [fmt(data.times[i]), str(int(data.status[i]))]
            if X is not None:
                row += [fmt(v) for v in X[i]]
            w.writerow(row)


def read_dataset(path, tau: float | None = None) -> SurvivalData:
    """Read ``time,status[,x1..xp]``; tau defaults to the censoring time."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    head = [h.strip() for h in rows[0]]
    if head[:2] != ["time", "status"]:
        raise DataError(f"{path}: header must start with time,status")
    p = len(head) - 2
    if head[2:] != [f"x{i + 1}" for i in range(p)]:
        raise DataError(f"{path}: covariate columns must be named x1..xp")
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataError(f"{path}: no records")
    for i, r in enumerate(body, start=2):
        if len(r) != len(head):
            raise DataError(f"{path}:{i}: expected {len(head)} fields, found {len(r)}")
    try:
        arr = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    times, status = arr[:, 0], arr[:, 1]
    if not np.all(np.isin(status, (0, 1))):
        raise DataError(f"{path}: status must be 0 or 1")
    if tau is None:
        cens = times[status == 0]
        if len(cens) == 0:
            raise DataError(f"{path}: no censored records; set crm.tau")
        tau = float(cens.max())
    X = arr[:, 2:] if p else None
    return SurvivalData(times, status.astype(int), float(tau), X)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

def fmt(x) -> str:
    return repr(float(x))


def check_finite(obj, where: str = "output") -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            check_finite(v, f"{where}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            check_finite(v, f"{where}[{i}]")
    elif isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite value in {where}")


def write_grid(path, t, est, se) -> None:
    est, se = np.asarray(est, dtype=float), np.asarray(se, dtype=float)
    if not (np.all(np.isfinite(est)) and np.all(np.isfinite(se))):
        raise ValueError("non-finite hazard estimate")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "estimate", "std_error"])
        for row in zip(t, est, se):
            w.writerow([fmt(v) for v in row])


def write_columns(path, header, columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([fmt(v) for v in row])


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_summary(path, record: dict) -> None:
    rec = to_jsonable(record)
    check_finite(rec, "summary")
    Path(path).write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n", encoding="utf-8")
