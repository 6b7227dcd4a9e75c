"""Lambda sweeps of det(I - R_lam), sign-change brackets and root refinement."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import pipeline
from .config import ProblemConfig
from .errors import NoSignChange, NonlocalBVPError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepRecord:
    lam: float
    det: float
    classification: str
    B: tuple | None
    cond: float
    seconds: float
    error: str | None = None


def _evaluate_point(args) -> SweepRecord:
    cfg, lam, engine = args
    t0 = time.perf_counter()
    try:
        ev = pipeline.evaluate(cfg, lam, engine)
    except (NonlocalBVPError, ArithmeticError) as exc:
        log.warning("lambda=%r failed: %s", lam, exc)
        return SweepRecord(lam, math.nan, "Error", None, math.nan, time.perf_counter() - t0,
                           f"{type(exc).__name__}: {exc}")
    cls = ev.classification
    B = tuple(float(v) for v in cls.B) if cls.tag == "Unique" else None
    return SweepRecord(lam, ev.system.det, cls.tag, B, ev.system.cond, time.perf_counter() - t0)


def find_brackets(lams, dets):
    """Consecutive grid pairs across which det changes sign (exact zeros give a point bracket)."""
    out = []
    for k, (lam, d) in enumerate(zip(lams, dets)):
        if d == 0.0:
            out.append((lam, lam))
        elif k + 1 < len(lams):
            d2 = dets[k + 1]
            if np.isfinite(d) and np.isfinite(d2) and d * d2 < 0:
                out.append((lam, lams[k + 1]))
    return out


def sweep_lambda(cfg: ProblemConfig, lambda_min=None, lambda_max=None, steps=None, engine=None, jobs=1):
    """Evaluate on a uniform lambda grid; returns ``(records, brackets)``.

    Failed points are kept as records with classification ``"Error"``.
    """
    s = cfg.sweep
    lo = s.lambda_min if lambda_min is None else lambda_min
    hi = s.lambda_max if lambda_max is None else lambda_max
    steps = s.steps if steps is None else steps
    engine = engine or s.engine
    if lo is None or hi is None or not 0 < lo < hi:
        raise ValueError(f"need 0 < lambda_min < lambda_max, got ({lo}, {hi})")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    grid = np.linspace(lo, hi, steps)
    tasks = [(cfg, float(lam), engine) for lam in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_evaluate_point, tasks))
    else:
        records = [_evaluate_point(t) for t in tasks]
    records.sort(key=lambda r: r.lam)
    brackets = find_brackets([r.lam for r in records], [r.det for r in records])
    return records, brackets


def refine_root(cfg: ProblemConfig, bracket, tol=None, engine=None, det=None) -> float:
    """Bisection on ``lam -> det(I - R_lam)`` down to a bracket of width ``tol``.

    Bisection continues past ``tol`` until the midpoint's ``|det|`` is no
    larger than at either endpoint, so the returned midpoint is never worse
    than the final bracket ends.
    """
    tol = cfg.sweep.tol if tol is None else tol
    f = det or pipeline.det_function(cfg, engine)
    a, b = map(float, bracket)
    if a > b:
        a, b = b, a
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if not (np.isfinite(fa) and np.isfinite(fb)) or fa * fb > 0:
        raise NoSignChange(f"det has the same sign at {a!r} ({fa:.3g}) and {b!r} ({fb:.3g})")
    while True:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0 or m <= a or m >= b:
            return m
        if b - a <= tol and abs(fm) <= min(abs(fa), abs(fb)):
            return m
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b, fb = m, fm


# --- output ---------------------------------------------------------------


def _fmt(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return ""
    return format(v, ".17g")


def write_csv(records, path, timings=False):
    """One row per record; ``seconds`` is blank unless ``timings`` (keeps output deterministic)."""
    n = max((len(r.B) for r in records if r.B is not None), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "det", "classification"] + [f"B{k}" for k in range(n)] + ["cond", "seconds"])
        for r in records:
            B = list(r.B) if r.B is not None else [None] * n
            w.writerow([_fmt(r.lam), _fmt(r.det), r.classification] + [_fmt(v) for v in B]
                       + [_fmt(r.cond), _fmt(r.seconds) if timings else ""])


def _json_num(v):
    return v if v is None or math.isfinite(v) else None


def record_dict(r: SweepRecord, timings=False):
    d = {"lambda": r.lam, "det": _json_num(r.det), "classification": r.classification,
         "B": list(r.B) if r.B is not None else None, "cond": _json_num(r.cond),
         "seconds": r.seconds if timings else None}
    if r.error:
        d["error"] = r.error
    return d


def write_json(records, brackets, roots, path, timings=False):
    doc = {"records": [record_dict(r, timings) for r in records],
           "brackets": [list(b) for b in brackets], "roots": list(roots)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
