import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocal_bvp import radial_oracle as O, sweep
from nonlocal_bvp.acceptance import example2_config
from nonlocal_bvp.config import parse_config
from nonlocal_bvp.errors import NoSignChange

CFG = example2_config()

ZERO_WEIGHTS = """
[domain]
kind = "annulus"
inner_radius = 1
outer_radius = 2
lambda = 2.0

[coefficients]
a = "unit-radial-drift"
h = "1"

[boundary]
components = 2
b = [0.0, 1.0]
g = ["0", "0"]

[discretization]
nr = 4
ntheta = 16
refinements = 0
n_points = 257

[sweep]
lambda_min = 1.0
lambda_max = 5.0
steps = 9
engine = "oracle"
"""


@pytest.mark.parametrize("engine", ["oracle", "fem"])
def test_zero_weights_no_brackets(engine):
    cfg = parse_config(ZERO_WEIGHTS)
    records, brackets = sweep.sweep_lambda(cfg, engine=engine)
    assert brackets == []
    assert all(r.det == 1.0 and r.classification == "Unique" for r in records)
    lams = [r.lam for r in records]
    assert lams == sorted(lams) and all(v > 0 for v in lams)


def test_critical_example2_brackets():
    cfg = example2_config()
    records, brackets = sweep.sweep_lambda(cfg, 1.5, 12.0, 400, "oracle")
    assert len(brackets) == 3
    for (a, b), root in zip(brackets, O.s0_set(2)):
        assert a < root < b


def test_noncritical_example2_no_brackets():
    cfg = example2_config(c0=0.5)
    records, brackets = sweep.sweep_lambda(cfg, 2.0, 30.0, 400, "oracle")
    assert brackets == []
    assert all(r.classification == "Unique" for r in records)


def test_refine_root_oracle():
    cfg = example2_config()
    root = sweep.refine_root(cfg, (4.0, 4.6), 1e-6, "oracle")
    assert abs(root - O.s0_set(1)[0]) <= 1e-6


def test_refine_root_same_sign():
    cfg = example2_config()
    with pytest.raises(NoSignChange):
        sweep.refine_root(cfg, (5.0, 6.0), 1e-6, "oracle")


def test_refine_root_fem_agrees():
    # finest mesh 64 x 128 with the shipped Romberg hierarchy; det is very flat
    # here (slope ~2.5e-3), so plain P1 at this size moves the root by ~0.1
    cfg = example2_config()
    assert cfg.discretization.finest == (64, 128)
    root = sweep.refine_root(cfg, (4.0, 4.6), 1e-4, "fem")
    assert abs(root - O.s0_set(1)[0]) <= 5e-2


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(0.01, 5), st.floats(0.01, 5), st.floats(1e-9, 1e-2),
       st.sampled_from([1.0, 3.0]))
def test_refined_root_not_worse_than_ends(c, left, right, tol, power):
    def f(x):
        return math.copysign(abs(x - c) ** power, x - c)

    root = sweep.refine_root(CFG, (c - left, c + right), tol, det=f)
    assert abs(root - c) <= max(tol, 1e-12 * (1 + abs(c))) or abs(f(root)) <= 1e-300
    # the midpoint is never worse than the final bracket ends
    assert abs(f(root)) <= abs(f(c - left)) and abs(f(root)) <= abs(f(c + right))


def test_find_brackets():
    lams = [1, 2, 3, 4, 5]
    assert sweep.find_brackets(lams, [1, -1, -2, 0, 3]) == [(1, 2), (4, 4)]
    assert sweep.find_brackets(lams, [1, np.nan, -1, -1, -1]) == []


def test_bad_grid():
    cfg = example2_config()
    with pytest.raises(ValueError):
        sweep.sweep_lambda(cfg, 3.0, 2.0, 10, "oracle")
    with pytest.raises(ValueError):
        sweep.sweep_lambda(cfg, 2.0, 3.0, 1, "oracle")


def test_outputs_deterministic(tmp_path):
    cfg = example2_config()
    outs = []
    for jobs, d in ((1, "a"), (2, "b")):
        records, brackets = sweep.sweep_lambda(cfg, 1.5, 12.0, 60, "oracle", jobs=jobs)
        roots = [sweep.refine_root(cfg, b, 1e-6, "oracle") for b in brackets]
        (tmp_path / d).mkdir()
        sweep.write_csv(records, tmp_path / d / "s.csv")
        sweep.write_json(records, brackets, roots, tmp_path / d / "s.json")
        outs.append(((tmp_path / d / "s.csv").read_bytes(), (tmp_path / d / "s.json").read_bytes()))
    assert outs[0] == outs[1]
    header = outs[0][0].decode().splitlines()[0]
    assert header == "lambda,det,classification,B0,B1,cond,seconds"


def test_timings_column(tmp_path):
    cfg = example2_config()
    records, _ = sweep.sweep_lambda(cfg, 2.0, 3.0, 3, "oracle")
    sweep.write_csv(records, tmp_path / "t.csv", timings=True)
    rows = (tmp_path / "t.csv").read_text().splitlines()[1:]
    assert all(float(row.split(",")[-1]) >= 0 for row in rows)
