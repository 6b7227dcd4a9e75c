import numpy as np
import pytest

from nonlocal_bvp import pipeline, radial_oracle as O
from nonlocal_bvp.acceptance import example2_config


def test_oracle_engine_closed_form():
    cfg = example2_config()
    ev = pipeline.evaluate(cfg, 6.0, "oracle")
    assert ev.system.det == pytest.approx(O.example2_det(6.0), abs=1e-14)
    assert ev.classification.tag == "Unique"


@pytest.mark.parametrize("lam", [3.0, 6.0, 9.0])
def test_fem_det_converges(lam):
    errs = []
    for ref in (1, 2, 3):
        cfg = example2_config(nr=8, ntheta=16, refinements=ref, extrapolation=1)
        errs.append(abs(pipeline.evaluate(cfg, lam, "fem").system.det - O.example2_det(lam)))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders >= 1.9), orders


def test_extrapolated_system_is_closer():
    cfg = example2_config(refinements=2, extrapolation=3)
    ev = pipeline.evaluate(cfg, 6.0, "fem")
    exact = O.example2_det(6.0)
    assert abs(ev.system.det - exact) < abs(ev.raw_system.det - exact) / 10


def test_mesh_hierarchy_doubles():
    cfg = example2_config()
    meshes = pipeline.mesh_hierarchy(cfg, 4.0, 3)
    sizes = [m.n_nodes for m in meshes]
    assert len(meshes) == 3 and sizes[0] < sizes[1] < sizes[2]


def test_generic_radial_oracle_matches_closed_form():
    from dataclasses import replace

    cfg = replace(example2_config(), oracle_example=None)
    ev = pipeline.evaluate(cfg, 6.0, "oracle")
    assert ev.system.det == pytest.approx(O.example2_det(6.0), abs=1e-8)
