import textwrap

import pytest

from nonlocal_bvp import fem, radial_oracle
from nonlocal_bvp.config import load_config, parse_config
from nonlocal_bvp.errors import ConfigError

BASE = textwrap.dedent("""\
    [parameters]
    C0 = 0.5

    [domain]
    kind = "annulus"
    inner_radius = 1
    outer_radius = 2
    dilate = true
    lambda = 3.0

    [coefficients]
    a = "unit-radial-drift"
    h = "1"

    [boundary]
    components = 2
    b = [0.0, 1.0]
    g = ["0", "C0*exp(-r)"]

    [discretization]
    nr = 4
    ntheta = 16
    refinements = 1
    """)


def _line_of(text, needle):
    return next(k for k, line in enumerate(text.splitlines(), start=1) if needle in line)


def test_base_parses():
    cfg = parse_config(BASE, "base.toml")
    assert cfg.components == 2
    assert cfg.lam == 3.0
    spec = cfg.domain_spec(3.0)
    assert (spec.inner_radius, spec.outer_radius) == (3.0, 6.0)
    assert cfg.parameters["C0"] == 0.5


def test_shipped_configs_load():
    from importlib.resources import files

    data = files("nonlocal_bvp").joinpath("data")
    for name in ("ex1.toml", "ex2.toml", "annulus12.toml", "multihole.toml"):
        load_config(data.joinpath(name))


def test_critical_keyword():
    from importlib.resources import files

    cfg = load_config(files("nonlocal_bvp").joinpath("data").joinpath("ex2.toml"))
    assert cfg.parameters["C0"] == radial_oracle.critical_c0()


@pytest.mark.parametrize(
    "old,new,needle",
    [
        ('h = "1"', 'h = "1 +"', 'h = "1 +"'),
        ('h = "1"', 'h = "q*2"', 'h = "q*2"'),
        ("nr = 4", "nr = 0", "nr = 0"),
        ("nr = 4", "nr = 4\nbogus = 1", "bogus = 1"),
        ("b = [0.0, 1.0]", "b = [0.0, 1.0, 2.0]", "b = [0.0, 1.0, 2.0]"),
        ('outer_radius = 2', 'outer_radius = 0.5', 'outer_radius = 0.5'),
        ('a = "unit-radial-drift"', 'a = "sideways"', 'a = "sideways"'),
        ("lambda = 3.0", "lambda = -1.0", "lambda = -1.0"),
    ],
)
def test_errors_carry_line(old, new, needle):
    text = BASE.replace(old, new)
    with pytest.raises(ConfigError) as info:
        parse_config(text, "bad.toml")
    err = info.value
    assert err.path == "bad.toml"
    assert err.line == _line_of(text, needle), str(err)
    assert str(err).startswith(f"bad.toml:{err.line}: ")


def test_toml_syntax_error_line():
    text = BASE.replace("nr = 4", "nr = = 4")
    with pytest.raises(ConfigError) as info:
        parse_config(text, "bad.toml")
    assert info.value.line == _line_of(text, "nr = = 4")


def test_missing_section():
    text = BASE.split("[boundary]")[0]
    with pytest.raises(ConfigError):
        parse_config(text)


def test_extrapolation_needs_levels():
    with pytest.raises(ConfigError):
        parse_config(BASE + "extrapolation = 5\n")


def test_load_from_file(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(BASE.replace("nr = 4", "nr = -2"))
    with pytest.raises(ConfigError) as info:
        load_config(p)
    assert str(p) in str(info.value)


def test_coefficients_built():
    cfg = parse_config(BASE)
    assert isinstance(cfg.coefficients, fem.CoefficientField)
    assert cfg.coefficients.is_radial()
