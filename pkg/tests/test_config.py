import numpy as np
import pytest
from hypothesis import given, strategies as st

from strongld.config import (
    ConfigError,
    ExperimentConfig,
    config_from_preset,
    emit_config,
    load_config,
    parse_config,
    parse_forcing,
    parse_polynomial,
)
from strongld.polyfield import PolyVectorField, TimeCoefficient

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
positive = st.floats(1e-3, 1e3)


@st.composite
def custom_configs(draw):
    d = draw(st.integers(1, 3))
    exps = st.tuples(*[st.integers(0, 3)] * d)
    drift = tuple(
        tuple((draw(finite), e) for e in draw(st.lists(exps, min_size=1, max_size=4, unique=True)))
        for _ in range(d))
    harm = st.tuples(finite, st.sampled_from(["sin", "cos"]), positive)
    forcing = tuple(tuple(draw(st.lists(harm, min_size=0, max_size=2))) for _ in range(d)) \
        if draw(st.booleans()) else ()
    if not any(forcing):
        forcing = ()
    eps = sorted(set(draw(st.lists(st.floats(0, 1), min_size=1, max_size=4))), reverse=True)
    return ExperimentConfig(
        model="custom", dimension=d, drift=drift, forcing=forcing,
        x0=tuple(draw(st.lists(finite, min_size=d, max_size=d))),
        t0=0.0, t1=draw(positive), steps=draw(st.integers(1, 10_000)),
        epsilons=tuple(eps), n_paths=draw(st.integers(2, 10**6)),
        master_seed=draw(st.integers(0, 2**64 - 1)), lambda_offset=draw(finite),
        conditional_check=draw(st.booleans()), tag=draw(st.sampled_from(["", "run-1", "Fig.3"])),
    ).validate()


@given(cfg=custom_configs())
def test_round_trip(cfg):
    assert parse_config(emit_config(cfg)) == cfg


@given(A=finite, omega=positive, x0=finite)
def test_round_trip_builtin(A, omega, x0):
    cfg = ExperimentConfig(model="double_well", A=A, omega=omega, x0=(x0,), c=-0.5)
    assert parse_config(emit_config(cfg)) == cfg


def test_round_trip_preset_with_noise():
    cfg = config_from_preset("Fig.53")
    assert cfg.D == 1e-3 and cfg.wiener == "generate" and cfg.wiener_seed == 52
    assert parse_config(emit_config(cfg)) == cfg


def test_polynomial_syntax():
    terms = parse_polynomial("-x1^3 + 2*x1*x2 - 0.5e-1 * x2 + 3 + x1^3", 2)
    assert dict((e, c) for c, e in terms) == {(3, 0): 0.0, (1, 1): 2.0, (0, 1): -0.05, (0, 0): 3.0}
    assert parse_polynomial("x2", 2) == [(1.0, (0, 1))]
    for bad in ("x3", "2*y", "1 2", "*x1"):
        with pytest.raises(ConfigError):
            parse_polynomial(bad, 2)


def test_forcing_syntax():
    assert parse_forcing("0.3*sin(5*t) - cos(2.0*t)") == [(0.3, "sin", 5.0), (-1.0, "cos", 2.0)]
    with pytest.raises(ConfigError):
        parse_forcing("0.3*tan(5*t)")


def test_custom_field():
    text = """
[model]
kind = custom
dimension = 2
x0 = 0.1, 0.2
drift_1 = -1.0*x1 + 0.5*x2
drift_2 = -2.0*x2 + 0.3*x1^2 + 0.1
forcing_2 = 0.1*cos(2.0*t)  ; component 1 unforced
"""
    cfg = parse_config(text)
    assert cfg.forcing[0] == ()
    f = cfg.field()
    ref = PolyVectorField(2, [
        {(1, 0): -1.0, (0, 1): 0.5},
        {(0, 1): -2.0, (2, 0): 0.3, (0, 0): TimeCoefficient.forcing(B=0.1, theta=2.0, constant=0.1)},
    ])
    x = np.array([0.4, -0.7])
    np.testing.assert_allclose(f(x, 0.3), ref(x, 0.3), rtol=1e-15)


@pytest.mark.parametrize("text,msg", [
    ("[model]\nkind = quartic\n", "model must be"),
    ("[model]\nbogus = 1\n", "unknown key"),
    ("[extra]\n", "unknown section"),
    ("[grid]\nt1 = -1\n", "t1 > t0"),
    ("[noise]\nD = 0.1\n", "wiener source"),
    ("[noise]\nD = 0.1\nwiener = load\nwiener_file = /nonexistent/w.csv\n", "not found"),
    ("[mc]\nepsilons = 1e-3, 1e-2\n", "strictly decreasing"),
    ("[mc]\nn_paths = 1\n", "n_paths"),
    ("[model]\nkind = custom\ndimension = 2\nx0 = 0, 0\ndrift_1 = x1\n", "drift_1..drift_2"),
    ("[model]\na = abc\n", "bad value"),
])
def test_invalid_configs(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")
    p = tmp_path / "ok.ini"
    p.write_text(emit_config(ExperimentConfig(A=0.3, omega=5.0)))
    assert load_config(p).A == 0.3


def test_diffusion_uses_intensity():
    cfg = config_from_preset("Fig.56")
    C = cfg.diffusion()
    assert C([0.0])[0, 0] == pytest.approx(0.1)


def test_preset_overrides():
    cfg = config_from_preset("Fig.3", steps=50, master_seed=7)
    assert cfg.steps == 50 and cfg.master_seed == 7 and cfg.A == 0.3
    with pytest.raises(KeyError):
        config_from_preset("Fig.99")
