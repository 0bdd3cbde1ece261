"""Potential, bump data, grid sizing and config parsing."""
from __future__ import annotations

import math

import numpy as np
import pytest

from strauss_lab.model import (ConfigError, ModelParams, RunConfig, bump,
                               bump_integral, build_grid, initial_data,
                               load_config, parse_config_text, potential,
                               sphere_area)


def test_potential_values_and_decay():
    r = np.array([0.0, 1.0, 3.0])
    V = potential(r, mu=2.0, beta=2.0)
    assert V == pytest.approx([2.0, 0.5, 0.125], abs=1e-15)
    assert np.all(np.diff(potential(np.linspace(0, 10, 50), 1.0, 2.5)) < 0)
    assert np.all(potential(r, 0.0, 2.0) == 0.0)


def test_sphere_area_closed_forms():
    assert sphere_area(2) == pytest.approx(2.0 * math.pi, abs=1e-14)
    assert sphere_area(3) == pytest.approx(4.0 * math.pi, abs=1e-14)
    assert sphere_area(4) == pytest.approx(2.0 * math.pi**2, abs=1e-13)


def test_bump_shape_and_support():
    r = np.linspace(0.0, 2.0, 201)
    b = bump(r, k=4, amp=3.0)
    assert b[0] == pytest.approx(3.0)
    assert np.all(b[r >= 1.0] == 0.0)
    assert np.all(b[r < 1.0] >= 0.0)
    # value check at r = 0.5
    assert b[np.argmin(np.abs(r - 0.5))] == pytest.approx(3.0 * 0.75**4, rel=1e-12)


def test_bump_integral_matches_quadrature():
    n, k, amp = 3, 4, 2.5
    r = np.linspace(0.0, 1.0, 20001)
    quad = sphere_area(n) * np.trapezoid(bump(r, k, amp) * r ** (n - 1), r)
    assert bump_integral(n, k, amp) == pytest.approx(float(quad), rel=1e-8)


def test_initial_data_scaling():
    params = ModelParams(eps=0.25, f_amp=2.0, g_amp=4.0, data_k=4)
    r = np.linspace(0.0, 1.5, 31)
    u0, v0 = initial_data(params, r)
    assert u0[0] == pytest.approx(0.25 * 2.0)
    assert v0[0] == pytest.approx(0.25 * 4.0)
    np.testing.assert_allclose(v0, 2.0 * u0, atol=1e-15)


@pytest.mark.parametrize("kwargs", [
    dict(n=1), dict(n=2.5), dict(mu=-0.1), dict(beta=0.0), dict(p=1.0),
    dict(nonlinearity="cubic"), dict(eps=0.0), dict(data_k=2),
    dict(f_amp=-1.0),
])
def test_model_params_validation(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_theorem_regime_flag():
    assert ModelParams(beta=3.0, f_amp=1.0).theorem_regime
    assert not ModelParams(beta=1.5, f_amp=1.0).theorem_regime
    assert not ModelParams(beta=3.0, f_amp=0.0, g_amp=0.0).theorem_regime


def test_build_grid_contract():
    g = build_grid(t_max=10.0, dr=0.02, cfl=0.5)
    assert g.dt == pytest.approx(0.01)
    assert g.r[0] == 0.0
    assert g.r_max >= 10.0 + 1.0 + 2.0 * 0.02 - 1e-12
    assert np.allclose(np.diff(g.r), 0.02)
    assert g.n_steps == 1000
    with pytest.raises(ValueError):
        build_grid(10.0, 0.02, cfl=1.5)
    with pytest.raises(ValueError):
        build_grid(-1.0, 0.02)


def test_parse_config_text_roundtrip():
    cfg = parse_config_text("""
        # comment line
        n = 4
        p = 2.5          # trailing comment
        nonlinearity = power_ut
        t_max = 30.0
        refine_levels = 3
    """)
    assert cfg.n == 4 and cfg.p == 2.5
    assert cfg.nonlinearity == "power_ut"
    assert cfg.t_max == 30.0 and cfg.refine_levels == 3
    # untouched keys keep defaults
    assert cfg.dr == RunConfig().dr


def test_parse_config_errors():
    with pytest.raises(ConfigError):
        parse_config_text("unknown_key = 1")
    with pytest.raises(ConfigError):
        parse_config_text("p = banana")
    with pytest.raises(ConfigError):
        parse_config_text("just a line without equals")
    with pytest.raises(ConfigError):
        parse_config_text("nonlinearity = cubic")


def test_load_config_and_base_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("mu = 0.0\nbeta = 2.5\n", encoding="utf-8")
    cfg = load_config(str(path))
    assert cfg.mu == 0.0 and cfg.beta == 2.5
    base = RunConfig(n=5)
    cfg2 = load_config(str(path), base=base)
    assert cfg2.n == 5 and cfg2.mu == 0.0


def test_run_config_builders():
    cfg = RunConfig(n=3, p=2.0, t_max=4.0, dr=0.1, cfl=0.4)
    params = cfg.model_params()
    assert params.n == 3 and params.p == 2.0
    grid = cfg.grid()
    assert grid.dt == pytest.approx(0.04)
    assert grid.t_max == 4.0
