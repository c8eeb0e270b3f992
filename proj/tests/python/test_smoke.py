import math
import pathlib

import numpy as np
import pytest

import selmut

ROOT = pathlib.Path(__file__).resolve().parents[2]


def gaussian_state(grid, center=0.3, sd=0.2):
    x = grid.nodes()
    return np.exp(-0.5 * ((x - center) / sd) ** 2)


def test_grid_quadrature():
    g = selmut.Grid(-1.0, 1.0, 201)
    assert g.spacing == pytest.approx(0.01)
    assert g.integrate(np.ones(201)) == pytest.approx(2.0, abs=1e-14)
    assert g.weights()[0] == pytest.approx(0.005)


def test_nm_run_stays_below_rho_M():
    g = selmut.Grid(-2.0, 2.0, 128)
    model = selmut.Model.nm(g, 0.05, selmut.Profile.gaussian(1.0), selmut.Profile.normal(1.0))
    n0 = gaussian_state(g)
    cert = selmut.validate(model, n0)
    out = selmut.integrate(model, n0, 0.5)
    assert out["complete"]
    assert out["states"].shape[1] == 128
    assert out["rho"].max() <= cert["rho_M"] + 1e-6
    assert np.all(out["states"] >= 0.0)


def test_logistic_closed_form():
    # constant kernels reduce rho to rho' = rho (1 - rho) / eps
    g = selmut.Grid(-1.0, 1.0, 64)
    eps = 0.5
    model = selmut.Model.nm(g, eps, selmut.Profile.constant(1.0), selmut.Profile.normal(1.0), method="direct")
    n0 = np.full(64, 0.1)
    rho0 = g.integrate(n0)
    out = selmut.integrate(model, n0, 1.0, scheme="explicit-rk4", rel_tol=1e-10)
    t, rho = out["t"], out["rho"]
    # the normal mutation kernel loses a little mass at the walls; compare loosely
    exact = rho0 * np.exp(t / eps) / (1.0 + rho0 * np.expm1(t / eps) / 1.0)
    assert np.max(np.abs(rho - exact) / exact) < 0.1


def test_dirac_two_point_closed_form():
    k0 = selmut.Profile.gaussian(1.0 / math.sqrt(2.0))
    d = 1.0
    sys = selmut.solve_dirac(k0, [0.0, d], 1.0)
    assert sys["verdict"] == "feasible"
    assert sys["P"][0] == pytest.approx(1.0 / (1.0 + math.exp(-d * d)), abs=1e-12)
    audit = selmut.Grid(-3.0, 4.0, 701)
    v = selmut.esd_check(k0, [0.0, d], 1.0, audit)
    assert not v["esd"]
    assert v["witness"] > 0.0
    assert selmut.esd_check(k0, [0.5], 1.0, audit)["esd"]


def test_hopf_cole_round_trip_and_laplace():
    g = selmut.Grid(-1.0, 1.0, 101)
    n = gaussian_state(g, 0.0, 0.3)
    u = selmut.hopf_cole(g, n, 0.1)
    assert np.allclose(selmut.inverse_hopf_cole(g, u, 0.1), n, rtol=1e-13)
    assert selmut.laplace_transform(selmut.Profile.normal(1.0), 0.7) == pytest.approx(math.exp(0.245), rel=1e-12)
    m, y = selmut.m_xA(0.0, 1.0)
    assert 1.0 < m <= 2.5


def test_replicator_lyapunov_increases():
    g = selmut.Grid(-1.0, 1.0, 81)
    rep = selmut.Replicator(g, selmut.Profile.gaussian(0.5), lambda y: y * y, 0.0)
    q0 = gaussian_state(g, 0.05, 0.05)
    res = rep.run_to_stability(q0, t_end=50.0)
    assert res["monotone"]
    assert np.all(np.diff(res["J"]) >= -1e-10)


def test_config_errors_are_typed():
    with pytest.raises(selmut.UsageError, match="model.k0"):
        selmut.load_config(str(ROOT / "tests" / "data" / "missing_kernel.json"))
    assert issubclass(selmut.UsageError, selmut.Error)
    with pytest.raises(selmut.DomainError):
        selmut.m_xA(0.0, -1.0)


def test_run_experiment_report():
    report, code = selmut.run_experiment(ROOT / "tests" / "data" / "small_nm.json")
    assert code == 0
    assert report["complete"]
    assert [r["eps"] for r in report["runs"]] == [0.1, 0.05, 0.025]
