from dataclasses import replace

import numpy as np
import pytest

from despeckle.fidelity import EXPONENTIAL, I_DIVERGENCE, FeasibleBox, FidelityModel
from despeckle.noise import psnr
from despeckle.solvers import (
    CONVERGED,
    NOT_CONVERGED,
    SolverConfig,
    SolverDivergedError,
    SolverState,
    dp_ladm_run,
    initial_state,
    kkt_residuals,
    ldp_ladm_run,
    lyapunov,
    plad_iterate,
    plad_run,
    relative_error,
    run,
    step_bound,
)


def test_resolved_defaults():
    p = SolverConfig(solver="plad", M=8).resolved()
    assert (p.rho, p.delta0, p.lam) == (0.3, 0.4, 3 / 8)
    assert SolverConfig(solver="plad", M=4).resolved().lam == 0.5
    d = SolverConfig(solver="plad", model="div", M=8).resolved()
    assert (d.rho, d.delta0) == (0.01, 8.0)
    q = SolverConfig(M=8).resolved()
    assert (q.rho, q.delta0, q.normalization) == (0.75, 0.16, "tau")


@pytest.mark.parametrize(
    "kw",
    [
        dict(solver="admm", M=8),
        dict(model="l2", M=8),
        dict(solver="plad"),
        dict(solver="dp-ladm", model="div", M=8),
        dict(M=8, rho=0),
        dict(M=8, tol=-1),
        dict(M=8, max_iter=0),
        dict(M=8, newton_every=0),
        dict(M=8, window=4),
        dict(M=-1),
        dict(solver="plad", M=8, lam=-1.0),
        dict(solver="plad", M=8, normalization="sigma"),
        dict(M=None),
    ],
)
def test_resolved_rejects(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw).resolved()


def test_relative_error():
    u = np.zeros((3, 3))
    assert relative_error(u, u) == 0.0
    assert relative_error(np.full((3, 3), np.log(2)), u) == pytest.approx(1.0)
    assert relative_error(np.full((3, 3), 3.0), np.full((3, 3), 2.0), I_DIVERGENCE) == pytest.approx(0.5)
    with pytest.raises(ZeroDivisionError):
        relative_error(u, u, I_DIVERGENCE)


def test_step_bound():
    model = FidelityModel(EXPONENTIAL, np.array([[2.0, 8.0]]))
    assert step_bound(model, FeasibleBox(np.log(2), 3), rho=0.5, tau_bar=2.0) == pytest.approx(1 / (8 + 4))
    with pytest.raises(ValueError):
        step_bound(model, FeasibleBox(0, 1), 0.5, 0.0)


def test_first_sweep_is_noop(speckled):
    _, f = speckled
    model = FidelityModel(EXPONENTIAL, f)
    s0 = initial_state(model)
    s1 = plad_iterate(s0, f, lam=0.3, rho=0.3, delta=0.4)
    np.testing.assert_array_equal(s1.u, s0.u)
    assert s1.k == 1


@pytest.mark.parametrize("model", [EXPONENTIAL, I_DIVERGENCE])
def test_plad_denoises(speckled, model):
    clean, f = speckled
    res = plad_run(f, SolverConfig(model=model, M=8), reference=clean)
    assert res.trace.status == CONVERGED
    assert psnr(res.image, clean) > psnr(f, clean) + 5
    psnrs = res.trace.column("psnr")
    assert psnrs[-1] == pytest.approx(float(psnr(res.image, clean)))


def test_plad_reaches_kkt_point(speckled):
    _, f = speckled
    lam = 0.4
    cfg = SolverConfig(M=8, lam=lam, tol=1e-15, max_iter=1000, project=False)
    early = plad_run(f, cfg)
    late = plad_run(f, cfg, state=early.state)
    k1 = kkt_residuals(early.state, f, tau=1.0, tv_weight=lam)
    k2 = kkt_residuals(late.state, f, tau=1.0, tv_weight=lam)
    # ADMM residuals decay sublinearly; halving the gap at least is a safe margin
    assert k2.primal < 0.5 * k1.primal and k2.primal < 2e-3
    assert k2.stationarity < 0.5 * k1.stationarity and k2.stationarity < 1e-4
    assert k1.z_optimal and k2.z_optimal


def test_kkt_flags_non_optimal_state(speckled):
    _, f = speckled
    s = initial_state(FidelityModel(EXPONENTIAL, f))
    s.b = np.full_like(s.b, 5.0)
    assert not kkt_residuals(s, f, tau=1.0).z_optimal


def test_normalizations_coincide(speckled):
    """lambda form with (delta*tau, rho/tau) reproduces the tau form."""
    _, f = speckled
    tau = 2.5
    base = SolverConfig(solver="plad", M=8, lam=1 / tau, tol=1e-12, max_iter=60)
    t_form = run(f, replace(base, normalization="tau", rho=0.3, delta0=0.1))
    l_form = run(f, replace(base, normalization="lambda", rho=0.3 / tau, delta0=0.1 * tau))
    np.testing.assert_allclose(l_form.state.u, t_form.state.u, atol=1e-10)
    np.testing.assert_allclose(l_form.state.b, t_form.state.b / tau, atol=1e-10)
    assert t_form.trace.normalization == "tau"


def test_dp_ladm_fixed_tau_is_plad_bitwise(speckled):
    _, f = speckled
    dp = dp_ladm_run(f, SolverConfig(M=8, tau0=4.0, newton_every=None, max_iter=40, tol=1e-15))
    pl = plad_run(f, SolverConfig(M=8, lam=0.25, normalization="tau", rho=0.75, delta0=0.16, max_iter=40, tol=1e-15))
    np.testing.assert_array_equal(dp.state.u, pl.state.u)
    np.testing.assert_array_equal(dp.state.b, pl.state.b)


def test_dp_ladm_moves_tau_and_records_trace(speckled, tmp_path):
    clean, f = speckled
    res = dp_ladm_run(f, SolverConfig(M=8), reference=clean)
    taus = res.trace.column("tau")
    assert taus[0] == 0.1 and res.tau > 0.1
    assert np.all(np.diff(taus) >= 0)  # the gated update only raises tau here
    assert res.trace.step_within_bound in (True, False)
    path = tmp_path / "trace.csv"
    res.trace.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,tau,rel_err,psnr,discrepancy,delta"
    assert len(lines) == res.trace.iterations + 1
    assert abs(res.trace.column("discrepancy")[-1]) < 0.05


def test_ldp_ladm_runs_and_whole_window_matches_dp(speckled):
    clean, f = speckled
    cfg = SolverConfig(M=8, max_iter=60, tol=1e-12)
    dp = dp_ladm_run(f, cfg)
    ldp = ldp_ladm_run(f, replace(cfg, window=None))
    np.testing.assert_allclose(ldp.trace.column("tau"), dp.trace.column("tau"), atol=1e-10)
    local = ldp_ladm_run(f, replace(cfg, window=9), reference=clean)
    assert local.tau.shape == f.shape and local.tau.min() > 0


def test_callback_and_state_resume(speckled):
    _, f = speckled
    seen = []
    cfg = SolverConfig(solver="plad", M=8, max_iter=5, tol=1e-15)
    first = run(f, cfg, callback=lambda a, b: seen.append((a.k, b.k)))
    assert seen == [(i, i + 1) for i in range(5)]
    resumed = run(f, cfg, state=first.state)
    full = run(f, replace(cfg, max_iter=10))
    np.testing.assert_array_equal(resumed.state.u, full.state.u)


def test_max_iter_status(speckled):
    _, f = speckled
    res = run(f, SolverConfig(M=8, max_iter=3))
    assert res.trace.status == NOT_CONVERGED and res.trace.iterations == 3


def test_divergence_detected(speckled):
    _, f = speckled
    with np.errstate(all="ignore"), pytest.raises(SolverDivergedError):
        run(f, SolverConfig(solver="plad", M=8, delta0=1e4, project=False, max_iter=50))


def test_lyapunov_zero_at_reference(speckled):
    _, f = speckled
    s = initial_state(FidelityModel(EXPONENTIAL, f))
    assert lyapunov(s, s.copy(), 0.1, 0.5) == 0.0
    other = SolverState(s.u + 1, s.z, s.b)
    assert lyapunov(other, s, 0.1, 0.5) == pytest.approx(f.size / 0.1)
