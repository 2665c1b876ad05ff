"""Linearized alternating-direction solvers for TV speckle removal.

All three solvers share one sweep::

    u+ = P_U(A1 * tau + A2)                 (linearized u-step)
    z+ = shrink(grad u+ - b / rho, w / rho)  (w: TV weight)
    b+ = b + rho * (z+ - grad u+)

PLAD keeps ``tau`` fixed; DP-LADM re-solves a global discrepancy equation for
scalar ``tau`` every few sweeps; LDP-LADM does the same per pixel with a
windowed discrepancy and a smoothed ``tau`` field.

Two normalizations of the objective are supported. ``"tau"`` weights the
fidelity by ``tau`` and the TV term by 1; ``"lambda"`` weights the fidelity by
1 and TV by ``lam``. With ``lam = 1/tau`` they give the same minimizer, and
their iterations coincide under ``delta_lam = delta * tau``,
``rho_lam = rho / tau`` and ``b_lam = b / tau``.
"""
import csv
import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Union

import numpy as np

from . import discrepancy as dsc
from .fidelity import (
    EXPONENTIAL,
    I_DIVERGENCE,
    FidelityModel,
    fidelity_gradient,
    hessian_lipschitz_bound,
    project_box,
)
from .grid import LAPLACIAN_NORM_BOUND, divergence, gradient, pixel_norm, shrink
from .noise import psnr

log = logging.getLogger(__name__)

PLAD = "plad"
DP_LADM = "dp-ladm"
LDP_LADM = "ldp-ladm"
SOLVERS = (PLAD, DP_LADM, LDP_LADM)

CONVERGED = "converged"
NOT_CONVERGED = "not converged"


class SolverDivergedError(FloatingPointError):
    pass


@dataclass
class SolverState:
    u: np.ndarray
    z: np.ndarray
    b: np.ndarray
    tau: Union[float, np.ndarray] = 1.0
    delta: float = 0.0
    k: int = 0

    def copy(self):
        tau = self.tau.copy() if isinstance(self.tau, np.ndarray) else self.tau
        return replace(self, u=self.u.copy(), z=self.z.copy(), b=self.b.copy(), tau=tau)


@dataclass
class SolverConfig:
    """Tunables for all solvers.

    ``None`` for ``rho``, ``delta0`` or ``lam`` picks the per-solver default:
    PLAD uses rho=0.3, delta=0.4 (exp) or rho=0.01, delta=8.0 (div) and
    lam=2/M for M <= 5, 3/M otherwise; DP-LADM and LDP-LADM use rho=0.75,
    delta0=0.16. ``newton_every=None`` disables the tau update and
    ``window=None`` makes the local window the whole image.
    """

    model: str = EXPONENTIAL
    solver: str = DP_LADM
    M: Optional[float] = None
    rho: Optional[float] = None
    delta0: Optional[float] = None
    tau0: float = 0.1
    lam: Optional[float] = None
    tol: float = 3e-4
    max_iter: int = 500
    newton_every: Optional[int] = 3
    newton_iters: int = 3
    window: Optional[int] = 17
    cbar: Union[str, float] = "auto"
    variable_step: bool = True
    project: bool = True
    strict: bool = False
    strict_fraction: float = 0.9
    eps0: float = 1e-3
    normalization: str = "lambda"
    tau_min: float = dsc.TAU_MIN
    tau_max: float = dsc.TAU_MAX

    def resolved(self):
        """Copy with solver defaults filled in; raises ValueError if invalid."""
        cfg = replace(self)
        if cfg.solver not in SOLVERS:
            raise ValueError(f"unknown solver {cfg.solver!r}")
        if cfg.model not in (EXPONENTIAL, I_DIVERGENCE):
            raise ValueError(f"unknown model {cfg.model!r}")
        if cfg.solver == PLAD:
            exp = cfg.model == EXPONENTIAL
            if cfg.rho is None:
                cfg.rho = 0.3 if exp else 0.01
            if cfg.delta0 is None:
                cfg.delta0 = 0.4 if exp else 8.0
            if cfg.lam is None:
                if cfg.M is None:
                    raise ValueError("PLAD needs lam or the noise level M")
                cfg.lam = (2.0 if cfg.M <= 5 else 3.0) / cfg.M
            if cfg.normalization not in ("lambda", "tau"):
                raise ValueError(f"unknown normalization {cfg.normalization!r}")
        else:
            if cfg.model != EXPONENTIAL:
                raise ValueError("discrepancy-driven solvers support the exponential model only")
            if cfg.rho is None:
                cfg.rho = 0.75
            if cfg.delta0 is None:
                cfg.delta0 = 0.16
            if cfg.M is None and (isinstance(cfg.cbar, str) and cfg.newton_every is not None):
                raise ValueError("the discrepancy target needs the noise level M")
            cfg.normalization = "tau"
        for name in ("rho", "delta0", "tau0", "tol", "strict_fraction", "eps0"):
            if not getattr(cfg, name) > 0:
                raise ValueError(f"{name} must be positive")
        if cfg.lam is not None and not cfg.lam > 0:
            raise ValueError("lam must be positive")
        if cfg.max_iter < 1 or cfg.newton_iters < 1:
            raise ValueError("max_iter and newton_iters must be positive")
        if cfg.newton_every is not None and cfg.newton_every < 1:
            raise ValueError("newton_every must be positive or None")
        if cfg.window is not None and (cfg.window < 1 or cfg.window % 2 == 0):
            raise ValueError("window must be a positive odd integer or None")
        if cfg.M is not None and not cfg.M > 0:
            raise ValueError("M must be positive")
        return cfg


@dataclass
class TraceRecord:
    k: int
    tau: float
    rel_err: float
    psnr: float
    discrepancy: float
    delta: float


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    status: str = NOT_CONVERGED
    normalization: str = "tau"
    step_within_bound: Optional[bool] = None
    tau_hit_max: bool = False

    COLUMNS = ("k", "tau", "rel_err", "psnr", "discrepancy", "delta")

    @property
    def iterations(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.COLUMNS)
            for rec in self.records:
                writer.writerow([rec.k] + [repr(float(getattr(rec, c))) for c in self.COLUMNS[1:]])


class RunResult(NamedTuple):
    image: np.ndarray
    tau: Union[float, np.ndarray]
    trace: RunTrace
    state: SolverState


def relative_error(u_next, u_prev, model=EXPONENTIAL):
    """Relative change of the intensity image between two iterates."""
    if model == EXPONENTIAL:
        a, b = np.exp(u_next), np.exp(u_prev)
    else:
        a, b = np.asarray(u_next), np.asarray(u_prev)
    denom = np.linalg.norm(b)
    if denom == 0:
        raise ZeroDivisionError("previous iterate has zero norm")
    return float(np.linalg.norm(a - b) / denom)


def step_bound(model, box, rho, tau_bar):
    """Largest step keeping the linearized scheme contractive:
    ``1 / (tau_bar * L_D + rho * 8)``, with 8 bounding the Laplacian norm."""
    if not tau_bar > 0:
        raise ValueError("tau_bar must be positive")
    return 1.0 / (tau_bar * hessian_lipschitz_bound(model, box) + rho * LAPLACIAN_NORM_BOUND)


def initial_state(model, tau=1.0, delta=0.0):
    u = model.initial_iterate()
    return SolverState(u=u, z=gradient(u), b=np.zeros((2,) + u.shape), tau=tau, delta=delta)


def _sweep(state, model, tau, tv_weight, rho, delta, box):
    coeffs = dsc.step_coefficients(state, model, delta, rho)
    u = coeffs.predict(tau)
    if box is not None:
        u = project_box(u, box)
    gu = gradient(u)
    z = shrink(gu - state.b / rho, tv_weight / rho)
    b = state.b + rho * (z - gu)
    return SolverState(u=u, z=z, b=b, tau=state.tau, delta=delta, k=state.k + 1)


def plad_iterate(state, f, lam, rho, delta, model=EXPONENTIAL, project=False, box=None):
    """One PLAD sweep on ``D(u) + lam * TV(u)``; ``f`` is the observed image."""
    fm = f if isinstance(f, FidelityModel) else FidelityModel(model, np.asarray(f, dtype=float))
    if project and box is None:
        box = fm.default_box()
    out = _sweep(state, fm, 1.0, lam, rho, delta, box if project else None)
    _check_finite(out)
    return out


def lyapunov(state, ref, delta, rho):
    """``(1/delta)|u-u*|^2 - rho|grad(u-u*)|^2 + rho|z-z*|^2 + (1/rho)|b-b*|^2``."""
    du = state.u - ref.u
    return float(
        np.sum(du**2) / delta
        - rho * np.sum(gradient(du) ** 2)
        + rho * np.sum((state.z - ref.z) ** 2)
        + np.sum((state.b - ref.b) ** 2) / rho
    )


class KKTResiduals(NamedTuple):
    primal: float
    stationarity: float
    z_optimal: bool


def kkt_residuals(state, f, tau=None, tv_weight=1.0, model=EXPONENTIAL):
    """First-order optimality residuals of ``tau*D(u) + tv_weight*|z|_1, grad u = z``.

    ``primal = |grad u - z|``, ``stationarity = |tau grad D(u) + div b|``, and
    ``z_optimal`` checks ``-b`` is a subgradient of ``tv_weight*|z|``
    (``|b| <= tv_weight`` everywhere, ``b = -tv_weight z/|z|`` where ``z != 0``).
    """
    fm = f if isinstance(f, FidelityModel) else FidelityModel(model, np.asarray(f, dtype=float))
    tau = state.tau if tau is None else tau
    primal = float(np.linalg.norm(gradient(state.u) - state.z))
    stationarity = float(np.linalg.norm(tau * fidelity_gradient(fm, state.u) + divergence(state.b)))
    bn = pixel_norm(state.b)
    zn = pixel_norm(state.z)
    ok = bool(np.all(bn <= tv_weight * (1 + 1e-8)))
    nz = zn > 0
    if nz.any():
        target = -tv_weight * state.z[:, nz] / zn[nz]
        ok = ok and bool(np.all(np.abs(state.b[:, nz] - target) <= 1e-6))
    return KKTResiduals(primal, stationarity, ok)


def _check_finite(state):
    for name in ("u", "z", "b"):
        arr = getattr(state, name)
        if not np.all(np.isfinite(arr)):
            raise SolverDivergedError(f"non-finite {name} after sweep {state.k}")


def _tau_rep(tau):
    return float(np.max(tau)) if isinstance(tau, np.ndarray) else float(tau)


class _Schedule:
    """Step-size rule: fixed, the ``delta0 / (0.4 tau)`` heuristic, or strict."""

    def __init__(self, cfg, model, box, fidelity_weight):
        self.cfg = cfg
        self.model = model
        self.box = box
        self.weight = fidelity_weight

    def bound(self, tau):
        return step_bound(self.model, self.box, self.cfg.rho, self.weight(tau))

    def initial(self, tau):
        if self.cfg.strict:
            return self.strict(tau)
        return self.cfg.delta0

    def strict(self, tau):
        lip = hessian_lipschitz_bound(self.model, self.box)
        denom = self.weight(tau) * lip + self.cfg.rho * LAPLACIAN_NORM_BOUND + self.cfg.eps0
        return self.cfg.strict_fraction / denom

    def after_update(self, tau, delta):
        if self.cfg.strict:
            return self.strict(tau)
        if self.cfg.variable_step:
            return self.cfg.delta0 / (0.4 * _tau_rep(tau))
        return delta


def _run(f, cfg, reference=None, state=None, callback=None):
    cfg = cfg.resolved()
    model = FidelityModel(cfg.model, np.asarray(f, dtype=float))
    box = model.default_box()
    proj_box = box if cfg.project else None
    logf = np.log(model.f) if cfg.model == EXPONENTIAL else None
    target = None
    if cfg.solver != PLAD and cfg.newton_every is not None:
        target = dsc.discrepancy_target(cfg.M, cfg.cbar)
    elif cfg.M is not None or not isinstance(cfg.cbar, str):
        target = dsc.discrepancy_target(cfg.M, cfg.cbar)

    if cfg.solver == PLAD:
        if cfg.normalization == "lambda":
            tau, tv_weight = 1.0, cfg.lam
        else:
            tau, tv_weight = 1.0 / cfg.lam, 1.0
        update_tau = False
    else:
        tau = cfg.tau0
        if cfg.solver == LDP_LADM:
            tau = np.full(model.f.shape, float(cfg.tau0))
        tv_weight = 1.0
        update_tau = cfg.newton_every is not None

    schedule = _Schedule(cfg, model, box, _tau_rep)
    if state is None:
        state = initial_state(model, tau=tau, delta=schedule.initial(tau))
    else:
        state = state.copy()
        tau = state.tau
    trace = RunTrace(normalization=cfg.normalization)
    within = True

    for k in range(cfg.max_iter):
        delta = state.delta
        if update_tau and (k + 1) % cfg.newton_every == 0:
            coeffs = dsc.step_coefficients(state, model, delta, cfg.rho)
            if cfg.solver == DP_LADM:
                try:
                    new_tau = dsc.newton_update_tau(
                        coeffs, model.f, tau, target, cfg.newton_iters, cfg.tau_min, cfg.tau_max
                    )
                except dsc.BracketError as exc:
                    log.warning("sweep %d: tau kept at %g (%s)", k, tau, exc)
                    new_tau = tau
                changed = new_tau != tau
            else:
                sweeps = dsc.local_newton_update(
                    coeffs, model.f, tau, target, cfg.window, cfg.newton_iters, cfg.tau_min, cfg.tau_max
                )
                # smoothing alone must not trigger a step change
                changed = not np.array_equal(sweeps, tau)
                new_tau = dsc.smooth_tau(sweeps, cfg.window)
            tau = new_tau
            if changed:
                delta = schedule.after_update(tau, delta)
                trace.tau_hit_max |= _tau_rep(tau) >= cfg.tau_max
        state.tau = tau
        within = within and delta <= schedule.bound(tau)
        new = _sweep(state, model, tau, tv_weight, cfg.rho, delta, proj_box)
        _check_finite(new)
        rel = relative_error(new.u, state.u, cfg.model)
        out = np.clip(model.to_intensity(new.u), 0.0, 255.0)
        if logf is not None and target is not None:
            disc = float(np.mean(new.u + model.f * np.exp(-new.u) - logf)) - target.c_bar
        else:
            disc = float("nan")
        trace.records.append(
            TraceRecord(
                k=k,
                tau=float(np.mean(tau)),
                rel_err=rel,
                psnr=float(psnr(out, reference)) if reference is not None else float("nan"),
                discrepancy=disc,
                delta=float(delta),
            )
        )
        if callback is not None:
            callback(state, new)
        state = new
        # the first sweep from u0 = log f, z0 = grad u0, b0 = 0 leaves u unchanged
        if k > 0 and rel < cfg.tol:
            trace.status = CONVERGED
            break
    trace.step_within_bound = within
    if trace.status != CONVERGED:
        log.info("%s stopped at max_iter=%d without meeting tol=%g", cfg.solver, cfg.max_iter, cfg.tol)
    image = np.clip(model.to_intensity(state.u), 0.0, 255.0)
    return RunResult(image, tau, trace, state)


def plad_run(f, cfg, reference=None, **kw):
    return _run(f, replace(cfg, solver=PLAD), reference, **kw)


def dp_ladm_run(f, cfg, reference=None, **kw):
    return _run(f, replace(cfg, solver=DP_LADM), reference, **kw)


def ldp_ladm_run(f, cfg, reference=None, **kw):
    return _run(f, replace(cfg, solver=LDP_LADM), reference, **kw)


def run(f, cfg, reference=None, **kw):
    return _run(f, cfg, reference, **kw)

