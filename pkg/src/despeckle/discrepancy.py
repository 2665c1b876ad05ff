"""Gamma-noise discrepancy functions and the Newton updates of the
regularization parameter ``tau`` (scalar or per-pixel field).

One linearized u-step is affine in ``tau``::

    u_next(tau) = A1 * tau + A2

so the mean residual statistic ``u + f*exp(-u) - log f`` of the predicted
iterate is a smooth convex function of ``tau``.
"""
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .fidelity import EXPONENTIAL, FidelityModel, fidelity_gradient
from .grid import box_mean_filter, divergence, gradient
from .noise import exact_discrepancy, expected_discrepancy

log = logging.getLogger(__name__)

TAU_MIN = 1e-4
TAU_MAX = 1e3
EXP_CLAMP = 700.0
DERIVATIVE_FLOOR = 1e-14
LOCAL_DERIVATIVE_FLOOR = 1e-12


class ExponentClampWarning(RuntimeWarning):
    pass


class BracketError(RuntimeError):
    """No sign change of the discrepancy inside ``[tau_min, tau_max]``."""


@dataclass(frozen=True, eq=False)
class StepCoefficients:
    A1: np.ndarray
    A2: np.ndarray

    def predict(self, tau):
        return self.A1 * tau + self.A2


@dataclass(frozen=True)
class DiscrepancyTarget:
    c_bar: float
    mode: str = "custom"


def discrepancy_target(M=None, mode="auto"):
    """Build the target constant.

    ``mode`` is ``"auto"`` (low-M series for ``M <= 5``, otherwise the
    large-M series), ``"large-m"``, ``"low-m"``, ``"digamma"`` (exact
    expectation) or a number used verbatim.
    """
    if not isinstance(mode, str):
        return DiscrepancyTarget(float(mode), "custom")
    if M is None:
        raise ValueError(f"target mode {mode!r} needs the noise level M")
    if mode == "auto":
        mode = "low-m" if M <= 5 else "large-m"
    if mode in ("large-m", "low-m"):
        return DiscrepancyTarget(expected_discrepancy(M, mode), mode)
    if mode == "digamma":
        return DiscrepancyTarget(exact_discrepancy(M), mode)
    raise ValueError(f"unknown discrepancy target mode {mode!r}")


def _as_model(f):
    return f if isinstance(f, FidelityModel) else FidelityModel(EXPONENTIAL, np.asarray(f, dtype=float))


def _observed(f):
    return f.f if isinstance(f, FidelityModel) else np.asarray(f, dtype=float)


def step_coefficients(state, f, delta, rho):
    """Coefficients of the linearized u-step for the state ``(u, z, b)``.

    ``A1 = -delta * grad D(u)`` and
    ``A2 = u - delta * (rho * div(z - grad u) + div b)``.
    ``f`` is the observed image or a `FidelityModel`.
    """
    u, z, b = state.u, state.z, state.b
    model = _as_model(f)
    A1 = -delta * fidelity_gradient(model, u)
    A2 = u - delta * (rho * divergence(z - gradient(u)) + divergence(b))
    return StepCoefficients(A1, A2)


def _residual(coeffs, f, logf, tau):
    """Per-pixel ``q(x) = x + f e^{-x} - log f`` and ``dq/dtau`` at ``x = A1 tau + A2``."""
    x = coeffs.predict(tau)
    arg = -x
    clamped = bool(np.any(np.abs(arg) > EXP_CLAMP))
    if clamped:
        arg = np.clip(arg, -EXP_CLAMP, EXP_CLAMP)
    fe = f * np.exp(arg)
    return x + fe - logf, coeffs.A1 * (1.0 - fe), clamped


def _global(coeffs, f, logf, tau, c_bar):
    q, dq, clamped = _residual(coeffs, f, logf, tau)
    return float(np.mean(q)) - c_bar, float(np.mean(dq)), clamped


def global_discrepancy(coeffs, f, tau, target):
    f = _observed(f)
    value, _, clamped = _global(coeffs, f, np.log(f), tau, target.c_bar)
    if clamped:
        warnings.warn("exponent clamped while evaluating the discrepancy", ExponentClampWarning)
    return value


def global_discrepancy_derivative(coeffs, f, tau):
    f = _observed(f)
    return _global(coeffs, f, np.log(f), tau, 0.0)[1]


def _bisect(K, tau, tau_min, tau_max, iterations=100):
    """Root of a discrepancy with ``K(tau) > 0``; returns a point with ``K <= 0``."""
    bad = tau
    good = None
    for direction in (2.0, 0.5):
        t = tau
        while good is None:
            t = min(max(t * direction, tau_min), tau_max)
            if K(t) <= 0:
                good = t
            elif t in (tau_min, tau_max):
                break
            else:
                bad = t
        if good is not None:
            break
        bad = tau
    if good is None:
        raise BracketError(f"no sign change of the discrepancy in [{tau_min}, {tau_max}]")
    for _ in range(iterations):
        mid = 0.5 * (bad + good)
        if mid in (bad, good):
            break
        if K(mid) <= 0:
            good = mid
        else:
            bad = mid
    return good


def newton_update_tau(coeffs, f, tau_init, target, Q=3, tau_min=TAU_MIN, tau_max=TAU_MAX):
    """Move ``tau`` toward the zero of the global discrepancy.

    Returns ``tau_init`` untouched when the discrepancy there is already
    nonpositive. Otherwise runs up to ``Q`` Newton steps clamped to
    ``[tau_min, tau_max]``; a step whose residual grows, or whose evaluation
    needed exponent clamping, is halved until it does not. A vanishing
    derivative switches to bracketing plus bisection, which raises
    `BracketError` when no sign change exists in the admissible range.
    """
    if Q < 1:
        raise ValueError("Q must be at least 1")
    f = _observed(f)
    logf = np.log(f)
    c_bar = target.c_bar

    def evaluate(t):
        return _global(coeffs, f, logf, t, c_bar)

    k, dk, _ = evaluate(tau_init)
    if k <= 0:
        return tau_init
    tau = float(tau_init)
    for _ in range(Q):
        if k <= 0:
            break
        if abs(dk) < DERIVATIVE_FLOOR:
            log.debug("discrepancy derivative vanished at tau=%g; bisecting", tau)
            return _bisect(lambda t: evaluate(t)[0], tau, tau_min, tau_max)
        step = k / dk
        for _ in range(60):
            candidate = min(max(tau - step, tau_min), tau_max)
            k_new, dk_new, clamped = evaluate(candidate)
            if abs(k_new) <= abs(k) and not clamped:
                break
            step *= 0.5
        else:
            break
        if candidate == tau:
            break
        tau, k, dk = candidate, k_new, dk_new
    return tau


def local_discrepancy_field(coeffs, f, tau_field, target, r):
    """Windowed mean of the residual statistic minus the target, per pixel.

    ``r=None`` uses the whole image as the window.
    """
    f = _observed(f)
    q, _, clamped = _residual(coeffs, f, np.log(f), tau_field)
    if clamped:
        warnings.warn("exponent clamped while evaluating the discrepancy", ExponentClampWarning)
    return box_mean_filter(q, r) - target.c_bar


def local_newton_update(coeffs, f, tau_field, target, r, Q=3, tau_min=TAU_MIN, tau_max=TAU_MAX):
    """``Q`` decoupled per-pixel Newton sweeps on the local discrepancy.

    Each sweep evaluates the residual with the full current field, filters
    it and its tau-derivative with the box window, and updates only pixels
    whose windowed discrepancy is positive. Pixels with a filtered
    derivative below 1e-12 in magnitude are frozen for that sweep.
    """
    if Q < 1:
        raise ValueError("Q must be at least 1")
    f = _observed(f)
    logf = np.log(f)
    t = np.array(tau_field, dtype=float)
    for _ in range(Q):
        q, dq, _ = _residual(coeffs, f, logf, t)
        excess = box_mean_filter(q, r) - target.c_bar
        slope = box_mean_filter(dq, r)
        active = (excess > 0) & (np.abs(slope) >= LOCAL_DERIVATIVE_FLOOR)
        if not active.any():
            break
        step = np.where(active, excess / np.where(active, slope, 1.0), 0.0)
        t = np.clip(t - step, tau_min, tau_max)
    return t


def smooth_tau(tau_field, r):
    return box_mean_filter(tau_field, r)
