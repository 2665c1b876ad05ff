"""Convex data-fidelity terms for Gamma speckle.

``exp``: sum(u + f*exp(-u)) on the log image.
``div``: sum(u - f*log(u)) (I-divergence) on the intensity image.
"""
from dataclasses import dataclass

import numpy as np

EXPONENTIAL = "exp"
I_DIVERGENCE = "div"
KINDS = (EXPONENTIAL, I_DIVERGENCE)


@dataclass(frozen=True)
class FeasibleBox:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty box [{self.lo}, {self.hi}]")


@dataclass(frozen=True, eq=False)
class FidelityModel:
    kind: str
    f: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown fidelity kind {self.kind!r}")
        if np.any(~(np.asarray(self.f) > 0)):
            raise ValueError("observed image must be strictly positive")

    def default_box(self):
        """``[log min f, log max f]`` for exp, ``[min f, max f]`` for div.

        A constant image yields a degenerate range; it is widened by one unit
        on the upper side so the box stays non-empty.
        """
        lo, hi = float(self.f.min()), float(self.f.max())
        if self.kind == EXPONENTIAL:
            lo, hi = np.log(lo), np.log(hi)
        if hi <= lo:
            hi = lo + 1.0
        return FeasibleBox(float(lo), float(hi))

    def initial_iterate(self):
        return np.log(self.f) if self.kind == EXPONENTIAL else np.array(self.f, dtype=float)

    def to_intensity(self, u):
        return np.exp(u) if self.kind == EXPONENTIAL else np.asarray(u)


def _check_domain(model, u):
    if model.kind == I_DIVERGENCE and np.any(~(u > 0)):
        raise ValueError("I-divergence fidelity requires u > 0")


def fidelity_value(model, u):
    u = np.asarray(u, dtype=float)
    _check_domain(model, u)
    if model.kind == EXPONENTIAL:
        return float(np.sum(u + model.f * np.exp(-u)))
    return float(np.sum(u - model.f * np.log(u)))


def fidelity_gradient(model, u):
    u = np.asarray(u, dtype=float)
    _check_domain(model, u)
    if model.kind == EXPONENTIAL:
        return 1.0 - model.f * np.exp(-u)
    return 1.0 - model.f / u


def hessian_lipschitz_bound(model, box):
    """Lipschitz constant of the fidelity gradient over ``u >= box.lo``.

    The Hessian is diagonal: ``f*exp(-u)`` (exp) or ``f/u**2`` (div), both
    decreasing in ``u``, so the bound is attained at the lower box edge.
    """
    fmax = float(np.max(model.f))
    if model.kind == EXPONENTIAL:
        return fmax * float(np.exp(-box.lo))
    if box.lo <= 0:
        raise ValueError("I-divergence bound needs a positive lower box edge")
    return fmax / box.lo**2


def project_box(u, box):
    return np.clip(u, box.lo, box.hi)
