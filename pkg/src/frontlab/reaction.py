"""Monostable reactions with an optional nonlocal competition factor.

The reaction acting on a field u in the tube [0, theta] is

    F(u)(x) = alpha f(u(x))
              + (1 - alpha) (beta / theta^k) u(x) (theta - (a- * u)(x))^k

where f is a local Fisher or KPP nonlinearity normalized so that
f(r)/r -> beta as r -> 0+, and a- is a competition kernel.  The associated
competition mapping is G(u) = beta - F(u)/u, with G = 0 wherever u = 0.

On a finite grid the competition convolution is boundary-compensated: the
kernel mass that falls outside the box is re-attached to the local value,
(a- (*) u)(x) = (a- * u)(x) + missing(x) u(x).  This keeps G exactly
translation invariant on constant fields and F exactly zero at u = theta,
which the discrete tube and comparison structure rely on.  The diffusion
convolution in the evolution module is *not* compensated; there the honest
zero-padding is required.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterRangeError, TubeViolationError
from .grid import ConvolutionEngine, Field, Grid, kernel_field
from .tailprofiles import Kernel

_TUBE_TOL_REL = 1e-8


@dataclass(frozen=True)
class ReactionSpec:
    """Reaction parameters; use :func:`build_reaction` for validation.

    ``nu_scale`` rescales the derived local normalization nu_f and exists
    only to produce deliberately mis-normalized reactions in diagnostics;
    leave it at 1.0 for a valid model.
    """

    alpha: float
    k: int
    local_f: str  # "fisher" | "kpp" | "none"
    theta: float
    beta: float
    comp_kernel: Kernel | None = None
    nu_scale: float = 1.0

    @property
    def nu_f(self) -> float:
        """Local-reaction normalization enforcing f(r)/r -> beta at 0."""
        base = {
            "fisher": self.beta / self.theta,
            "kpp": self.beta / self.theta ** 2,
            "none": 0.0,
        }[self.local_f]
        return base * self.nu_scale

    def f_local(self, r):
        r = np.asarray(r, dtype=float)
        if self.local_f == "fisher":
            return self.nu_f * r * (self.theta - r)
        if self.local_f == "kpp":
            return self.nu_f * r * (self.theta - r) ** 2
        return np.zeros_like(r)

    def f_over_r(self, r):
        """f(r)/r, continued by its limit beta at r = 0."""
        r = np.asarray(r, dtype=float)
        if self.local_f == "fisher":
            return self.nu_f * (self.theta - r)
        if self.local_f == "kpp":
            return self.nu_f * (self.theta - r) ** 2
        return np.zeros_like(r)


def build_reaction(
    alpha: float,
    k: int,
    local_f: str,
    theta: float,
    beta: float,
    comp_kernel: Kernel | None = None,
    nu_scale: float = 1.0,
) -> ReactionSpec:
    if not (0.0 <= alpha <= 1.0):
        raise ParameterRangeError("alpha must lie in [0, 1]")
    if not (isinstance(k, int) and k >= 1):
        raise ParameterRangeError("k must be a positive integer")
    if local_f not in ("fisher", "kpp", "none"):
        raise ParameterRangeError("local_f must be fisher, kpp, or none")
    if local_f == "none" and alpha > 0:
        raise ParameterRangeError("alpha > 0 requires a local nonlinearity")
    if theta <= 0 or beta <= 0:
        raise ParameterRangeError("theta and beta must be positive")
    if alpha < 1.0 and comp_kernel is None:
        raise ParameterRangeError("alpha < 1 requires a competition kernel")
    return ReactionSpec(
        alpha=float(alpha),
        k=int(k),
        local_f=local_f,
        theta=float(theta),
        beta=float(beta),
        comp_kernel=comp_kernel,
        nu_scale=float(nu_scale),
    )


class ReactionEngine:
    """Grid-bound evaluator for F and G with a cached competition convolution."""

    def __init__(self, spec: ReactionSpec, grid: Grid):
        self.spec = spec
        self.grid = grid
        self._conv = None
        self._missing = None
        if spec.alpha < 1.0:
            kf = kernel_field(spec.comp_kernel, grid, renormalize=True)
            self._conv = ConvolutionEngine(kf)
            coverage = self._conv.apply(np.ones(grid.shape))
            self._missing = np.clip(1.0 - coverage, 0.0, None)

    def comp_convolve(self, u: np.ndarray) -> np.ndarray:
        """Boundary-compensated competition convolution (a- (*) u)."""
        return self._conv.apply(u) + self._missing * u

    def _check_tube(self, u: np.ndarray) -> np.ndarray:
        theta = self.spec.theta
        tol = _TUBE_TOL_REL * max(theta, 1.0)
        lo, hi = float(np.min(u)), float(np.max(u))
        if lo < -tol or hi > theta + tol:
            raise TubeViolationError(
                f"field values [{lo}, {hi}] outside [0, {theta}] beyond tolerance"
            )
        return np.clip(u, 0.0, theta)

    def F(self, u: np.ndarray) -> np.ndarray:
        spec = self.spec
        u = self._check_tube(u)
        out = spec.alpha * spec.f_local(u)
        if spec.alpha < 1.0:
            comp = self.comp_convolve(u)
            gap = np.clip(spec.theta - comp, 0.0, None)
            out = out + (
                (1.0 - spec.alpha)
                * spec.beta
                / spec.theta ** spec.k
                * u
                * gap ** spec.k
            )
        return out

    def G(self, u: np.ndarray) -> np.ndarray:
        """Competition mapping beta - F(u)/u, defined as 0 where u = 0."""
        spec = self.spec
        u = self._check_tube(u)
        g = spec.beta - spec.alpha * spec.f_over_r(u)
        if spec.alpha < 1.0:
            comp = self.comp_convolve(u)
            frac = np.clip(1.0 - comp / spec.theta, 0.0, None)
            g = g - (1.0 - spec.alpha) * spec.beta * frac ** spec.k
        return np.where(u == 0.0, 0.0, g)


def apply_F(spec: ReactionSpec, u: Field, engine: ReactionEngine | None = None) -> Field:
    """F(u) on the field's grid (values must lie in the tube up to tolerance)."""
    eng = engine if engine is not None else ReactionEngine(spec, u.grid)
    return Field(u.grid, eng.F(u.values))


def apply_G(spec: ReactionSpec, u: Field, engine: ReactionEngine | None = None) -> Field:
    """G(u) on the field's grid, with the 0/0 branch resolved as G = 0."""
    eng = engine if engine is not None else ReactionEngine(spec, u.grid)
    return Field(u.grid, eng.G(u.values))


@dataclass(frozen=True)
class ReactionReport:
    """Structural checks on the reaction over a sample grid of the tube."""

    lipschitz_f_over_r: float
    endpoints_zero: bool
    interior_positive: bool
    growth_bound_ok: bool  # 0 <= f(r) <= beta r on the sample grid
    quasi_monotone_shift: float  # p = beta + alpha theta K
    lipschitz_G: float
    max_bound_violation: float
    untested_hypotheses: tuple = (
        "smooth-minorant comparison refinement",
        "approximating-sequence construction for infinite first moment",
    )

    @property
    def all_ok(self) -> bool:
        return self.endpoints_zero and self.interior_positive and self.growth_bound_ok


def check_reaction_conditions(spec: ReactionSpec, n_samples: int = 4001) -> ReactionReport:
    """Scan f on [0, theta]: Lipschitz bound of f(r)/r, endpoint zeros,
    the growth bound 0 <= f <= beta r, and the quasi-monotonicity shift."""
    r = np.linspace(0.0, spec.theta, n_samples)
    phi = spec.f_over_r(r)
    slopes = np.abs(np.diff(phi)) / np.diff(r)
    K = float(np.max(slopes)) if slopes.size else 0.0
    f = spec.f_local(r)
    eps = 1e-12 * max(spec.beta * spec.theta, 1.0)
    endpoints = abs(float(f[0])) <= eps and abs(float(f[-1])) <= eps
    viol = np.maximum(f - spec.beta * r, -f)
    max_viol = float(np.max(viol))
    bound_ok = max_viol <= eps
    if spec.local_f == "none":
        interior_pos = True
    else:
        interior = f[1:-1]
        interior_pos = bool(np.all(interior > 0))
    lipschitz_G = spec.alpha * K + (1.0 - spec.alpha) * spec.k * spec.beta / spec.theta
    return ReactionReport(
        lipschitz_f_over_r=K,
        endpoints_zero=endpoints,
        interior_positive=interior_pos,
        growth_bound_ok=bound_ok,
        quasi_monotone_shift=spec.beta + spec.alpha * spec.theta * K,
        lipschitz_G=lipschitz_G,
        max_bound_violation=max_viol,
    )


@dataclass(frozen=True)
class DominationResult:
    holds: bool
    best_rho: float


def check_kernel_domination(
    spec: ReactionSpec, kernel: Kernel, kappa: float, grid: Grid
) -> DominationResult:
    """Check kappa a(x) >= (1-alpha) k beta a-(x) + rho 1_{B_rho}(x) on the nodes.

    Scans rho over the node radii and returns the largest value for which the
    inequality holds; ``holds`` is False when no positive rho works.
    """
    coords = grid.meshgrid()
    radius = np.sqrt(sum(c ** 2 for c in coords))
    lhs = kappa * kernel.density(*coords)
    if spec.alpha < 1.0:
        lhs = lhs - (1.0 - spec.alpha) * spec.k * spec.beta * spec.comp_kernel.density(
            *coords
        )
    if float(np.min(lhs)) < -1e-15:
        return DominationResult(holds=False, best_rho=0.0)
    candidates = np.unique(radius[radius > 0])
    if candidates.size > 200:
        candidates = candidates[:: candidates.size // 200]
    # feasibility is monotone: a larger rho means a larger ball and threshold
    best = 0.0
    for rho in candidates:
        ball = radius < rho
        if np.all(lhs[ball] >= rho):
            best = float(rho)
        else:
            break
    return DominationResult(holds=best > 0.0, best_rho=best)
