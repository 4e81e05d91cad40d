"""Time integration of the nonlocal monostable equation.

The evolution solved here is

    du/dt = kappa (a * u) - m u - u G(u),   u(., 0) = u0 in [0, theta],

discretized by sampling on a uniform grid, zero-padded linear convolution,
and an explicit RK4 step whose size is tied to a global Lipschitz estimate
of the right side.  Since u G(u) = beta u - F(u) identically (including at
u = 0), the right side is evaluated as kappa (a*u) - kappa u + F(u), which
avoids the 0/0 branch entirely.

Two initial-condition classes are supported:

- integrable: compactly supported data, zero outside the box; domain
  expansion doubles L and n (spacing preserved) with zero extension.
- monotone (d=1 only): plateau data equal to theta on the far left.  The
  exterior left of the box is modelled as identically theta, which adds an
  explicit suffix-mass term to the convolution and keeps the plateau an
  exact discrete equilibrium; expansion extends by theta on the left and
  zero on the right.

A truncated exponential series for the linearized flow (no reaction,
mortality only) provides an independent cross-check path for the majorant
bound and for the integrator itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DomainCapError,
    ParameterRangeError,
    StepSizeError,
    TruncationBoundError,
    TubeViolationError,
)
from .grid import ConvolutionEngine, Field, Grid, kernel_field, make_grid
from .reaction import ReactionEngine, ReactionSpec, check_reaction_conditions
from .tailprofiles import Kernel

_CLAMP_TOL_REL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Fecundity kappa and mortality m; the linearization rate is beta = kappa - m."""

    kappa: float
    m: float

    def __post_init__(self):
        if self.kappa <= 0 or self.m <= 0:
            raise ParameterRangeError("kappa and m must be positive")
        if self.beta <= 0:
            raise ParameterRangeError("kappa - m must be positive")

    @property
    def beta(self) -> float:
        return self.kappa - self.m


class SimEngine:
    """Grid-bound caches: discrete kernels, transforms, plateau suffix masses."""

    def __init__(self, params: ModelParams, reaction: ReactionSpec, kernel: Kernel,
                 grid: Grid, ic_class: str):
        self.grid = grid
        self.kernel_field = kernel_field(kernel, grid, renormalize=True)
        self.conv = ConvolutionEngine(self.kernel_field)
        self.reaction_engine = ReactionEngine(reaction, grid)
        self.ic_class = ic_class
        self.theta = reaction.theta
        self.params = params
        report = check_reaction_conditions(reaction, n_samples=2001)
        self.lipschitz_G = report.lipschitz_G
        self.dt_max = 0.1 / (
            params.kappa + params.m + params.beta + self.lipschitz_G * reaction.theta
        )
        self._suffix = None
        if ic_class == "monotone":
            if grid.dim != 1:
                raise ParameterRangeError("monotone runs are one-dimensional")
            A = self.kernel_field.values
            # exterior u = theta to the left of the box contributes
            # theta * h * sum_{m > i + c} A_m at node i
            tail = np.concatenate([np.cumsum(A[::-1])[::-1], [0.0]])
            c = grid.center_index
            idx = np.arange(grid.n) + c + 1
            idx = np.minimum(idx, grid.n)
            self._suffix = grid.h * tail[idx]

    def diffuse(self, u: np.ndarray) -> np.ndarray:
        out = self.conv.apply(u)
        if self._suffix is not None:
            out = out + self.theta * self._suffix
        return out

    def rhs(self, u: np.ndarray) -> np.ndarray:
        kappa = self.params.kappa
        return kappa * self.diffuse(u) - kappa * u + self.reaction_engine.F(u)


@dataclass
class SimState:
    """Gridded field with model parameters and adaptive-domain bookkeeping."""

    params: ModelParams
    reaction: ReactionSpec
    kernel: Kernel
    field: Field
    time: float = 0.0
    ic_class: str = "integrable"
    engine: SimEngine = None  # rebuilt lazily after expansion

    def __post_init__(self):
        if self.ic_class not in ("integrable", "monotone"):
            raise ParameterRangeError("ic_class must be integrable or monotone")
        theta = self.reaction.theta
        tol = _CLAMP_TOL_REL * max(theta, 1.0)
        v = self.field.values
        if float(np.min(v)) < -tol or float(np.max(v)) > theta + tol:
            raise TubeViolationError("initial data outside [0, theta]")

    def ensure_engine(self) -> SimEngine:
        if self.engine is None or self.engine.grid != self.field.grid:
            self.engine = SimEngine(
                self.params, self.reaction, self.kernel, self.field.grid, self.ic_class
            )
        return self.engine

    @property
    def boundary_mass(self) -> float:
        """Max |u| on the outermost two node layers (right edge only for monotone)."""
        v = self.field.values
        if self.ic_class == "monotone":
            return float(np.max(np.abs(v[-2:])))
        if self.field.grid.dim == 1:
            return float(max(np.max(np.abs(v[:2])), np.max(np.abs(v[-2:]))))
        edge = np.concatenate(
            [v[:2].ravel(), v[-2:].ravel(), v[:, :2].ravel(), v[:, -2:].ravel()]
        )
        return float(np.max(np.abs(edge)))


def dt_max(state: SimState) -> float:
    """Stability bound 0.1 / (kappa + m + beta + L_G theta)."""
    return state.ensure_engine().dt_max


def _rk4(engine: SimEngine, u: np.ndarray, dt: float) -> np.ndarray:
    k1 = engine.rhs(u)
    k2 = engine.rhs(np.clip(u + 0.5 * dt * k1, 0.0, engine.theta))
    k3 = engine.rhs(np.clip(u + 0.5 * dt * k2, 0.0, engine.theta))
    k4 = engine.rhs(np.clip(u + dt * k3, 0.0, engine.theta))
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state: SimState, dt: float) -> SimState:
    """One explicit RK4 step; clamps tube violations up to 1e-9, else errors.

    A step that violates the tube beyond tolerance is retried once with two
    half steps before raising.
    """
    engine = state.ensure_engine()
    if dt > engine.dt_max * (1.0 + 1e-12):
        raise StepSizeError(f"dt={dt} exceeds stability bound {engine.dt_max}")
    theta = engine.theta
    tol = _CLAMP_TOL_REL * max(theta, 1.0)

    def attempt(u0, h, pieces):
        u = u0
        for _ in range(pieces):
            u = _rk4(engine, u, h)
        return u

    u1 = attempt(state.field.values, dt, 1)
    lo, hi = float(np.min(u1)), float(np.max(u1))
    if lo < -tol or hi > theta + tol:
        u1 = attempt(state.field.values, dt / 2.0, 2)
        lo, hi = float(np.min(u1)), float(np.max(u1))
        if lo < -tol or hi > theta + tol:
            raise TubeViolationError(
                f"tube violated beyond tolerance after retry: [{lo}, {hi}]"
            )
    np.clip(u1, 0.0, theta, out=u1)
    return replace(
        state, field=Field(state.field.grid, u1), time=state.time + dt, engine=engine
    )


@dataclass(frozen=True)
class ExpansionPolicy:
    """Domain-doubling trigger and cap.

    ``threshold_rel`` is relative to theta.  By default the trigger watches
    the outermost two node layers (right edge only for the monotone class).
    For heavy-tailed kernels the whole far field fills at once and carries an
    age factor that a freshly zero-extended region cannot reproduce quickly;
    a pure edge-value trigger then lags the front without bound.  Setting
    ``region_fraction`` switches to a proximity trigger (max |u| over the
    outer fraction of the box), which expands while the watched region is
    still accurate.  Expansion beyond ``max_nodes`` per axis raises
    DomainCapError.
    """

    threshold_rel: float = 1e-8
    max_nodes: int = 2 ** 23
    region_fraction: float | None = None

    def watched_mass(self, state: "SimState") -> float:
        if self.region_fraction is None:
            return state.boundary_mass
        grid = state.field.grid
        k = max(2, int(self.region_fraction * grid.n / 2))
        v = state.field.values
        if state.ic_class == "monotone":
            return float(np.max(np.abs(v[-k:])))
        if grid.dim == 1:
            return float(max(np.max(np.abs(v[:k])), np.max(np.abs(v[-k:]))))
        edge = np.concatenate(
            [v[:k].ravel(), v[-k:].ravel(), v[:, :k].ravel(), v[:, -k:].ravel()]
        )
        return float(np.max(np.abs(edge)))

    def triggered(self, state: "SimState") -> bool:
        return self.watched_mass(state) > self.threshold_rel * state.reaction.theta


def expand_domain_if_needed(state: SimState, policy: ExpansionPolicy) -> SimState:
    """Double L and n (preserving spacing) when mass reaches the boundary."""
    theta = state.reaction.theta
    if not policy.triggered(state):
        return state
    grid = state.field.grid
    if 2 * grid.n > policy.max_nodes:
        raise DomainCapError(
            f"expansion to n={2 * grid.n} exceeds cap {policy.max_nodes}"
        )
    new_grid = make_grid(grid.dim, 2.0 * grid.L, 2 * grid.n)
    old = state.field.values
    if state.ic_class == "monotone":
        vals = np.zeros(new_grid.shape)
        vals[: grid.n // 2] = theta
        vals[grid.n // 2 : grid.n // 2 + grid.n] = old
    else:
        vals = np.zeros(new_grid.shape)
        lo = grid.n // 2
        if grid.dim == 1:
            vals[lo : lo + grid.n] = old
        else:
            vals[lo : lo + grid.n, lo : lo + grid.n] = old
    return replace(state, field=Field(new_grid, vals), engine=None)


@dataclass
class Trajectory:
    """Snapshot times with observer outputs (strictly increasing times)."""

    times: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def append(self, t: float, record: dict) -> None:
        if self.times and t <= self.times[-1]:
            raise ParameterRangeError("snapshot times must be strictly increasing")
        self.times.append(t)
        self.records.append(record)


def solve(
    state: SimState,
    T: float,
    observers=(),
    snapshot_dt: float = 0.5,
    expansion: ExpansionPolicy | None = ExpansionPolicy(),
) -> tuple[SimState, Trajectory]:
    """Integrate to time state.time + T, recording observers every snapshot_dt.

    Observers are callables state -> dict merged into each snapshot record.
    ``expansion=None`` disables adaptive domain growth (fixed box).
    """
    if T <= 0:
        raise ParameterRangeError("horizon T must be positive")
    traj = Trajectory()

    def record():
        rec = {"boundary_mass": state.boundary_mass, "n_nodes": state.field.grid.n}
        for obs in observers:
            rec.update(obs(state))
        traj.append(state.time, rec)

    record()
    t_end = state.time + T
    next_snap = state.time + snapshot_dt
    while state.time < t_end - 1e-12:
        if expansion is not None:
            # expand repeatedly so a fast front can regain headroom at once
            for _ in range(40):
                expanded = expand_domain_if_needed(state, expansion)
                if expanded is state:
                    break
                state = expanded
        target = min(next_snap, t_end)
        span = target - state.time
        n_sub = max(1, math.ceil(span / dt_max(state) - 1e-12))
        h = span / n_sub
        for _ in range(n_sub):
            state = step(state, h)
        if state.time >= next_snap - 1e-9:
            record()
            next_snap += snapshot_dt
    if traj.times[-1] < state.time - 1e-9:
        record()
    return state, traj


@dataclass(frozen=True)
class SeriesResult:
    field: Field
    truncation_bound: float
    n_terms: int


def solve_linear_series(
    kernel: Kernel,
    u0: Field,
    t: float,
    params: ModelParams,
    n_terms: int | None = None,
    bound_tol: float = 1e-8,
) -> SeriesResult:
    """Linearized flow by the truncated exponential series.

    w(., t) = e^{-m t} sum_{n=0}^{N} (kappa t)^n / n! a^{*n} * u0 with
    iterated on-grid convolutions.  N defaults to ceil(kappa t e) + 20 so the
    factorial tail dominates; the reported truncation bound is
    e^{-m t} * max|u0| * sum_{n>N} (kappa t)^n / n!.
    """
    kt = params.kappa * t
    n_min = int(math.ceil(kt * math.e)) + 20
    N = n_min if n_terms is None else int(n_terms)
    if N < n_min:
        raise ParameterRangeError(f"n_terms must be at least {n_min} for t={t}")
    engine = ConvolutionEngine(kernel_field(kernel, u0.grid, renormalize=True))
    acc = u0.values.copy()
    term = u0.values.copy()
    for n in range(1, N + 1):
        term = engine.apply(term) * (kt / n)
        acc = acc + term
    decay = math.exp(-params.m * t)
    w = decay * acc

    # tail of the exponential series, summed until negligible
    log_term = (N + 1) * math.log(kt) - math.lgamma(N + 2) if kt > 0 else -math.inf
    tail = 0.0
    term_val = math.exp(log_term)
    k = N + 1
    while term_val > 1e-300:
        tail += term_val
        k += 1
        term_val *= kt / k
        if k > N + 10000:
            break
    bound = decay * float(np.max(np.abs(u0.values))) * tail
    scale = max(float(np.max(np.abs(w))), 1e-300)
    if bound > bound_tol * scale:
        raise TruncationBoundError(
            f"truncation bound {bound} exceeds {bound_tol} * field scale {scale}"
        )
    return SeriesResult(field=Field(u0.grid, w), truncation_bound=bound, n_terms=N)


def linear_minorant(kernel: Kernel, u0: Field, t: float, params: ModelParams) -> Field:
    """Lower bound kappa t e^{-kappa t} (a * u0) for the nonlinear flow."""
    engine = ConvolutionEngine(kernel_field(kernel, u0.grid, renormalize=True))
    factor = params.kappa * t * math.exp(-params.kappa * t)
    return Field(u0.grid, factor * engine.apply(u0.values))
