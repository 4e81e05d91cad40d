"""Numeric certification of the analytic scaffolding behind the front laws.

This module evaluates, on grids of space-time sample points, the
inequalities that the front analysis rests on:

- the traveling lower barrier v(x,t), a time average of
  g(x,t) = lam * min(1, c(x) e^{beta (1-eps) t}), must have nonpositive
  residual d_t v - kappa (a*v) + (m + delta) v once t exceeds an empirical
  burn-in (sub-solution certificate);
- clipped weights omega_lam = min(lam, c_alpha) must give convolution
  ratios (a * omega_lam) / omega_lam approaching one as lam -> 0
  (super-solution weight bound);
- the level sets of c_alpha = b^alpha nest inside slightly inflated level
  sets of c (level-inclusion), with alpha solved from
  alpha - sqrt(alpha (1 - alpha)) = (1 + eps/2) / (1 + eps);
- convolutions against long-tailed weights satisfy the mass lower bound
  (c * f)(x) / c(x) >~ integral of f at large radii.

Convolutions here are spatial quadratures against analytic profiles, not
grid transforms: the quantities certified sit at absolute scales around
1e-8 * lam where grid truncation would drown the signal.  Evaluation is
one-dimensional in space (radial or plateau shapes on the line).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import LevelRangeError, NoRootError, ParameterRangeError
from .evolve import ModelParams
from .front import LevelSetSpec
from .grid import Field
from .reaction import ReactionSpec
from .tailprofiles import Kernel, TailProfile


@dataclass(frozen=True)
class SubsolutionSpec:
    """Parameters of the traveling lower barrier.

    lam is the barrier amplitude (must not exceed the largest constant r
    with G(r) < delta, see :func:`lambda0_for_delta`), sigma the
    time-averaging window, delta the mortality inflation in (0, eps*beta).
    """

    level_spec: LevelSetSpec
    eps: float
    lam: float
    sigma: float
    delta: float

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise ParameterRangeError("eps must lie in (0, 1)")
        if self.lam < 0:
            raise ParameterRangeError("lam must be nonnegative")
        if self.sigma <= 0:
            raise ParameterRangeError("sigma must be positive")
        if not (0.0 < self.delta < self.eps * self.level_spec.beta):
            raise ParameterRangeError("delta must lie in (0, eps * beta)")

    @property
    def rate(self) -> float:
        return self.level_spec.beta * (1.0 - self.eps)


def barrier_g(spec: SubsolutionSpec, x, t: float):
    """g(x, t) = lam * min(1, c(x) e^{rate t}) for the radial shape."""
    logc = spec.level_spec.profile.log_value(np.abs(np.asarray(x, dtype=float)))
    with np.errstate(under="ignore"):
        return spec.lam * np.minimum(1.0, np.exp(logc + spec.rate * t))


def barrier_v(spec: SubsolutionSpec, x, t: float):
    """Time average (1/sigma) integral_t^{t+sigma} g(x, s) ds, in closed form."""
    B, sig, lam = spec.rate, spec.sigma, spec.lam
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    logc = np.atleast_1d(spec.level_spec.profile.log_value(np.abs(x_arr)))
    out = np.empty_like(logc, dtype=float)
    s_star = -logc / B  # time at which c(x) e^{B s} reaches 1
    plateau = t >= s_star
    growing = t + sig <= s_star
    mixed = ~plateau & ~growing
    out[plateau] = lam
    with np.errstate(under="ignore"):
        lc = logc[growing]
        out[growing] = lam / (sig * B) * (np.exp(lc + B * (t + sig)) - np.exp(lc + B * t))
        lcm = logc[mixed]
        out[mixed] = (lam / sig) * (
            (1.0 - np.exp(lcm + B * t)) / B + (t + sig - s_star[mixed])
        )
    return out if np.ndim(x) else float(out[0])


def barrier_dt(spec: SubsolutionSpec, x, t: float):
    """Exact time derivative (g(x, t+sigma) - g(x, t)) / sigma."""
    return (barrier_g(spec, x, t + spec.sigma) - barrier_g(spec, x, t)) / spec.sigma


def _radial_conv_1d(kernel: Kernel, value_fn, kinks, x: float, scale: float,
                    reach_log: float) -> float:
    """(a * v)(x) on the line by piecewise adaptive quadrature.

    value_fn is evaluated pointwise; kinks lists abscissas where it or the
    kernel has corners.  reach_log bounds log |z| beyond which the integrand
    is negligible relative to `scale` and is dropped.
    """
    prof = kernel.profile
    log_z = math.log(kernel.normalizer)

    def integrand(z):
        return math.exp(prof.log_value(abs(x - z)) - log_z) * value_fn(z)

    R = math.exp(min(reach_log, 690.0))
    # breakpoints: corners, geometric ladders around the origin and around x
    pts = {p for p in kinks if abs(p) < R}
    pts.update((-R, R, 0.0, x))
    for g in np.geomspace(1.0, R, 40):
        pts.update((-g, g))
    half = R + abs(x)
    for g in np.geomspace(1e-3 * (1.0 + abs(x)), half, 28):
        for p in (x - g, x + g):
            if -R < p < R:
                pts.add(p)
    refined = sorted(pts)
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(refined[:-1], refined[1:]):
            if b - a < 1e-14 * (1.0 + abs(a)):
                continue
            val, _ = integrate.quad(
                integrand, a, b, limit=80, epsabs=1e-13 * scale, epsrel=1e-10
            )
            total += val
    return total


def subsolution_residual(
    spec: SubsolutionSpec,
    kernel: Kernel,
    model: ModelParams,
    xs,
    times,
) -> float:
    """Max over xs x times of d_t v - kappa (a*v) + (m + delta) v.

    Nonpositive (up to quadrature noise) certifies the barrier as a
    sub-solution of the mortality-inflated linear flow at those times.
    """
    if abs(model.beta - spec.level_spec.beta) > 1e-9:
        raise ParameterRangeError("model beta differs from the level-set beta")
    if spec.level_spec.shape != "radial":
        raise ParameterRangeError("residual evaluation supports the radial shape")
    if spec.lam == 0.0:
        return 0.0
    prof = spec.level_spec.profile
    worst = -math.inf
    for t in times:
        kinks = set()
        for tt in (t, t + spec.sigma):
            level = -spec.rate * tt
            if level < prof.inner_log:
                r = prof.inverse(level)
                kinks.update((-r, r))
        # reach: |z| beyond which v < 1e-13 * lam
        reach_level = -spec.rate * (t + spec.sigma) - 30.0
        reach_log = (
            math.log(prof.inverse(reach_level))
            if reach_level < prof.inner_log
            else math.log(2.0)
        )
        vt = lambda z: float(barrier_v(spec, z, t))
        for x in xs:
            conv = _radial_conv_1d(
                kernel, vt, kinks, float(x), spec.lam, reach_log + 0.7
            )
            resid = (
                float(barrier_dt(spec, x, t))
                - model.kappa * conv
                + (model.m + spec.delta) * float(barrier_v(spec, x, t))
            )
            worst = max(worst, resid)
    return worst


def find_burn_in(
    spec: SubsolutionSpec,
    kernel: Kernel,
    model: ModelParams,
    xs,
    t_ladder,
    rel_drop: float = 0.01,
    tol: float | None = None,
) -> float:
    """First ladder time at which the residual max stops improving by
    more than `rel_drop` (and meets `tol`, when given)."""
    tol = tol if tol is not None else 1e-8 * max(spec.lam, 1e-300)
    prev = None
    for t in t_ladder:
        r = subsolution_residual(spec, kernel, model, xs, [t])
        if prev is not None and r <= tol:
            improvement = prev - r
            if improvement < rel_drop * max(abs(prev), tol):
                return float(t)
        prev = r
    return float(t_ladder[-1])


def lambda0_for_delta(spec: ReactionSpec, delta: float, n_scan: int = 2000) -> float:
    """Largest constant level r with G(r 1) < delta, by scanning constants.

    On constants the competition convolution is exact, so G is the closed
    form beta - alpha f(r)/r - (1-alpha) beta (1 - r/theta)^k.
    """
    r = np.linspace(0.0, spec.theta, n_scan)
    g = (
        spec.beta
        - spec.alpha * spec.f_over_r(r)
        - (1.0 - spec.alpha) * spec.beta * (1.0 - r / spec.theta) ** spec.k
    )
    ok = g < delta
    if not ok[0] and not np.any(ok):
        return 0.0
    idx = np.max(np.nonzero(ok)[0])
    return float(r[idx])


def supersolution_ratio(kernel: Kernel, weight_profile: TailProfile, lam: float,
                        xs=None) -> float:
    """max over xs of (a * omega_lam)(x) / omega_lam(x), omega_lam = min(lam, w).

    For admissible weights this decreases toward 1 as lam decreases; for
    light-tailed weights against a heavy-tailed kernel it diverges instead.
    """
    if lam <= 0:
        raise ParameterRangeError("lam must be positive")
    log_lam = math.log(lam)
    prof = weight_profile
    if log_lam < prof.inner_log:
        s_lam = prof.inverse(log_lam)
        kinks = [-s_lam, s_lam]
    else:
        s_lam = 0.0
        kinks = []

    def omega_lam(z):
        with np.errstate(under="ignore"):
            return min(lam, math.exp(prof.log_value(abs(z))))

    if xs is None:
        top = max(50.0 * max(s_lam, 1.0), 200.0)
        xs = np.concatenate(
            [np.linspace(0.0, max(2.0 * s_lam, 2.0), 12), np.geomspace(
                max(2.0 * s_lam, 2.0), top, 20
            )]
        )
    reach_level = min(log_lam, prof.log_value(max(abs(np.max(xs)), 1.0))) - 25.0
    reach_log = (
        math.log(prof.inverse(reach_level))
        if reach_level < prof.inner_log
        else math.log(2.0)
    )
    best = -math.inf
    for x in xs:
        wx = omega_lam(float(x))
        conv = _radial_conv_1d(
            kernel, omega_lam, kinks, float(x), wx, reach_log + 0.7
        )
        best = max(best, conv / wx)
    return best


@dataclass(frozen=True)
class InclusionResult:
    ok: bool
    alpha: float
    root_residual: float
    radii: tuple  # ((r_alpha, r) per checked time)


def exponent_equation(alpha: float) -> float:
    """f(alpha) = alpha - sqrt(alpha (1 - alpha)) on (1/2, 1)."""
    return alpha - math.sqrt(alpha * (1.0 - alpha))


def check_level_inclusion(
    profile: TailProfile, eps: float, alpha0: float, t: float, beta: float
) -> InclusionResult:
    """Level sets of b^alpha at time t (1 + eps/2) must nest inside the level
    sets of b at time t (1 + eps), checked at t, 2t, 4t.

    alpha solves f(alpha) = (1 + eps/2)/(1 + eps) by bisection in
    (alpha0, 1); when the target is not in f's range there, raises NoRootError.
    """
    if not (0.75 < alpha0 < 1.0):
        raise ParameterRangeError("alpha0 must lie in (3/4, 1)")
    if not (0.0 < eps < 1.0):
        raise ParameterRangeError("eps must lie in (0, 1)")
    h = (1.0 + 0.5 * eps) / (1.0 + eps)
    if h <= exponent_equation(alpha0):
        raise NoRootError(
            f"eps={eps} outside the admissible range for alpha0={alpha0}"
        )
    alpha = float(
        optimize.brentq(
            lambda a: exponent_equation(a) - h, alpha0, 1.0 - 1e-15, rtol=1e-15
        )
    )
    resid = abs(exponent_equation(alpha) - h)
    pairs = []
    ok = True
    for T in (t, 2.0 * t, 4.0 * t):
        la = -beta * (1.0 + 0.5 * eps) * T / alpha
        lb = -beta * (1.0 + eps) * T
        if la >= profile.inner_log or lb >= profile.inner_log:
            raise LevelRangeError("t too small to invert the profile")
        r_alpha = profile.inverse(la)
        r_full = profile.inverse(lb)
        pairs.append((r_alpha, r_full))
        if r_alpha > r_full * (1.0 + 1e-9):
            ok = False
    return InclusionResult(ok=ok, alpha=alpha, root_residual=resid, radii=tuple(pairs))


@dataclass(frozen=True)
class LiminfResult:
    min_ratio: float
    field_mass: float
    per_radius: tuple


def liminf_ratio(c_profile: TailProfile, f_field: Field, radii) -> LiminfResult:
    """min over |x| in radii of (c * f)(x) / c(|x|) against the mass of f.

    For long-tailed c the ratio at large radii approaches (from below) the
    discrete integral of f; for light-tailed c it falls short.
    """
    grid = f_field.grid
    h = grid.cell_volume
    vals = []
    if grid.dim == 1:
        ys = grid.axis()
        support = np.abs(f_field.values) > 0
        ys, fv = ys[support], f_field.values[support]
        for r in radii:
            conv = h * float(np.sum(c_profile.value(np.abs(r - ys)) * fv))
            vals.append(conv / float(c_profile.value(r)))
    else:
        X, Y = grid.meshgrid()
        support = np.abs(f_field.values) > 0
        xs, ys, fv = X[support], Y[support], f_field.values[support]
        for r in radii:
            dist = np.sqrt((r - xs) ** 2 + ys ** 2)
            conv = h * float(np.sum(c_profile.value(dist) * fv))
            vals.append(conv / float(c_profile.value(r)))
    mass = float(h * np.sum(f_field.values))
    return LiminfResult(
        min_ratio=float(np.min(vals)), field_mass=mass, per_radius=tuple(vals)
    )
