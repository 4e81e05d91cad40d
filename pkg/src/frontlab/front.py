"""Front extraction, predicted spreading laws, and growth-law classification.

The spreading of a solution is summarized by level-crossing positions of the
field at a few fractions of theta.  Predicted companion laws come from
inverting the level-set relation c(x) >= e^{-beta t}: for a radial shape
c(x) = b(|x|) the predicted radius is eta(t) = b^{-1}(e^{-beta t}); for the
one-dimensional plateau shape, c(x) is the tail integral of b.  The
almost-linear family admits an exact inverse through the negative real
branch of the Lambert W function, implemented here by Halley iteration.

Measured traces are classified against four candidate growth laws (linear,
exponential in t, power, t (log t)^lambda) by per-law least squares in that
law's natural fitting space, with a common log-space residual for ranking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BelowThresholdError,
    BranchDomainError,
    InsufficientDataError,
    LevelRangeError,
    ParameterRangeError,
)
from .grid import Field
from .tailprofiles import TailProfile

GROWTH_LAWS = ("linear", "exponential-in-t", "power", "t-log-power")

_BURN_IN_FRACTION = 0.2
_MIN_FIT_POINTS = 12
_TLOG_MIN_T = 10.0  # below this, log t is too close to degenerate to identify lambda


# ---------------------------------------------------------------------------
# level crossings


def _interp_crossing(xs: np.ndarray, vals: np.ndarray, level: float):
    """Largest abscissa where vals crosses `level`, scanning from the far end."""
    above = vals >= level
    if not np.any(above):
        return None
    idx = np.max(np.nonzero(above)[0])
    if idx == len(xs) - 1:
        return float(xs[idx])
    x0, x1 = xs[idx], xs[idx + 1]
    v0, v1 = vals[idx], vals[idx + 1]
    if v0 == v1:
        return float(x0)
    return float(x0 + (x1 - x0) * (v0 - level) / (v0 - v1))


def radial_profile(f: Field, n_angles: int = 64):
    """(radii, angular average) of a field; symmetrized halves in 1D,
    bilinear interpolation over `n_angles` rays in 2D."""
    grid = f.grid
    c = grid.center_index
    if grid.dim == 1:
        m = grid.n - c
        left = f.values[c::-1][:m]
        right = f.values[c:]
        k = min(len(left), len(right))
        radii = grid.h * np.arange(k)
        return radii, 0.5 * (left[:k] + right[:k])
    n = grid.n
    radii = grid.h * np.arange(n // 2)
    angles = np.linspace(0.0, 2.0 * math.pi, n_angles, endpoint=False)
    cos, sin = np.cos(angles), np.sin(angles)
    acc = np.zeros_like(radii)
    for r_idx, r in enumerate(radii):
        px = r * cos / grid.h + c
        py = r * sin / grid.h + c
        ix = np.clip(px.astype(int), 0, n - 2)
        iy = np.clip(py.astype(int), 0, n - 2)
        fx = np.clip(px - ix, 0.0, 1.0)
        fy = np.clip(py - iy, 0.0, 1.0)
        v = (
            f.values[ix, iy] * (1 - fx) * (1 - fy)
            + f.values[ix + 1, iy] * fx * (1 - fy)
            + f.values[ix, iy + 1] * (1 - fx) * fy
            + f.values[ix + 1, iy + 1] * fx * fy
        )
        acc[r_idx] = float(np.mean(v))
    return radii, acc


def level_crossing(f: Field, level: float, mode: str):
    """Largest crossing position of the field at `level`, or None if unreached.

    Modes: 'radial' (largest radius of the symmetrized / angularly averaged
    profile), 'monotone' (rightmost abscissa with u >= level, d=1),
    'diagonal' (largest Euclidean distance xi along the (1,1) ray, d=2).
    """
    grid = f.grid
    if mode == "radial":
        radii, vals = radial_profile(f)
        return _interp_crossing(radii, vals, level)
    if mode == "monotone":
        if grid.dim != 1:
            raise ParameterRangeError("monotone crossings are one-dimensional")
        xs = grid.axis()
        above = f.values >= level
        if not np.any(above):
            return None
        idx = np.max(np.nonzero(above)[0])
        if idx == grid.n - 1:
            return float(xs[idx])
        v0, v1 = f.values[idx], f.values[idx + 1]
        return float(xs[idx] + grid.h * (v0 - level) / (v0 - v1)) if v0 != v1 else float(xs[idx])
    if mode == "diagonal":
        if grid.dim != 2:
            raise ParameterRangeError("diagonal crossings are two-dimensional")
        c = grid.center_index
        k = grid.n - c
        diag = np.array([f.values[c + j, c + j] for j in range(k)])
        xi = grid.h * math.sqrt(2.0) * np.arange(k)
        return _interp_crossing(xi, diag, level)
    raise ParameterRangeError(f"unknown crossing mode {mode!r}")


# ---------------------------------------------------------------------------
# predicted laws


@dataclass(frozen=True)
class LevelSetSpec:
    """Shape of the level-set family: radial c(x)=b(|x|) or the plateau
    (orthant) shape built from the tail integral of b."""

    shape: str  # "radial" | "orthant"
    profile: TailProfile
    beta: float

    def __post_init__(self):
        if self.shape not in ("radial", "orthant"):
            raise ParameterRangeError("shape must be radial or orthant")
        if self.beta <= 0:
            raise ParameterRangeError("beta must be positive")


def lambda_radius(spec: LevelSetSpec, t: float) -> float:
    """Radius of the level set {c >= e^{-beta t}}.

    Radial shape: numeric inverse of b.  Orthant shape (d=1): inverse of the
    tail integral of b.  Raises LevelRangeError when e^{-beta t} is not below
    the maximum of c.
    """
    log_target = -spec.beta * t
    prof = spec.profile
    if spec.shape == "radial":
        if log_target >= prof.inner_log:
            raise LevelRangeError("level above the profile's tail-start value")
        return prof.inverse(log_target)
    c0 = prof.tail_integral(0.0, 0)
    if log_target >= math.log(c0):
        raise LevelRangeError("level above the plateau-shape maximum")

    def g(x):
        return math.log(prof.tail_integral(x, 0)) - log_target

    lo, hi = 0.0, max(2.0 * prof.rho, 2.0)
    while g(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise LevelRangeError("target not reachable")
    from scipy.optimize import brentq

    return float(brentq(g, lo, hi, rtol=1e-12, maxiter=200))


def lambert_w_minus1(nu: float) -> float:
    """Negative real branch of the Lambert W function on [-1/e, 0).

    Halley iteration seeded at log(-nu) - log(-log(-nu)); the closed branch
    point nu = -1/e returns exactly -1.  Residual |w e^w - nu| <= 1e-13.
    """
    inv_e = math.exp(-1.0)
    if not (-inv_e <= nu < 0.0):
        raise BranchDomainError(f"nu={nu} outside [-1/e, 0)")
    if nu == -inv_e:
        return -1.0
    gap = 1.0 + math.e * nu  # -> 0 at the branch point
    if gap < 0.05:
        eta = math.sqrt(2.0 * gap)
        w = -1.0 - eta - eta * eta / 3.0
    else:
        ln = math.log(-nu)
        w = ln - math.log(-ln)
    w = min(w, -1.0 - 1e-12)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - nu
        if abs(f) <= 1e-14 * (1.0 + abs(nu)):
            break
        fp = ew * (w + 1.0)
        fpp = ew * (w + 2.0)
        denom = fp - 0.5 * f * fpp / fp
        if denom == 0.0:
            break
        w_new = w - f / denom
        if w_new >= -1.0:
            w_new = 0.5 * (w - 1.0)
        if abs(w_new - w) <= 1e-16 * abs(w):
            w = w_new
            break
        w = w_new
    if abs(w * math.exp(w) - nu) > 1e-13:
        w = _lambert_bisect(nu)
    return w


def _lambert_bisect(nu: float) -> float:
    # w e^w decreases from 0- to -1/e on (-inf, -1]; keep f(lo) >= nu >= f(hi)
    hi = -1.0
    lo = -2.0
    while lo * math.exp(lo) <= nu:
        lo *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) > nu:
            lo = mid
        else:
            hi = mid
        if abs(hi - lo) < 1e-16 * abs(lo):
            break
    return 0.5 * (lo + hi)


def almost_linear_radius(lam: float, beta: float, t: float, c: float = 1.0) -> float:
    """Exact radius where exp(-c s / (log s)^lam) = e^{-beta t}.

    Valid for t > (1/beta) (e/lam)^lam / c (so the Lambert argument stays
    inside the branch); asymptotically beta t (log t)^lam / c.
    """
    bt = beta * t / c
    threshold = (math.e / lam) ** lam
    if bt <= threshold:
        raise BelowThresholdError(f"t={t} below the validity threshold")
    nu = -1.0 / (lam * bt ** (1.0 / lam))
    w = lambert_w_minus1(nu)
    return lam ** lam * bt * (-w) ** lam


def predicted_eta(family: str, params: dict, beta: float, d: int, t):
    """Predicted front scale eta(t) for one of the accelerating families.

    polynomial: exact inverse (M e^{beta t})^{1/exponent} - 1
    log-stretched: exp((beta t / c)^{1/(1+delta)})
    stretched-exp: (beta t / c)^{1/gamma}
    almost-linear: exact Lambert-W inverse (see almost_linear_radius)
    exponential-control: beta t / rate (linear, for control rows)
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if family == "polynomial":
        q = params.get("exponent")
        if q is None:
            q = d + params["mu"]
        M = params.get("M", 1.0)
        vals = np.exp((math.log(M) + beta * ts) / q) - 1.0
        if np.any(vals <= 0):
            raise BelowThresholdError("t below threshold: predicted radius <= 0")
    elif family == "log-stretched":
        c, delta = params.get("c", 1.0), params["delta"]
        vals = np.exp((beta * ts / c) ** (1.0 / (1.0 + delta)))
    elif family == "stretched-exp":
        c, gamma = params.get("c", 1.0), params["gamma"]
        vals = (beta * ts / c) ** (1.0 / gamma)
    elif family == "almost-linear":
        lam, c = params["lam"], params.get("c", 1.0)
        vals = np.array([almost_linear_radius(lam, beta, tv, c) for tv in ts])
    elif family == "exponential-control":
        vals = beta * ts / params.get("rate", 1.0)
    else:
        raise ParameterRangeError(f"no predicted law for family {family!r}")
    return vals if np.ndim(t) else float(vals[0])


def diagonal_front_bounds(
    profile: TailProfile, beta: float, t: float, eps: float
) -> tuple[float, float]:
    """Bounds (mu((1-eps) t) / 2, mu(t)) for the diagonal coordinate in 2D.

    mu inverts c(x) = (pi/2) * integral_{sqrt(2) x}^inf b(r) r dr, computed by
    adaptive quadrature and bisection.
    """
    if not (0.0 < eps < 1.0):
        raise ParameterRangeError("eps must lie in (0, 1)")

    def c_of(x: float) -> float:
        return 0.5 * math.pi * profile.tail_integral(math.sqrt(2.0) * x, 1)

    def invert(target_log: float) -> float:
        if target_log >= math.log(c_of(0.0)):
            raise BelowThresholdError("t too small to invert the diagonal shape")
        g = lambda x: math.log(c_of(x)) - target_log
        hi = max(2.0 * profile.rho, 2.0)
        while g(hi) > 0:
            hi *= 2.0
            if hi > 1e300:
                raise BelowThresholdError("diagonal shape target unreachable")
        from scipy.optimize import brentq

        return float(brentq(g, 0.0, hi, rtol=1e-12, maxiter=200))

    upper = invert(-beta * t)
    lower = 0.5 * invert(-beta * (1.0 - eps) * t)
    return lower, upper


# ---------------------------------------------------------------------------
# traces and growth-law fits


@dataclass
class FrontTrace:
    """Measured crossing positions per level, with predicted companions."""

    levels: tuple
    times: list = field(default_factory=list)
    positions: dict = None  # level -> list of crossings (nan when unreached)
    predicted: list = field(default_factory=list)

    def __post_init__(self):
        if self.positions is None:
            self.positions = {lvl: [] for lvl in self.levels}

    def append(self, t: float, crossings: dict, predicted: float = math.nan):
        if self.times and t <= self.times[-1]:
            raise ParameterRangeError("trace times must be strictly increasing")
        self.times.append(t)
        for lvl in self.levels:
            pos = crossings.get(lvl)
            self.positions[lvl].append(math.nan if pos is None else pos)
        self.predicted.append(predicted)

    def series(self, level: float):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.positions[level], dtype=float)
        keep = np.isfinite(p) & (p > 0)
        return t[keep], p[keep]


@dataclass(frozen=True)
class GrowthFit:
    """Best-fitting growth law with per-candidate parameters and residuals."""

    law: str
    params: dict
    residuals: dict

    @property
    def fitted(self) -> dict:
        return self.params[self.law]


def _log_residual(t, pos, pred):
    if np.any(pred <= 0):
        return math.inf
    r = np.log(pos) - np.log(pred)
    return float(np.sqrt(np.mean(r * r)))


def fit_growth_laws(t: np.ndarray, pos: np.ndarray) -> GrowthFit:
    """Least-squares fits of position(t) against the four candidate laws.

    Each law is fitted in its natural space (raw, log, log-log, and
    log(pos/t) against log log t); residuals are RMS of log(measured) -
    log(predicted), a common scale across laws.
    """
    t = np.asarray(t, dtype=float)
    pos = np.asarray(pos, dtype=float)
    if len(t) < _MIN_FIT_POINTS:
        raise InsufficientDataError(f"need >= {_MIN_FIT_POINTS} points, got {len(t)}")
    if np.any(pos <= 0):
        raise InsufficientDataError("positions must be positive for growth fits")
    params: dict = {}
    residuals: dict = {}

    c1, c0 = np.polyfit(t, pos, 1)
    params["linear"] = {"slope": float(c1), "intercept": float(c0)}
    residuals["linear"] = _log_residual(t, pos, c0 + c1 * t)

    lp = np.log(pos)
    r1, r0 = np.polyfit(t, lp, 1)
    params["exponential-in-t"] = {"rate": float(r1), "log_prefactor": float(r0)}
    residuals["exponential-in-t"] = _log_residual(t, pos, np.exp(r0 + r1 * t))

    if np.all(t > 0):
        p1, p0 = np.polyfit(np.log(t), lp, 1)
        params["power"] = {"exponent": float(p1), "log_prefactor": float(p0)}
        residuals["power"] = _log_residual(t, pos, np.exp(p0 + p1 * np.log(t)))
    else:
        params["power"] = {}
        residuals["power"] = math.inf

    mask = t >= _TLOG_MIN_T
    if np.count_nonzero(mask) >= max(3, _MIN_FIT_POINTS // 2):
        tt, pp = t[mask], pos[mask]
        x = np.log(np.log(tt))
        y = np.log(pp / tt)
        l1, l0 = np.polyfit(x, y, 1)
        params["t-log-power"] = {"lam": float(l1), "log_prefactor": float(l0)}
        residuals["t-log-power"] = _log_residual(
            tt, pp, tt * np.exp(l0) * np.log(tt) ** l1
        )
    else:
        params["t-log-power"] = {}
        residuals["t-log-power"] = math.inf

    best = min(residuals, key=residuals.get)
    return GrowthFit(law=best, params=params, residuals=residuals)


def classify_growth(trace: FrontTrace, level: float) -> GrowthFit:
    """Classify the growth law of a trace at one level (burn-in dropped)."""
    t, pos = trace.series(level)
    drop = int(_BURN_IN_FRACTION * len(t))
    t, pos = t[drop:], pos[drop:]
    if len(t) < _MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"only {len(t)} usable points after burn-in at level {level}"
        )
    return fit_growth_laws(t, pos)
