"""Heavy-tailed radial profiles and normalized dispersal kernels.

A tail profile is a positive, eventually strictly decreasing function
b : [0, inf) -> (0, inf) drawn from a small catalogue of parametric
families (polynomial, log-stretched, stretched-exponential, almost-linear,
plus exponential / gaussian controls and tabulated data).  Each profile is
continued to the left of its tail-start abscissa ``rho`` by the constant
b(rho), which keeps it bounded and non-increasing without changing any
large-radius behaviour.

Profiles are evaluated in log space throughout: values like exp(-1e6)
appear routinely when inverting level sets, and plain floats would
underflow long before the quantities of interest degenerate.

A :class:`Kernel` wraps a profile together with a spatial dimension and the
radial normalization constant Z so that a(x) = b(|x|) / Z integrates to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize, special

from .errors import DivergentTailError, ParameterRangeError

FAMILIES = (
    "polynomial",
    "log-stretched",
    "stretched-exp",
    "almost-linear",
    "exponential-control",
    "gaussian-control",
    "table",
)

# Doubling the quadrature horizon stops once the analytic tail remainder is
# this small relative to the accumulated integral.
_REMAINDER_REL = 1e-8


@dataclass(frozen=True)
class TailProfile:
    """A radial tail b(s), constant on [0, rho] and strictly decreasing beyond.

    Use :func:`build_profile` instead of constructing directly; it validates
    parameter ranges and locates ``rho``.
    """

    family: str
    params: dict
    rho: float
    inner_log: float  # log b(rho), the constant level on [0, rho]

    # -- evaluation ----------------------------------------------------------

    def log_value(self, s):
        """log b(s) for s >= 0 (scalar or array)."""
        s = np.asarray(s, dtype=float)
        floor = max(self.rho, self._formula_floor())
        safe = np.maximum(s, floor)
        out = np.where(s < self.rho, self.inner_log, self._log_formula(safe))
        return out if out.ndim else float(out)

    def value(self, s):
        """b(s) for s >= 0 (scalar or array); underflows cleanly to 0."""
        with np.errstate(under="ignore"):
            return np.exp(self.log_value(s))

    def __call__(self, s):
        return self.value(s)

    # -- family formulas -----------------------------------------------------

    def _formula_floor(self) -> float:
        if self.family in ("log-stretched", "almost-linear"):
            return 1.0 + 1e-12
        if self.family == "stretched-exp" and self.params.get("nu", 0.0) < 0:
            return 1e-300
        return 0.0

    def _log_formula(self, s):
        p = self.params
        fam = self.family
        if fam == "polynomial":
            return math.log(p["M"]) - p["exponent"] * np.log1p(s)
        if fam == "log-stretched":
            ls = np.log(s)
            out = math.log(p["scale"]) - p["c"] * ls ** (1.0 + p["delta"])
            if p["nu"] != 0.0:
                out = out + p["nu"] * ls
            return out
        if fam == "stretched-exp":
            out = math.log(p["scale"]) - p["c"] * s ** p["gamma"]
            if p["nu"] != 0.0:
                out = out + p["nu"] * np.log(s)
            return out
        if fam == "almost-linear":
            ls = np.log(s)
            return math.log(p["scale"]) - p["c"] * s / ls ** p["lam"]
        if fam == "exponential-control":
            return math.log(p["scale"]) - p["rate"] * s
        if fam == "gaussian-control":
            return math.log(p["scale"]) - p["rate"] * s * s
        if fam == "table":
            return self._log_table(s)
        raise ParameterRangeError(f"unknown family {fam!r}")

    def _log_table(self, s):
        knots = np.asarray(self.params["s_knots"], dtype=float)
        logs = np.asarray(self.params["log_values"], dtype=float)
        # log-linear inside the table, exponential continuation of the last
        # segment beyond it (keeps the profile positive and decreasing)
        out = np.interp(s, knots, logs)
        slope = (logs[-1] - logs[-2]) / (knots[-1] - knots[-2])
        beyond = s > knots[-1]
        out = np.where(beyond, logs[-1] + slope * (s - knots[-1]), out)
        return out

    # -- calculus helpers ----------------------------------------------------

    def inverse(self, log_target: float) -> float:
        """Abscissa s >= rho with log b(s) = log_target (b strictly decreasing).

        Raises ValueError if log_target is above log b(rho).
        """
        if log_target > self.inner_log:
            raise ValueError("target above the maximum of the profile")
        if log_target == self.inner_log:
            return self.rho
        lo = max(self.rho, self._formula_floor())
        hi = max(2.0 * lo, 2.0)
        while self.log_value(hi) > log_target:
            hi *= 2.0
            if hi > 1e300:
                raise ValueError("target not reached; profile decays too slowly")
        f = lambda s: self.log_value(s) - log_target
        return float(optimize.brentq(f, lo, hi, rtol=1e-13, maxiter=200))

    def tail_integral(self, r: float, weight_power: int) -> float:
        """integral_r^inf b(s) s^p ds with p = weight_power in {0, 1}.

        Adaptive quadrature up to a horizon S plus a family-specific analytic
        remainder; S doubles until the remainder drops below 1e-8 of the total.
        """
        return _tail_integral(self, r, weight_power)

    def scaled(self, factor: float) -> "TailProfile":
        """Profile multiplied by a constant factor (no revalidation of b<=1)."""
        shift = math.log(factor)
        p = dict(self.params)
        if self.family == "polynomial":
            p["M"] = p["M"] * factor
        elif self.family == "table":
            p["log_values"] = tuple(v + shift for v in p["log_values"])
        else:
            p["scale"] = p["scale"] * factor
        return replace(self, params=p, inner_log=self.inner_log + shift)


@dataclass(frozen=True)
class Kernel:
    """Normalized dispersal density a(x) = b(|x|) / Z in dimension dim."""

    profile: TailProfile
    dim: int
    normalizer: float  # Z = surface(S^{d-1}) * int_0^inf b(s) s^{d-1} ds

    def log_density_radius(self, s):
        return self.profile.log_value(s) - math.log(self.normalizer)

    def density_radius(self, s):
        """a at radius s (scalar or array)."""
        with np.errstate(under="ignore"):
            return np.exp(self.log_density_radius(s))

    def density(self, *coords):
        """a(x) for coordinate arrays (one per axis)."""
        r = np.sqrt(sum(np.asarray(c, dtype=float) ** 2 for c in coords))
        return self.density_radius(r)

    def tail_mass_1d(self, r: float) -> float:
        """integral_r^inf a(s) ds for a one-dimensional kernel."""
        if self.dim != 1:
            raise ValueError("tail_mass_1d is defined for dim=1 kernels")
        return self.profile.tail_integral(r, 0) / self.normalizer


# ---------------------------------------------------------------------------
# construction


def build_profile(family: str, **params) -> TailProfile:
    """Construct a validated tail profile.

    Family parameters (all floats unless noted):

    - polynomial: M > 0 and either ``exponent`` > 0 directly, or ``mu`` > 0
      with ``dim`` so that exponent = dim + mu; b(s) = M (1+s)^(-exponent).
    - log-stretched: c > 0, delta > 0, nu, scale; b = scale * s^nu *
      exp(-c (log s)^(1+delta)).
    - stretched-exp: c > 0, gamma in (0,1), nu, scale; b = scale * s^nu *
      exp(-c s^gamma).
    - almost-linear: lam > 1, c > 0, scale; b = scale * exp(-c s / (log s)^lam).
    - exponential-control: rate > 0, scale; b = scale * exp(-rate s).
    - gaussian-control: rate > 0, scale; b = scale * exp(-rate s^2).
    - table: s_knots (increasing), values (positive, decreasing, <= 1).

    The tail-start abscissa rho is the smallest point from which the formula
    is decreasing with b <= 1; the profile is constant b(rho) on [0, rho].
    """
    if family not in FAMILIES:
        raise ParameterRangeError(f"unknown family {family!r}")
    p = _fill_defaults(family, params)
    _validate(family, p)
    prof = TailProfile(family=family, params=p, rho=0.0, inner_log=0.0)
    rho = _locate_rho(prof)
    inner_log = float(
        TailProfile(family, p, rho, 0.0)._log_formula(
            np.asarray(max(rho, prof._formula_floor()))
        )
    )
    out = TailProfile(family=family, params=p, rho=rho, inner_log=inner_log)
    _check_decreasing(out)
    return out


def _fill_defaults(family, params):
    p = dict(params)
    if family == "polynomial":
        p.setdefault("M", 1.0)
        if "exponent" not in p:
            if "mu" not in p or "dim" not in p:
                raise ParameterRangeError(
                    "polynomial profile needs exponent, or mu together with dim"
                )
            p["exponent"] = float(p.pop("dim")) + float(p.pop("mu"))
        else:
            p.pop("mu", None)
            p.pop("dim", None)
    elif family == "log-stretched":
        p.setdefault("c", 1.0)
        p.setdefault("nu", 0.0)
        p.setdefault("scale", 1.0)
    elif family == "stretched-exp":
        p.setdefault("c", 1.0)
        p.setdefault("nu", 0.0)
        p.setdefault("scale", 1.0)
    elif family == "almost-linear":
        p.setdefault("c", 1.0)
        p.setdefault("scale", 1.0)
    elif family in ("exponential-control", "gaussian-control"):
        p.setdefault("rate", 1.0)
        p.setdefault("scale", 1.0)
    elif family == "table":
        s = np.asarray(p.get("s_knots", ()), dtype=float)
        v = np.asarray(p.get("values", ()), dtype=float)
        if s.size < 2 or s.size != v.size:
            raise ParameterRangeError("table profile needs matching s_knots/values")
        p = {
            "s_knots": tuple(s.tolist()),
            "log_values": tuple(np.log(v).tolist()),
        }
    return p


def _validate(family, p):
    def positive(name):
        if not (p[name] > 0):
            raise ParameterRangeError(f"{family}: {name} must be > 0, got {p[name]}")

    if family == "polynomial":
        positive("M")
        positive("exponent")
    elif family == "log-stretched":
        positive("c")
        positive("scale")
        if not (p["delta"] > 0):
            raise ParameterRangeError("log-stretched: delta must be > 0")
    elif family == "stretched-exp":
        positive("c")
        positive("scale")
        if not (0.0 < p["gamma"] < 1.0):
            raise ParameterRangeError("stretched-exp: gamma must lie in (0, 1)")
    elif family == "almost-linear":
        positive("c")
        positive("scale")
        if not (p["lam"] > 1.0):
            raise ParameterRangeError("almost-linear: lam must be > 1")
    elif family in ("exponential-control", "gaussian-control"):
        positive("rate")
        positive("scale")
    elif family == "table":
        s = np.asarray(p["s_knots"])
        v = np.asarray(p["log_values"])
        if np.any(np.diff(s) <= 0):
            raise ParameterRangeError("table: s_knots must be strictly increasing")
        if np.any(np.diff(v) >= 0):
            raise ParameterRangeError("table: values must be strictly decreasing")
        if v[0] > 0:
            raise ParameterRangeError("table: values must not exceed 1")


def _locate_rho(prof: TailProfile) -> float:
    """Smallest abscissa where the raw formula is decreasing and <= 1."""
    fam, p = prof.family, prof.params
    if fam == "polynomial":
        M, q = p["M"], p["exponent"]
        return 0.0 if M <= 1.0 else M ** (1.0 / q) - 1.0
    if fam == "stretched-exp":
        c, g, nu = p["c"], p["gamma"], p["nu"]
        start = 0.0 if nu <= 0 else (nu / (c * g)) ** (1.0 / g)
        return _first_below_one(prof, start)
    if fam == "log-stretched":
        c, d, nu = p["c"], p["delta"], p["nu"]
        start = 1.0 if nu <= 0 else max(1.0, math.exp((nu / (c * (1 + d))) ** (1 / d)))
        return _first_below_one(prof, start)
    if fam == "almost-linear":
        # the formula peaks where s / (log s)^lam is smallest, at s = e^lam
        start = math.exp(p["lam"])
        return _first_below_one(prof, start)
    if fam in ("exponential-control", "gaussian-control"):
        return _first_below_one(prof, 0.0)
    if fam == "table":
        return float(p["s_knots"][0])
    raise ParameterRangeError(fam)


def _first_below_one(prof: TailProfile, start: float) -> float:
    floor = prof._formula_floor()
    s0 = max(start, floor)
    if prof._log_formula(np.asarray(s0)) <= 0.0:
        return start
    hi = max(2.0 * s0, 2.0)
    while prof._log_formula(np.asarray(hi)) > 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise ParameterRangeError("profile never drops below 1")
    f = lambda s: float(prof._log_formula(np.asarray(s)))
    return float(optimize.brentq(f, s0, hi, rtol=1e-13, maxiter=200))


def _check_decreasing(prof: TailProfile) -> None:
    lo = max(prof.rho, prof._formula_floor(), 1e-9)
    s = np.geomspace(lo + 1e-9, max(1e6, 100 * (lo + 1)), 40)
    lv = prof.log_value(s)
    if np.any(np.diff(lv) >= 0):
        raise ParameterRangeError(
            f"{prof.family}: formula is not decreasing beyond rho={prof.rho}"
        )


def power_profile(prof: TailProfile, alpha: float) -> TailProfile:
    """The profile b(s)^alpha, alpha > 0, as a member of the same family."""
    if alpha <= 0:
        raise ParameterRangeError("alpha must be > 0")
    p = dict(prof.params)
    fam = prof.family
    if fam == "polynomial":
        p["M"] = p["M"] ** alpha
        p["exponent"] = p["exponent"] * alpha
    elif fam == "log-stretched":
        p["scale"] = p["scale"] ** alpha
        p["c"] = p["c"] * alpha
        p["nu"] = p["nu"] * alpha
    elif fam == "stretched-exp":
        p["scale"] = p["scale"] ** alpha
        p["c"] = p["c"] * alpha
        p["nu"] = p["nu"] * alpha
    elif fam == "almost-linear":
        p["scale"] = p["scale"] ** alpha
        p["c"] = p["c"] * alpha
    elif fam in ("exponential-control", "gaussian-control"):
        p["scale"] = p["scale"] ** alpha
        p["rate"] = p["rate"] * alpha
    elif fam == "table":
        p["log_values"] = tuple(alpha * v for v in p["log_values"])
    return build_profile(fam, **{k: v for k, v in p.items()}) if fam != "table" else (
        TailProfile(fam, p, prof.rho, alpha * prof.inner_log)
    )


# ---------------------------------------------------------------------------
# evaluation / normalization


def eval_tail(profile: TailProfile, s) -> float:
    """b(s) per the family formula, the constant inner value on [0, rho]."""
    return profile.value(s)


def surface_measure(dim: int) -> float:
    """Surface of the unit sphere in R^dim (2 for d=1, 2*pi for d=2)."""
    if dim == 1:
        return 2.0
    if dim == 2:
        return 2.0 * math.pi
    raise ParameterRangeError("only dimensions 1 and 2 are supported")


def normalize_kernel(profile: TailProfile, dim: int) -> Kernel:
    """Kernel a(x) = b(|x|)/Z with Z from adaptive radial quadrature.

    Raises DivergentTailError when the radial integral does not converge
    (polynomial exponent <= dim).
    """
    if dim not in (1, 2):
        raise ParameterRangeError("dim must be 1 or 2")
    if profile.family == "polynomial" and profile.params["exponent"] <= dim:
        raise DivergentTailError(
            f"polynomial exponent {profile.params['exponent']} <= dim {dim}"
        )
    z = surface_measure(dim) * _tail_integral(profile, 0.0, dim - 1)
    if not np.isfinite(z) or z <= 0:
        raise DivergentTailError("radial integral did not converge")
    return Kernel(profile=profile, dim=dim, normalizer=z)


def _tail_integral(prof: TailProfile, r: float, p: int) -> float:
    if p not in (0, 1):
        raise ParameterRangeError("weight_power must be 0 or 1")
    if prof.family == "polynomial" and prof.params["exponent"] <= p + 1:
        raise DivergentTailError("polynomial tail integral diverges")
    r = float(r)
    total = 0.0
    lo = r
    # constant inner segment integrates in closed form
    if r < prof.rho:
        iv = math.exp(prof.inner_log)
        total += iv * (prof.rho ** (p + 1) - r ** (p + 1)) / (p + 1)
        lo = prof.rho
    S = max(2.0 * lo, 64.0)
    total += _quad_geom(prof, lo, S, p)
    for _ in range(200):
        rem = _analytic_remainder(prof, S, p)
        if rem <= _REMAINDER_REL * (total + rem):
            return total + rem
        total += _quad_geom(prof, S, 2.0 * S, p)
        S *= 2.0
    raise DivergentTailError("tail remainder did not converge")


def _quad_geom(prof: TailProfile, a: float, b: float, p: int) -> float:
    """Quadrature of b(s) s^p over [a, b], split geometrically for wide spans."""
    if b <= a:
        return 0.0
    f = lambda s: float(prof.value(s)) * s ** p
    pieces = []
    left = a
    while left < b:
        right = min(b, max(2.0 * left, left + 64.0))
        pieces.append((left, right))
        left = right
    out = 0.0
    for lo, hi in pieces:
        val, _ = integrate.quad(f, lo, hi, limit=200, epsabs=1e-14, epsrel=1e-11)
        out += val
    return out


def _analytic_remainder(prof: TailProfile, S: float, p: int) -> float:
    """Leading analytic estimate of integral_S^inf b(s) s^p ds."""
    fam, par = prof.family, prof.params
    with np.errstate(under="ignore"):
        bS = float(prof.value(S))
    if fam == "polynomial":
        M, q = par["M"], par["exponent"]
        if p == 0:
            return M * (1.0 + S) ** (1.0 - q) / (q - 1.0)
        return M * (
            (1.0 + S) ** (2.0 - q) / (q - 2.0) - (1.0 + S) ** (1.0 - q) / (q - 1.0)
        )
    if fam == "stretched-exp":
        c, g, nu, sc = par["c"], par["gamma"], par["nu"], par["scale"]
        a = (nu + p + 1.0) / g
        if a > 0:
            x = c * S ** g
            return sc / g * c ** (-a) * float(special.gammaincc(a, x)) * math.gamma(a)
        return bS * S ** (p + 1.0 - g) / (c * g)
    if fam == "log-stretched":
        c, d, nu = par["c"], par["delta"], par["nu"]
        denom = c * (1.0 + d) * math.log(S) ** d - (nu + p)
        return math.inf if denom <= 1.0 else bS * S ** (p + 1) / denom
    if fam == "almost-linear":
        c, lam = par["c"], par["lam"]
        ls = math.log(S)
        rate = c * ls ** (-lam) * (1.0 - lam / ls)
        return math.inf if rate <= 0 else bS * S ** p / rate
    if fam == "exponential-control":
        r = par["rate"]
        if p == 0:
            return bS / r
        return bS * (S / r + 1.0 / r ** 2)
    if fam == "gaussian-control":
        r = par["rate"]
        if p == 0:
            return par["scale"] * 0.5 * math.sqrt(math.pi / r) * float(
                special.erfc(math.sqrt(r) * S)
            )
        return bS / (2.0 * r)
    if fam == "table":
        knots = par["s_knots"]
        logs = par["log_values"]
        slope = (logs[-1] - logs[-2]) / (knots[-1] - knots[-2])
        k = -slope
        if k <= 0:
            return math.inf
        if p == 0:
            return bS / k
        return bS * (S / k + 1.0 / k ** 2)
    raise ParameterRangeError(fam)


# ---------------------------------------------------------------------------
# tail classification


@dataclass(frozen=True)
class TailClassReport:
    """Finite-horizon surrogate verdicts for the asymptotic tail classes.

    ``long_tailed`` and ``log_convex`` are evaluated on [rho, horizon] with
    the stated tolerance; they stand in for limits at infinity and are exact
    only in that surrogate sense.  ``integrable`` records whether the radial
    integral converges for the given dimension.
    """

    long_tailed: bool
    log_convex: bool
    integrable: bool
    horizon: float
    tolerance: float
    ratio_at_horizon: float
    min_log_second_difference: float
    note: str = (
        "finite-horizon surrogate for asymptotic tail definitions; "
        "verdicts are relative to the stated horizon and tolerance"
    )


def classify_tail(
    profile: TailProfile, horizon: float, tolerance: float, dim: int = 1
) -> TailClassReport:
    """Classify a profile as long-tailed / tail-log-convex on a finite horizon.

    long-tailed surrogate: b(S+tau)/b(S) within [1-tol, 1] for tau in {1,2,4}
    at S = horizon, with the shift ratio nondecreasing along a geometric
    ladder of s.  log-convex surrogate: second central differences of log b
    are >= -tol on a geometric grid of (rho, horizon].
    """
    S = float(horizon)
    if S <= 2.0 * max(profile.rho, 1.0):
        raise ParameterRangeError("horizon must exceed twice the tail start")
    lo = max(profile.rho, profile._formula_floor(), 1e-6)
    ladder = np.geomspace(max(2.0 * lo, 4.0), S, 24)

    long_tailed = True
    worst_ratio = 1.0
    for tau in (1.0, 2.0, 4.0):
        ratios = np.exp(profile.log_value(ladder + tau) - profile.log_value(ladder))
        end = float(ratios[-1])
        worst_ratio = min(worst_ratio, end)
        if not (1.0 - tolerance <= end <= 1.0 + 1e-12):
            long_tailed = False
        # the shift ratio must trend upward along the ladder (dips within
        # tolerance are allowed; some admissible families dip near the start)
        if np.any(np.diff(ratios) < -tolerance):
            long_tailed = False

    grid = np.geomspace(max(lo + 1.0, 2.0 * lo), S, 48)
    dstep = np.maximum(1.0, 1e-3 * grid)
    second = (
        profile.log_value(grid + dstep)
        + profile.log_value(np.maximum(grid - dstep, lo))
        - 2.0 * profile.log_value(grid)
    )
    min_second = float(np.min(second))
    log_convex = bool(min_second >= -tolerance)

    try:
        _tail_integral(profile, 0.0, dim - 1)
        integrable = True
    except DivergentTailError:
        integrable = False

    return TailClassReport(
        long_tailed=long_tailed,
        log_convex=log_convex,
        integrable=integrable,
        horizon=S,
        tolerance=tolerance,
        ratio_at_horizon=worst_ratio,
        min_log_second_difference=min_second,
    )


def log_equivalent(
    p1: TailProfile, p2: TailProfile, horizon: float, tolerance: float
) -> bool:
    """True when log b1 / log b2 is within ``tolerance`` of 1 at the horizon
    and the deviation is non-worsening over the top decade of the ladder.

    The trend condition accepts transient prefactors (their deviation washes
    out like 1/|log b|) while rejecting genuinely different decay orders,
    whose deviation grows with s.
    """
    pts = np.array([horizon / 10.0, horizon / 3.0, horizon])
    l1 = np.asarray(p1.log_value(pts), dtype=float)
    l2 = np.asarray(p2.log_value(pts), dtype=float)
    if np.any(l2 >= 0.0) or np.any(l1 >= 0.0):
        return False
    # symmetric normalization keeps the verdict direction-independent
    dev = np.abs(l1 - l2) / np.maximum(np.abs(l1), np.abs(l2))
    if dev[-1] > tolerance:
        return False
    return bool(dev[2] <= dev[1] * 1.05 + 1e-15 and dev[1] <= dev[0] * 1.05 + 1e-15)
