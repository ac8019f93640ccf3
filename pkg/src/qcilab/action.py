"""Action function on the microlocally forbidden region.

The tunneling cost S(x) is the 1D turning-point integral of the momentum
deficit sqrt(D(s)) from the nearest caustic. The square-root endpoint
singularity is removed once and for all by the substitution s = root + t^2
(which also handles odd multiplicities 2k+1: the integrand then carries
t^{2k+2} times an analytic factor), and the smooth result is integrated by
adaptive Gauss-Legendre to a relative tolerance of 1e-10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

from .classical import EnergyPair
from .errors import (AllowedRegion, InsufficientSamples, NegativeIntegrand,
                     PreconditionError, QuadratureStall)
from .models import (HarmonicOscillator, LiouvilleData, RevolutionProfile)

NEG_TOL = 1e-12
DEFAULT_REL_TOL = 1e-10
_GL_NODES, _GL_WEIGHTS = leggauss(24)


@dataclass(frozen=True)
class TurningPointData:
    """Sorted odd-multiplicity roots plus the momentum-deficit integrand D(s)."""

    roots: tuple[tuple[float, int], ...]  # (location, multiplicity)
    integrand: Callable[[np.ndarray], np.ndarray] = field(compare=False)

    def __post_init__(self):
        locs = [r for r, _ in self.roots]
        if locs != sorted(locs):
            raise PreconditionError("roots must be sorted by location")
        if any(m < 1 or m % 2 == 0 for _, m in self.roots):
            raise PreconditionError("multiplicities must be odd positive integers")


@dataclass(frozen=True)
class ActionField:
    """Sampled S over forbidden-region points, with turning-point metadata."""

    xs: np.ndarray          # sample coordinates (1D) or (n, 2) pairs
    s_values: np.ndarray
    dist_to_caustic: np.ndarray
    err_estimates: np.ndarray
    caustic_ref: float
    branch: str = "plus"
    flags: tuple[str, ...] = ()


def _adaptive_gl(g, a: float, b: float, rel_tol: float) -> tuple[float, float]:
    """Globally adaptive Gauss-Legendre; returns (integral, error estimate)."""
    if a == b:
        return 0.0, 0.0

    def panel(lo, hi):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        return half * float(np.dot(_GL_WEIGHTS, g(mid + half * _GL_NODES)))

    total = panel(a, b)
    stack = [(a, b, total, 0)]
    acc = 0.0
    err = 0.0
    max_depth = 48
    while stack:
        lo, hi, whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = panel(lo, mid)
        right = panel(mid, hi)
        delta = left + right - whole
        scale = max(abs(total), abs(acc) + abs(whole), 1e-300)
        if abs(delta) <= rel_tol * scale or depth >= max_depth:
            if depth >= max_depth and abs(delta) > 1e3 * rel_tol * scale:
                raise QuadratureStall(
                    f"tolerance {rel_tol:g} unreached at depth {depth}")
            acc += left + right
            err += abs(delta)
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
    return acc, err


def _turning_integral(D, root: float, x: float, rel_tol: float) -> tuple[float, float]:
    """integral_root^x sqrt(D(s)) ds with the s = root + t^2 substitution."""
    d = x - root
    if d == 0.0:
        return 0.0, 0.0
    sgn = math.copysign(1.0, d)
    tmax = math.sqrt(abs(d))

    def g(t):
        t = np.asarray(t, dtype=float)
        s = root + sgn * t * t
        vals = np.asarray(D(s), dtype=float)
        if float(vals.min()) < -NEG_TOL:
            raise NegativeIntegrand(
                f"D={float(vals.min()):.3e} on the integration path")
        return 2.0 * t * np.sqrt(np.maximum(vals, 0.0))

    return _adaptive_gl(g, 0.0, tmax, rel_tol)


def action_1d(tp: TurningPointData, x: float, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Turning-point action at x, measured from the nearest admissible root."""
    s, _ = action_1d_with_error(tp, x, rel_tol)
    return s


def action_1d_with_error(tp: TurningPointData, x: float,
                         rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    if not tp.roots:
        raise PreconditionError("no turning points")
    # nearest root with no other root strictly between it and x
    candidates = []
    for loc, mult in tp.roots:
        lo, hi = min(loc, x), max(loc, x)
        if any(lo < other < hi for other, _ in tp.roots if other != loc):
            continue
        candidates.append((abs(x - loc), loc, mult))
    if not candidates:
        raise PreconditionError("x is separated from every root by another root")
    _, root, _ = min(candidates)
    return _turning_integral(tp.integrand, root, x, rel_tol)


# ---------------------------------------------------------------------------
# model-specific actions
# ---------------------------------------------------------------------------

NEAR_POLE_F = 1e-3
POLE_TRUNCATION = 1e-3  # integration never proceeds past |r| = 1 - this


def _sor_caustic(profile: RevolutionProfile, e2: float, side: int) -> float:
    """Root of f(r) = |e2| on the given side of the equator (side = +-1)."""
    target = abs(e2)

    def g(r):
        return float(profile.f(r)) - target

    return brentq(g, 0.0 if side > 0 else -(1.0 - 1e-15),
                  (1.0 - 1e-15) if side > 0 else 0.0, xtol=1e-15, rtol=1e-15)


def sor_action(profile: RevolutionProfile, e2: float, r: float,
               rel_tol: float = DEFAULT_REL_TOL) -> float:
    s, _, _ = sor_action_detail(profile, e2, r, rel_tol)
    return s


def sor_action_detail(profile: RevolutionProfile, e2: float, r: float,
                      rel_tol: float = DEFAULT_REL_TOL):
    """(S, error estimate, flags) for the radial tunneling integral.

    S(r) = integral_{r_c}^{r} sqrt(e2^2 / f(s)^2 - 1) ds on the forbidden side
    f(r) < |e2|, with r_c the caustic between r and the allowed region.
    """
    if not 0.0 < abs(e2) < profile.f_max:
        raise PreconditionError(f"need 0 < |e2| < f(0) = {profile.f_max}")
    if abs(r) >= 1.0:
        raise PreconditionError("r outside the open chart")
    fr = float(profile.f(r))
    if fr >= abs(e2):
        raise AllowedRegion(f"f({r}) = {fr:.6g} >= |e2| = {abs(e2):.6g}")
    flags: list[str] = []
    if fr < NEAR_POLE_F:
        flags.append("NearPole")
    side = 1 if r > 0 else -1
    r_end = r
    limit = 1.0 - POLE_TRUNCATION
    if abs(r) > limit:
        r_end = math.copysign(limit, r)
        flags.append("Truncated")

    def D(s):
        f = np.asarray(profile.f(s), dtype=float)
        return (e2 * e2) / (f * f) - 1.0

    rc = _sor_caustic(profile, e2, side)
    val, err = _turning_integral(D, rc, r_end, rel_tol)
    return val, err, tuple(flags)


def _forbidden_interval(deficit, x: float, n: int = 8192) -> tuple[float, float]:
    """Periodic-interval (lo, hi) containing x on which deficit > 0."""
    xs = np.linspace(0.0, 1.0, n, endpoint=False)
    vals = np.asarray(deficit(xs), dtype=float)
    xm = x % 1.0
    if float(vals.max()) <= 0.0:
        raise AllowedRegion("deficit nonpositive everywhere")
    if float(vals.min()) >= 0.0:
        raise PreconditionError("variable forbidden everywhere (empty torus)")
    # walk left and right from x to the bracketing sign changes
    def find_edge(direction: int) -> float:
        step = 1.0 / n
        cur = xm
        for _ in range(2 * n):
            nxt = cur + direction * step
            if float(deficit(nxt % 1.0)) <= 0.0:
                lo, hi = (cur, nxt) if direction > 0 else (nxt, cur)
                return brentq(lambda s: float(deficit(s % 1.0)), lo, hi,
                              xtol=1e-15, rtol=1e-15)
            cur = nxt
        raise AllowedRegion("no caustic found")

    return find_edge(-1), find_edge(+1)


def liouville_action(data: LiouvilleData, energy: EnergyPair, x,
                     rel_tol: float = DEFAULT_REL_TOL) -> float:
    s, _ = liouville_action_detail(data, energy, x, rel_tol)
    return s


def liouville_action_detail(data: LiouvilleData, energy: EnergyPair, x,
                            rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    """Separable action S(x1, x2) = S_a(x1) + S_b(x2).

    Each variable in its forbidden range contributes the turning-point
    integral of its own momentum deficit, measured from the nearest caustic
    (minimum over the two edges of the forbidden interval).
    """
    x1, x2 = float(x[0]), float(x[1])
    e1, e2 = energy.e1, energy.e2

    def deficit_a(s):
        return -(e1 * data.a(s) + e2)

    def deficit_b(s):
        return e2 - e1 * data.b(s)

    total = 0.0
    err_total = 0.0
    contributed = False
    for deficit, xv in ((deficit_a, x1), (deficit_b, x2)):
        if float(deficit(xv % 1.0)) <= 0.0:
            continue
        contributed = True
        lo, hi = _forbidden_interval(deficit, xv)
        xm = xv % 1.0
        if not lo <= xm <= hi:
            xm += 1.0 if xm < lo else -1.0

        def Dper(s):
            return np.asarray(deficit(np.asarray(s) % 1.0), dtype=float)

        s_lo, e_lo = _turning_integral(Dper, lo, xm, rel_tol)
        s_hi, e_hi = _turning_integral(Dper, hi, xm, rel_tol)
        s_hi = abs(s_hi)
        if s_lo <= s_hi:
            total += s_lo
            err_total += e_lo
        else:
            total += s_hi
            err_total += e_hi
    if not contributed:
        raise AllowedRegion("both separated fibers are real at x")
    return total, err_total


def ho_turning_points(energy: float) -> TurningPointData:
    root = math.sqrt(energy)
    return TurningPointData(((-root, 1), (root, 1)),
                            lambda s: np.asarray(s, dtype=float) ** 2 - energy)


# ---------------------------------------------------------------------------
# field builders and the fold-exponent fit
# ---------------------------------------------------------------------------

def log_spaced_distances(lo: float, hi: float, per_decade: int = 16) -> np.ndarray:
    decades = math.log10(hi / lo)
    n = max(int(math.ceil(decades * per_decade)) + 1, 2)
    return np.logspace(math.log10(lo), math.log10(hi), n)


def sor_action_field(profile: RevolutionProfile, e2: float,
                     distances: Sequence[float], side: int = 1) -> ActionField:
    rc = _sor_caustic(profile, e2, side)
    xs, svals, errs = [], [], []
    flags: set[str] = set()
    for d in distances:
        r = rc + side * d
        val, err, fl = sor_action_detail(profile, e2, r)
        xs.append(r)
        svals.append(val)
        errs.append(err)
        flags.update(fl)
    return ActionField(np.asarray(xs), np.asarray(svals),
                       np.asarray(np.abs(np.asarray(xs) - rc)),
                       np.asarray(errs), rc, flags=tuple(sorted(flags)))


def ho_action_field(energy: float, distances: Sequence[float]) -> ActionField:
    tp = ho_turning_points(energy)
    rc = math.sqrt(energy)
    xs = rc + np.asarray(distances, dtype=float)
    pairs = [action_1d_with_error(tp, float(x)) for x in xs]
    return ActionField(xs, np.asarray([p[0] for p in pairs]),
                       np.abs(xs - rc), np.asarray([p[1] for p in pairs]), rc)


def synthetic_action_field(root: float, multiplicity: int,
                           distances: Sequence[float]) -> ActionField:
    """Field of a pure-power integrand (s - root)^multiplicity past the root."""
    tp = TurningPointData(((root, multiplicity),),
                          lambda s: (np.asarray(s, dtype=float) - root) ** multiplicity)
    xs = root + np.asarray(distances, dtype=float)
    pairs = [action_1d_with_error(tp, float(x)) for x in xs]
    return ActionField(xs, np.asarray([p[0] for p in pairs]),
                       np.abs(xs - root), np.asarray([p[1] for p in pairs]), root)


def liouville_action_field(data: LiouvilleData, energy: EnergyPair,
                           points: Sequence[tuple[float, float]]) -> ActionField:
    pts = np.asarray(points, dtype=float)
    pairs = [liouville_action_detail(data, energy, p) for p in pts]
    dists = np.full(len(pts), math.nan)  # per-point caustic distance is per-variable
    return ActionField(pts, np.asarray([p[0] for p in pairs]), dists,
                       np.asarray([p[1] for p in pairs]), math.nan)


@dataclass(frozen=True)
class FoldFit:
    exponent: float           # slope over the smallest window
    trend: float              # Richardson-style extrapolation across windows
    window_slopes: tuple[tuple[float, float], ...]  # (window upper edge, slope)


def fold_exponent_fit(field: ActionField, caustic_locus: float,
                      window_widths: Sequence[float],
                      min_per_decade: int = 8) -> FoldFit:
    """Log-log slope of S against distance-to-caustic over shrinking windows.

    Each width w defines the window [w/100, w] (two decades). The smallest
    window's slope is the reported exponent; the cross-window Richardson
    trend is attached for convergence reporting.
    """
    xs = np.asarray(field.xs, dtype=float)
    if xs.ndim != 1:
        raise PreconditionError("fold fit needs a 1D action field")
    dist = np.abs(xs - caustic_locus)
    svals = np.asarray(field.s_values, dtype=float)
    slopes: list[tuple[float, float]] = []
    for w in sorted(window_widths, reverse=True):
        lo, hi = w / 100.0, w
        mask = (dist >= lo) & (dist <= hi) & (svals > 0.0)
        count = int(mask.sum())
        if count < 2 * min_per_decade:
            raise InsufficientSamples(
                f"{count} samples in window [{lo:g}, {hi:g}], need {2 * min_per_decade}")
        slope, _ = np.polyfit(np.log(dist[mask]), np.log(svals[mask]), 1)
        slopes.append((w, float(slope)))
    slopes_small_first = sorted(slopes)
    exponent = slopes_small_first[0][1]
    if len(slopes_small_first) > 1:
        trend = exponent + (exponent - slopes_small_first[1][1])
    else:
        trend = exponent
    return FoldFit(exponent, trend, tuple(slopes))
