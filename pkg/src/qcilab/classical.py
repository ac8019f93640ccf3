"""Classical integrable-system layer.

Computes Lagrangian torus fibers over base points, classifies the torus
projection (regular graph / fold caustic / degenerate / empty) from the
root structure of the separated discriminants, runs the Morse check of the
second symbol restricted to fiber energy shells, and samples the moment-map
image.

All separated discriminants are smooth closed forms, so roots are located by
dense sign scans polished with Brent's method, and simplicity of a root is
decided by |discriminant'| at the root (threshold 1e-8; below that the
classification is Degenerate).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import (EmptyShell, NotRegularLevel, OutOfChart, PoleSingularity,
                     PreconditionError, Unsupported)
from .models import (HarmonicOscillator, LiouvilleOscillator, LiouvilleTorus,
                     PhasePoint, QciModel, SurfaceOfRevolution, eval_p1, eval_p2)

SIMPLE_ZERO_TOL = 1e-8       # |D'| above this at a root means a simple (fold) zero
DEGENERACY_TOL = 1e-10       # discriminant within this of 0 counts as vanishing
POLE_MARGIN = 1e-6           # morse_check refuses r within this of +-1
FIBER_ROUNDTRIP_TOL = 1e-10


@dataclass(frozen=True)
class EnergyPair:
    e1: float
    e2: float


class Classification(enum.Enum):
    EMPTY = "Empty"
    REGULAR_GRAPH = "RegularGraph"
    FOLD = "Fold"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class CausticLocus:
    axis: str
    value: float
    simple: bool


@dataclass(frozen=True)
class FiberPoints:
    """Real covectors over one base point, with a near-caustic flag."""

    points: tuple[tuple[float, ...], ...]
    degenerate: bool


@dataclass(frozen=True)
class TorusData:
    model: QciModel
    energy: EnergyPair
    caustic_loci: tuple[CausticLocus, ...]
    classification: Classification
    fiber_formula: Callable[[tuple[float, ...]], FiberPoints] = field(compare=False)

    def fiber(self, x) -> FiberPoints:
        return self.fiber_formula(tuple(np.atleast_1d(np.asarray(x, dtype=float))))


@dataclass(frozen=True)
class MorseReport:
    critical_points: tuple[tuple[float, float, float], ...]  # (theta, value, q'')
    is_morse: bool
    min_gap: float


# ---------------------------------------------------------------------------
# separated discriminants
# ---------------------------------------------------------------------------

def _sor_discriminant(model: SurfaceOfRevolution, energy: EnergyPair):
    """F(r) = e1 f(r)^2 - e2^2; fiber over r nonempty iff F >= 0."""
    p = model.profile

    def F(r):
        fr = p.f(r)
        return energy.e1 * fr * fr - energy.e2 ** 2

    def Fp(r):
        return 2.0 * energy.e1 * p.f(r) * p.fprime(r)

    return F, Fp


def _separated_discriminants(model, energy: EnergyPair):
    """Per-axis (name, domain, F, F') with fiber component xi_axis^2 = F."""
    if isinstance(model, LiouvilleTorus):
        d = model.data
        return [
            ("x1", (0.0, 1.0), lambda s: energy.e1 * d.a(s) + energy.e2,
             lambda s: energy.e1 * d.a(s, 1)),
            ("x2", (0.0, 1.0), lambda s: energy.e1 * d.b(s) - energy.e2,
             lambda s: energy.e1 * d.b(s, 1)),
        ]
    if isinstance(model, LiouvilleOscillator):
        d = model.data
        e1, e2 = energy.e1, energy.e2

        def Fa(s):
            return (d.a(s) + 0.5 * e1) ** 2 + e2 - 0.25 * e1 * e1

        def Fap(s):
            return 2.0 * (d.a(s) + 0.5 * e1) * d.a(s, 1)

        def Fb(s):
            return -((d.b(s) - 0.5 * e1) ** 2) + 0.25 * e1 * e1 - e2

        def Fbp(s):
            return -2.0 * (d.b(s) - 0.5 * e1) * d.b(s, 1)

        return [("x1", (0.0, 1.0), Fa, Fap), ("x2", (0.0, 1.0), Fb, Fbp)]
    raise Unsupported(type(model).__name__)


def _scan_roots(F, Fp, lo, hi, n=4096, periodic=False):
    """Roots of F on the interval: (simple roots, tangential touch points)."""
    if periodic:
        xs = np.linspace(lo, hi, n + 1)  # closed scan; duplicates folded below
    else:
        xs = np.linspace(lo, hi, n + 1)
    vals = np.asarray(F(xs), dtype=float)
    dvals = np.asarray(Fp(xs), dtype=float)
    scale = max(1.0, float(np.max(np.abs(vals))))
    roots, touches = [], []
    for i in range(n):
        if vals[i] == 0.0:
            roots.append(float(xs[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(float(brentq(F, xs[i], xs[i + 1], xtol=1e-14, rtol=1e-15)))
        # tangential zeros hide at critical points of F where |F| is tiny
        if dvals[i] * dvals[i + 1] < 0.0:
            xc = float(brentq(Fp, xs[i], xs[i + 1], xtol=1e-14, rtol=1e-15))
            if abs(float(F(xc))) <= 1e-9 * scale:
                touches.append(xc)
    if periodic:
        roots = [r % (hi - lo) + lo for r in roots]
        touches = [t % (hi - lo) + lo for t in touches]
    simple = []
    for r in sorted(set(float(np.round(r, 13)) for r in roots)):
        if abs(float(Fp(r))) > SIMPLE_ZERO_TOL:
            simple.append(r)
        else:
            touches.append(r)
    return simple, sorted(set(float(np.round(t, 13)) for t in touches))


# ---------------------------------------------------------------------------
# fibers
# ---------------------------------------------------------------------------

def torus_fiber(model: QciModel, energy: EnergyPair, x) -> FiberPoints:
    """All real covectors xi over x with joint symbol value (e1, e2).

    Returns 0, 2 or 4 covectors (1 or 2 on a caustic, flagged degenerate).
    For 2D separable models the components are the square roots of the
    per-axis discriminants scaled by the conformal factor where needed.
    """
    if isinstance(model, HarmonicOscillator):
        raise Unsupported("torus_fiber needs a 2D model")
    x = tuple(float(c) for c in np.atleast_1d(np.asarray(x, dtype=float)))
    if isinstance(model, SurfaceOfRevolution):
        r = x[0]
        if not -1.0 < r < 1.0:
            raise OutOfChart(f"r={r}")
        F, _ = _sor_discriminant(model, energy)
        disc = float(F(r))
        if disc < -DEGENERACY_TOL:
            return FiberPoints((), False)
        degen = disc <= DEGENERACY_TOL
        # F = e1 f^2 - e2^2 = f^2 xi_r^2, so xi_r = sqrt(F)/f
        xr = math.sqrt(max(disc, 0.0)) / float(model.profile.f(r))
        pts = ((0.0, energy.e2),) if degen else ((xr, energy.e2), (-xr, energy.e2))
        return FiberPoints(pts, degen)
    # separable torus models
    discs = _separated_discriminants(model, energy)
    comps = []
    degen = False
    vals = [float(discs[0][2](x[0])), float(discs[1][2](x[1]))]
    for v in vals:
        if v < -DEGENERACY_TOL:
            return FiberPoints((), False)
        if v <= DEGENERACY_TOL:
            degen = True
            comps.append((0.0,))
        else:
            root = math.sqrt(v)
            comps.append((root, -root))
    pts = tuple((xi, eta) for xi in comps[0] for eta in comps[1])
    return FiberPoints(pts, degen)


def _check_regular_level(model: QciModel, e1: float) -> None:
    if isinstance(model, (SurfaceOfRevolution, LiouvilleTorus)):
        if e1 <= 0.0:
            raise NotRegularLevel(f"e1={e1} is not a regular value of |xi|^2_g")
        return
    if isinstance(model, LiouvilleOscillator):
        d = model.data
        crit_vals = [bv - av for av in d.a_range for bv in d.b_range]
        if e1 <= min(crit_vals):
            raise NotRegularLevel(f"e1={e1} below the bottom of p1")
        if any(abs(e1 - c) < 1e-8 for c in crit_vals):
            raise NotRegularLevel(f"e1={e1} is a critical value of p1")
        return
    raise Unsupported(type(model).__name__)


def classify_projection(model: QciModel, energy: EnergyPair) -> TorusData:
    """Classify the torus projection from discriminant root structure.

    Empty if the fiber is empty everywhere; RegularGraph if the discriminants
    never vanish; Fold if every vanishing is a simple zero; Degenerate
    otherwise (tangential discriminant zeros).
    """
    _check_regular_level(model, energy.e1)
    loci: list[CausticLocus] = []
    degenerate = False

    if isinstance(model, SurfaceOfRevolution):
        F, Fp = _sor_discriminant(model, energy)
        lo, hi = -1.0 + 1e-9, 1.0 - 1e-9
        xs = np.linspace(lo, hi, 8193)  # odd count so r = 0 is sampled exactly
        vals = np.asarray(F(xs), dtype=float)
        simple, touches = _scan_roots(F, Fp, lo, hi)
        for r in simple:
            loci.append(CausticLocus("r", r, True))
        for r in touches:
            loci.append(CausticLocus("r", r, False))
            degenerate = True
        if not loci and float(vals.max()) < -DEGENERACY_TOL:
            cls = Classification.EMPTY
        elif degenerate:
            cls = Classification.DEGENERATE
        elif loci:
            cls = Classification.FOLD
        else:
            cls = Classification.REGULAR_GRAPH
        return TorusData(model, energy, tuple(loci), cls, _fiber_fn(model, energy))

    discs = _separated_discriminants(model, energy)
    everywhere_empty = False
    for name, (lo, hi), F, Fp in discs:
        xs = np.linspace(lo, hi, 8192, endpoint=False)
        vals = np.asarray(F(xs), dtype=float)
        if float(vals.max()) < -DEGENERACY_TOL:
            everywhere_empty = True
            continue
        simple, touches = _scan_roots(F, Fp, lo, hi, periodic=True)
        for r in simple:
            loci.append(CausticLocus(name, r, True))
        for r in touches:
            loci.append(CausticLocus(name, r, False))
            degenerate = True
    if everywhere_empty:
        cls = Classification.EMPTY
    elif degenerate:
        cls = Classification.DEGENERATE
    elif loci:
        cls = Classification.FOLD
    else:
        cls = Classification.REGULAR_GRAPH
    return TorusData(model, energy, tuple(loci), cls, _fiber_fn(model, energy))


def _fiber_fn(model, energy):
    def fn(x):
        return torus_fiber(model, energy, x)
    return fn


# ---------------------------------------------------------------------------
# fiber shell parametrization and Morse check
# ---------------------------------------------------------------------------

def _shell_q(model: QciModel, x, e1: float) -> Callable[[np.ndarray], np.ndarray]:
    """q(theta) = p2 restricted to the fiber shell p1 = e1 over x.

    Parametrizations follow the trigonometric-circle convention, which makes
    q a trig polynomial of degree <= 2.
    """
    if isinstance(model, HarmonicOscillator):
        raise Unsupported("no second symbol in 1D")
    x = tuple(float(c) for c in np.atleast_1d(np.asarray(x, dtype=float)))
    if e1 <= 0.0 and not isinstance(model, LiouvilleOscillator):
        raise EmptyShell(f"e1={e1}")
    if isinstance(model, SurfaceOfRevolution):
        r = x[0]
        if abs(r) >= 1.0 - POLE_MARGIN:
            raise PoleSingularity(f"r={r} within {POLE_MARGIN} of a pole")
        f = float(model.profile.f(r))
        s = math.sqrt(e1)

        def q(theta):
            return s * f * np.sin(theta)

        return q
    if isinstance(model, LiouvilleTorus):
        a = float(model.data.a(x[0]))
        b = float(model.data.b(x[1]))

        def q(theta):
            c = np.cos(theta)
            s = np.sin(theta)
            return e1 * (b * c * c - a * s * s)

        return q
    if isinstance(model, LiouvilleOscillator):
        a = float(model.data.a(x[0]))
        b = float(model.data.b(x[1]))
        rho2 = (e1 + a - b) * (a + b)
        if rho2 <= 0.0:
            raise EmptyShell(f"shell radius^2 = {rho2:.3e} at x={x}")

        def q(theta):
            c = np.cos(theta)
            s = np.sin(theta)
            return (e1 + a - b) * (b * c * c - a * s * s) - a * b

        return q
    raise Unsupported(type(model).__name__)


def _fourier_derivatives(samples: np.ndarray):
    """Spectral q' and q'' evaluators from uniform circle samples."""
    n = len(samples)
    coef = np.fft.rfft(samples) / n
    ks = np.arange(len(coef))

    def d1(theta):
        theta = np.asarray(theta, dtype=float)
        acc = np.zeros_like(theta)
        for k, c in zip(ks[1:], coef[1:]):
            w = 2.0 if (n % 2 or k < n // 2) else 1.0
            acc = acc + w * k * (-c.real * np.sin(k * theta) - c.imag * np.cos(k * theta))
        return acc

    def d2(theta):
        theta = np.asarray(theta, dtype=float)
        acc = np.zeros_like(theta)
        for k, c in zip(ks[1:], coef[1:]):
            w = 2.0 if (n % 2 or k < n // 2) else 1.0
            acc = acc + w * k * k * (-c.real * np.cos(k * theta) + c.imag * np.sin(k * theta))
        return acc

    return d1, d2


def morse_check(model: QciModel, x, e1: float, n_samples: int = 512) -> MorseReport:
    """Morse check of q = p2 restricted to the fiber shell over x.

    Samples q on n_samples >= 512 circle points, brackets critical points by
    sign changes of the spectral derivative, polishes them with Newton steps,
    and reports second derivatives. is_morse iff all |q''| > 1e-6 * max|q|.
    """
    n_samples = max(n_samples, 512)
    q = _shell_q(model, x, e1)
    thetas = np.linspace(0.0, 2.0 * math.pi, n_samples, endpoint=False)
    vals = np.asarray(q(thetas), dtype=float)
    d1, d2 = _fourier_derivatives(vals)
    dv = d1(thetas)
    crits: list[float] = []
    for i in range(n_samples):
        j = (i + 1) % n_samples
        if dv[i] == 0.0:
            crits.append(thetas[i])
        elif dv[i] * dv[j] < 0.0:
            t = thetas[i] + math.pi / n_samples
            for _ in range(50):  # Newton polish on q'
                g = float(d1(t))
                gg = float(d2(t))
                if gg == 0.0:
                    break
                step = g / gg
                t -= step
                if abs(step) < 1e-14:
                    break
            crits.append(t % (2.0 * math.pi))
    crits = sorted(set(round(t, 12) % (2.0 * math.pi) for t in crits))
    merged: list[float] = []
    for t in crits:
        if not merged or min(abs(t - merged[-1]), 2 * math.pi - abs(t - merged[-1])) > 1e-9:
            merged.append(t)
    if len(merged) >= 2:
        gap = min(abs(merged[0] + 2 * math.pi - merged[-1]), 2 * math.pi)
        if gap <= 1e-9:
            merged.pop()
    points = tuple((t, float(q(np.array(t))), float(d2(t))) for t in merged)
    scale = float(np.max(np.abs(vals)))
    min_gap = min((abs(p[2]) for p in points), default=0.0)
    is_morse = bool(points) and min_gap > 1e-6 * max(scale, 1e-300)
    return MorseReport(points, is_morse, min_gap)


# ---------------------------------------------------------------------------
# moment map image
# ---------------------------------------------------------------------------

def moment_image_sample(model: QciModel, e1: float, n_samples: int = 512) -> tuple[float, float]:
    """Sampled range [min, max] of p2 over the shell p1 = e1."""
    if isinstance(model, HarmonicOscillator):
        raise Unsupported("no second symbol in 1D")
    if n_samples < 100:
        raise PreconditionError("n_samples must be >= 100")
    thetas = np.linspace(0.0, 2.0 * math.pi, 256, endpoint=False)
    lo, hi = math.inf, -math.inf
    if isinstance(model, SurfaceOfRevolution):
        base = [(r,) for r in np.linspace(-1 + 1e-4, 1 - 1e-4, n_samples)]
    else:
        side = max(int(math.isqrt(n_samples)), 10)
        base = [(u, v) for u in np.linspace(0, 1, side, endpoint=False)
                for v in np.linspace(0, 1, side, endpoint=False)]
    for x in base:
        try:
            q = _shell_q(model, x, e1)
        except (EmptyShell, PoleSingularity):
            continue
        vals = np.asarray(q(thetas), dtype=float)
        lo = min(lo, float(vals.min()))
        hi = max(hi, float(vals.max()))
    if not math.isfinite(lo):
        raise EmptyShell(f"p1 = {e1} shell empty over all sampled base points")
    return lo, hi


def fiber_roundtrip_error(model: QciModel, energy: EnergyPair, x) -> float:
    """max over fiber points of |p1 - e1| + |p2 - e2| (0.0 for empty fibers)."""
    fiber = torus_fiber(model, energy, x)
    worst = 0.0
    x = tuple(float(c) for c in np.atleast_1d(np.asarray(x, dtype=float)))
    if isinstance(model, SurfaceOfRevolution) and len(x) == 1:
        x = (x[0], 0.0)  # symbols are theta-independent
    for xi in fiber.points:
        pt = PhasePoint(x, xi)
        err = abs(eval_p1(model, pt) - energy.e1) + abs(eval_p2(model, pt) - energy.e2)
        worst = max(worst, err)
    return worst
