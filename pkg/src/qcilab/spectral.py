"""L2-normalized joint eigenfunctions via 1D Sturm-Liouville solves.

Solver layer
------------
All 1D problems are symmetric (tridiagonal or tridiagonal-plus-corner)
finite-difference discretizations of -h^2 d^2/dx^2 + V, handed to LAPACK's
bisection/inverse-iteration drivers through ``scipy.linalg.eigh_tridiagonal``.
The periodic corner is eliminated exactly: the in-scope periodic potentials
are even cosine series, so the operator commutes with reflection and splits
into two symmetric tridiagonal half-problems (a dense solve remains as the
fallback for non-symmetric data).

Joint-eigenfunction assembly
----------------------------
* Surface of revolution: radial Fourier-mode reduction with E2 = m h. The
  displayed radial operator -h^2 D_r^2 + (m h)^2 / f^2 is solved literally
  (its omitted volume-correction potential is O(h^2)); the eigenfunction is
  reassembled with the geometric amplitude factor f^{-1/2} coming from the
  v = sqrt(f) u substitution that produces that operator.
* Liouville torus: two-parameter matching. With separation constant lam the
  x1 problem is -h^2 v'' - E1 a v = lam v and the x2 problem is
  -h^2 w'' - E1 b w = -lam w (both periodic); E1 is root-found per branch
  pair so the two separation constants cancel, and e2 = lam exactly equals
  the second joint energy.

Forbidden-region tails of Dirichlet eigenvectors are reconstructed by a
stable inward three-term recurrence in log space (direct eigenvector entries
below roughly 1e-12 of the peak are roundoff, not decay).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (EmptyRegion, NoBracket, PreconditionError,
                     SolverDivergence, LinearSolveFailure, Unsupported)
from .models import (HarmonicOscillator, LiouvilleData, LiouvilleTorus,
                     QciModel, RevolutionProfile, SurfaceOfRevolution,
                     volume_density)

RESIDUAL_TOL = 1e-9
NORM_TOL = 1e-8
MATCH_TOL = 1e-10
MATCH_MAX_ITER = 40
E1_BRACKET = (0.7, 1.3)
POTENTIAL_CAP = 50.0   # Dirichlet problems are trimmed where V exceeds this
ORACLE_MAX_AXIS = 128
ORACLE_MIN_H = 1.0 / 40.0


def default_grid_n(h: float, length: float = 2.0) -> int:
    """Default point count: 24/h for unit/2-length axes, scaled for longer."""
    return max(1024, int(math.ceil(12.0 * max(2.0, length) / h)))


# ---------------------------------------------------------------------------
# small data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    lo: float
    hi: float
    n: int
    periodic: bool = False

    def __post_init__(self):
        if self.n < 64:
            raise PreconditionError("grid needs n >= 64")
        if not self.hi > self.lo:
            raise PreconditionError("grid needs hi > lo")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n if self.periodic else self.n - 1)

    def points(self) -> np.ndarray:
        if self.periodic:
            return self.lo + self.spacing * np.arange(self.n)
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class SpectralWindow:
    """Energy window center +- half_width_h * h (half width in units of h)."""

    center: float
    half_width_h: float = 5.0

    def __post_init__(self):
        if not self.half_width_h > 0:
            raise PreconditionError("window half width must be positive")

    def bounds(self, h: float) -> tuple[float, float]:
        return (self.center - self.half_width_h * h,
                self.center + self.half_width_h * h)

    def contains(self, value: float, h: float) -> bool:
        lo, hi = self.bounds(h)
        return lo <= value <= hi


class BoundaryCondition(enum.Enum):
    DIRICHLET = "Dirichlet"
    PERIODIC = "Periodic"
    REGULARITY = "Regularity"


@dataclass
class EigenSolution1D:
    """One eigenpair of a discretized 1D problem, on its full grid."""

    lam: float
    values: np.ndarray
    bc: BoundaryCondition
    residual: float
    grid: Grid1D
    potential: np.ndarray
    h: float
    support: tuple[int, int] = (0, -1)  # full-grid index range the matrix covers
    _log_abs: Optional[np.ndarray] = field(default=None, repr=False)

    def node_count(self) -> int:
        v = self.values
        signs = np.sign(v[np.abs(v) > 1e-9 * np.max(np.abs(v))])
        return int(np.sum(signs[1:] * signs[:-1] < 0))

    def log_abs(self) -> np.ndarray:
        """log|values| with forbidden-region tails reconstructed stably."""
        if self._log_abs is None:
            self._log_abs = _stabilized_log_abs(self)
        return self._log_abs


@dataclass(frozen=True)
class AxisProfile:
    name: str
    points: np.ndarray
    abs_values: np.ndarray      # per-point modulus contribution
    log_abs: np.ndarray         # log of the same, tail-stabilized


@dataclass(frozen=True)
class JointEigenfunction:
    h: float
    quantum_numbers: tuple
    e1: float
    e2: float
    factors: tuple[EigenSolution1D, ...]
    norm_constant: float
    model: QciModel
    axes: tuple[AxisProfile, ...]

    def norm_check(self) -> float:
        """Recompute the squared L2(dVol) norm from factors and the metric."""
        return _joint_norm_sq(self)


@dataclass(frozen=True)
class Region:
    """Product region: per-axis unions of closed intervals (missing = all)."""

    name: str
    axes: dict

    @staticmethod
    def everywhere(name: str = "global") -> "Region":
        return Region(name, {})

    def mask(self, axis: str, points: np.ndarray) -> np.ndarray:
        intervals = self.axes.get(axis)
        if intervals is None:
            return np.ones(len(points), dtype=bool)
        out = np.zeros(len(points), dtype=bool)
        for lo, hi in intervals:
            out |= (points >= lo) & (points <= hi)
        return out


# ---------------------------------------------------------------------------
# tridiagonal building blocks
# ---------------------------------------------------------------------------

def _eigh_tri(d, e, vlo=None, vhi=None, indices=None, vectors=False):
    """eigh_tridiagonal wrapped so iteration failures surface as SolverDivergence."""
    try:
        if indices is not None:
            il, iu = indices
            if il > iu or il < 0 or iu >= len(d):
                return (np.empty(0), None)
            out = scipy.linalg.eigh_tridiagonal(
                d, e, eigvals_only=not vectors, select="i", select_range=(il, iu))
        else:
            out = scipy.linalg.eigh_tridiagonal(
                d, e, eigvals_only=not vectors, select="v", select_range=(vlo, vhi))
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:  # pragma: no cover
        raise SolverDivergence(str(exc)) from exc
    if vectors:
        return out
    return out, None


def _sturm_count_below(d: np.ndarray, e: np.ndarray, sigma: float) -> int:
    """Number of eigenvalues of the tridiagonal (d, e) strictly below sigma."""
    count = 0
    q = d[0] - sigma
    if q < 0.0:
        count += 1
    for i in range(1, len(d)):
        denom = q if q != 0.0 else -1e-300
        q = d[i] - sigma - (e[i - 1] * e[i - 1]) / denom
        if q < 0.0:
            count += 1
    return count


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


# -- Dirichlet ---------------------------------------------------------------

def solve_sl_dirichlet(potential: np.ndarray, h: float, grid: Grid1D,
                       window: SpectralWindow) -> list[EigenSolution1D]:
    """Eigenpairs of -h^2 d^2 + V with zero boundary values, inside the window.

    `potential` is sampled on the full grid; only interior samples enter the
    matrix. Eigenvectors are L2(grid)-normalized with trapezoid weights and
    returned embedded in the full grid (zeros at the ends).
    """
    if grid.periodic:
        raise PreconditionError("use solve_sl_periodic for periodic grids")
    V = np.asarray(potential, dtype=float)
    if len(V) != grid.n:
        raise PreconditionError("potential must be sampled on the grid")
    if not np.all(np.isfinite(V[1:-1])):
        raise PreconditionError("potential must be finite on interior points")
    return _dirichlet_window(V, h, grid, window.bounds(h), support=(1, grid.n - 2))


def _dirichlet_window(V, h, grid, bounds, support) -> list[EigenSolution1D]:
    s0, s1 = support
    dx = grid.spacing
    beta = (h / dx) ** 2
    d = 2.0 * beta + V[s0:s1 + 1]
    e = np.full(s1 - s0, -beta)
    vlo, vhi = bounds
    w, vecs = _eigh_tri(d, e, vlo=vlo, vhi=vhi, vectors=True)
    out = []
    for k in range(len(w)):
        full = np.zeros(grid.n)
        full[s0:s1 + 1] = vecs[:, k]
        full = _canonical_sign(full)
        norm = math.sqrt(float(np.trapezoid(full * full, dx=dx)))
        full /= norm
        resid = _tridiag_residual(d, e, float(w[k]), full[s0:s1 + 1])
        out.append(EigenSolution1D(float(w[k]), full, BoundaryCondition.DIRICHLET,
                                   resid, grid, V, h, support=(s0, s1)))
    return out


def _tridiag_residual(d, e, lam, v):
    r = (d - lam) * v
    r[:-1] += e * v[1:]
    r[1:] += e * v[:-1]
    vmax = float(np.max(np.abs(v)))
    return float(np.max(np.abs(r))) if vmax > 0 else 0.0


# -- Regularity (even reflection at both ends) -------------------------------

def _neumann_window(V, h, grid, bounds) -> list[EigenSolution1D]:
    dx = grid.spacing
    beta = (h / dx) ** 2
    n = grid.n
    d = 2.0 * beta + V
    e = np.full(n - 1, -beta)
    e[0] = -math.sqrt(2.0) * beta
    e[-1] = -math.sqrt(2.0) * beta
    vlo, vhi = bounds
    w, vecs = _eigh_tri(d, e, vlo=vlo, vhi=vhi, vectors=True)
    out = []
    weights = np.full(n, dx)
    weights[0] = weights[-1] = 0.5 * dx
    for k in range(len(w)):
        t = vecs[:, k]
        full = t.copy()
        full[0] *= math.sqrt(2.0)   # undo the symmetrizing row scaling
        full[-1] *= math.sqrt(2.0)
        full = _canonical_sign(full)
        full /= math.sqrt(float(np.sum(weights * full * full)))
        resid = _neumann_residual(V, beta, float(w[k]), full)
        out.append(EigenSolution1D(float(w[k]), full, BoundaryCondition.REGULARITY,
                                   resid, grid, V, h, support=(0, n - 1)))
    return out


def _neumann_residual(V, beta, lam, v):
    ghosted = np.concatenate(([v[1]], v, [v[-2]]))  # even reflection
    r = (2.0 * beta + V - lam) * v - beta * (ghosted[2:] + ghosted[:-2])
    return float(np.max(np.abs(r)))


# -- periodic ----------------------------------------------------------------

def _is_even_samples(V: np.ndarray) -> bool:
    n = len(V)
    scale = max(float(np.max(np.abs(V))), 1.0)
    return bool(np.all(np.abs(V - V[(-np.arange(n)) % n]) <= 1e-12 * scale))


@dataclass
class _PeriodicBlocks:
    """Even/odd reflection blocks of a periodic FD operator with even V."""

    beta: float
    n: int
    d_even: np.ndarray
    e_even: np.ndarray
    d_odd: np.ndarray
    e_odd: np.ndarray

    @staticmethod
    def build(V: np.ndarray, beta: float) -> "_PeriodicBlocks":
        n = len(V)
        half = n // 2
        d_even = 2.0 * beta + V[:half + 1]
        e_even = np.full(half, -beta)
        e_even[0] = -math.sqrt(2.0) * beta
        e_even[-1] = -math.sqrt(2.0) * beta
        d_odd = 2.0 * beta + V[1:half]
        e_odd = np.full(max(half - 2, 0), -beta)
        return _PeriodicBlocks(beta, n, d_even, e_even, d_odd, e_odd)

    def block(self, name: str):
        return (self.d_even, self.e_even) if name == "even" else (self.d_odd, self.e_odd)

    def unfold(self, name: str, t: np.ndarray) -> np.ndarray:
        n, half = self.n, self.n // 2
        full = np.zeros(n)
        if name == "even":
            w = t.copy()
            w[0] *= math.sqrt(2.0)
            w[-1] *= math.sqrt(2.0)
            full[:half + 1] = w
            full[half + 1:] = w[1:half][::-1]
        else:
            full[1:half] = t
            full[half + 1:] = -t[::-1]
        return full

    def count_below(self, sigma: float) -> int:
        c = _sturm_count_below(self.d_even, self.e_even, sigma)
        if len(self.d_odd):
            c += _sturm_count_below(self.d_odd, self.e_odd, sigma)
        return c


def solve_sl_periodic(potential: np.ndarray, h: float, grid: Grid1D,
                      window: SpectralWindow) -> list[EigenSolution1D]:
    """Eigenpairs of the periodic (tridiagonal-plus-corner) discretization.

    Even-symmetric samples take the exact reflection-split path; otherwise a
    dense solve is used (supported up to n = 4096).
    """
    if not grid.periodic:
        raise PreconditionError("grid must be periodic")
    V = np.asarray(potential, dtype=float)
    if len(V) != grid.n:
        raise PreconditionError("potential must be sampled on the grid")
    if not np.all(np.isfinite(V)):
        raise PreconditionError("potential must be finite")
    dx = grid.spacing
    beta = (h / dx) ** 2
    vlo, vhi = window.bounds(h)
    out: list[EigenSolution1D] = []
    if grid.n % 2 == 0 and _is_even_samples(V):
        blocks = _PeriodicBlocks.build(V, beta)
        for name in ("even", "odd"):
            d, e = blocks.block(name)
            if len(d) == 0:
                continue
            w, vecs = _eigh_tri(d, e, vlo=vlo, vhi=vhi, vectors=True)
            for k in range(len(w)):
                full = blocks.unfold(name, vecs[:, k])
                out.append(_finish_periodic(full, float(w[k]), V, beta, grid, h))
    else:
        if grid.n > 4096:
            raise Unsupported("dense periodic fallback capped at n = 4096")
        C = np.diag(2.0 * beta + V) - beta * (np.eye(grid.n, k=1) + np.eye(grid.n, k=-1))
        C[0, -1] -= beta
        C[-1, 0] -= beta
        w, vecs = scipy.linalg.eigh(C)
        keep = (w >= vlo) & (w <= vhi)
        for lam, vec in zip(w[keep], vecs[:, keep].T):
            out.append(_finish_periodic(vec.copy(), float(lam), V, beta, grid, h))
    out.sort(key=lambda s: s.lam)
    return out


def _finish_periodic(full, lam, V, beta, grid, h) -> EigenSolution1D:
    full = _canonical_sign(full)
    full /= math.sqrt(float(np.sum(full * full) * grid.spacing))
    resid = _periodic_residual(V, beta, lam, full)
    return EigenSolution1D(lam, full, BoundaryCondition.PERIODIC, resid,
                           grid, V, h, support=(0, grid.n - 1))


def _periodic_residual(V, beta, lam, v):
    r = (2.0 * beta + V - lam) * v - beta * (np.roll(v, 1) + np.roll(v, -1))
    return float(np.max(np.abs(r)))


# ---------------------------------------------------------------------------
# stabilized log-magnitudes
# ---------------------------------------------------------------------------

_RELIABLE = 1e-6     # |v|/|v|_max above this is trusted directly
_MATCH_LO = 1e-8     # matching overlap band (relative)


def _stabilized_log_abs(sol: EigenSolution1D) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(sol.values))
    if sol.bc is not BoundaryCondition.DIRICHLET:
        return logs
    s0, s1 = sol.support
    v = sol.values[s0:s1 + 1]
    vmax = float(np.max(np.abs(v)))
    if vmax == 0.0:
        return logs
    dx = sol.grid.spacing
    beta = (sol.h / dx) ** 2
    d = 2.0 * beta + sol.potential[s0:s1 + 1]
    m = len(v)
    hi = int(np.max(np.nonzero(np.abs(v) >= _RELIABLE * vmax)))
    lo = int(np.min(np.nonzero(np.abs(v) >= _RELIABLE * vmax)))
    if hi < m - 1:
        tail = _inward_tail(d, beta, sol.lam, v, side="right")
        if tail is not None:
            logs[s0 + hi + 1: s1 + 1] = tail[hi + 1:]
    if lo > 0:
        tail = _inward_tail(d, beta, sol.lam, v, side="left")
        if tail is not None:
            logs[s0: s0 + lo] = tail[:lo]
    return logs


def _inward_tail(d, beta, lam, v, side: str) -> Optional[np.ndarray]:
    """log|v| over the matrix support, rebuilt by inward recurrence.

    The decaying solution grows in the inward direction, so recursing from
    the Dirichlet boundary toward the interior is stable; the free amplitude
    is fixed by a median log-match on the band where the direct eigenvector
    is still reliable.
    """
    w = v if side == "left" else v[::-1]
    m = len(w)
    wmax = float(np.max(np.abs(w)))
    rel = np.abs(w) / wmax
    inner = int(np.min(np.nonzero(rel >= _RELIABLE)))
    if inner <= 1:
        return None
    dd = d if side == "left" else d[::-1]
    # recurrence: v[i+1] = ((d[i] - lam) v[i] - beta v[i-1]) / beta, inward
    logw = np.full(m, -np.inf)
    prev = 0.0            # ghost boundary value
    cur = 1.0
    scale = 0.0           # cumulative log rescaling
    logw[0] = scale
    stop = min(inner + 8, m - 1)
    for i in range(0, stop):
        nxt = ((dd[i] - lam) * cur - beta * prev) / beta
        prev, cur = cur, nxt
        mag = abs(cur)
        if mag == 0.0:
            return None
        if mag > 1e250 or mag < 1e-250:
            prev /= mag
            cur /= mag
            scale += math.log(mag)
        logw[i + 1] = scale + math.log(abs(cur))
    # amplitude match on the reliable band
    band = [i for i in range(max(inner - 2, 1), stop + 1)
            if rel[i] >= _MATCH_LO and np.isfinite(logw[i])]
    if len(band) < 2:
        return None
    with np.errstate(divide="ignore"):
        offsets = [math.log(abs(w[i])) - logw[i] for i in band]
    offset = float(np.median(offsets))
    out = logw + offset
    # keep direct values where they are trusted
    with np.errstate(divide="ignore"):
        direct = np.log(np.abs(w))
    out[rel >= _RELIABLE] = direct[rel >= _RELIABLE]
    return out if side == "left" else out[::-1]


# ---------------------------------------------------------------------------
# surface of revolution
# ---------------------------------------------------------------------------

def sor_joint_eigs(profile: RevolutionProfile, h: float,
                   m_range: tuple[int, int], window: SpectralWindow,
                   n_override: Optional[int] = None) -> list[JointEigenfunction]:
    """Joint eigenfunctions u = v(r) e^{i m theta} on the surface of revolution.

    E2(h) = m h exactly; the radial problem is Dirichlet for m != 0 (the
    effective potential confines) and even-reflection regularity for m = 0.
    Modes whose potential floor exceeds the window are skipped without a
    solve. An empty window yields an empty list.
    """
    if window.center != 1.0:
        raise PreconditionError("window must be centered at the classical level 1")
    m_lo, m_hi = m_range
    if m_lo > m_hi:
        return []
    n = n_override or default_grid_n(h, 2.0)
    grid = Grid1D(-1.0, 1.0, n)
    rpts = grid.points()
    f_vals = np.asarray(profile.f(rpts), dtype=float)
    model = SurfaceOfRevolution(profile)
    vlo, vhi = window.bounds(h)
    cache: dict[int, list[EigenSolution1D]] = {}
    out: list[JointEigenfunction] = []
    for m in range(m_lo, m_hi + 1):
        am = abs(m)
        if am not in cache:
            cache[am] = _sor_radial_solutions(profile, h, am, grid, rpts, f_vals,
                                              (vlo, vhi))
        for sol in cache[am]:
            out.append(_assemble_sor(model, h, m, sol, rpts, f_vals))
    return out


def _sor_radial_solutions(profile, h, m, grid, rpts, f_vals, bounds):
    if m == 0:
        V = np.zeros(grid.n)
        return _neumann_window(V, h, grid, bounds)
    with np.errstate(divide="ignore"):
        W = (m * h) ** 2 / (f_vals * f_vals)
    cap = max(POTENTIAL_CAP, bounds[1] + 25.0)
    inside = np.nonzero(W[1:-1] <= cap)[0] + 1
    if len(inside) < 8 or float(np.min(W[1:-1])) > bounds[1]:
        return []
    s0, s1 = int(inside.min()), int(inside.max())
    V = np.where(np.isfinite(W), W, 0.0)
    return _dirichlet_window(V, h, grid, bounds, support=(s0, s1))


_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _assemble_sor(model, h, m, sol, rpts, f_vals) -> JointEigenfunction:
    interior = slice(1, len(rpts) - 1)
    with np.errstate(divide="ignore"):
        envelope = np.abs(sol.values[interior]) / np.sqrt(f_vals[interior]) / _SQRT_2PI
        log_env = (sol.log_abs()[interior]
                   - 0.5 * np.log(f_vals[interior]) - math.log(_SQRT_2PI))
    theta_pts = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
    axes = (AxisProfile("r", rpts[interior], envelope, log_env),
            AxisProfile("theta", theta_pts, np.ones(8), np.zeros(8)))
    return JointEigenfunction(h, (m, sol.node_count()), sol.lam, m * h,
                              (sol,), 1.0, model, axes)


# ---------------------------------------------------------------------------
# Liouville two-parameter matching
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Branch:
    problem: str          # "A" or "B"
    block: str            # "even" or "odd"
    index: int            # index within the block
    value: float          # eigenvalue at E1 = 1
    slope: float          # d(eigenvalue)/d(E1)


class _LiouvilleMatcher:
    """Shared state for root-finding E1 so that lam_A(E1) + lam_B(E1) = 0."""

    def __init__(self, data: LiouvilleData, h: float, n: int):
        if n % 2:
            n += 1
        self.grid = Grid1D(0.0, 1.0, n, periodic=True)
        self.h = h
        xs = self.grid.points()
        self.beta = (h / self.grid.spacing) ** 2
        self.pots = {"A": np.asarray(data.a(xs), dtype=float),
                     "B": np.asarray(data.b(xs), dtype=float)}

    def blocks(self, problem: str, e1: float) -> _PeriodicBlocks:
        return _PeriodicBlocks.build(-e1 * self.pots[problem], self.beta)

    def eig_by_index(self, problem: str, block: str, idx: int, e1: float) -> float:
        d, e = self.blocks(problem, e1).block(block)
        w, _ = _eigh_tri(d, e, indices=(idx, idx))
        if len(w) == 0:
            raise SolverDivergence("index out of spectrum range")
        return float(w[0])

    def branches(self, problem: str, vlo: float, vhi: float,
                 slope_de1: float = 0.02) -> list[_Branch]:
        """All branches with eigenvalue in [vlo, vhi] at E1=1, with slopes."""
        out = []
        b1 = self.blocks(problem, 1.0)
        b2 = self.blocks(problem, 1.0 + slope_de1)
        for name in ("even", "odd"):
            d, e = b1.block(name)
            if len(d) == 0:
                continue
            jlo = _sturm_count_below(d, e, vlo)
            jhi = _sturm_count_below(d, e, vhi) - 1
            if jhi < jlo:
                continue
            w1, _ = _eigh_tri(d, e, indices=(jlo, jhi))
            d2, e2_ = b2.block(name)
            w2, _ = _eigh_tri(d2, e2_, indices=(jlo, jhi))
            for k in range(len(w1)):
                slope = (float(w2[k]) - float(w1[k])) / slope_de1
                out.append(_Branch(problem, name, jlo + k, float(w1[k]), slope))
        return out

    def eigvec(self, problem: str, block: str, idx: int, e1: float):
        blocks = self.blocks(problem, e1)
        d, e = blocks.block(block)
        w, vecs = _eigh_tri(d, e, indices=(idx, idx), vectors=True)
        full = blocks.unfold(block, vecs[:, 0])
        lam = float(w[0])
        sol = _finish_periodic(full, lam, -e1 * self.pots[problem], self.beta,
                               self.grid, self.h)
        return lam, sol

    def global_index(self, problem: str, e1: float, lam: float) -> int:
        return self.blocks(problem, e1).count_below(lam - 1e-12)


def _secant_match(matcher: _LiouvilleMatcher, bA: _Branch, bB: _Branch,
                  x1: float) -> Optional[float]:
    """Secant iteration on G(E1) = lam_A + lam_B from (1, predicted)."""

    def G(e1: float) -> float:
        return (matcher.eig_by_index("A", bA.block, bA.index, e1)
                + matcher.eig_by_index("B", bB.block, bB.index, e1))

    lo, hi = E1_BRACKET
    x0, g0 = 1.0, bA.value + bB.value
    x1 = min(max(x1, lo), hi)
    if x1 == x0:
        x1 = x0 + 1e-6
    g1 = G(x1)
    for _ in range(MATCH_MAX_ITER):
        if abs(g1) <= MATCH_TOL:
            return x1
        if g1 == g0:
            return None
        x2 = x1 - g1 * (x1 - x0) / (g1 - g0)
        if not lo <= x2 <= hi:
            return None
        x0, g0, x1 = x1, g1, x2
        g1 = G(x1)
    return None


def match_branch_pair(data: LiouvilleData, h: float,
                      branch_a: tuple[str, int], branch_b: tuple[str, int],
                      n: Optional[int] = None) -> float:
    """Root-find E1 on the bracket for one explicit branch pair.

    Raises NoBracket when lam_A + lam_B has no sign change over the E1
    search interval.
    """
    matcher = _LiouvilleMatcher(data, h, n or default_grid_n(h, 1.0))

    def G(e1):
        return (matcher.eig_by_index("A", branch_a[0], branch_a[1], e1)
                + matcher.eig_by_index("B", branch_b[0], branch_b[1], e1))

    lo, hi = E1_BRACKET
    glo, ghi = G(lo), G(hi)
    if glo * ghi > 0:
        raise NoBracket(f"G({lo}) = {glo:.3e}, G({hi}) = {ghi:.3e}")
    from scipy.optimize import brentq
    return float(brentq(G, lo, hi, xtol=1e-13))


def liouville_joint_eigs(data: LiouvilleData, h: float, window: SpectralWindow,
                         lambda_scan: tuple[float, float],
                         n_override: Optional[int] = None) -> list[JointEigenfunction]:
    """Joint eigenfunctions u = v(x1) w(x2) of the Liouville Laplacian.

    Branch pairs are enumerated at E1 = 1, pruned by a first-order root
    prediction, and polished by secant iteration on E1; the separation
    constant of a matched pair is the second joint energy e2.
    """
    if window.center != 1.0:
        raise PreconditionError("window must be centered at the classical level 1")
    scan_lo, scan_hi = lambda_scan
    if not scan_lo < scan_hi:
        return []
    a_max, b_max = data.a_max, data.b_max
    if scan_lo < -a_max - 0.5 or scan_hi > b_max + 0.5:
        raise PreconditionError("lambda scan outside [-max a - margin, max b + margin]")
    matcher = _LiouvilleMatcher(data, h, n_override or default_grid_n(h, 1.0))
    win = window.half_width_h * h
    pad_a = 6.0 * h * window.half_width_h / 5.0 * a_max + 0.01
    pad_b = 6.0 * h * window.half_width_h / 5.0 * b_max + 0.01
    branches_a = matcher.branches("A", scan_lo - pad_a, scan_hi + pad_a)
    branches_b = matcher.branches("B", -scan_hi - pad_b, -scan_lo + pad_b)
    if not branches_a or not branches_b:
        return []
    mus = np.array([b.value for b in branches_b])
    order = np.argsort(mus)
    pair_cut = (1.5 * win + 0.005) * (a_max + b_max + 1.0)
    model = LiouvilleTorus(data)
    out: list[JointEigenfunction] = []
    seen: set[tuple] = set()
    for bA in branches_a:
        lo_idx = int(np.searchsorted(mus[order], -bA.value - pair_cut))
        hi_idx = int(np.searchsorted(mus[order], -bA.value + pair_cut))
        for oi in range(lo_idx, hi_idx):
            bB = branches_b[order[oi]]
            slope = bA.slope + bB.slope
            if slope == 0.0:
                continue
            predicted = 1.0 - (bA.value + bB.value) / slope
            if abs(predicted - 1.0) > 1.4 * win + 0.002:
                continue
            root = _secant_match(matcher, bA, bB, predicted)
            if root is None or not window.contains(root, h):
                continue
            lam_a, sol_a = matcher.eigvec("A", bA.block, bA.index, root)
            if not scan_lo <= lam_a <= scan_hi:
                continue
            _, sol_b = matcher.eigvec("B", bB.block, bB.index, root)
            key = (bA.block, bA.index, bB.block, bB.index)
            if key in seen:
                continue
            seen.add(key)
            out.append(_assemble_liouville(model, data, matcher, h, root,
                                           lam_a, sol_a, sol_b))
    out.sort(key=lambda u: (u.e1, u.e2, u.quantum_numbers))
    return out


def _assemble_liouville(model, data, matcher, h, e1, lam, sol_a, sol_b) -> JointEigenfunction:
    xs = matcher.grid.points()
    dx = matcher.grid.spacing
    a_vals, b_vals = matcher.pots["A"], matcher.pots["B"]
    va, wb = sol_a.values, sol_b.values
    weight = (float(np.sum(a_vals * va * va) * dx)
              + float(np.sum(b_vals * wb * wb) * dx))
    N = 1.0 / math.sqrt(weight)
    j = matcher.global_index("A", e1, lam)
    k = matcher.global_index("B", e1, -lam)
    with np.errstate(divide="ignore"):
        axes = (AxisProfile("x1", xs, N * np.abs(va), math.log(N) + sol_a.log_abs()),
                AxisProfile("x2", xs, np.abs(wb), sol_b.log_abs()))
    return JointEigenfunction(h, (j, k), e1, lam, (sol_a, sol_b), N, model, axes)


# ---------------------------------------------------------------------------
# harmonic oscillator
# ---------------------------------------------------------------------------

def ho_eigs(model: HarmonicOscillator, h: float, window: SpectralWindow,
            n_override: Optional[int] = None) -> list[EigenSolution1D]:
    """Dirichlet eigenpairs of -h^2 d^2 + x^2 on [-L, L] inside the window."""
    L = model.truncation
    if L <= 2.0 * math.sqrt(window.center):
        raise PreconditionError("truncation reaches the classical turning points")
    n = n_override or default_grid_n(h, 2.0 * L)
    grid = Grid1D(-L, L, n)
    xs = grid.points()
    return solve_sl_dirichlet(xs * xs, h, grid, window)


def ho_joint_wrapper(model: HarmonicOscillator, sol: EigenSolution1D) -> JointEigenfunction:
    """Present a 1D oscillator eigenpair through the joint-eigenfunction API."""
    axes = (AxisProfile("x", sol.grid.points(), np.abs(sol.values), sol.log_abs()),)
    return JointEigenfunction(sol.h, (sol.node_count(),), sol.lam, math.nan,
                              (sol,), 1.0, model, axes)


# ---------------------------------------------------------------------------
# norms and regions
# ---------------------------------------------------------------------------

def _joint_norm_sq(u: JointEigenfunction) -> float:
    model = u.model
    if isinstance(model, SurfaceOfRevolution):
        sol = u.factors[0]
        return float(np.trapezoid(sol.values ** 2, dx=sol.grid.spacing))
    if isinstance(model, LiouvilleTorus):
        sol_a, sol_b = u.factors
        xs = sol_a.grid.points()
        dx = sol_a.grid.spacing
        a_vals = np.asarray(model.data.a(xs), dtype=float)
        b_vals = np.asarray(model.data.b(xs), dtype=float)
        va, wb = sol_a.values, sol_b.values
        return u.norm_constant ** 2 * (
            float(np.sum(a_vals * va * va) * dx) * float(np.sum(wb * wb) * dx)
            + float(np.sum(va * va) * dx) * float(np.sum(b_vals * wb * wb) * dx))
    if isinstance(model, HarmonicOscillator):
        sol = u.factors[0]
        return float(np.trapezoid(sol.values ** 2, dx=sol.grid.spacing))
    raise Unsupported(type(model).__name__)


def sup_norm(u: JointEigenfunction, region: Region) -> tuple[float, tuple]:
    """(max |u| over region grid points, argmax coordinates)."""
    value = 1.0
    loc = []
    for axis in u.axes:
        mask = region.mask(axis.name, axis.points)
        if not mask.any():
            raise EmptyRegion(f"region excludes the whole {axis.name} axis")
        vals = np.where(mask, axis.abs_values, -np.inf)
        i = int(np.argmax(vals))
        value *= float(axis.abs_values[i])
        loc.append(float(axis.points[i]))
    return value, tuple(loc)


# ---------------------------------------------------------------------------
# 2D brute-force oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Oracle2DResult:
    eigenvalues: tuple[float, ...]
    eigenfunctions: tuple[np.ndarray, ...]
    warnings: tuple[str, ...]
    grids: tuple[np.ndarray, np.ndarray]


def _periodic_d2(n: int, dx: float) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    D = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    D[0, -1] = 1.0
    D[-1, 0] = 1.0
    return (D / (dx * dx)).tocsr()


def oracle_2d(model: QciModel, h: float, window: SpectralWindow,
              grid2d: tuple[int, int] = (96, 96)) -> Oracle2DResult:
    """Eigenpairs near the window of the direct 2D discretization.

    Solved as the generalized symmetric problem A u = E B u with
    A = -h^2 (discrete Laplacian in flat/flux form) and B = diag(volume
    density), by ARPACK shift-invert at the window center with a fixed
    start vector.
    """
    n1, n2 = grid2d
    if n1 > ORACLE_MAX_AXIS or n2 > ORACLE_MAX_AXIS:
        raise PreconditionError(f"oracle grid capped at {ORACLE_MAX_AXIS} per axis")
    if h < ORACLE_MIN_H:
        raise PreconditionError(f"oracle resolvability floor h >= {ORACLE_MIN_H}")
    warnings: list[str] = []
    if isinstance(model, LiouvilleTorus):
        dx1, dx2 = 1.0 / n1, 1.0 / n2
        x1 = dx1 * np.arange(n1)
        x2 = dx2 * np.arange(n2)
        a_vals = np.asarray(model.data.a(x1), dtype=float)
        b_vals = np.asarray(model.data.b(x2), dtype=float)
        dens = a_vals[:, None] + b_vals[None, :]
        A = -(h * h) * (sp.kron(_periodic_d2(n1, dx1), sp.identity(n2))
                        + sp.kron(sp.identity(n1), _periodic_d2(n2, dx2)))
        B = sp.diags(dens.ravel())
        ximax = math.sqrt(max(window.center, 1.0) * float(dens.max()))
        ppw = 2.0 * math.pi * h / ximax / max(dx1, dx2)
        weight = dens
        grids = (x1, x2)
        shape = (n1, n2)
    elif isinstance(model, SurfaceOfRevolution):
        p = model.profile
        dr = 2.0 / n1
        r = -1.0 + dr * (np.arange(n1) + 0.5)     # cell centers avoid the poles
        dth = 2.0 * math.pi / n2
        th = dth * np.arange(n2)
        f_c = np.asarray(p.f(r), dtype=float)
        f_face = np.asarray(p.f(-1.0 + dr * np.arange(n1 + 1)), dtype=float)
        f_face[0] = 0.0     # zero flux through the poles
        f_face[-1] = 0.0
        main = (f_face[:-1] + f_face[1:]) / (dr * dr)
        off = f_face[1:-1] / (dr * dr)
        Ar = sp.diags([-off, main, -off], [-1, 0, 1])
        Dth = _periodic_d2(n2, dth)
        A = (h * h) * (sp.kron(Ar, sp.identity(n2))
                       - sp.kron(sp.diags(1.0 / f_c), Dth))
        B = sp.diags(np.repeat(f_c, n2))
        ppw = 2.0 * math.pi * h / math.sqrt(window.center) / max(dr, dth * float(f_c.max()))
        weight = np.repeat(f_c, n2).reshape(n1, n2)
        grids = (r, th)
        shape = (n1, n2)
    else:
        raise Unsupported("oracle supports SOR and Liouville models")
    if ppw < 8.0:
        warnings.append(f"ResolutionWarning: {ppw:.1f} grid points per wavelength")
    vals, vecs = _eigsh_window(A.tocsc(), B.tocsc(), window, h)
    dA = (grids[0][1] - grids[0][0]) * (grids[1][1] - grids[1][0])
    eigenfunctions = []
    for k in range(len(vals)):
        U = vecs[:, k].reshape(shape)
        U /= math.sqrt(float(np.sum(U * U * weight) * dA))
        eigenfunctions.append(U)
    return Oracle2DResult(tuple(float(v) for v in vals), tuple(eigenfunctions),
                          tuple(warnings), grids)


def _eigsh_window(A, B, window, h, k0: int = 48):
    lo, hi = window.bounds(h)
    sigma = window.center
    n = A.shape[0]
    k = min(k0, n - 2)
    v0 = np.ones(n) / math.sqrt(n)
    while True:
        try:
            vals, vecs = spla.eigsh(A, k=k, M=B, sigma=sigma, v0=v0)
        except RuntimeError as exc:
            raise LinearSolveFailure(str(exc)) from exc
        covered = (vals.min() < lo) and (vals.max() > hi)
        if covered or k >= min(420, n - 2):
            break
        k = min(2 * k, n - 2)
    keep = (vals >= lo) & (vals <= hi)
    order = np.argsort(vals[keep])
    return vals[keep][order], vecs[:, keep][:, order]
