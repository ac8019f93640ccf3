"""Experiment harness: h-sweeps, scaling fits, decay-rate extraction.

A sweep enumerates every joint eigenfunction with first energy in the window
for each h, records region-masked sup norms, and fits log(max sup) against
log h by ordinary least squares. Decay reports compare -h log|u| pointwise
against the tunneling action S on a forbidden region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .action import ActionField
from .errors import (DegenerateFit, EmptySpectrum, PreconditionError,
                     UnderflowRegion, Unsupported)
from .models import (HarmonicOscillator, LiouvilleTorus, QciModel,
                     SurfaceOfRevolution)
from .spectral import (JointEigenfunction, Region, SpectralWindow,
                       ho_eigs, ho_joint_wrapper, liouville_joint_eigs,
                       sor_joint_eigs, sup_norm)

UNDERFLOW_LOG = math.log(1e-300)


def default_h_values(count: int = 9, base: int = 32) -> list[float]:
    """h_k = 1/round(base * 2^{k/2}): rational steps, half-octave spacing."""
    return [1.0 / round(base * 2.0 ** (k / 2.0)) for k in range(count)]


@dataclass(frozen=True)
class HSweep:
    h_values: tuple[float, ...]
    model: QciModel
    window: SpectralWindow
    regions: dict
    family: Optional[dict] = None   # e.g. {"m": 0} or {"e2_over": 0.5}

    def __post_init__(self):
        hs = list(self.h_values)
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise PreconditionError("h values must be strictly decreasing")
        if len(hs) < 6 or hs[0] / hs[-1] < 8.0:
            raise PreconditionError("need >= 6 h values spanning a factor >= 8")


@dataclass(frozen=True)
class SweepRow:
    h: float
    max_sup: float
    quantum_numbers: tuple
    location: tuple


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    intercept: float
    rms_residual: float
    point_count: int


@dataclass(frozen=True)
class DecayReport:
    epsilon: float
    max_defect: float
    xs: np.ndarray
    s_values: np.ndarray
    log_abs_u: np.ndarray
    ratios: np.ndarray          # (-h log|u|) / S per sample


def enumerate_family(model: QciModel, h: float, window: SpectralWindow,
                     family: Optional[dict] = None,
                     lambda_scan: Optional[tuple[float, float]] = None,
                     n_override: Optional[int] = None) -> list[JointEigenfunction]:
    """All joint eigenfunctions with e1 in the window, optionally filtered.

    family: {"m": value} keeps one revolution Fourier mode; {"e2_over": x}
    keeps the mode with E2 = round(x/h) * h (revolution models).
    """
    if isinstance(model, SurfaceOfRevolution):
        f0 = model.profile.f_max
        if family and "m" in family:
            m = int(family["m"])
            m_range = (m, m)
        elif family and "e2_over" in family:
            m = int(round(family["e2_over"] / h))
            m_range = (m, m)
        else:
            m_max = int(math.ceil(f0 * math.sqrt(window.bounds(h)[1]) / h)) + 1
            m_range = (0, m_max)
        return sor_joint_eigs(model.profile, h, m_range, window,
                              n_override=n_override)
    if isinstance(model, LiouvilleTorus):
        if lambda_scan is None:
            lambda_scan = (-model.data.a_max - 0.1, model.data.b_max + 0.1)
        sols = liouville_joint_eigs(model.data, h, window, lambda_scan,
                                    n_override=n_override)
        if family and "e2_band" in family:
            lo, hi = family["e2_band"]
            sols = [u for u in sols if lo <= u.e2 <= hi]
        return sols
    if isinstance(model, HarmonicOscillator):
        return [ho_joint_wrapper(model, s) for s in ho_eigs(model, h, window,
                                                            n_override=n_override)]
    raise Unsupported(type(model).__name__)


def supnorm_scan(sweep: HSweep, region_name: str) -> tuple[list[SweepRow], list[float]]:
    """Per-h maximum of sup_norm over the family; returns (rows, skipped h).

    Rows with no spectrum in the window are recorded as skipped, not raised.
    """
    if region_name not in sweep.regions:
        raise PreconditionError(f"region {region_name!r} not defined for this sweep")
    region = sweep.regions[region_name]
    rows: list[SweepRow] = []
    skipped: list[float] = []
    for h in sweep.h_values:
        sols = enumerate_family(sweep.model, h, sweep.window, sweep.family)
        if not sols:
            skipped.append(h)
            continue
        best = None
        for u in sols:
            value, loc = sup_norm(u, region)
            if best is None or value > best[0]:
                best = (value, u.quantum_numbers, loc)
        rows.append(SweepRow(h, best[0], best[1], best[2]))
    return rows, skipped


def fit_exponent(rows: Sequence) -> ScalingFit:
    """OLS fit of log(max sup) against log h; the slope is the exponent."""
    pts = [(r.h, r.max_sup) if isinstance(r, SweepRow) else (r[0], r[1]) for r in rows]
    if len(pts) < 4:
        raise PreconditionError("need at least 4 sweep rows")
    hs = np.array([p[0] for p in pts])
    sups = np.array([p[1] for p in pts])
    if np.all(hs == hs[0]):
        raise DegenerateFit("all h equal")
    x = np.log(hs)
    y = np.log(sups)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    rms = float(np.sqrt(np.mean(resid * resid)))
    return ScalingFit(float(slope), float(intercept), rms, len(pts))


def hoermander_ceiling(rows: Sequence[SweepRow], fit_rows: int = 4) -> float:
    """Constant C with max_sup <= C h^{-1/2}, fitted on the first rows.

    Raises if any later row exceeds the ceiling (the universal-bound check).
    """
    if len(rows) < fit_rows + 1:
        raise PreconditionError("need more rows than the fitting prefix")
    C = max(r.max_sup * math.sqrt(r.h) for r in rows[:fit_rows])
    for r in rows[fit_rows:]:
        if r.max_sup > C / math.sqrt(r.h) * (1.0 + 1e-12):
            raise AssertionError(
                f"sup {r.max_sup:.6g} at h={r.h:.6g} exceeds Hoermander ceiling")
    return C


def decay_profile(model: QciModel, u: JointEigenfunction, field: ActionField,
                  epsilon: float, region: Region) -> DecayReport:
    """Pointwise comparison of -h log|u| with the action on a forbidden region.

    The report carries max over the region of (1-eps) S + h log|u| (the decay
    defect) and the sample ratios; it never asserts a bound itself.
    """
    if not 0.0 < epsilon < 1.0:
        raise PreconditionError("epsilon must lie in (0, 1)")
    axis = u.axes[0]
    xs_field = np.asarray(field.xs, dtype=float)
    if xs_field.ndim != 1:
        raise Unsupported("decay profiles are extracted along one axis")
    mask = region.mask(axis.name, xs_field)
    xs = xs_field[mask]
    svals = np.asarray(field.s_values, dtype=float)[mask]
    if len(xs) == 0:
        raise PreconditionError("region contains no field samples")
    if np.any(svals <= 0.0):
        raise PreconditionError("action must be positive on the region")
    # map field samples onto the eigenfunction grid
    idx = np.searchsorted(axis.points, xs)
    idx = np.clip(idx, 0, len(axis.points) - 1)
    left = np.clip(idx - 1, 0, len(axis.points) - 1)
    take_left = (np.abs(axis.points[left] - xs) < np.abs(axis.points[idx] - xs))
    idx = np.where(take_left, left, idx)
    if np.max(np.abs(axis.points[idx] - xs)) > 2.0 * _axis_spacing(axis):
        raise PreconditionError("field samples do not lie on the solution grid")
    log_u = axis.log_abs[idx] + sum(float(np.max(a.log_abs)) for a in u.axes[1:])
    floored = log_u <= UNDERFLOW_LOG
    if np.mean(floored) > 0.5:
        raise UnderflowRegion("increase h or shrink the region")
    keep = ~floored
    ratios = (-u.h * log_u[keep]) / svals[keep]
    defects = (1.0 - epsilon) * svals[keep] + u.h * log_u[keep]
    return DecayReport(epsilon, float(np.max(defects)), xs[keep], svals[keep],
                       log_u[keep], ratios)


def _axis_spacing(axis) -> float:
    diffs = np.diff(axis.points)
    return float(np.min(diffs)) if len(diffs) else math.inf


def caustic_peak_locator(u: JointEigenfunction, tdata) -> tuple[float, float]:
    """(argmax of the leading factor profile, distance to nearest caustic).

    Returns distance +inf when the classification carries no caustic on the
    profile axis (e.g. regular graphs and zonal modes).
    """
    axis = u.axes[0]
    peak = float(axis.points[int(np.argmax(axis.abs_values))])
    loci = [l.value for l in tdata.caustic_loci if l.axis == axis.name]
    if not loci:
        return peak, math.inf
    return peak, min(abs(peak - l) for l in loci)
