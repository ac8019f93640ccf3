import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcilab.action import ho_action_field, sor_action_field, log_spaced_distances
from qcilab.asymptotics import (DecayReport, HSweep, ScalingFit, SweepRow,
                                caustic_peak_locator, decay_profile,
                                default_h_values, enumerate_family,
                                fit_exponent, hoermander_ceiling, supnorm_scan)
from qcilab.classical import EnergyPair, classify_projection
from qcilab.errors import DegenerateFit, PreconditionError
from qcilab.models import (HarmonicOscillator, LiouvilleData, LiouvilleTorus,
                           SurfaceOfRevolution, cosine_profile)
from qcilab.spectral import Region, SpectralWindow, ho_eigs, ho_joint_wrapper

PROFILE = cosine_profile()
SOR = SurfaceOfRevolution(PROFILE)
FLAT = LiouvilleTorus(LiouvilleData((2.0,), (0.5,)))


def test_default_h_values_are_reciprocal_integers():
    hs = default_h_values()
    assert [round(1.0 / h) for h in hs] == [32, 45, 64, 91, 128, 181, 256, 362, 512]
    assert all(a > b for a, b in zip(hs, hs[1:]))


def test_hsweep_validation():
    with pytest.raises(PreconditionError):
        HSweep((0.1, 0.2, 0.3, 0.4, 0.5, 0.6), SOR, SpectralWindow(1.0), {})
    with pytest.raises(PreconditionError):
        HSweep((0.1, 0.09, 0.08, 0.07, 0.06, 0.05), SOR, SpectralWindow(1.0), {})


def test_fit_exponent_exact_power():
    rows = [(h, h ** -0.25) for h in default_h_values()]
    fit = fit_exponent(rows)
    assert fit.exponent == pytest.approx(-0.25, abs=1e-12)
    assert fit.rms_residual < 1e-12
    assert fit.point_count == 9


def test_fit_exponent_constant():
    rows = [(h, 3.7) for h in default_h_values()]
    assert fit_exponent(rows).exponent == pytest.approx(0.0, abs=1e-12)


def test_fit_exponent_degenerate():
    with pytest.raises(DegenerateFit):
        fit_exponent([(0.1, 1.0)] * 5)


def test_sweep_with_empty_rows_skips_and_fits_rest():
    # m = 40 has E2 = 40 h > 1 at the largest h: empty window there
    hs = tuple(default_h_values(7))
    sweep = HSweep(hs, SOR, SpectralWindow(1.0), {"global": Region.everywhere()},
                   family={"m": 40})
    rows, skipped = supnorm_scan(sweep, "global")
    assert skipped and skipped[0] == hs[0]
    assert len(rows) + len(skipped) == len(hs)
    fit = fit_exponent(rows)
    assert fit.point_count == len(rows)


@pytest.mark.slow
def test_flat_liouville_sup_is_h_independent():
    hs = tuple(default_h_values(7))
    sweep = HSweep(hs, FLAT, SpectralWindow(1.0), {"global": Region.everywhere()})
    rows, skipped = supnorm_scan(sweep, "global")
    assert not skipped
    fit = fit_exponent(rows)
    assert fit.exponent == pytest.approx(0.0, abs=1e-6)
    # standing-wave value: double the plane-wave 1/sqrt(area)
    assert rows[0].max_sup == pytest.approx(2.0 / math.sqrt(2.5), rel=1e-9)


@pytest.mark.invariant_suite
@given(noise=st.floats(0.0, 0.05), drift=st.floats(-0.3, 0.3))
def test_monotone_information(noise, drift):
    """Extending a sweep to smaller h cannot worsen the fit beyond its residual."""
    hs = default_h_values(9)
    rows = [(h, h ** -0.25 * (1.0 + drift * h) * (1.0 + noise * math.sin(9.0 / h)))
            for h in hs]
    fit6 = fit_exponent(rows[:6])
    fit9 = fit_exponent(rows)
    dep6 = abs(fit6.exponent + 0.25)
    dep9 = abs(fit9.exponent + 0.25)
    assert dep9 <= dep6 + 2.0 * (fit6.rms_residual + fit9.rms_residual) + 1e-9


def test_hoermander_ceiling_synthetic():
    rows = [SweepRow(h, 0.8 * h ** -0.25, (0,), (0.0,)) for h in default_h_values()]
    C = hoermander_ceiling(rows)
    assert C >= 0.8 * (1.0 / 32.0) ** 0.25
    bad = rows[:-1] + [SweepRow(rows[-1].h, 10.0 * rows[-1].h ** -0.6, (0,), (0.0,))]
    with pytest.raises(AssertionError):
        hoermander_ceiling(bad)


# ---------------------------------------------------------------------------
# decay profiles
# ---------------------------------------------------------------------------

def _ho_mode(h):
    model = HarmonicOscillator(1.0, 2.6)
    sols = ho_eigs(model, h, SpectralWindow(1.0))
    sol = min(sols, key=lambda s: abs(s.lam - 1.0))
    return model, ho_joint_wrapper(model, sol)


def test_decay_profile_ho_ratios_near_one():
    h = 1.0 / 100.0
    model, u = _ho_mode(h)
    xs = u.axes[0].points
    pick = xs[(xs >= 1.15) & (xs <= 1.6)][::8]
    field = ho_action_field(u.e1, pick - math.sqrt(u.e1))
    rep = decay_profile(model, u, field, 0.05, Region("tail", {"x": ((1.15, 1.6),)}))
    assert np.all(rep.ratios > 0.85) and np.all(rep.ratios < 1.15)
    assert len(rep.ratios) == len(pick)


def test_decay_profile_rejects_allowed_region():
    from qcilab.errors import NegativeIntegrand
    h = 1.0 / 100.0
    model, u = _ho_mode(h)
    # sampling the field inside the well is itself a precondition violation
    with pytest.raises(NegativeIntegrand):
        ho_action_field(u.e1, np.array([-1.5, -1.4]))
    # and S = 0 samples (on the caustic) are rejected by the profile
    field = ho_action_field(u.e1, np.array([0.0, 0.1]))
    with pytest.raises(PreconditionError):
        decay_profile(model, u, field, 0.05, Region.everywhere())


@pytest.mark.invariant_suite
def test_decay_defect_shrinks_with_epsilon():
    h = 1.0 / 100.0
    model, u = _ho_mode(h)
    xs = u.axes[0].points
    pick = xs[(xs >= 1.15) & (xs <= 1.6)][::8]
    field = ho_action_field(u.e1, pick - math.sqrt(u.e1))
    region = Region("tail", {"x": ((1.15, 1.6),)})
    defects = [decay_profile(model, u, field, eps, region).max_defect
               for eps in (0.02, 0.1, 0.3)]
    assert defects[0] >= defects[1] >= defects[2]


def test_caustic_peak_locator_sor():
    h = 1.0 / 100.0
    sols = enumerate_family(SOR, h, SpectralWindow(1.0), family={"e2_over": 0.5})
    u = min(sols, key=lambda s: abs(s.e1 - 1.0))
    tdata = classify_projection(SOR, EnergyPair(u.e1, u.e2))
    peak, dist = caustic_peak_locator(u, tdata)
    assert dist < 0.1
    # Airy scale: ell = (h^2 / W')^(1/3) with W' ~ 5.4 at the caustic
    assert dist < 6.0 * (h * h / 5.4) ** (1.0 / 3.0)


def test_caustic_peak_locator_zonal_infinite_distance():
    h = 1.0 / 64.0
    sols = enumerate_family(SOR, h, SpectralWindow(1.0), family={"m": 0})
    tdata = classify_projection(SOR, EnergyPair(1.0, 0.0))
    _, dist = caustic_peak_locator(sols[0], tdata)
    assert math.isinf(dist)
