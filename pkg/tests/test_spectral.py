import math

import numpy as np
import pytest

from qcilab.classical import EnergyPair, classify_projection
from qcilab.errors import (ConfigError, EmptyRegion, NoBracket,
                           PreconditionError, Unsupported)
from qcilab.models import (HarmonicOscillator, LiouvilleData, LiouvilleTorus,
                           SurfaceOfRevolution, cosine_profile)
from qcilab.spectral import (AxisProfile, BoundaryCondition, Grid1D,
                             JointEigenfunction, Region, SpectralWindow,
                             default_grid_n, ho_eigs, ho_joint_wrapper,
                             liouville_joint_eigs, match_branch_pair, oracle_2d,
                             solve_sl_dirichlet, solve_sl_periodic,
                             sor_joint_eigs, sup_norm)

PROFILE = cosine_profile()
LDATA = LiouvilleData((2.0, 0.3), (0.5, 0.2))
FLAT = LiouvilleData((2.0,), (0.5,))


# ---------------------------------------------------------------------------
# 1D solvers
# ---------------------------------------------------------------------------

def test_dirichlet_free_particle_on_interval():
    grid = Grid1D(0.0, math.pi, 1024)
    sols = solve_sl_dirichlet(np.zeros(grid.n), 1.0, grid, SpectralWindow(1.0, 0.5))
    assert len(sols) == 1
    s = sols[0]
    assert s.lam == pytest.approx(1.0, abs=1e-5)  # k^2 with O(dx^2) defect
    # eigenfunction proportional to sin(x)
    xs = grid.points()
    target = np.sin(xs)
    target /= math.sqrt(np.trapezoid(target * target, dx=grid.spacing))
    assert np.max(np.abs(np.abs(s.values) - np.abs(target))) < 1e-4


def test_dirichlet_oscillator_first_excited():
    grid = Grid1D(-20.0, 20.0, 12001)
    h = 0.01
    xs = grid.points()
    sols = solve_sl_dirichlet(xs * xs, h, grid, SpectralWindow(3 * h, 0.5))
    assert len(sols) == 1
    s = sols[0]
    assert s.lam == pytest.approx(0.03, abs=2e-5)  # (2n+1) h with n = 1
    assert s.node_count() == 1


def test_dirichlet_rejects_non_finite_interior():
    grid = Grid1D(0.0, 1.0, 128)
    V = np.zeros(grid.n)
    V[64] = math.inf
    with pytest.raises(PreconditionError):
        solve_sl_dirichlet(V, 1.0, grid, SpectralWindow(1.0, 1.0))


def test_periodic_free_spectrum():
    grid = Grid1D(0.0, 1.0, 1024, periodic=True)
    k2 = (2 * math.pi) ** 2
    sols = solve_sl_periodic(np.zeros(grid.n), 1.0, grid, SpectralWindow(k2, 2.0))
    assert len(sols) == 2  # cos and sin branches of k = 1
    for s in sols:
        assert s.lam == pytest.approx(k2, rel=1e-4)


def test_periodic_cosine_well_oracle():
    # dense eigensolve is the independent oracle for the split solver
    n, h = 256, 0.05
    grid = Grid1D(0.0, 1.0, n, periodic=True)
    V = np.cos(2 * math.pi * grid.points())
    window = SpectralWindow(-0.5, 11.0)  # covers (-1.05, 0.05)
    sols = solve_sl_periodic(V, h, grid, window)
    lowest = min(s.lam for s in sols)
    assert -1.0 < lowest < 0.0
    beta = (h / grid.spacing) ** 2
    C = np.diag(2 * beta + V) - beta * (np.eye(n, k=1) + np.eye(n, k=-1))
    C[0, -1] -= beta
    C[-1, 0] -= beta
    dense = np.linalg.eigvalsh(C)
    mine = sorted(s.lam for s in sols)
    lo, hi = window.bounds(h)
    expected = [w for w in dense if lo <= w <= hi]
    assert np.allclose(mine, expected, atol=1e-10)


def test_periodic_constant_shift_is_exact():
    grid = Grid1D(0.0, 1.0, 64, periodic=True)
    c = 0.731
    base = solve_sl_periodic(np.zeros(64), 1.0, grid, SpectralWindow(40.0, 45.0))
    shifted = solve_sl_periodic(np.full(64, c), 1.0, grid,
                                SpectralWindow(40.0 + c, 45.0))
    assert len(base) == len(shifted) > 0
    for s0, s1 in zip(base, shifted):
        assert s1.lam - s0.lam == pytest.approx(c, abs=1e-11)


@pytest.mark.invariant_suite
def test_eigen_residual_bounds():
    grid = Grid1D(-1.0, 1.0, 2048)
    h = 1.0 / 40.0
    xs = grid.points()
    sols = solve_sl_dirichlet(4.0 * xs * xs, h, grid, SpectralWindow(1.0, 5.0))
    assert sols
    for s in sols:
        bound = 1e-9 * (1.0 + abs(s.lam)) * float(np.max(np.abs(s.values)))
        assert s.residual <= bound
    pgrid = Grid1D(0.0, 1.0, 1024, periodic=True)
    V = np.asarray(LDATA.a(pgrid.points()))
    for s in solve_sl_periodic(-V, h, pgrid, SpectralWindow(0.0, 20.0)):
        bound = 1e-9 * (1.0 + abs(s.lam)) * float(np.max(np.abs(s.values)))
        assert s.residual <= bound


@pytest.mark.invariant_suite
def test_grid_convergence_richardson():
    h = 1.0 / 20.0
    lams = []
    for n in (513, 1025, 2049):
        grid = Grid1D(-1.0, 1.0, n)
        xs = grid.points()
        sols = solve_sl_dirichlet(2.0 * xs * xs, h, grid, SpectralWindow(1.0, 3.0))
        lams.append(sols[0].lam)
    c1 = abs(lams[1] - lams[0])
    c2 = abs(lams[2] - lams[1])
    predicted_residual = c1 / 3.0  # Richardson error estimate of the fine value
    assert c2 <= 4.5 * predicted_residual
    assert c2 == pytest.approx(c1 / 4.0, rel=0.2)  # confirms O(dx^2) order


# ---------------------------------------------------------------------------
# surface of revolution joint modes
# ---------------------------------------------------------------------------

def test_sor_zonal_modes_theta_independent():
    h = 1.0 / 64.0
    sols = sor_joint_eigs(PROFILE, h, (0, 0), SpectralWindow(1.0))
    assert sols
    for u in sols:
        assert u.quantum_numbers[0] == 0
        assert u.e2 == 0.0
        assert abs(u.norm_check() - 1.0) < 1e-8
    # zonal amplitude grows like f^{-1/2}: global argmax sits by a pole
    value, loc = sup_norm(sols[0], Region.everywhere())
    assert abs(loc[0]) > 0.95
    assert value > 2.0


def test_sor_supercritical_m_empty():
    h = 1.0 / 64.0
    m = int(1.2 / h)
    assert sor_joint_eigs(PROFILE, h, (m, m), SpectralWindow(1.0)) == []


def test_sor_airy_peak_near_caustic():
    h = 1.0 / 100.0
    m = 50  # E2 = 0.5, caustic at f(r) = 0.5, i.e. r = 2/3
    sols = sor_joint_eigs(PROFILE, h, (m, m), SpectralWindow(1.0))
    assert sols
    u = min(sols, key=lambda s: abs(s.e1 - 1.0))
    v = u.factors[0]
    peak_r = v.grid.points()[int(np.argmax(np.abs(v.values)))]
    assert abs(abs(peak_r) - 2.0 / 3.0) < 0.1
    assert abs(u.norm_check() - 1.0) < 1e-8


def test_sor_window_and_e2_bookkeeping():
    h = 1.0 / 48.0
    sols = sor_joint_eigs(PROFILE, h, (0, int(1.1 / h)), SpectralWindow(1.0))
    assert sols
    for u in sols:
        assert abs(u.e1 - 1.0) <= 5.0 * h + 1e-12
        assert u.e2 == u.quantum_numbers[0] * h


# ---------------------------------------------------------------------------
# Liouville two-parameter matching
# ---------------------------------------------------------------------------

def _discrete_kappa(j, n):
    dx = 1.0 / n
    return (2.0 - 2.0 * math.cos(2.0 * math.pi * j * dx)) / (dx * dx)


def test_liouville_flat_closed_form():
    h = 1.0 / 30.0
    n = 1024
    A, B = 2.0, 0.5
    sols = liouville_joint_eigs(FLAT, h, SpectralWindow(1.0), (-2.4, 0.9),
                                n_override=n)
    assert sols
    # discrete dispersion: E1 = h^2 (kappa_j + kappa_k) / (A + B)
    expected = set()
    for j in range(0, 40):
        for k in range(0, 40):
            e1 = h * h * (_discrete_kappa(j, n) + _discrete_kappa(k, n)) / (A + B)
            if abs(e1 - 1.0) <= 5.0 * h:
                expected.add((j, k))
    assert expected
    got_e1 = sorted(u.e1 for u in sols)
    exp_e1 = sorted(h * h * (_discrete_kappa(j, n) + _discrete_kappa(k, n)) / (A + B)
                    for (j, k) in expected)
    # multiplicity: cos/sin per nonzero wavenumber on each axis
    mult = {(j, k): (1 if j == 0 else 2) * (1 if k == 0 else 2) for j, k in expected}
    assert len(got_e1) == sum(mult.values())
    for u in sols:
        best = min(exp_e1, key=lambda t: abs(t - u.e1))
        assert u.e1 == pytest.approx(best, abs=1e-8)
        # e2 identity: lam = h^2 kappa_j - E1 A for the matched j
        cands = [h * h * _discrete_kappa(j, n) - u.e1 * A for (j, k) in expected]
        assert min(abs(c - u.e2) for c in cands) < 1e-7


def _apply_p2_rayleigh(u, data):
    """Discrete P2 Rayleigh quotient; independent check of e2."""
    sol_a, sol_b = u.factors
    v, w = sol_a.values, sol_b.values
    grid = sol_a.grid
    dx = grid.spacing
    h = u.h
    xs = grid.points()
    a_vals = np.asarray(data.a(xs))
    b_vals = np.asarray(data.b(xs))

    def d2(vec):
        return (np.roll(vec, 1) - 2.0 * vec + np.roll(vec, -1)) / (dx * dx)

    h2v = h * h * d2(v)
    h2w = h * h * d2(w)
    # <u, P2 u> with the (a+b) weight cancelling the operator prefactor
    num = -(float(np.sum(v * h2v) * dx) * float(np.sum(b_vals * w * w) * dx)
            - float(np.sum(a_vals * v * v) * dx) * float(np.sum(w * h2w) * dx))
    den = (float(np.sum(a_vals * v * v) * dx) * float(np.sum(w * w) * dx)
           + float(np.sum(v * v) * dx) * float(np.sum(b_vals * w * w) * dx))
    return num / den


def test_liouville_cosine_solutions_and_p2_identity():
    h = 1.0 / 24.0
    sols = liouville_joint_eigs(LDATA, h, SpectralWindow(1.0), (-2.6, 0.9))
    assert sols
    for u in sols:
        assert abs(u.e1 - 1.0) <= 5.0 * h + 1e-12
        assert abs(u.norm_check() - 1.0) < 1e-8
        assert _apply_p2_rayleigh(u, LDATA) == pytest.approx(u.e2, abs=1e-6)
        for f in u.factors:
            bound = 1e-9 * (1.0 + abs(f.lam)) * float(np.max(np.abs(f.values)))
            assert f.residual <= bound


def test_liouville_empty_scan():
    assert liouville_joint_eigs(LDATA, 1.0 / 24.0, SpectralWindow(1.0), (0.5, 0.5)) == []


def test_match_branch_pair_no_bracket():
    # ground x ground: lam_A + lam_B stays negative over the whole bracket
    with pytest.raises(NoBracket):
        match_branch_pair(LDATA, 1.0 / 16.0, ("even", 0), ("even", 0), n=256)


# ---------------------------------------------------------------------------
# harmonic oscillator
# ---------------------------------------------------------------------------

def test_ho_eigs_near_unity():
    model = HarmonicOscillator(1.0, 2.6)
    h = 0.01
    sols = ho_eigs(model, h, SpectralWindow(1.0, 2.0))
    lams = sorted(s.lam for s in sols)
    assert lams == pytest.approx([0.99, 1.01], abs=5e-4)


def test_ho_ground_state_only():
    model = HarmonicOscillator(1.0, 2.6)
    h = 0.01
    sols = ho_eigs(model, h, SpectralWindow(0.008, 0.5))
    assert len(sols) == 1
    assert sols[0].lam == pytest.approx(h, abs=1e-6)


def test_ho_truncation_precondition():
    with pytest.raises(ConfigError):
        HarmonicOscillator(1.0, 1.0)  # L = 1 reaches inside the turning points


def test_ho_forbidden_tail_matches_wkb():
    """Reconstructed log-tail tracks the action integral within WKB error."""
    from qcilab.action import action_1d, ho_turning_points
    model = HarmonicOscillator(1.0, 2.6)
    h = 1.0 / 50.0
    sols = ho_eigs(model, h, SpectralWindow(1.0, 2.0))
    sol = min(sols, key=lambda s: abs(s.lam - 1.0))
    tp = ho_turning_points(sol.lam)
    xs = sol.grid.points()
    logs = sol.log_abs()
    for x_target in (1.3, 1.6, 1.9, 2.2):
        i = int(np.argmin(np.abs(xs - x_target)))
        S = action_1d(tp, float(xs[i]))
        ratio = -h * logs[i] / S
        assert 0.8 < ratio < 1.2, (x_target, ratio)


# ---------------------------------------------------------------------------
# sup norms and regions
# ---------------------------------------------------------------------------

def test_sup_norm_flat_plane_wave():
    # |u| = 1 everywhere on a unit-area flat torus, any region
    n = 64
    xs = np.linspace(0.0, 1.0, n, endpoint=False)
    ones = np.ones(n)
    axes = (AxisProfile("x1", xs, ones, np.zeros(n)),
            AxisProfile("x2", xs, ones, np.zeros(n)))
    u = JointEigenfunction(0.1, (1, 0), 1.0, 0.0, (), 1.0,
                           LiouvilleTorus(LiouvilleData((0.7,), (0.3,))), axes)
    for region in (Region.everywhere(),
                   Region("box", {"x1": ((0.2, 0.4),), "x2": ((0.5, 0.9),)})):
        value, _ = sup_norm(u, region)
        assert value == pytest.approx(1.0)


def test_sup_norm_empty_region():
    h = 1.0 / 32.0
    sols = sor_joint_eigs(PROFILE, h, (0, 0), SpectralWindow(1.0))
    with pytest.raises(EmptyRegion):
        sup_norm(sols[0], Region("off-chart", {"r": ((2.0, 3.0),)}))


# ---------------------------------------------------------------------------
# 2D oracle
# ---------------------------------------------------------------------------

def test_oracle_preconditions():
    with pytest.raises(PreconditionError):
        oracle_2d(LiouvilleTorus(LDATA), 1.0 / 200.0, SpectralWindow(1.0))
    with pytest.raises(PreconditionError):
        oracle_2d(LiouvilleTorus(LDATA), 1.0 / 30.0, SpectralWindow(1.0), (256, 64))


def test_oracle_flat_matches_separated():
    h = 1.0 / 30.0
    n = 64
    oracle = oracle_2d(LiouvilleTorus(FLAT), h, SpectralWindow(1.0), (n, n))
    separated = liouville_joint_eigs(FLAT, h, SpectralWindow(1.0), (-2.4, 0.9),
                                     n_override=n)
    assert oracle.eigenvalues and separated
    got = np.asarray(oracle.eigenvalues)
    exp = np.asarray(sorted(u.e1 for u in separated))
    assert len(got) == len(exp)
    assert np.max(np.abs(got - exp) / exp) < 1e-8


@pytest.mark.invariant_suite
def test_separation_identity_residual_order():
    """Fine-grid separated products nearly satisfy coarse 2D discretizations."""
    h = 1.0 / 30.0
    fine = liouville_joint_eigs(LDATA, h, SpectralWindow(1.0, 2.0), (-2.6, 0.9),
                                n_override=4096)
    assert fine
    u = fine[0]
    residuals = []
    for n in (64, 128):
        stride = 4096 // n
        v = u.factors[0].values[::stride]
        w = u.factors[1].values[::stride]
        xs = u.factors[0].grid.points()[::stride]
        a_vals = np.asarray(LDATA.a(xs))
        b_vals = np.asarray(LDATA.b(xs))
        dx = 1.0 / n
        U = np.outer(v, w)

        def lap(M):
            return ((np.roll(M, 1, 0) - 2 * M + np.roll(M, -1, 0)) / dx ** 2
                    + (np.roll(M, 1, 1) - 2 * M + np.roll(M, -1, 1)) / dx ** 2)

        dens = a_vals[:, None] + b_vals[None, :]
        res = -h * h * lap(U) - u.e1 * dens * U
        residuals.append(float(np.max(np.abs(res))) / float(np.max(np.abs(U))))
    ratio = residuals[0] / residuals[1]
    assert 2.5 < ratio < 6.5  # O(dx^2): halving the spacing quarters the defect
    C = residuals[1] / (1.0 / 128) ** 2
    for res, n in zip(residuals, (64, 128)):
        assert res <= 1.05 * C * (1.0 / n) ** 2


def test_default_grid_sizing():
    assert default_grid_n(1.0 / 32.0) == 1024
    assert default_grid_n(1.0 / 64.0) == 1536
    assert default_grid_n(1.0 / 64.0, length=5.2) == 3994
