"""Catalogue of quantum completely integrable model systems.

Four model families are supported, each restricted to closed-form data so
that all derivatives used downstream (Morse checks, caustic locations,
action integrands) are exact:

* ``SurfaceOfRevolution`` -- metric dr^2 + f(r)^2 dtheta^2 on the chart
  (r, theta) in (-1, 1) x [0, 2pi), with f drawn from a named profile
  registry (currently the cosine profile f(r) = A cos(pi r / 2)).
* ``LiouvilleTorus`` -- metric (a(x1) + b(x2)) (dx1^2 + dx2^2) on the unit
  torus, with a, b finite cosine series and min a > max b.
* ``LiouvilleOscillator`` -- the same torus carrying the commuting
  Schroedinger pair with potentials b - a and -a*b.
* ``HarmonicOscillator`` -- the 1D model p = xi^2 + x^2 on a truncated line.

The commuting principal symbols are exposed through :func:`eval_p1` and
:func:`eval_p2`; chart volume densities through :func:`volume_density`.
All model values are immutable and every operation here is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import OutOfChart, Unsupported, ConfigError

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# profile / coefficient data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RevolutionProfile:
    """Named closed-form profile f of a convex surface of revolution.

    Only the ``cosine`` profile is registered: f(r) = amplitude * cos(pi r / 2),
    which satisfies f(+-1) = 0, f'' < 0 on (-1, 1), a single critical point at
    r = 0, and vanishing even derivatives at the poles.
    """

    name: str
    amplitude: float = 1.0
    even_vanish_order: int = 1  # even derivatives 0..2*order checked at poles

    def __post_init__(self):
        if self.name != "cosine":
            raise ConfigError("profile", f"unknown profile {self.name!r}")
        if not self.amplitude > 0:
            raise ConfigError("amplitude", "must be positive")

    def f(self, r):
        # cos(pi r / 2) written as sin(pi (1 - |r|) / 2): exact 0 at the poles
        # and full relative accuracy where f is small.
        r = np.asarray(r, dtype=float)
        return self.amplitude * np.sin(0.5 * np.pi * (1.0 - np.abs(r)))

    def fprime(self, r):
        return -0.5 * np.pi * self.amplitude * np.sin(0.5 * np.pi * np.asarray(r, dtype=float))

    def fsecond(self, r):
        return -((0.5 * np.pi) ** 2) * self.amplitude * np.cos(0.5 * np.pi * np.asarray(r, dtype=float))

    @property
    def f_max(self) -> float:
        return self.amplitude


def cosine_profile(amplitude: float = 1.0) -> RevolutionProfile:
    return RevolutionProfile("cosine", amplitude)


def _cosine_series(coeffs: Sequence[float], x, deriv: int = 0):
    """Evaluate sum_k c_k cos(2 pi k x) or its derivative at x (1-periodic)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for k, c in enumerate(coeffs):
        w = _TWO_PI * k
        if deriv == 0:
            out = out + c * np.cos(w * x)
        elif deriv == 1:
            out = out - c * w * np.sin(w * x)
        elif deriv == 2:
            out = out - c * w * w * np.cos(w * x)
        else:
            raise ValueError("deriv must be 0, 1 or 2")
    return out


def _series_range(coeffs: Sequence[float], n: int = 20001) -> tuple[float, float]:
    xs = np.linspace(0.0, 1.0, n, endpoint=False)
    vals = _cosine_series(coeffs, xs)
    return float(vals.min()), float(vals.max())


@dataclass(frozen=True)
class LiouvilleData:
    """Finite cosine-series coefficients of the 1-periodic pair a(x1), b(x2).

    Coefficient lists are [constant, cos(2 pi x) coeff, cos(4 pi x) coeff, ...].
    """

    a_coeffs: tuple[float, ...]
    b_coeffs: tuple[float, ...]

    def a(self, x, deriv: int = 0):
        return _cosine_series(self.a_coeffs, x, deriv)

    def b(self, x, deriv: int = 0):
        return _cosine_series(self.b_coeffs, x, deriv)

    @property
    def a_range(self) -> tuple[float, float]:
        return _series_range(self.a_coeffs)

    @property
    def b_range(self) -> tuple[float, float]:
        return _series_range(self.b_coeffs)

    @property
    def a_min(self) -> float:
        return self.a_range[0]

    @property
    def a_max(self) -> float:
        return self.a_range[1]

    @property
    def b_min(self) -> float:
        return self.b_range[0]

    @property
    def b_max(self) -> float:
        return self.b_range[1]


# ---------------------------------------------------------------------------
# model variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceOfRevolution:
    profile: RevolutionProfile


@dataclass(frozen=True)
class LiouvilleTorus:
    data: LiouvilleData


@dataclass(frozen=True)
class LiouvilleOscillator:
    data: LiouvilleData


@dataclass(frozen=True)
class HarmonicOscillator:
    """1D oscillator symbol xi^2 + x^2 at energy `energy`, solved on [-L, L]."""

    energy: float
    truncation: float

    def __post_init__(self):
        if not self.energy > 0:
            raise ConfigError("energy", "must be positive")
        if not self.truncation > 2.0 * math.sqrt(self.energy):
            raise ConfigError("truncation", "must exceed 2*sqrt(energy)")


QciModel = Union[SurfaceOfRevolution, LiouvilleTorus, LiouvilleOscillator, HarmonicOscillator]


@dataclass(frozen=True)
class PhasePoint:
    """Chart coordinates (x, xi); one or two components per model dimension."""

    x: tuple[float, ...]
    xi: tuple[float, ...]

    def __post_init__(self):
        if len(self.x) != len(self.xi):
            raise ValueError("base and covector dimensions differ")


def phase_point(*coords: float) -> PhasePoint:
    """Build a PhasePoint from flat (x..., xi...) coordinates."""
    if len(coords) % 2:
        raise ValueError("need an even number of coordinates")
    k = len(coords) // 2
    return PhasePoint(tuple(float(c) for c in coords[:k]),
                      tuple(float(c) for c in coords[k:]))


def _check_chart(model: QciModel, x: tuple[float, ...], closed: bool = False) -> None:
    if isinstance(model, SurfaceOfRevolution):
        r = x[0]
        if closed:
            if not -1.0 <= r <= 1.0:
                raise OutOfChart(f"r={r} outside [-1, 1]")
        elif not -1.0 < r < 1.0:
            raise OutOfChart(f"r={r} outside the open chart (-1, 1)")
    elif isinstance(model, (LiouvilleTorus, LiouvilleOscillator)):
        pass  # periodic chart, any real pair is admissible
    elif isinstance(model, HarmonicOscillator):
        if not math.isfinite(x[0]):
            raise OutOfChart("x must be finite")


def _dim(model: QciModel) -> int:
    return 1 if isinstance(model, HarmonicOscillator) else 2


# ---------------------------------------------------------------------------
# symbols and volume
# ---------------------------------------------------------------------------

def eval_p1(model: QciModel, pt: PhasePoint) -> float:
    """First commuting principal symbol at a phase point.

    For the Laplacian models this is the metric Hamiltonian |xi|^2_g; the
    displayed radial formula with a minus sign in the source material is a
    typo and the positive-definite form is used.
    """
    if len(pt.x) != _dim(model):
        raise OutOfChart(f"expected {_dim(model)} base coordinates")
    _check_chart(model, pt.x)
    if isinstance(model, SurfaceOfRevolution):
        r = pt.x[0]
        xr, xth = pt.xi
        f = float(model.profile.f(r))
        return xr * xr + (xth * xth) / (f * f)
    if isinstance(model, LiouvilleTorus):
        xi, eta = pt.xi
        dens = float(model.data.a(pt.x[0]) + model.data.b(pt.x[1]))
        return (xi * xi + eta * eta) / dens
    if isinstance(model, LiouvilleOscillator):
        xi, eta = pt.xi
        a = float(model.data.a(pt.x[0]))
        b = float(model.data.b(pt.x[1]))
        return (xi * xi + eta * eta) / (a + b) + b - a
    if isinstance(model, HarmonicOscillator):
        return pt.xi[0] ** 2 + pt.x[0] ** 2
    raise Unsupported(type(model).__name__)


def eval_p2(model: QciModel, pt: PhasePoint) -> float:
    """Second commuting symbol (angular momentum resp. Liouville quadratic form)."""
    if isinstance(model, HarmonicOscillator):
        raise Unsupported("1D system has no second commuting symbol")
    if len(pt.x) != _dim(model):
        raise OutOfChart(f"expected {_dim(model)} base coordinates")
    _check_chart(model, pt.x)
    if isinstance(model, SurfaceOfRevolution):
        return pt.xi[1]
    if isinstance(model, LiouvilleTorus):
        xi, eta = pt.xi
        a = float(model.data.a(pt.x[0]))
        b = float(model.data.b(pt.x[1]))
        return (b * xi * xi - a * eta * eta) / (a + b)
    if isinstance(model, LiouvilleOscillator):
        xi, eta = pt.xi
        a = float(model.data.a(pt.x[0]))
        b = float(model.data.b(pt.x[1]))
        return (b * xi * xi - a * eta * eta) / (a + b) - a * b
    raise Unsupported(type(model).__name__)


def volume_density(model: QciModel, x) -> float:
    """Riemannian volume density in the chart (0 at the revolution poles).

    The revolution density depends only on r, so a bare r is accepted there.
    """
    x = (float(x),) if np.isscalar(x) else tuple(float(c) for c in x)
    if isinstance(model, SurfaceOfRevolution):
        if len(x) not in (1, 2):
            raise OutOfChart("expected (r,) or (r, theta)")
        _check_chart(model, x, closed=True)
        return max(float(model.profile.f(x[0])), 0.0)
    if len(x) != _dim(model):
        raise OutOfChart(f"expected {_dim(model)} base coordinates")
    _check_chart(model, x, closed=True)
    if isinstance(model, (LiouvilleTorus, LiouvilleOscillator)):
        return float(model.data.a(x[0]) + model.data.b(x[1]))
    return 1.0


# ---------------------------------------------------------------------------
# hypothesis validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


_VALIDATE_GRID = 20001  # >= 1e4 sample points per hypothesis


def validate_model(model: QciModel) -> ValidationReport:
    """Check the structural hypotheses of a model on a dense grid.

    Returns a failing report rather than raising; each check carries a short
    human-readable detail string.
    """
    checks: list[CheckResult] = []

    def add(name, passed, detail=""):
        checks.append(CheckResult(name, bool(passed), detail))

    if isinstance(model, SurfaceOfRevolution):
        p = model.profile
        rs = np.linspace(-1.0, 1.0, _VALIDATE_GRID)
        interior = rs[1:-1]
        fvals = p.f(interior)
        add("f vanishes at poles",
            abs(float(p.f(1.0))) < 1e-12 and abs(float(p.f(-1.0))) < 1e-12,
            f"f(1)={float(p.f(1.0)):.3e}")
        add("f positive on (-1,1)", float(fvals.min()) > 0.0,
            f"min f={float(fvals.min()):.3e}")
        add("f'' negative on (-1,1)", float(p.fsecond(interior).max()) < 0.0,
            f"max f''={float(p.fsecond(interior).max()):.3e}")
        add("f'(0)=0", abs(float(p.fprime(0.0))) < 1e-12,
            f"f'(0)={float(p.fprime(0.0)):.3e}")
        signs = np.sign(p.fprime(interior))
        signs = signs[signs != 0]  # grid may hit f' = 0 exactly
        sign_changes = int(np.sum(np.diff(signs) != 0))
        add("single critical point", sign_changes == 1,
            f"{sign_changes} sign changes of f'")
        even_ok = True
        detail = []
        for pole in (-1.0, 1.0):
            for dv, label in ((p.f(pole), "f"), (p.fsecond(pole), "f''")):
                if abs(float(dv)) > 1e-10:
                    even_ok = False
                    detail.append(f"{label}({pole:+.0f})={float(dv):.3e}")
        add("even derivatives vanish at poles", even_ok, "; ".join(detail))
    elif isinstance(model, (LiouvilleTorus, LiouvilleOscillator)):
        d = model.data
        a_min, a_max = d.a_range
        b_min, b_max = d.b_range
        add("a positive", a_min > 0.0, f"min a={a_min:.6g}")
        add("b positive", b_min > 0.0, f"min b={b_min:.6g}")
        add("min a > max b", a_min > b_max,
            f"min a={a_min:.6g}, max b={b_max:.6g}")
        add("1-periodic", True, "cosine series are 1-periodic by construction")
    elif isinstance(model, HarmonicOscillator):
        add("energy positive", model.energy > 0, f"E={model.energy}")
        add("truncation beyond turning points",
            model.truncation > 2.0 * math.sqrt(model.energy),
            f"L={model.truncation}, 2*sqrt(E)={2.0 * math.sqrt(model.energy):.6g}")
    else:
        add("known model", False, type(model).__name__)
    return ValidationReport(tuple(checks))


# ---------------------------------------------------------------------------
# configuration interface
# ---------------------------------------------------------------------------

def _require_keys(obj: dict, allowed: set[str], required: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}.{key}", "missing required key")


def _coeff_list(value, path: str) -> tuple[float, ...]:
    if (not isinstance(value, (list, tuple)) or not value
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise ConfigError(path, "expected a non-empty list of numbers")
    return tuple(float(v) for v in value)


def model_from_config(obj: dict, path: str = "model") -> QciModel:
    """Build a model from its JSON description.

    Shapes: {"type":"sor","profile":"cosine","amplitude":1.0},
    {"type":"liouville","a":[...],"b":[...]},
    {"type":"liouville-oscillator","a":[...],"b":[...]},
    {"type":"ho","energy":1.0,"truncation":3.0}.
    """
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    kind = obj.get("type")
    if kind == "sor":
        _require_keys(obj, {"type", "profile", "amplitude"}, {"type", "profile"}, path)
        return SurfaceOfRevolution(RevolutionProfile(obj["profile"],
                                                     float(obj.get("amplitude", 1.0))))
    if kind in ("liouville", "liouville-oscillator"):
        _require_keys(obj, {"type", "a", "b"}, {"type", "a", "b"}, path)
        data = LiouvilleData(_coeff_list(obj["a"], f"{path}.a"),
                             _coeff_list(obj["b"], f"{path}.b"))
        report = validate_model(LiouvilleTorus(data))
        if not report.ok:
            raise ConfigError(path, f"model hypotheses fail: {report.failed()}")
        return LiouvilleTorus(data) if kind == "liouville" else LiouvilleOscillator(data)
    if kind == "ho":
        _require_keys(obj, {"type", "energy", "truncation"}, {"type", "energy", "truncation"}, path)
        return HarmonicOscillator(float(obj["energy"]), float(obj["truncation"]))
    raise ConfigError(f"{path}.type", f"unknown model type {kind!r}")


def model_label(model: QciModel) -> str:
    """Deterministic short label used in CSV output."""
    if isinstance(model, SurfaceOfRevolution):
        return f"sor:{model.profile.name}[A={model.profile.amplitude:g}]"
    if isinstance(model, LiouvilleTorus):
        a = ",".join(f"{c:g}" for c in model.data.a_coeffs)
        b = ",".join(f"{c:g}" for c in model.data.b_coeffs)
        return f"liouville[a={a};b={b}]"
    if isinstance(model, LiouvilleOscillator):
        a = ",".join(f"{c:g}" for c in model.data.a_coeffs)
        b = ",".join(f"{c:g}" for c in model.data.b_coeffs)
        return f"liouville-osc[a={a};b={b}]"
    return f"ho[E={model.energy:g},L={model.truncation:g}]"


def axis_names(model: QciModel) -> tuple[str, ...]:
    if isinstance(model, SurfaceOfRevolution):
        return ("r", "theta")
    if isinstance(model, (LiouvilleTorus, LiouvilleOscillator)):
        return ("x1", "x2")
    return ("x",)
