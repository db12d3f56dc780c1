"""Physical parameters, constitutive laws and boundary-condition variants."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

import numpy as np

from .errors import (
    EvaluationFailure,
    MissingKey,
    MuZeroWithoutFlag,
    NegativeAmplitude,
    NonPositiveParameter,
    ValidationError,
)

PARAM_KEYS = ("rho1", "rho2", "rho3", "b", "k", "gamma", "delta", "kappa", "mu", "tau0", "L")
# mu (and delta, for the conservative limit) may vanish only in exploratory mode
_GATED = ("mu", "delta")
_STRICT = tuple(key for key in PARAM_KEYS if key not in _GATED)


@dataclass(frozen=True)
class PhysicalParams:
    """Coefficients of the scaled linear system plus the beam length.

    ``mu = 0`` and ``delta = 0`` are only representable with
    ``exploratory=True``; every decay statement in this package assumes both
    are positive.
    """

    rho1: float
    rho2: float
    rho3: float
    b: float
    k: float
    gamma: float
    delta: float
    kappa: float
    mu: float
    tau0: float
    L: float
    exploratory: bool = False

    def as_dict(self) -> dict:
        return {key: getattr(self, key) for key in PARAM_KEYS}

    def replace(self, **changes) -> "PhysicalParams":
        raw = self.as_dict()
        exploratory = changes.pop("exploratory", self.exploratory)
        raw.update(changes)
        return validate_params(raw, exploratory=exploratory)

    @property
    def poincare(self) -> float:
        """Sharp Poincare constant L^2/pi^2 on (0, L)."""
        return self.L**2 / math.pi**2


def validate_params(raw: Mapping | PhysicalParams, exploratory: bool | None = None) -> PhysicalParams:
    """Check positivity of the eleven coefficients and return frozen params.

    ``exploratory`` defaults to the value carried by ``raw`` (key
    ``"exploratory"`` or the attribute of an existing ``PhysicalParams``).
    """
    if isinstance(raw, PhysicalParams):
        if exploratory is None:
            exploratory = raw.exploratory
        raw = raw.as_dict()
    if exploratory is None:
        exploratory = bool(raw.get("exploratory", False))

    values = {}
    for key in PARAM_KEYS:
        if key not in raw:
            raise MissingKey(key)
        try:
            value = float(raw[key])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"parameter {key!r} is not a real number: {raw[key]!r}") from exc
        if not math.isfinite(value):
            raise ValidationError(f"parameter {key!r} is not finite: {value!r}")
        values[key] = value

    for key in _STRICT:
        if values[key] <= 0.0:
            raise NonPositiveParameter(key, values[key])
    for key in _GATED:
        if values[key] < 0.0:
            raise NonPositiveParameter(key, values[key])
    if values["mu"] == 0.0 and not exploratory:
        raise MuZeroWithoutFlag()
    if values["delta"] == 0.0 and not exploratory:
        raise NonPositiveParameter("delta", 0.0)
    return PhysicalParams(**values, exploratory=bool(exploratory))


class BoundarySet(str, Enum):
    """Boundary-condition variants.

    ``DIRICHLET_ALL``: phi = psi = q = 0 at both ends.
    ``NEUMANN_DISPLACEMENT``: phi_x = psi = q = 0 at both ends.
    """

    DIRICHLET_ALL = "dirichlet_all"
    NEUMANN_DISPLACEMENT = "neumann_displacement"

    @classmethod
    def parse(cls, value: "str | BoundarySet") -> "BoundarySet":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError as exc:
            names = ", ".join(v.value for v in cls)
            raise ValidationError(f"unknown boundary variant {value!r} (expected one of {names})") from exc


def _linear_sigma(k):
    def sigma(r, s):
        return k * (np.asarray(r) + np.asarray(s))

    def sigma_r(r, s):
        return np.full(np.broadcast(np.asarray(r), np.asarray(s)).shape, float(k))

    return sigma, sigma_r, sigma_r


@dataclass(frozen=True)
class ConstitutiveLaw:
    """Shear stress law sigma(r, s) with r = phi_x and s = psi.

    ``amplitude`` is set only for the built-in law
    ``k (r + s) + a r^3 / (1 + r^2)``; it lets the time stepper use the
    compiled kernel.  Arbitrary user laws go through the generic path.
    """

    kind: str
    k: float
    sigma: Callable = field(repr=False, compare=False)
    sigma_r: Callable = field(repr=False, compare=False)
    sigma_s: Callable = field(repr=False, compare=False)
    r0: float = 0.0
    r1: float = 0.0
    s0: float = 0.0
    amplitude: float | None = None

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    @classmethod
    def linear(cls, k: float) -> "ConstitutiveLaw":
        if not k > 0:
            raise NonPositiveParameter("k", k)
        sigma, sigma_r, sigma_s = _linear_sigma(k)
        return cls("linear", float(k), sigma, sigma_r, sigma_s, r0=k, r1=k, s0=k, amplitude=0.0)

    @classmethod
    def custom(cls, k, sigma, sigma_r, sigma_s, r0, r1, s0) -> "ConstitutiveLaw":
        return cls("nonlinear", float(k), sigma, sigma_r, sigma_s, float(r0), float(r1), float(s0))


def make_default_sigma(k: float, a: float = 0.0) -> ConstitutiveLaw:
    """Odd, smooth law ``k (r + s) + a r^3 / (1 + r^2)``.

    sigma_r = k + a r^2 (3 + r^2) / (1 + r^2)^2 lies in [k, k + 9a/8] (maximum
    at r = sqrt(3)); sigma_s = k.  ``a = 0`` returns the linear law.
    """
    if not k > 0:
        raise NonPositiveParameter("k", k)
    if a < 0 or not math.isfinite(a):
        raise NegativeAmplitude(f"perturbation amplitude must be >= 0 (got {a!r})")
    if a == 0:
        return ConstitutiveLaw.linear(k)
    k = float(k)
    a = float(a)

    def sigma(r, s):
        r = np.asarray(r, dtype=float)
        return k * (r + np.asarray(s, dtype=float)) + a * r**3 / (1.0 + r * r)

    def sigma_r(r, s):
        r = np.asarray(r, dtype=float)
        r2 = r * r
        out = k + a * r2 * (3.0 + r2) / (1.0 + r2) ** 2
        return np.broadcast_to(out, np.broadcast(r, np.asarray(s)).shape).copy()

    def sigma_s(r, s):
        return np.full(np.broadcast(np.asarray(r), np.asarray(s)).shape, k)

    return ConstitutiveLaw("nonlinear", k, sigma, sigma_r, sigma_s,
                           r0=k, r1=k + 9.0 * a / 8.0, s0=k, amplitude=a)


@dataclass(frozen=True)
class SigmaReport:
    """Outcome of :func:`check_sigma_assumptions`.

    ``checks`` maps a condition name to ``(measured value, passed)``.
    """

    checks: dict
    r0: float
    r1: float
    s0: float
    bounds_ok: bool

    @property
    def passed(self) -> bool:
        return self.bounds_ok and all(ok for _, ok in self.checks.values())

    def failed(self) -> list[str]:
        names = [name for name, (_, ok) in self.checks.items() if not ok]
        if not self.bounds_ok:
            names.append("derivative_bounds")
        return names


def check_sigma_assumptions(law: ConstitutiveLaw, tol: float = 1e-6, h: float = 1e-4,
                            box: float = 10.0, samples: int = 201) -> SigmaReport:
    """Finite-difference check of the structural conditions on sigma at the origin.

    Conditions: sigma_r(0,0) = sigma_s(0,0) = k and sigma_rr = sigma_rs =
    sigma_ss = 0 at (0,0), each via second-order central stencils with step
    ``h``.  Also samples the supplied sigma_r, sigma_s over ``[-box, box]^2``
    to report empirical r0, r1, s0 and whether they respect the declared
    bounds.
    """
    f = law.sigma

    def ev(r, s):
        try:
            value = float(np.asarray(f(r, s)))
        except Exception as exc:  # noqa: BLE001 - user callable
            raise EvaluationFailure(f"sigma failed at ({r}, {s}): {exc}") from exc
        if not math.isfinite(value):
            raise EvaluationFailure(f"sigma is not finite at ({r}, {s})")
        return value

    s00 = ev(0.0, 0.0)
    d_r = (ev(h, 0.0) - ev(-h, 0.0)) / (2 * h)
    d_s = (ev(0.0, h) - ev(0.0, -h)) / (2 * h)
    d_rr = (ev(h, 0.0) - 2 * s00 + ev(-h, 0.0)) / h**2
    d_ss = (ev(0.0, h) - 2 * s00 + ev(0.0, -h)) / h**2
    d_rs = (ev(h, h) - ev(h, -h) - ev(-h, h) + ev(-h, -h)) / (4 * h * h)

    scale = max(1.0, abs(law.k))
    checks = {
        "sigma_r(0,0)=k": (d_r, abs(d_r - law.k) <= tol * scale),
        "sigma_s(0,0)=k": (d_s, abs(d_s - law.k) <= tol * scale),
        "sigma_rr(0,0)=0": (d_rr, abs(d_rr) <= tol * scale),
        "sigma_rs(0,0)=0": (d_rs, abs(d_rs) <= tol * scale),
        "sigma_ss(0,0)=0": (d_ss, abs(d_ss) <= tol * scale),
    }

    grid = np.linspace(-box, box, samples)
    rr, ss = np.meshgrid(grid, grid, indexing="ij")
    try:
        sr = np.asarray(law.sigma_r(rr, ss), dtype=float)
        sq = np.asarray(law.sigma_s(rr, ss), dtype=float)
    except Exception as exc:  # noqa: BLE001
        raise EvaluationFailure(f"sigma derivatives failed on the sample box: {exc}") from exc
    if not (np.all(np.isfinite(sr)) and np.all(np.isfinite(sq))):
        raise EvaluationFailure("sigma derivatives are not finite on the sample box")
    r0, r1, s0 = float(sr.min()), float(sr.max()), float(np.abs(sq).max())
    slack = tol * scale
    bounds_ok = (r0 > 0 and law.r0 > 0 and law.r0 <= r0 + slack
                 and r1 <= law.r1 + slack and s0 <= law.s0 + slack)
    return SigmaReport(checks=checks, r0=r0, r1=r1, s0=s0, bounds_ok=bool(bounds_ok))


def dataclass_echo(obj) -> dict:
    """Plain-dict view of a dataclass, skipping callables."""
    out = {}
    for f_ in dataclasses.fields(obj):
        value = getattr(obj, f_.name)
        if callable(value):
            continue
        out[f_.name] = value.value if isinstance(value, Enum) else value
    return out
