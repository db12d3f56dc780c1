"""Galerkin right-hand sides and time integration.

State vectors are flat arrays ``[Phi, Phi_t, Psi, Psi_t, Theta, Q]`` of modal
coefficients; :class:`ModalState` wraps them with their bases.  Field bases
follow the boundary conditions:

=====================  ===========  ====  ==================  ====
variant                phi          psi   theta               q
=====================  ===========  ====  ==================  ====
DIRICHLET_ALL          sine         sine  cosine (with mean)  sine
NEUMANN_DISPLACEMENT   cosine (*)   sine  cosine (*)          sine
=====================  ===========  ====  ==================  ====

(*) mean mode dropped (zero-mean spaces).

The modal equations are the projection of the PDE onto each field's own
basis, with every coupling written as a closed-form Gram matrix
``<d/dx b_i, e_j>``.  Under NEUMANN_DISPLACEMENT all couplings are diagonal.
Under DIRICHLET_ALL phi and psi are both sine series, so phi_x and psi_x are
cosine series and the phi/psi coupling is a dense (odd-parity) matrix.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

from . import kernels
from .errors import BasisMismatch, CFLViolation, EvaluationFailure, NonConvergence, ValidationError
from .model import BoundarySet, ConstitutiveLaw, PhysicalParams
from .spectral import COSINE, SINE, Basis, ModalVector, QuadratureRule, derivative_gram, make_quadrature

FIELDS = ("phi", "phi_t", "psi", "psi_t", "theta", "q")
INTEGRATORS = ("rk4", "implicit_midpoint")


def field_bases(bc: BoundarySet, m: int, L: float) -> dict:
    bc = BoundarySet.parse(bc)
    sine = Basis(SINE, m, L)
    if bc is BoundarySet.DIRICHLET_ALL:
        phi = sine
        theta = Basis(COSINE, m, L, includes_mean=True)
    else:
        phi = Basis(COSINE, m, L)
        theta = Basis(COSINE, m, L)
    return {"phi": phi, "phi_t": phi, "psi": sine, "psi_t": sine, "theta": theta, "q": sine}


@dataclass(frozen=True)
class Layout:
    bc: BoundarySet
    m: int
    L: float

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundarySet.parse(self.bc))
        if self.m < 1:
            raise ValidationError("truncation order m must be >= 1")

    @cached_property
    def bases(self) -> dict:
        return field_bases(self.bc, self.m, self.L)

    @cached_property
    def slices(self) -> dict:
        out, start = {}, 0
        for name in FIELDS:
            n = self.bases[name].size
            out[name] = slice(start, start + n)
            start += n
        return out

    @property
    def size(self) -> int:
        return self.slices["q"].stop


@dataclass(frozen=True)
class ModalState:
    """Modal coefficients of (phi, phi_t, psi, psi_t, theta, q) at time ``t``."""

    t: float
    phi: ModalVector
    phi_t: ModalVector
    psi: ModalVector
    psi_t: ModalVector
    theta: ModalVector
    q: ModalVector
    bc: BoundarySet

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundarySet.parse(self.bc))
        m, L = self.phi.basis.m, self.phi.basis.L
        expected = field_bases(self.bc, m, L)
        for name in FIELDS:
            if getattr(self, name).basis != expected[name]:
                raise BasisMismatch(f"field {name!r} has basis {getattr(self, name).basis}, "
                                    f"expected {expected[name]} for {self.bc.value}")

    @property
    def layout(self) -> Layout:
        return Layout(self.bc, self.phi.basis.m, self.phi.basis.L)

    def to_array(self) -> np.ndarray:
        return np.concatenate([getattr(self, name).coeffs for name in FIELDS])

    @classmethod
    def from_array(cls, layout: Layout, y, t: float = 0.0) -> "ModalState":
        y = np.asarray(y, dtype=float)
        if y.shape != (layout.size,):
            raise BasisMismatch(f"state vector has shape {y.shape}, expected ({layout.size},)")
        parts = {name: ModalVector(layout.bases[name], y[layout.slices[name]].copy()) for name in FIELDS}
        return cls(t=float(t), bc=layout.bc, **parts)

    @classmethod
    def zeros(cls, layout: Layout, t: float = 0.0) -> "ModalState":
        return cls.from_array(layout, np.zeros(layout.size), t)

    def with_field(self, name: str, coeffs) -> "ModalState":
        y = self.to_array()
        y[self.layout.slices[name]] = coeffs
        return ModalState.from_array(self.layout, y, self.t)


# ---------------------------------------------------------------- operators


@lru_cache(maxsize=64)
def linear_operator(p: PhysicalParams, layout: Layout) -> np.ndarray:
    """Matrix ``A`` with ``dy/dt = A y`` for the linear Galerkin system."""
    B = layout.bases
    s = layout.slices
    A = np.zeros((layout.size, layout.size))
    I_phi = np.eye(B["phi"].size)
    I_psi = np.eye(B["psi"].size)

    # rho1 phi_tt = k (phi_xx + psi_x) - mu phi_t
    A[s["phi"], s["phi_t"]] = I_phi
    A[s["phi_t"], s["phi"]] = p.k / p.rho1 * derivative_gram(B["phi"], B["phi"], 2)
    A[s["phi_t"], s["psi"]] = p.k / p.rho1 * derivative_gram(B["psi"], B["phi"], 1)
    A[s["phi_t"], s["phi_t"]] = -p.mu / p.rho1 * I_phi

    # rho2 psi_tt = b psi_xx - k (phi_x + psi) - gamma theta_x
    A[s["psi"], s["psi_t"]] = I_psi
    A[s["psi_t"], s["psi"]] = (p.b * derivative_gram(B["psi"], B["psi"], 2) - p.k * I_psi) / p.rho2
    A[s["psi_t"], s["phi"]] = -p.k / p.rho2 * derivative_gram(B["phi"], B["psi"], 1)
    A[s["psi_t"], s["theta"]] = -p.gamma / p.rho2 * derivative_gram(B["theta"], B["psi"], 1)

    # rho3 theta_t = -kappa q_x - gamma psi_tx
    A[s["theta"], s["q"]] = -p.kappa / p.rho3 * derivative_gram(B["q"], B["theta"], 1)
    A[s["theta"], s["psi_t"]] = -p.gamma / p.rho3 * derivative_gram(B["psi_t"], B["theta"], 1)

    # tau0 q_t = -delta q - kappa theta_x
    A[s["q"], s["q"]] = -p.delta / p.tau0 * np.eye(B["q"].size)
    A[s["q"], s["theta"]] = -p.kappa / p.tau0 * derivative_gram(B["theta"], B["q"], 1)
    A.setflags(write=False)
    return A


class Grid:
    """Basis matrices of a layout sampled on a quadrature rule."""

    def __init__(self, layout: Layout, quad: QuadratureRule | None = None, oversample: int = 4):
        self.layout = layout
        self.quad = quad if quad is not None else make_quadrature(layout.m, layout.L, oversample)
        self._cache = {}

    @property
    def nodes(self):
        return self.quad.nodes

    @property
    def weights(self):
        return self.quad.weights

    def matrix(self, name: str, order: int = 0) -> np.ndarray:
        key = (name, order)
        if key not in self._cache:
            M = self.layout.bases[name].values(self.quad.nodes, order)
            M.setflags(write=False)
            self._cache[key] = M
        return self._cache[key]

    def values(self, Y, name: str, order: int = 0) -> np.ndarray:
        """Nodal values of field ``name`` (x-derivative ``order``) for stacked states."""
        Y = np.asarray(Y)
        return Y[..., self.layout.slices[name]] @ self.matrix(name, order).T

    def project(self, nodal, name: str) -> np.ndarray:
        return np.asarray(nodal) @ (self.matrix(name) * self.quad.weights[:, None])

    def integrate(self, nodal):
        return np.asarray(nodal) @ self.quad.weights


@lru_cache(maxsize=32)
def default_grid(layout: Layout, oversample: int = 4) -> Grid:
    return Grid(layout, oversample=oversample)


class LinearRHS:
    def __init__(self, p: PhysicalParams, layout: Layout):
        self.layout = layout
        self.matrix = linear_operator(p, layout)

    def __call__(self, y):
        return self.matrix @ y


class NonlinearRHS:
    """Pseudo-spectral right-hand side for sigma(phi_x, psi).

    The elastic term of the phi equation, sigma_r phi_xx + sigma_s psi_x, is
    evaluated on the quadrature nodes and projected back onto the phi basis;
    the remaining equations are linear.
    """

    def __init__(self, p: PhysicalParams, layout: Layout, law: ConstitutiveLaw,
                 quad: QuadratureRule | None = None):
        self.p = p
        self.layout = layout
        self.law = law
        self.grid = default_grid(layout) if quad is None else Grid(layout, quad)
        A = linear_operator(p, layout).copy()
        s = layout.slices
        A[s["phi_t"], s["phi"]] = 0.0
        A[s["phi_t"], s["psi"]] = 0.0
        self._A0 = A
        g = self.grid
        self._Bx = g.matrix("phi", 1)
        self._Bxx = g.matrix("phi", 2)
        self._Bpsi = g.matrix("psi")
        self._Bpsix = g.matrix("psi", 1)
        self._proj = (g.matrix("phi") * g.weights[:, None]).T

    def elastic_flux(self, y):
        s = self.layout.slices
        phi, psi = y[s["phi"]], y[s["psi"]]
        r = self._Bx @ phi
        sv = self._Bpsi @ psi
        with np.errstate(all="raise"):
            try:
                flux = (np.asarray(self.law.sigma_r(r, sv)) * (self._Bxx @ phi)
                        + np.asarray(self.law.sigma_s(r, sv)) * (self._Bpsix @ psi))
            except FloatingPointError as exc:
                raise EvaluationFailure(f"sigma derivatives overflowed: {exc}") from exc
        return self._proj @ flux

    def __call__(self, y):
        out = self._A0 @ y
        out[self.layout.slices["phi_t"]] += self.elastic_flux(y) / self.p.rho1
        return out


def _check_state(state: ModalState, layout: Layout | None = None):
    if not isinstance(state, ModalState):
        raise BasisMismatch("expected a ModalState")
    if layout is not None and state.layout != layout:
        raise BasisMismatch(f"state layout {state.layout} does not match {layout}")


def rhs_linear(state: ModalState, p: PhysicalParams) -> ModalState:
    """Time derivative of ``state`` under the linear system."""
    _check_state(state)
    layout = state.layout
    return ModalState.from_array(layout, linear_operator(p, layout) @ state.to_array(), state.t)


def rhs_nonlinear(state: ModalState, p: PhysicalParams, law: ConstitutiveLaw,
                  quad: QuadratureRule | None = None) -> ModalState:
    """Time derivative of ``state`` under the nonlinear system with law ``law``."""
    _check_state(state)
    layout = state.layout
    f = NonlinearRHS(p, layout, law, quad)
    return ModalState.from_array(layout, f(state.to_array()), state.t)


# ---------------------------------------------------------------- stepping


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _implicit_midpoint(f, y, dt, tol=1e-12, max_iter=200):
    matrix = getattr(f, "matrix", None)
    if matrix is not None:
        half = 0.5 * dt * matrix
        eye = np.eye(len(y))
        return np.linalg.solve(eye - half, (eye + half) @ y)
    y_new = y + dt * f(y)
    for _ in range(max_iter):
        try:
            nxt = y + dt * f(0.5 * (y + y_new))
        except EvaluationFailure as exc:
            raise NonConvergence(f"implicit midpoint iteration diverged: {exc}") from exc
        if not np.all(np.isfinite(nxt)):
            raise NonConvergence("implicit midpoint iteration diverged")
        if np.max(np.abs(nxt - y_new)) <= tol * max(1.0, np.max(np.abs(nxt))):
            return nxt
        y_new = nxt
    raise NonConvergence(f"implicit midpoint stage did not converge in {max_iter} iterations")


def step(state: ModalState, rhs: Callable, dt: float, method: str = "rk4") -> ModalState:
    """Advance ``state`` by ``dt``.

    ``rhs`` maps a flat state vector to its time derivative (for example a
    :class:`LinearRHS` or :class:`NonlinearRHS`).
    """
    y = state.to_array()
    if method == "rk4":
        y = _rk4(rhs, y, dt)
    elif method == "implicit_midpoint":
        y = _implicit_midpoint(rhs, y, dt)
    else:
        raise ValidationError(f"unknown integrator {method!r}")
    return ModalState.from_array(state.layout, y, state.t + dt)


def rk4_matrix(A: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step for ``y' = A y`` as a matrix."""
    hA = dt * A
    eye = np.eye(A.shape[0])
    return eye + hA @ (eye + hA @ (eye + hA @ (eye + hA / 4.0) / 3.0) / 2.0)


def midpoint_matrix(A: np.ndarray, dt: float) -> np.ndarray:
    half = 0.5 * dt * A
    eye = np.eye(A.shape[0])
    return np.linalg.solve(eye - half, eye + half)


# ---------------------------------------------------------------- driver


def max_stable_dt(p: PhysicalParams, law: ConstitutiveLaw, m: int, cfl: float = 0.5) -> float:
    """``cfl * min(1/(lambda_m v_max), tau0/delta)``."""
    lam_m = m * math.pi / p.L
    v_max = max(math.sqrt(max(law.r1, p.k) / p.rho1), math.sqrt(p.b / p.rho2),
                p.kappa / math.sqrt(p.rho3 * p.tau0))
    relax = p.tau0 / p.delta if p.delta > 0 else math.inf
    return cfl * min(1.0 / (lam_m * v_max), relax)


@dataclass(frozen=True)
class SimConfig:
    params: PhysicalParams
    law: ConstitutiveLaw
    bc: BoundarySet
    m: int
    dt: float
    t_end: float
    sample_every: int = 1
    integrator: str = "rk4"
    cfl: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundarySet.parse(self.bc))
        if self.m < 1:
            raise ValidationError("m must be >= 1")
        if not self.dt > 0:
            raise ValidationError("dt must be > 0")
        if not self.t_end >= 0:
            raise ValidationError("t_end must be >= 0")
        if self.sample_every < 1:
            raise ValidationError("sample_every must be >= 1")
        if self.integrator not in INTEGRATORS:
            raise ValidationError(f"integrator must be one of {INTEGRATORS}")
        if abs(self.law.k - self.params.k) > 1e-12 * self.params.k:
            raise ValidationError("constitutive law and params disagree on k")
        if self.integrator == "rk4" and self.dt > self.dt_limit * (1 + 1e-12):
            warnings.warn(f"dt={self.dt:g} exceeds the RK4 bound {self.dt_limit:g}", CFLViolation,
                          stacklevel=3)

    @property
    def dt_limit(self) -> float:
        return max_stable_dt(self.params, self.law, self.m, self.cfl)

    @property
    def layout(self) -> Layout:
        return Layout(self.bc, self.m, self.params.L)

    @property
    def nsteps(self) -> int:
        if self.t_end == 0:
            return 0
        n = round(self.t_end / self.dt)
        if n >= 1 and abs(n * self.dt - self.t_end) <= 1e-9 * self.t_end:
            return int(n)
        return int(math.ceil(self.t_end / self.dt))

    @property
    def step_size(self) -> float:
        """Actual step: ``t_end / nsteps`` (never larger than ``dt``)."""
        return self.t_end / self.nsteps if self.nsteps else self.dt


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    Y: np.ndarray
    layout: Layout
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> ModalState:
        return ModalState.from_array(self.layout, self.Y[i], self.times[i])

    def states(self):
        return [self[i] for i in range(len(self))]

    def field(self, name: str) -> np.ndarray:
        return self.Y[:, self.layout.slices[name]]


def simulate(cfg: SimConfig, init: ModalState) -> Trajectory:
    """Integrate from ``init`` and return samples every ``cfg.sample_every`` steps.

    The first sample is ``init`` and the last is at ``t_end``.  Linear runs
    use a one-matrix-per-step propagator; the built-in nonlinear law uses the
    compiled RK4 loop; other laws fall back to :func:`step`.
    """
    layout = cfg.layout
    _check_state(init, layout)
    nsteps = cfg.nsteps
    dt = cfg.step_size
    y0 = np.ascontiguousarray(init.to_array())
    stride = cfg.sample_every
    times = init.t + dt * _sample_steps(nsteps, stride)
    if nsteps:
        times[-1] = init.t + cfg.t_end
    law = cfg.law
    if nsteps == 0:
        Y = y0[None, :].copy()
    elif law.is_linear:
        A = linear_operator(cfg.params, layout)
        R = rk4_matrix(A, dt) if cfg.integrator == "rk4" else midpoint_matrix(A, dt)
        Y = kernels.propagate_linear(np.ascontiguousarray(R), y0, nsteps, stride)
    elif law.amplitude and cfg.integrator == "rk4":
        f = NonlinearRHS(cfg.params, layout, law)
        s = layout.slices
        Y = kernels.rk4_default_law(
            np.ascontiguousarray(linear_operator(cfg.params, layout)),
            np.ascontiguousarray(f._Bx), np.ascontiguousarray(f._Bxx), np.ascontiguousarray(f._proj),
            float(law.amplitude), float(cfg.params.rho1), s["phi"].start, s["phi_t"].start,
            y0, dt, nsteps, stride)
    else:
        f = NonlinearRHS(cfg.params, layout, law)
        Y = np.empty((len(times), layout.size))
        Y[0] = y0
        state, j = init, 1
        for n in range(1, nsteps + 1):
            state = step(state, f, dt, cfg.integrator)
            if n % stride == 0 or n == nsteps:
                Y[j] = state.to_array()
                j += 1
    return Trajectory(times, Y, layout, meta={"dt": dt, "nsteps": nsteps})


def _sample_steps(nsteps: int, stride: int) -> np.ndarray:
    steps = list(range(0, nsteps + 1, stride))
    if steps[-1] != nsteps:
        steps.append(nsteps)
    return np.asarray(steps, dtype=float)
