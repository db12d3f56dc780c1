"""Lyapunov decay certificate for the linear damped system.

The certificate combines the energy E with five multiplier functionals

    I1 = int(rho2 psi_t psi + rho1 phi_t w - (gamma tau0/kappa) psi q)
    I2 = rho1 int(phi_t phi)
    I4 = rho2 rho3 int(Theta psi_t),        Theta(x) = int_0^x theta
    I5 = -tau0 rho3 int(q Theta)

where ``w`` solves ``-w_xx = psi_x`` with ``w(0) = w(L) = 0``, into
``Lyap = N_hat E + N1 I1 + I2 + N4 I4 + N5 I5``.  :func:`choose_constants`
fixes every free multiplier by a margin rule and returns the decay rate
``alpha`` with ``Lyap(t) <= Lyap(0) exp(-2 alpha t)`` and
``beta1 E <= Lyap <= beta2 E``.

All functionals are evaluated in closed form from the modal coefficients;
theta is expected to be mean-free.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .diagnostics import energy_series, shift_trajectory
from .dynamics import Layout, ModalState, Trajectory
from .errors import BasisMismatch, ChainInfeasible, EmptyTrajectory, MuZero, NotFound, ValidationError
from .model import ConstitutiveLaw, PhysicalParams, validate_params
from .spectral import COSINE, SINE, Basis, ModalVector, gram

# ---------------------------------------------------------------- w problem


def _integral_of_ones(basis: Basis) -> np.ndarray:
    """``int_0^L b_j``."""
    lam = basis.lambdas
    if basis.family == SINE:
        parity = 1.0 - (-1.0) ** basis.indices
        return basis.norms * parity / lam
    out = np.zeros(basis.size)
    if basis.includes_mean:
        out[0] = math.sqrt(basis.L)
    return out


def _integral_of_x(basis: Basis) -> np.ndarray:
    """``int_0^L x b_j``."""
    L = basis.L
    sign = (-1.0) ** basis.indices
    lam = basis.lambdas
    if basis.family == SINE:
        return -basis.norms * L * sign / lam
    with np.errstate(divide="ignore", invalid="ignore"):
        out = basis.norms * (sign - 1.0) / lam**2
    if basis.includes_mean:
        out[0] = L**2 / 2.0 / math.sqrt(L)
    return out


def antiderivative_inner(src: Basis, dst: Basis) -> np.ndarray:
    """``M[j, i] = <int_0^x src_i, dst_j>`` in closed form."""
    if src.L != dst.L:
        raise BasisMismatch("bases live on different intervals")
    lam = src.lambdas
    if src.family == SINE:
        # int_0^x s_i = norm_i / lam_i - c_i(x) / lam_i
        cos = Basis(COSINE, src.m, src.L)
        return (np.outer(_integral_of_ones(dst), src.norms / lam) - gram(cos, dst) / lam)
    out = np.zeros((dst.size, src.size))
    start = 0
    if src.includes_mean:
        out[:, 0] = _integral_of_x(dst) / math.sqrt(src.L)
        start = 1
    sin = Basis(SINE, src.m, src.L)
    out[:, start:] = gram(sin, dst) / lam[start:]
    return out


def _antiderivative_values(v: ModalVector, x) -> np.ndarray:
    """``int_0^x v`` at points ``x`` (termwise)."""
    basis = v.basis
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lam = basis.lambdas
    arg = np.outer(x, lam)
    if basis.family == SINE:
        # 1 - cos(a) written as 2 sin(a/2)^2 keeps the value exact at x = 0
        terms = 2.0 * np.sin(0.5 * arg) ** 2 / lam
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.sin(arg) / lam
        if basis.includes_mean:
            terms[:, 0] = x
    return (terms * basis.norms) @ v.coeffs


@dataclass(frozen=True)
class WSolution:
    """Solution of ``-w_xx = psi_x``, ``w(0) = w(L) = 0``.

    ``w(x) = -int_0^x psi + (x/L) int_0^L psi``.  ``wt`` applies the same
    formula to ``psi_t``.
    """

    psi: ModalVector
    psi_t: ModalVector | None = None

    @property
    def L(self) -> float:
        return self.psi.basis.L

    def _w(self, v: ModalVector, x):
        x = np.asarray(x, dtype=float)
        total = _antiderivative_values(v, self.L)[0]
        out = -_antiderivative_values(v, x) + (np.atleast_1d(x) / self.L) * total
        return float(out[0]) if x.ndim == 0 else out

    def w(self, x):
        return self._w(self.psi, x)

    def __call__(self, x):
        return self.w(x)

    def wx(self, x):
        x = np.asarray(x, dtype=float)
        mean = _antiderivative_values(self.psi, self.L)[0] / self.L
        out = -(self.psi.basis.values(x) @ self.psi.coeffs) + mean
        return float(out[0]) if x.ndim == 0 else out

    def wxx(self, x):
        x = np.asarray(x, dtype=float)
        out = -(self.psi.basis.values(x, 1) @ self.psi.coeffs)
        return float(out[0]) if x.ndim == 0 else out

    def wt(self, x):
        if self.psi_t is None:
            raise ValidationError("no psi_t supplied to solve_w")
        return self._w(self.psi_t, x)


def solve_w(psi: ModalVector, psi_t: ModalVector | None = None) -> WSolution:
    if psi.basis.family != SINE:
        raise BasisMismatch("w problem needs psi in the sine basis")
    if psi_t is not None and psi_t.basis != psi.basis:
        raise BasisMismatch("psi_t must share the basis of psi")
    return WSolution(psi, psi_t)


# ---------------------------------------------------------------- functionals


class _FunctionalMatrices:
    """Closed-form bilinear pieces of I1, I2, I4 and I5 for one layout."""

    def __init__(self, layout: Layout):
        B = layout.bases
        self.layout = layout
        # <w, phi_t> = phi_t . (-K psi + x_int (ones . psi) / L)
        self.w_from_psi = (-antiderivative_inner(B["psi"], B["phi_t"])
                           + np.outer(_integral_of_x(B["phi_t"]), _integral_of_ones(B["psi"])) / layout.L)
        self.theta_psi_t = antiderivative_inner(B["theta"], B["psi_t"])
        self.theta_q = antiderivative_inner(B["theta"], B["q"])


_MATRICES: dict = {}


def _matrices(layout: Layout) -> _FunctionalMatrices:
    if layout not in _MATRICES:
        _MATRICES[layout] = _FunctionalMatrices(layout)
    return _MATRICES[layout]


def multiplier_functionals(Y, p: PhysicalParams, layout: Layout) -> dict:
    """I1, I2, I4, I5 for stacked state vectors ``Y`` of shape ``(..., n)``."""
    Y = np.asarray(Y, dtype=float)
    s = layout.slices
    mats = _matrices(layout)
    phi, phi_t = Y[..., s["phi"]], Y[..., s["phi_t"]]
    psi, psi_t = Y[..., s["psi"]], Y[..., s["psi_t"]]
    theta, q = Y[..., s["theta"]], Y[..., s["q"]]
    dot = lambda a, b: np.sum(a * b, axis=-1)  # noqa: E731
    I1 = (p.rho2 * dot(psi_t, psi) + p.rho1 * dot(phi_t, psi @ mats.w_from_psi.T)
          - p.gamma * p.tau0 / p.kappa * dot(psi, q))
    I2 = p.rho1 * dot(phi_t, phi)
    I4 = p.rho2 * p.rho3 * dot(psi_t, theta @ mats.theta_psi_t.T)
    I5 = -p.tau0 * p.rho3 * dot(q, theta @ mats.theta_q.T)
    return {1: I1, 2: I2, 4: I4, 5: I5}


def functional_I(state: ModalState, p: PhysicalParams, which: int, n1: float = 1.0) -> float:
    """Multiplier functional number ``which``; ``I3 = n1 * I1 + I2``."""
    if not isinstance(state, ModalState):
        raise BasisMismatch("expected a ModalState")
    if which not in (1, 2, 3, 4, 5):
        raise ValidationError(f"functional index must be 1..5 (got {which!r})")
    vals = multiplier_functionals(state.to_array(), p, state.layout)
    if which == 3:
        return float(n1 * vals[1] + vals[2])
    return float(vals[which])


# ---------------------------------------------------------------- constants


@dataclass(frozen=True)
class ChainEntry:
    name: str
    value: float
    bound: float
    kind: str  # "upper": value < bound; "lower": value > bound

    @property
    def slack(self) -> float:
        return self.bound - self.value if self.kind == "upper" else self.value - self.bound

    @property
    def holds(self) -> bool:
        return self.slack > 0


@dataclass(frozen=True)
class DecayCertificate:
    eps1: float
    eps2: float
    eps4: float
    eps4p: float
    eps5: float
    eps5p: float
    N1: float
    N4: float
    N5: float
    N: float
    N_hat: float
    C_psi_x: float
    C_phi_x: float
    C_psi_t: float
    C_theta: float
    C_phi_t: float
    C_q: float
    d1: float
    d2: float
    C_hat: float
    beta1: float
    beta2: float
    alpha: float
    c: float
    margin: float
    params: PhysicalParams = field(repr=False)
    C_hat_parts: dict = field(default_factory=dict, repr=False)
    chain: tuple = field(default_factory=tuple, repr=False)

    @property
    def coefficients(self) -> dict:
        return {name: getattr(self, name)
                for name in ("C_psi_x", "C_phi_x", "C_psi_t", "C_theta", "C_phi_t", "C_q")}

    def with_alpha(self, alpha: float) -> "DecayCertificate":
        """Copy with a different decay rate (used for fault injection)."""
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data["alpha"] = float(alpha)
        return DecayCertificate(**data)

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in self.__dataclass_fields__
               if name not in ("params", "C_hat_parts", "chain")}
        out["params"] = self.params.as_dict()
        out["C_hat_parts"] = dict(self.C_hat_parts)
        out["slack_ledger"] = [dict(asdict(e), slack=e.slack, holds=e.holds) for e in self.chain]
        return out


def choose_constants(p: PhysicalParams, margin: float = 0.5) -> DecayCertificate:
    """Fix every multiplier constant and return the certificate.

    Each tolerance is ``margin`` times its upper bound and each weight is its
    lower bound divided by ``margin``, chosen in dependency order
    eps1, eps2, eps4, eps5 -> N1 -> N4 -> eps4' -> N5 -> eps5' -> N.
    """
    p = validate_params(p)
    if p.mu == 0:
        raise MuZero()
    if p.delta == 0:
        raise ChainInfeasible("the certificate needs delta > 0")
    if not 0 < margin < 1:
        raise ValidationError(f"margin must lie in (0, 1) (got {margin!r})")
    rho1, rho2, rho3, b, k = p.rho1, p.rho2, p.rho3, p.b, p.k
    gamma, delta, kappa, mu, tau0 = p.gamma, p.delta, p.kappa, p.mu, p.tau0
    c = p.poincare
    chain = []

    def upper(name, bound):
        if not bound > 0 or not math.isfinite(bound):
            raise ChainInfeasible(f"upper bound for {name} is {bound!r}")
        value = margin * bound
        chain.append(ChainEntry(name, value, bound, "upper"))
        return value

    def lower(name, bound):
        if not bound > 0 or not math.isfinite(bound):
            raise ChainInfeasible(f"lower bound for {name} is {bound!r}")
        value = bound / margin
        chain.append(ChainEntry(name, value, bound, "lower"))
        return value

    eps1 = upper("eps1", 2 * b * kappa / (mu * kappa * c**2 + delta * gamma * c))
    eps2 = upper("eps2", 2 * k / (c * (k + mu)))
    eps4 = upper("eps4", 2 * gamma / kappa)
    eps5 = upper("eps5", 2 * kappa / (delta * c))

    B = b - eps1 / 2 * (mu * c**2 + delta * gamma * c / kappa)
    P = rho2 + eps1 / 2 * (rho1 * c + gamma * tau0 / kappa)
    G = gamma * rho2 - eps4 * rho2 * kappa / 2
    K = rho3 * kappa - eps5 * rho3 * delta * c / 2
    phi_x_gain = k - eps2 * c * (k + mu) / 2

    N1 = lower("N1", k / (2 * eps2 * B))
    N4 = lower("N4", N1 * P / G)
    literal = 2 * N1 * B / (N4 * rho3 * (b + k * c))
    corrected = 2 * (N1 * B - k / (2 * eps2)) / (N4 * rho3 * (b + k * c))
    second = 2 * phi_x_gain / (N4 * k * rho3 * c)
    eps4p = upper("eps4p", min(corrected, second))
    chain.append(ChainEntry("eps4p_literal", eps4p, min(literal, second), "upper"))
    T = gamma * rho3 + rho3 * (b + k + k * c) / (2 * eps4p)
    N5 = lower("N5", N4 * T / K)
    eps5p = upper("eps5p", 2 * (N4 * G - N1 * P) / (N5 * tau0 * gamma))
    n_from_phi_t = (N1 * (mu + rho1) / (2 * eps1) + mu / (2 * eps2) + rho1) / mu
    q_loss = (N1 * (gamma * tau0 / kappa + delta * gamma / kappa) / (2 * eps1)
              + N4 * rho2 * kappa / (2 * eps4)
              + N5 * (tau0 * kappa + rho3 * delta / (2 * eps5) + tau0 * gamma / (2 * eps5p)))
    N = lower("N", max(n_from_phi_t, q_loss / delta))

    C_psi_x = N1 * B - k / (2 * eps2) - N4 * eps4p * rho3 * (b + k * c) / 2
    C_phi_x = phi_x_gain - N4 * eps4p * k * rho3 * c / 2
    C_psi_t = N4 * G - N1 * P - N5 * eps5p * tau0 * gamma / 2
    C_theta = N5 * K - N4 * T
    C_phi_t = N * mu - N1 * (mu + rho1) / (2 * eps1) - (mu / (2 * eps2) + rho1)
    C_q = N * delta - q_loss
    coeffs = dict(C_psi_x=C_psi_x, C_phi_x=C_phi_x, C_psi_t=C_psi_t, C_theta=C_theta,
                  C_phi_t=C_phi_t, C_q=C_q)
    bad = [name for name, v in coeffs.items() if not v > 0]
    if bad:
        raise ChainInfeasible(f"non-positive coefficients: {', '.join(bad)}")

    C = 0.5 * min(C_psi_x, C_phi_x)
    d1 = min(C_phi_t, C_psi_t, C_psi_x - C, min(C, C / c) / 2, C_theta, C_q)
    d2 = 2 * d1 / max(rho1, rho2, b, k, rho3, tau0)

    parts = {
        "phi_t": 0.5 * (N1 * rho1 + rho1),
        "psi_t": 0.5 * (N1 * rho2 + rho2 * rho3 * N4),
        "psi_x": 0.5 * (N1 * rho2 * c + N1 * rho1 * c**2 + N1 * gamma * tau0 * c / kappa + 2 * rho1 * c**2),
        "phi_x_plus_psi": rho1 * c,
        "theta": 0.5 * (N4 * rho2 * rho3 * c + N5 * rho3 * tau0 * c),
        "q": 0.5 * (N1 * gamma * tau0 / kappa + N5 * rho3 * tau0),
    }
    # integral of the six squares is at most 2 E / min(coefficients)
    C_hat = 2 * max(parts.values()) / min(rho1, rho2, b, k, rho3, tau0)
    N_hat = max(N, C_hat) / margin
    chain.append(ChainEntry("N_hat", N_hat, max(N, C_hat), "lower"))
    beta1 = N_hat - C_hat
    beta2 = N_hat + C_hat
    alpha = d2 / (2 * beta2)
    return DecayCertificate(
        eps1=eps1, eps2=eps2, eps4=eps4, eps4p=eps4p, eps5=eps5, eps5p=eps5p,
        N1=N1, N4=N4, N5=N5, N=N, N_hat=N_hat, d1=d1, d2=d2, C_hat=C_hat,
        beta1=beta1, beta2=beta2, alpha=alpha, c=c, margin=margin, params=p,
        C_hat_parts=parts, chain=tuple(chain), **coeffs)


# ---------------------------------------------------------------- Lyapunov


def lyapunov_series(Y, p: PhysicalParams, cert: DecayCertificate, layout: Layout) -> np.ndarray:
    from .diagnostics import energy_components

    E = sum(energy_components(Y, p, layout).values())
    I = multiplier_functionals(Y, p, layout)
    return cert.N_hat * E + cert.N1 * I[1] + I[2] + cert.N4 * I[4] + cert.N5 * I[5]


def evaluate_lyapunov(state: ModalState, p: PhysicalParams, cert: DecayCertificate) -> float:
    """``N_hat E + N1 I1 + I2 + N4 I4 + N5 I5`` for a mean-free state."""
    return float(lyapunov_series(state.to_array(), p, cert, state.layout))


@dataclass
class VerificationReport:
    times: np.ndarray
    energy: np.ndarray
    lyapunov: np.ndarray
    sandwich_ok: np.ndarray
    decay_ok: np.ndarray
    energy_bound_ok: np.ndarray
    monotone_ok: np.ndarray
    alpha: float
    tol: float
    advisory: bool = False

    @property
    def passed(self) -> bool:
        return bool(self.sandwich_ok.all() and self.decay_ok.all()
                    and self.energy_bound_ok.all() and self.monotone_ok.all())

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "advisory": self.advisory,
            "alpha": self.alpha,
            "tol": self.tol,
            "samples": int(len(self.times)),
            "sandwich_failures": int((~self.sandwich_ok).sum()),
            "decay_failures": int((~self.decay_ok).sum()),
            "energy_bound_failures": int((~self.energy_bound_ok).sum()),
            "monotone_failures": int((~self.monotone_ok).sum()),
            "E0": float(self.energy[0]),
            "E_final": float(self.energy[-1]),
            "L0": float(self.lyapunov[0]),
            "L_final": float(self.lyapunov[-1]),
        }


def verify_certificate(traj: Trajectory, p: PhysicalParams, cert: DecayCertificate, tol: float = 1e-9,
                       law: ConstitutiveLaw | None = None) -> VerificationReport:
    """Check sandwich, Lyapunov decay and energy bound at every sample.

    theta is mean-shifted by its initial mean first.  For nonlinear laws the
    checks are run but the report is flagged advisory, since the certificate
    is a statement about the linear system.
    """
    if len(traj) == 0:
        raise EmptyTrajectory("trajectory has no samples")
    traj = shift_trajectory(traj)
    t = traj.times - traj.times[0]
    E = energy_series(traj, p)
    Lyap = lyapunov_series(traj.Y, p, cert, traj.layout)
    decay = np.exp(-2 * cert.alpha * t)
    sandwich = (cert.beta1 * E - tol * E <= Lyap) & (Lyap <= cert.beta2 * E + tol * E)
    decay_ok = Lyap <= Lyap[0] * decay * (1 + tol)
    energy_ok = E <= (cert.beta2 / cert.beta1) * E[0] * decay * (1 + tol)
    scaled = Lyap / decay
    monotone = np.ones(len(t), dtype=bool)
    monotone[1:] = np.diff(scaled) <= tol * abs(Lyap[0])
    advisory = law is not None and not law.is_linear
    return VerificationReport(t + traj.times[0], E, Lyap, sandwich, decay_ok, energy_ok, monotone,
                              cert.alpha, tol, advisory)


# ---------------------------------------------------------------- smallness


@dataclass(frozen=True)
class SmallnessInputs:
    c1: float
    c_gen: float
    d: float
    nu: float
    delta_small: float

    def __post_init__(self):
        if not (self.c1 > 0 and self.c_gen >= 0 and self.delta_small > 0):
            raise ValidationError("c1 and delta_small must be positive, c_gen non-negative")
        if not (self.d > 1 and self.nu > 1):
            raise ValidationError("d and nu must exceed 1")


def smallness_function(inp: SmallnessInputs, x):
    """``c1 delta + c delta^(1/2) nu x^(3/2) exp(c sqrt(d nu) sqrt(x)) - x``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        growth = inp.c_gen * math.sqrt(inp.delta_small) * inp.nu * x**1.5 * np.exp(
            inp.c_gen * math.sqrt(inp.d * inp.nu) * np.sqrt(x))
    growth = np.where(np.isnan(growth), np.inf, growth)
    return inp.c1 * inp.delta_small + growth - x


def smallness_threshold(inp: SmallnessInputs, x_max: float = 1e3, samples: int = 20001,
                        xtol: float = 1e-12) -> float:
    """Smallest positive zero of :func:`smallness_function` on ``(0, x_max]``.

    Sign changes are located on a geometric grid (the zero sits near
    ``c1 delta`` in the small-data regime) and refined with Brent's method.
    """
    lo = min(inp.c1 * inp.delta_small, x_max) * 1e-6
    grid = np.concatenate([[0.0], np.geomspace(lo, x_max, samples)])
    f = smallness_function(inp, grid)
    neg = np.nonzero(f <= 0)[0]
    if len(neg) == 0:
        raise NotFound(f"f stays positive on (0, {x_max:g}]; the data bound is too large")
    i = neg[0]
    if f[i] == 0:
        return float(grid[i])
    return float(brentq(lambda x: float(smallness_function(inp, x)), grid[i - 1], grid[i],
                        xtol=xtol, rtol=4 * np.finfo(float).eps))
