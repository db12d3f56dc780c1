"""Energies, Sobolev-type norms, dissipation residuals and decay fits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import FIELDS, Layout, LinearRHS, ModalState, NonlinearRHS, Trajectory, default_grid
from .errors import InvalidOrder, MeanModeAbsent, NonPositiveValues, TooFewSamples
from .model import ConstitutiveLaw, PhysicalParams

COMPONENTS = ("E_phi_t", "E_psi_t", "E_psi_x", "E_shear", "E_theta", "E_q")


@dataclass(frozen=True)
class EnergySample:
    t: float
    E: float
    components: dict
    dissipation_residual: float | None = None
    h_norms: dict = field(default_factory=dict)


def energy_components(Y, p: PhysicalParams, layout: Layout) -> dict:
    """The six addends of E for stacked state vectors ``Y`` (shape ``(..., n)``).

    Every addend is a Parseval sum except the shear term, whose integrand
    mixes sine and cosine families and is integrated on the quadrature grid.
    """
    Y = np.asarray(Y, dtype=float)
    s = layout.slices
    lam_psi = layout.bases["psi"].lambdas
    grid = default_grid(layout)
    shear = grid.values(Y, "phi", 1) + grid.values(Y, "psi")
    return {
        "E_phi_t": 0.5 * p.rho1 * np.sum(Y[..., s["phi_t"]] ** 2, axis=-1),
        "E_psi_t": 0.5 * p.rho2 * np.sum(Y[..., s["psi_t"]] ** 2, axis=-1),
        "E_psi_x": 0.5 * p.b * np.sum((lam_psi * Y[..., s["psi"]]) ** 2, axis=-1),
        "E_shear": 0.5 * p.k * grid.integrate(shear**2),
        "E_theta": 0.5 * p.rho3 * np.sum(Y[..., s["theta"]] ** 2, axis=-1),
        "E_q": 0.5 * p.tau0 * np.sum(Y[..., s["q"]] ** 2, axis=-1),
    }


def energy(state: ModalState, p: PhysicalParams) -> EnergySample:
    comps = {name: float(v) for name, v in energy_components(state.to_array(), p, state.layout).items()}
    return EnergySample(t=state.t, E=sum(comps.values()), components=comps)


def energy_series(traj: Trajectory, p: PhysicalParams) -> np.ndarray:
    comps = energy_components(traj.Y, p, traj.layout)
    return sum(comps[name] for name in COMPONENTS)


def _mean_position(layout: Layout) -> int:
    basis = layout.bases["theta"]
    if not basis.includes_mean:
        raise MeanModeAbsent(f"theta basis under {layout.bc.value} has no mean mode")
    return layout.slices["theta"].start


def theta_mean_shift(state: ModalState) -> ModalState:
    """Remove the spatial mean of theta (the mean is conserved by the dynamics)."""
    pos = _mean_position(state.layout)
    y = state.to_array()
    y[pos] = 0.0
    return ModalState.from_array(state.layout, y, state.t)


def shift_trajectory(traj: Trajectory) -> Trajectory:
    """Subtract the initial theta mean from every sample; no-op without a mean mode."""
    if not traj.layout.bases["theta"].includes_mean:
        return traj
    pos = _mean_position(traj.layout)
    Y = traj.Y.copy()
    Y[:, pos] -= traj.Y[0, pos]
    return Trajectory(traj.times, Y, traj.layout, traj.meta)


def dissipation_rate(Y, p: PhysicalParams, layout: Layout) -> np.ndarray:
    """mu |phi_t|^2 + delta |q|^2, the exact energy loss rate."""
    s = layout.slices
    Y = np.asarray(Y)
    return p.mu * np.sum(Y[..., s["phi_t"]] ** 2, axis=-1) + p.delta * np.sum(Y[..., s["q"]] ** 2, axis=-1)


def dissipation_residual(traj: Trajectory, p: PhysicalParams, floor: float = 1e-14) -> np.ndarray:
    """Per-sample ``dE/dt + mu|phi_t|^2 + delta|q|^2`` relative to ``max(E(0), floor)``.

    dE/dt comes from second-order finite differences of the sampled energy
    (centred inside, one-sided second order at both ends).
    """
    if len(traj) < 3:
        raise TooFewSamples("dissipation residual needs at least 3 samples")
    E = energy_series(traj, p)
    dE = np.gradient(E, traj.times, edge_order=2)
    return (dE + dissipation_rate(traj.Y, p, traj.layout)) / max(E[0], floor)


# ---------------------------------------------------------------- higher energy


def _time_derivatives(y, p, law, layout):
    """State vector and its first two time derivatives."""
    if law.is_linear:
        A = LinearRHS(p, layout).matrix
        y1 = A @ y
        return y, y1, A @ y1
    f = NonlinearRHS(p, layout, law)
    y1 = f(y)
    scale = np.linalg.norm(y1)
    if scale == 0:
        return y, y1, np.zeros_like(y)
    eps = 1e-6 * max(1.0, np.linalg.norm(y)) / scale
    y2 = (f(y + eps * y1) - f(y - eps * y1)) / (2 * eps)
    return y, y1, y2


def higher_energy(state: ModalState, p: PhysicalParams, law: ConstitutiveLaw) -> float:
    """Total energy summing E over five derivative levels of the state.

    Levels: (V), (V_t), (V_tt), (V_x), (V_tx).  Each level is E with the shear
    coefficient k replaced by sigma_r(phi_x, psi) evaluated at the current
    state.  Time derivatives come from the right-hand side (exact powers of
    the operator for the linear law, a directional difference otherwise).
    """
    layout = state.layout
    grid = default_grid(layout)
    y = state.to_array()
    derivs = _time_derivatives(y, p, law, layout)
    sigma_hat = np.asarray(law.sigma_r(grid.values(y, "phi", 1), grid.values(y, "psi")), dtype=float)
    sigma_hat = np.broadcast_to(sigma_hat, grid.nodes.shape)

    def level(Yn, xo):
        v = lambda name, extra=0: grid.values(Yn, name, xo + extra)  # noqa: E731
        integrand = (p.rho1 * v("phi_t") ** 2 + p.rho2 * v("psi_t") ** 2 + p.b * v("psi", 1) ** 2
                     + sigma_hat * (v("phi", 1) + v("psi")) ** 2
                     + p.rho3 * v("theta") ** 2 + p.tau0 * v("q") ** 2)
        return 0.5 * grid.integrate(integrand)

    return float(level(derivs[0], 0) + level(derivs[1], 0) + level(derivs[2], 0)
                 + level(derivs[0], 1) + level(derivs[1], 1))


# ---------------------------------------------------------------- norms


def _hs_weights(layout: Layout, s: int) -> np.ndarray:
    if s not in (1, 2, 3):
        raise InvalidOrder(f"Sobolev order must be 1, 2 or 3 (got {s!r})")
    orders = {"phi": s, "phi_t": s - 1, "psi": s, "psi_t": s - 1, "theta": s - 1, "q": s - 1}
    return np.concatenate([(1.0 + layout.bases[name].lambdas ** 2) ** orders[name] for name in FIELDS])


def hs_norm(state: ModalState, s: int) -> float:
    """Norm with orders (s, s-1, s, s-1, s-1, s-1) over (phi, phi_t, psi, psi_t, theta, q).

    Each component uses the modal weight ``(1 + lambda_j^2)^order``.
    """
    w = _hs_weights(state.layout, s)
    return float(np.sqrt(np.sum(w * state.to_array() ** 2)))


def hs_norm_series(traj: Trajectory, s: int) -> np.ndarray:
    w = _hs_weights(traj.layout, s)
    return np.sqrt(np.sum(w * traj.Y**2, axis=-1))


def m2_monitor(traj: Trajectory, alpha: float) -> np.ndarray:
    """Running maximum of ``exp(alpha t) |V(t)|_2``."""
    weighted = np.exp(alpha * (traj.times - traj.times[0])) * hs_norm_series(traj, 2)
    return np.maximum.accumulate(weighted)


# ---------------------------------------------------------------- decay fits


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    window: tuple

    def to_dict(self) -> dict:
        return {"rate": self.rate, "r_squared": self.r_squared, "window": list(self.window)}


def fit_decay_rate(times, values, window=None, min_points: int = 10) -> DecayFit:
    """Least-squares fit of ``log(values)`` against ``t``; rate is minus the slope.

    ``window`` defaults to ``[t_end/4, t_end]``.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is None:
        window = (t[-1] / 4.0, t[-1])
    lo, hi = float(window[0]), float(window[1])
    mask = (t >= lo) & (t <= hi)
    if mask.sum() < min_points:
        raise TooFewSamples(f"only {int(mask.sum())} samples in window [{lo}, {hi}], need {min_points}")
    tw, vw = t[mask], v[mask]
    if np.any(vw <= 0) or not np.all(np.isfinite(vw)):
        raise NonPositiveValues("decay fit needs positive finite values in the window")
    logv = np.log(vw)
    slope, intercept = np.polyfit(tw, logv, 1)
    resid = logv - (slope * tw + intercept)
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    if ss_tot <= 1e-28 * max(1.0, float(np.sum(logv**2))):
        r2 = 1.0
    else:
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
    return DecayFit(rate=float(-slope), r_squared=float(min(1.0, max(0.0, r2))), window=(lo, hi))


def trajectory_table(traj: Trajectory, p: PhysicalParams) -> dict:
    """Column data for the trajectory CSV."""
    comps = energy_components(traj.Y, p, traj.layout)
    E = sum(comps[name] for name in COMPONENTS)
    if len(traj) >= 3:
        resid = dissipation_residual(traj, p)
    else:
        resid = np.full(len(traj), np.nan)
    table = {"t": traj.times, "E": E}
    table.update(comps)
    table["dissipation_residual"] = resid
    table["h2_norm"] = hs_norm_series(traj, 2)
    table["h3_norm"] = hs_norm_series(traj, 3)
    return table
