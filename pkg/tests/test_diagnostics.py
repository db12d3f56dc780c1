import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timocat.diagnostics import (
    COMPONENTS,
    dissipation_rate,
    dissipation_residual,
    energy,
    energy_series,
    fit_decay_rate,
    higher_energy,
    hs_norm,
    hs_norm_series,
    m2_monitor,
    shift_trajectory,
    theta_mean_shift,
    trajectory_table,
)
from timocat.dynamics import Layout, LinearRHS, ModalState, SimConfig, Trajectory, simulate
from timocat.errors import InvalidOrder, MeanModeAbsent, NonPositiveValues, TooFewSamples
from timocat.initial import random_seeded, single_mode
from timocat.model import BoundarySet, ConstitutiveLaw, make_default_sigma

from conftest import field_values, fine_rule

BCS = list(BoundarySet)


def energy_oracle(state, p, xo=0):
    """E (or its x-differentiated level) by direct quadrature of the field values."""
    x, w = fine_rule(p.L)
    f = lambda name, order=0: field_values(state, name, x, order + xo)  # noqa: E731
    integrand = (p.rho1 * f("phi_t") ** 2 + p.rho2 * f("psi_t") ** 2 + p.b * f("psi", 1) ** 2
                 + p.k * (f("phi", 1) + f("psi")) ** 2 + p.rho3 * f("theta") ** 2 + p.tau0 * f("q") ** 2)
    return 0.5 * float(np.sum(w * integrand))


def test_single_psi_mode_energy(ones):
    lay = Layout(BoundarySet.DIRICHLET_ALL, 8, ones.L)
    e = energy(single_mode(lay, "psi", 1), ones)
    # b lambda^2 / 2 from bending plus k / 2 from shear
    assert e.E == pytest.approx(1.0, rel=1e-13)
    assert e.components["E_psi_x"] == pytest.approx(0.5)
    assert e.components["E_shear"] == pytest.approx(0.5)
    assert set(e.components) == set(COMPONENTS)


@pytest.mark.parametrize("bc", BCS)
def test_energy_matches_quadrature(mixed, bc, rng):
    lay = Layout(bc, 12, mixed.L)
    s = ModalState.from_array(lay, rng.standard_normal(lay.size))
    assert energy(s, mixed).E == pytest.approx(energy_oracle(s, mixed), rel=1e-11)


@pytest.mark.parametrize("bc", BCS)
def test_energy_is_nonnegative_and_quadratic(ones, bc, rng):
    lay = Layout(bc, 6, ones.L)
    y = rng.standard_normal(lay.size)
    e1 = energy(ModalState.from_array(lay, y), ones).E
    e3 = energy(ModalState.from_array(lay, 3 * y), ones).E
    assert e1 > 0 and e3 == pytest.approx(9 * e1)
    assert energy(ModalState.zeros(lay), ones).E == 0


@pytest.mark.parametrize("bc", BCS)
def test_energy_rate_is_minus_dissipation(mixed, bc, rng):
    lay = Layout(bc, 8, mixed.L)
    y = rng.standard_normal(lay.size)
    A = LinearRHS(mixed, lay).matrix
    h = 1e-5
    E = lambda v: energy(ModalState.from_array(lay, v), mixed).E  # noqa: E731
    dE = (E(y + h * A @ y) - E(y - h * A @ y)) / (2 * h)
    assert dE == pytest.approx(-dissipation_rate(y, mixed, lay), rel=1e-7)


def test_theta_mean_shift(ones):
    d = Layout(BoundarySet.DIRICHLET_ALL, 4, ones.L)
    y = np.arange(d.size, dtype=float)
    s = theta_mean_shift(ModalState.from_array(d, y, t=2.0))
    assert s.theta.coeffs[0] == 0 and s.t == 2.0
    assert np.array_equal(s.theta.coeffs[1:], y[d.slices["theta"]][1:])
    with pytest.raises(MeanModeAbsent):
        theta_mean_shift(ModalState.zeros(Layout(BoundarySet.NEUMANN_DISPLACEMENT, 4, ones.L)))


def test_shift_trajectory(ones, rng):
    d = Layout(BoundarySet.DIRICHLET_ALL, 3, ones.L)
    Y = rng.standard_normal((5, d.size))
    pos = d.slices["theta"].start
    shifted = shift_trajectory(Trajectory(np.arange(5.0), Y, d, {}))
    assert np.allclose(shifted.Y[:, pos], Y[:, pos] - Y[0, pos])
    n = Layout(BoundarySet.NEUMANN_DISPLACEMENT, 3, ones.L)
    traj = Trajectory(np.arange(5.0), rng.standard_normal((5, n.size)), n, {})
    assert shift_trajectory(traj) is traj


def test_conserved_theta_mean(ones):
    cfg = SimConfig(ones, ConstitutiveLaw.linear(1.0), "dirichlet_all", 8, 1e-3, 2.0, sample_every=100)
    y = random_seeded(cfg.layout, 2).to_array()
    y[cfg.layout.slices["theta"].start] = 0.4
    traj = simulate(cfg, ModalState.from_array(cfg.layout, y))
    assert np.allclose(traj.field("theta")[:, 0], 0.4, atol=1e-13)


@pytest.mark.parametrize("bc", BCS)
def test_dissipation_residual_small(mixed, bc):
    cfg = SimConfig(mixed, ConstitutiveLaw.linear(mixed.k), bc, 8, 1e-3, 1.0)
    resid = dissipation_residual(simulate(cfg, random_seeded(cfg.layout, 5)), mixed)
    assert np.abs(resid).max() < 1e-5


def test_dissipation_residual_needs_three_samples(ones):
    lay = Layout(BoundarySet.DIRICHLET_ALL, 3, ones.L)
    with pytest.raises(TooFewSamples):
        dissipation_residual(Trajectory(np.array([0.0, 1.0]), np.zeros((2, lay.size)), lay, {}), ones)


@pytest.mark.parametrize("bc", BCS)
def test_higher_energy_linear_law_matches_quadrature(mixed, bc, rng):
    lay = Layout(bc, 6, mixed.L)
    s = ModalState.from_array(lay, rng.standard_normal(lay.size))
    A = LinearRHS(mixed, lay).matrix
    s1 = ModalState.from_array(lay, A @ s.to_array())
    s2 = ModalState.from_array(lay, A @ s1.to_array())
    oracle = (energy_oracle(s, mixed) + energy_oracle(s1, mixed) + energy_oracle(s2, mixed)
              + energy_oracle(s, mixed, xo=1) + energy_oracle(s1, mixed, xo=1))
    got = higher_energy(s, mixed, ConstitutiveLaw.linear(mixed.k))
    assert got == pytest.approx(oracle, rel=1e-9)
    assert got >= energy(s, mixed).E


def test_higher_energy_nonlinear_close_to_linear_for_small_data(ones):
    lay = Layout(BoundarySet.NEUMANN_DISPLACEMENT, 6, ones.L)
    s = ModalState.from_array(lay, 1e-4 * random_seeded(lay, 1).to_array())
    lin = higher_energy(s, ones, ConstitutiveLaw.linear(1.0))
    nl = higher_energy(s, ones, make_default_sigma(1.0, 1.0))
    assert nl == pytest.approx(lin, rel=1e-5)


def test_hs_norm_single_mode(ones):
    lay = Layout(BoundarySet.DIRICHLET_ALL, 8, ones.L)
    s = single_mode(lay, "psi", 3, 2.0)
    for order in (1, 2, 3):
        assert hs_norm(s, order) == pytest.approx(2.0 * (1 + 9) ** (order / 2))
    theta = single_mode(lay, "theta", 2, 1.0)
    assert hs_norm(theta, 2) == pytest.approx(math.sqrt(5.0))
    with pytest.raises(InvalidOrder):
        hs_norm(s, 0)
    with pytest.raises(InvalidOrder):
        hs_norm(s, 4)


@pytest.mark.parametrize("bc", BCS)
def test_hs_norm_brackets_derivative_sum(mixed, bc, rng):
    # (1 + l^2)^2 lies between 1 + l^2 + l^4 and twice that
    lay = Layout(bc, 10, mixed.L)
    s = ModalState.from_array(lay, rng.standard_normal(lay.size))
    x, w = fine_rule(mixed.L)
    orders = {"phi": 2, "phi_t": 1, "psi": 2, "psi_t": 1, "theta": 1, "q": 1}
    total = sum(np.sum(w * field_values(s, name, x, d) ** 2)
                for name, top in orders.items() for d in range(top + 1))
    h2 = hs_norm(s, 2) ** 2
    assert total * (1 - 1e-10) <= h2 <= 2 * total * (1 + 1e-10)


def test_hs_norm_monotone_in_order(ones, rng):
    lay = Layout(BoundarySet.DIRICHLET_ALL, 6, ones.L)
    traj = Trajectory(np.arange(4.0), rng.standard_normal((4, lay.size)), lay, {})
    h1, h2, h3 = (hs_norm_series(traj, s) for s in (1, 2, 3))
    assert np.all(h1 <= h2) and np.all(h2 <= h3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["sine", "cosine"]))
def test_poincare_inequality(seed, family):
    from timocat.model import validate_params
    from timocat.spectral import Basis

    L = 1.7
    p = validate_params(dict(rho1=1, rho2=1, rho3=1, b=1, k=1, gamma=1, delta=1, kappa=1, mu=1, tau0=1, L=L))
    basis = Basis(family, 12, L)
    c = np.random.default_rng(seed).standard_normal(basis.size)
    x, w = fine_rule(L)
    u = basis.values(x) @ c
    ux = basis.values(x, 1) @ c
    assert np.sum(w * u**2) <= p.poincare * np.sum(w * ux**2) * (1 + 1e-10)


def test_fit_recovers_exponential():
    t = np.linspace(0, 10, 201)
    fit = fit_decay_rate(t, 3.0 * np.exp(-0.7 * t))
    assert fit.rate == pytest.approx(0.7, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.window == (2.5, 10.0)
    assert fit.to_dict()["window"] == [2.5, 10.0]


def test_fit_constant_series():
    t = np.linspace(0, 1, 50)
    fit = fit_decay_rate(t, np.full_like(t, 2.0))
    assert fit.rate == pytest.approx(0.0, abs=1e-14) and fit.r_squared == 1.0


def test_fit_explicit_window_and_failures():
    t = np.linspace(0, 10, 101)
    v = np.where(t < 5, np.exp(-t), np.exp(-5) * np.exp(-2 * (t - 5)))
    assert fit_decay_rate(t, v, window=(5, 10)).rate == pytest.approx(2.0)
    with pytest.raises(TooFewSamples):
        fit_decay_rate(t[:5], v[:5])
    with pytest.raises(NonPositiveValues):
        fit_decay_rate(t, -v)


def test_m2_monitor(ones, rng):
    lay = Layout(BoundarySet.DIRICHLET_ALL, 4, ones.L)
    traj = Trajectory(np.linspace(0, 1, 6), rng.standard_normal((6, lay.size)), lay, {})
    plain = m2_monitor(traj, 0.0)
    assert np.array_equal(plain, np.maximum.accumulate(hs_norm_series(traj, 2)))
    weighted = m2_monitor(traj, 0.3)
    assert np.all(np.diff(weighted) >= 0) and np.all(weighted >= plain)


def test_trajectory_table(ones):
    cfg = SimConfig(ones, ConstitutiveLaw.linear(1.0), "dirichlet_all", 4, 1e-2, 0.5)
    traj = simulate(cfg, single_mode(cfg.layout))
    table = trajectory_table(traj, ones)
    assert np.allclose(table["E"], energy_series(traj, ones))
    assert np.allclose(table["E"], sum(table[c] for c in COMPONENTS))
    assert all(len(v) == len(traj) for v in table.values())
    single = trajectory_table(Trajectory(traj.times[:1], traj.Y[:1], traj.layout, {}), ones)
    assert np.isnan(single["dissipation_residual"]).all()
