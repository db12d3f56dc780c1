"""Spectral Galerkin simulation and Lyapunov decay certificates for a damped
Timoshenko beam coupled to hyperbolic (Cattaneo) heat conduction."""

from ._accel import backend_name
from .certificate import (
    DecayCertificate,
    SmallnessInputs,
    choose_constants,
    evaluate_lyapunov,
    functional_I,
    smallness_threshold,
    solve_w,
    verify_certificate,
)
from .diagnostics import (
    DecayFit,
    EnergySample,
    dissipation_residual,
    energy,
    energy_series,
    fit_decay_rate,
    higher_energy,
    hs_norm,
    m2_monitor,
    theta_mean_shift,
)
from .dynamics import Layout, ModalState, SimConfig, Trajectory, rhs_linear, rhs_nonlinear, simulate, step
from .model import (
    BoundarySet,
    ConstitutiveLaw,
    PhysicalParams,
    check_sigma_assumptions,
    make_default_sigma,
    validate_params,
)
from .spectral import Basis, ModalVector, QuadratureRule, derivative_gram, make_quadrature, project

__version__ = "0.1.0"
