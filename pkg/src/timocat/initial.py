"""Named initial-data presets.

Every preset returns a state whose theta component has zero spatial mean,
so the same data serves both the simulator and the decay certificate.
"""

from __future__ import annotations

import numpy as np

from .dynamics import FIELDS, Layout, ModalState
from .errors import ValidationError
from .spectral import make_quadrature, project

PRESETS = ("single_mode", "gaussian_bump", "random_seeded")


def _zero_theta_mean(y: np.ndarray, layout: Layout) -> np.ndarray:
    if layout.bases["theta"].includes_mean:
        y[layout.slices["theta"].start] = 0.0
    return y


def single_mode(layout: Layout, field: str = "psi", index: int = 1, amplitude: float = 1.0) -> ModalState:
    if field not in FIELDS:
        raise ValidationError(f"unknown field {field!r}; expected one of {FIELDS}")
    basis = layout.bases[field]
    y = np.zeros(layout.size)
    y[layout.slices[field].start + basis.position(index)] = amplitude
    return ModalState.from_array(layout, _zero_theta_mean(y, layout))


def gaussian_bump(layout: Layout, center: float | None = None, width: float = 0.1,
                  amplitude: float = 1.0) -> ModalState:
    """Projection of ``amplitude * exp(-(x - center)^2 / (2 width^2))`` onto phi, psi and theta.

    Velocities and the heat flux start at zero.
    """
    L = layout.L
    center = 0.5 * L if center is None else float(center)
    if not 0 <= center <= L:
        raise ValidationError(f"bump center {center} outside [0, {L}]")
    if not 0 < width <= L:
        raise ValidationError(f"bump width must lie in (0, {L}]")

    def bump(x):
        return amplitude * np.exp(-0.5 * ((x - center) / width) ** 2)

    quad = make_quadrature(max(layout.m, 64), L, oversample=8)
    y = np.zeros(layout.size)
    for name in ("phi", "psi", "theta"):
        y[layout.slices[name]] = project(bump, layout.bases[name], quad).coeffs
    return ModalState.from_array(layout, _zero_theta_mean(y, layout))


def random_seeded(layout: Layout, seed: int = 0, decay_exponent: float = 2.0,
                  amplitude: float = 1.0) -> ModalState:
    """Gaussian coefficients damped by ``(1 + j)^-decay_exponent`` in mode index j."""
    rng = np.random.default_rng(seed)
    y = np.empty(layout.size)
    for name in FIELDS:
        basis = layout.bases[name]
        y[layout.slices[name]] = rng.standard_normal(basis.size) * (1.0 + basis.indices) ** -decay_exponent
    return ModalState.from_array(layout, _zero_theta_mean(amplitude * y, layout))


def make_initial(layout: Layout, preset: str, **kwargs) -> ModalState:
    builders = {"single_mode": single_mode, "gaussian_bump": gaussian_bump, "random_seeded": random_seeded}
    if preset not in builders:
        raise ValidationError(f"unknown initial preset {preset!r}; expected one of {PRESETS}")
    return builders[preset](layout, **kwargs)
