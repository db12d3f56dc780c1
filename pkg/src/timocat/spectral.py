"""Orthonormal sine/cosine bases on (0, L), projection and quadrature.

Basis functions are

    s_i(x) = sqrt(2/L) sin(lambda_i x),  i >= 1
    c_i(x) = sqrt(2/L) cos(lambda_i x),  i >= 1,   c_0(x) = 1/sqrt(L)

with lambda_i = i pi / L.  Differentiation maps s_i -> lambda_i c_i and
c_i -> -lambda_i s_i, so derivatives of a modal vector are again modal
vectors in the other family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import BasisMismatch, IndexOutOfRange, NonFiniteSample

SINE = "sine"
COSINE = "cosine"


def lambda_i(i, L):
    """Mode frequency i pi / L."""
    if np.any(np.asarray(i) < 0) or not L > 0:
        raise ValueError("mode index must be >= 0 and L > 0")
    return np.asarray(i) * math.pi / L if np.ndim(i) else i * math.pi / L


@dataclass(frozen=True)
class Basis:
    family: str
    m: int
    L: float
    includes_mean: bool = False

    def __post_init__(self):
        if self.family not in (SINE, COSINE):
            raise ValueError(f"unknown basis family {self.family!r}")
        if self.m < 1:
            raise ValueError("truncation order m must be >= 1")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.family == SINE and self.includes_mean:
            raise ValueError("the sine family has no mean mode")

    @property
    def indices(self) -> np.ndarray:
        start = 0 if self.includes_mean else 1
        return np.arange(start, self.m + 1)

    @property
    def size(self) -> int:
        return self.m + (1 if self.includes_mean else 0)

    @property
    def lambdas(self) -> np.ndarray:
        return self.indices * math.pi / self.L

    @property
    def norms(self) -> np.ndarray:
        out = np.full(self.size, math.sqrt(2.0 / self.L))
        if self.includes_mean:
            out[0] = 1.0 / math.sqrt(self.L)
        return out

    def position(self, i: int) -> int:
        """Column of mode index ``i`` in coefficient vectors."""
        pos = i - (0 if self.includes_mean else 1)
        if i < 0 or pos < 0 or pos >= self.size:
            raise IndexOutOfRange(f"mode {i} not in {self.family} basis with m={self.m}")
        return pos

    def values(self, x, order: int = 0) -> np.ndarray:
        """Matrix of ``order``-th derivatives of every basis function at ``x``.

        Shape ``(len(x), size)``.  Uses d^n/dx^n sin(a x) = a^n sin(a x + n pi/2).
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lam = self.lambdas
        arg = np.outer(x, lam)
        trig = np.sin if self.family == SINE else np.cos
        if order == 0:
            vals = trig(arg)
        else:
            # exact quarter-turn shifts avoid rounding at x = 0
            n = order % 4
            if self.family == SINE:
                vals = (np.sin(arg), np.cos(arg), -np.sin(arg), -np.cos(arg))[n]
            else:
                vals = (np.cos(arg), -np.sin(arg), -np.cos(arg), np.sin(arg))[n]
            vals = vals * lam**order
        return vals * self.norms

    def derivative_family(self, order: int = 1) -> str:
        if order % 2 == 0:
            return self.family
        return COSINE if self.family == SINE else SINE


@dataclass(frozen=True)
class ModalVector:
    basis: Basis
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (self.basis.size,):
            raise BasisMismatch(
                f"expected {self.basis.size} coefficients for {self.basis}, got shape {coeffs.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, basis: Basis) -> "ModalVector":
        return cls(basis, np.zeros(basis.size))

    def __add__(self, other):
        _same_basis(self, other)
        return ModalVector(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_basis(self, other)
        return ModalVector(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return ModalVector(self.basis, self.coeffs * float(scalar))

    __rmul__ = __mul__


def _same_basis(a: ModalVector, b: ModalVector):
    if a.basis != b.basis:
        raise BasisMismatch(f"{a.basis} vs {b.basis}")


def eval_basis(basis: Basis, i: int, x):
    """Value of the basis function with mode index ``i`` at ``x``."""
    pos = basis.position(i)
    out = basis.values(x)[:, pos]
    return float(out[0]) if np.ndim(x) == 0 else out


def evaluate(v: ModalVector, x):
    out = v.basis.values(x) @ v.coeffs
    return float(out[0]) if np.ndim(x) == 0 else out


def evaluate_deriv(v: ModalVector, x, order: int = 1):
    out = v.basis.values(x, order) @ v.coeffs
    return float(out[0]) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def length(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values) -> float | np.ndarray:
        """Integrate sampled values; the last axis runs over nodes."""
        return np.asarray(values) @ self.weights


@lru_cache(maxsize=64)
def _gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def make_quadrature(m: int, L: float = math.pi, oversample: int = 4, order: int = 4) -> QuadratureRule:
    """Composite Gauss-Legendre rule with ``oversample * m`` equal panels.

    Each panel carries ``order`` nodes.  On equal panels the rule integrates
    products of any two retained basis functions to round-off.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if oversample < 2:
        raise ValueError("oversample must be >= 2")
    panels = oversample * m
    xg, wg = _gauss_legendre(order)
    edges = np.linspace(0.0, L, panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + 0.5 * h[:, None] * (xg + 1.0)).ravel()
    weights = (0.5 * h[:, None] * wg).ravel()
    return QuadratureRule(nodes, weights)


def project(f: Callable, basis: Basis, quad: QuadratureRule | None = None) -> ModalVector:
    """L2 projection of ``f`` onto ``basis``: coeff_i = int f b_i dx."""
    if quad is None:
        quad = make_quadrature(basis.m, basis.L)
    samples = np.asarray(f(quad.nodes), dtype=float)
    samples = np.broadcast_to(samples, quad.nodes.shape)
    if not np.all(np.isfinite(samples)):
        raise NonFiniteSample("f returned non-finite values on the quadrature nodes")
    B = basis.values(quad.nodes)
    return ModalVector(basis, B.T @ (quad.weights * samples))


def _raw_inner(fam_a: str, i: np.ndarray, fam_b: str, j: np.ndarray, L: float) -> np.ndarray:
    """Unnormalised int_0^L trig_a(lambda_i x) trig_b(lambda_j x) dx, matrix [j, i]."""
    I = np.asarray(i)[None, :].astype(float)
    J = np.asarray(j)[:, None].astype(float)
    same = I == J
    if fam_a == fam_b:
        if fam_a == SINE:
            return np.where(same & (I > 0), L / 2, 0.0)
        return np.where(same, np.where(I == 0, L, L / 2), 0.0)
    # int cos(a x) sin(b x) dx over (0, L): C = cosine index, S = sine index
    C, S = (I, J) if fam_a == COSINE else (J, I)
    odd = (np.rint(C + S).astype(int) % 2) == 1
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (L / math.pi) * S * 2.0 / (S * S - C * C)
    return np.where(odd & (S > 0), val, 0.0)


def derivative_gram(src: Basis, dst: Basis, order: int = 1) -> np.ndarray:
    """Matrix ``M[j, i] = <d^order/dx^order src_i, dst_j>`` in closed form."""
    if src.L != dst.L:
        raise BasisMismatch("bases live on different intervals")
    n = order % 4
    fam = src.derivative_family(order)
    if src.family == SINE:
        sign = (1.0, 1.0, -1.0, -1.0)[n]
    else:
        sign = (1.0, -1.0, -1.0, 1.0)[n]
    raw = _raw_inner(fam, src.indices, dst.family, dst.indices, src.L)
    scale = sign * src.lambdas**order * src.norms
    return raw * scale[None, :] * dst.norms[:, None]


def gram(a: Basis, b: Basis) -> np.ndarray:
    """``G[j, i] = <a_i, b_j>``."""
    return derivative_gram(a, b, 0)
