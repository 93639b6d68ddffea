"""Parallel transport on finite-dimensional fibers.

``dyson_transport`` sums the iterated-integral series of x' = F_t x,
``nilpotent_transport`` is the finite exponential for nilpotent F, and
``fd_derivative`` differentiates sampled sections.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np


class NotNilpotentError(ValueError):
    pass


@dataclass(frozen=True)
class LinearFamily:
    """t -> F_t, a d x d complex matrix."""

    dim: int
    evaluator: Callable[[float], Any]

    def __call__(self, t: float) -> np.ndarray:
        F = np.asarray(self.evaluator(float(t)), dtype=complex)
        if F.shape != (self.dim, self.dim):
            raise ValueError(f"F_t has shape {F.shape}, expected {(self.dim, self.dim)}")
        return F

    @classmethod
    def constant(cls, F) -> "LinearFamily":
        F = np.asarray(F, dtype=complex)
        return cls(F.shape[0], lambda t: F)


@dataclass(frozen=True)
class DysonResult:
    value: np.ndarray
    residual: float
    residuals: tuple[float, ...]


def _cumulative_simpson(f: np.ndarray, h: float) -> np.ndarray:
    """Running integral of samples f[i] (axis 0) on a uniform grid with step h."""
    out = np.zeros_like(f)
    m = f.shape[0] - 1
    for i in range(1, m + 1):
        if i % 2 == 0:
            out[i] = out[i - 2] + h * (f[i - 2] + 4 * f[i - 1] + f[i]) / 3
        elif i + 1 <= m:
            out[i] = out[i - 1] + h * (5 * f[i - 1] + 8 * f[i] - f[i + 1]) / 12
        else:
            out[i] = out[i - 1] + h * (-f[i - 2] + 8 * f[i - 1] + 5 * f[i]) / 12
    return out


def dyson_transport(
    F: LinearFamily, x0, t0: float, t1: float, order: int = 20, quad_steps: int = 512
) -> DysonResult:
    """x(t1) = x0 + sum_{k=1}^{order} int_{t0}^{t1} int_{t0}^{s_1} ... F(s_1) ... F(s_k) x0.

    Each nested integral is a running composite-Simpson integral on one grid.
    ``residual`` is |x_K - x_{K-1}|.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if quad_steps < 2:
        raise ValueError("quad_steps must be >= 2")
    x0 = np.asarray(x0, dtype=complex)
    if t1 == t0:
        return DysonResult(x0.copy(), 0.0, ())
    steps = quad_steps + (quad_steps % 2)
    grid = np.linspace(t0, t1, steps + 1)
    h = (t1 - t0) / steps
    Fs = np.stack([F(s) for s in grid])
    y = np.broadcast_to(x0, (steps + 1, x0.size)).copy()
    total = x0.copy()
    residuals = []
    for _ in range(order):
        integrand = np.einsum("sij,sj->si", Fs, y)
        y = _cumulative_simpson(integrand, h)
        total = total + y[-1]
        residuals.append(float(np.max(np.abs(y[-1]))))
    return DysonResult(total, residuals[-1], tuple(residuals))


def nilpotency_index(F, tol: float = 1e-12) -> int:
    """Smallest k <= d with F^k = 0 (entrywise within tol * (1 + |F|)^k)."""
    F = np.asarray(F, dtype=complex)
    d = F.shape[0]
    scale = 1.0 + float(np.max(np.abs(F))) if F.size else 1.0
    P = np.eye(d, dtype=complex)
    for k in range(1, d + 1):
        P = P @ F
        if np.max(np.abs(P), initial=0.0) <= tol * scale**k:
            return k
    raise NotNilpotentError("matrix is not nilpotent")


def nilpotent_transport(F, x0, t0: float, t1: float) -> np.ndarray:
    """exp((t1 - t0) F) x0 as the finite sum over powers below the nilpotency index."""
    F = np.asarray(F, dtype=complex)
    k = nilpotency_index(F)
    s = t1 - t0
    term = np.asarray(x0, dtype=complex).copy()
    total = term.copy()
    for j in range(1, k):
        term = (s / j) * (F @ term)
        total = total + term
    return total


# -- sections over a parameter interval ------------------------------------------


@dataclass(frozen=True)
class ParamSection:
    """Payload values sampled on a strictly increasing t-grid."""

    grid: tuple[float, ...]
    values: tuple[Any, ...]

    def __post_init__(self):
        if len(self.grid) != len(self.values):
            raise ValueError("grid and values differ in length")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")

    @classmethod
    def sample(cls, f: Callable[[float], Any], grid: Sequence[float]) -> "ParamSection":
        grid = tuple(float(t) for t in grid)
        return cls(grid, tuple(f(t) for t in grid))

    @staticmethod
    def uniform(t0: float, t1: float, points: int) -> tuple[float, ...]:
        return tuple(float(t) for t in np.linspace(t0, t1, points))

    @property
    def step(self) -> float:
        if len(self.grid) < 2:
            raise ValueError("need at least two grid points")
        return self.grid[1] - self.grid[0]

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        d = np.diff(self.grid)
        return bool(np.all(np.abs(d - d[0]) <= rtol * abs(d[0])))

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=complex)


def fd_derivative(s: ParamSection) -> ParamSection:
    """Second-order central differences, one-sided second-order at the ends."""
    if len(s.grid) < 3:
        raise ValueError("finite differences need at least 3 grid points")
    if not s.is_uniform():
        raise ValueError("finite differences need a uniform grid")
    d = np.gradient(s.array(), s.step, axis=0, edge_order=2)
    return ParamSection(s.grid, tuple(d))


def affine_fit(s: ParamSection) -> tuple[complex, complex, float]:
    """Least-squares C + D t; returns (C, D, max residual)."""
    t = np.asarray(s.grid)
    y = s.array()
    A = np.stack([np.ones_like(t), t], axis=1).astype(complex)
    (C, D), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.max(np.abs(A @ np.array([C, D]) - y)))
    return complex(C), complex(D), res
