"""Finite differences on G = (0, 1) with homogeneous Dirichlet data.

All operators act on the last axis, so any leading batch axes (tree nodes,
components) pass through untouched.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EllipticityViolation, InvalidArgument


@dataclass(frozen=True)
class Grid1D:
    nx: int

    def __post_init__(self):
        if int(self.nx) != self.nx or self.nx < 3:
            raise InvalidArgument(f"need at least 3 interior points, got {self.nx!r}")

    @property
    def h(self) -> float:
        return 1.0 / (self.nx + 1)

    @property
    def x(self) -> np.ndarray:
        """Interior nodes x_1..x_nx."""
        return np.arange(1, self.nx + 1) * self.h

    @property
    def x_all(self) -> np.ndarray:
        """Nodes x_0..x_{nx+1}, boundary included."""
        return np.arange(self.nx + 2) * self.h

    @property
    def x_half(self) -> np.ndarray:
        """Half points x_{1/2}..x_{nx+1/2}."""
        return (np.arange(self.nx + 1) + 0.5) * self.h


@dataclass(frozen=True)
class SubdomainMask:
    """Grid points of ``grid`` lying in the open interval ``(lo, hi)``."""

    grid: Grid1D
    lo: float
    hi: float
    role: str = ""
    indices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.lo < self.hi <= 1.0:
            raise InvalidArgument(f"subdomain ({self.lo}, {self.hi}) is not inside (0, 1)")
        x = self.grid.x
        idx = np.flatnonzero((x > self.lo) & (x < self.hi))
        object.__setattr__(self, "indices", idx)

    @property
    def indicator(self) -> np.ndarray:
        chi = np.zeros(self.grid.nx)
        chi[self.indices] = 1.0
        return chi

    def __contains__(self, other: "SubdomainMask") -> bool:
        return set(other.indices.tolist()) <= set(self.indices.tolist())

    def compactly_contains(self, other: "SubdomainMask") -> bool:
        """``other`` sits inside this mask with at least one mask point on each side."""
        if not len(other.indices):
            return False
        return other in self and self.indices.min() < other.indices.min() and other.indices.max() < self.indices.max()


def solve_tridiagonal(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Thomas algorithm along the last axis of ``rhs``; leading axes are independent systems.

    ``sub[i]`` couples row i+1 to column i, ``sup[i]`` couples row i to column i+1.
    """
    n = diag.shape[0]
    if rhs.shape[-1] != n or sub.shape[0] != n - 1 or sup.shape[0] != n - 1:
        raise InvalidArgument("tridiagonal band lengths do not match the right-hand side")
    c = np.empty(n - 1)
    d = np.empty(rhs.shape)
    piv = diag[0]
    if piv == 0.0:
        raise ZeroDivisionError("zero pivot in tridiagonal elimination")
    c[0] = sup[0] / piv
    d[..., 0] = rhs[..., 0] / piv
    for i in range(1, n):
        piv = diag[i] - sub[i - 1] * c[i - 1]
        if piv == 0.0:
            raise ZeroDivisionError("zero pivot in tridiagonal elimination")
        if i < n - 1:
            c[i] = sup[i] / piv
        d[..., i] = (rhs[..., i] - sub[i - 1] * d[..., i - 1]) / piv
    out = d
    for i in range(n - 2, -1, -1):
        out[..., i] -= c[i] * out[..., i + 1]
    return out


@dataclass(frozen=True)
class DiffusionOperator:
    """Symmetric tridiagonal discretization of ``d/dx(beta d/dx)``."""

    diag: np.ndarray
    off: np.ndarray
    beta_half: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[..., :-1] += self.off * v[..., 1:]
        out[..., 1:] += self.off * v[..., :-1]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def solve_implicit(self, dt: float, rhs: np.ndarray) -> np.ndarray:
        """Solve ``(I - dt L) x = rhs``. The matrix is SPD for dt > 0, so it is its own transpose."""
        off = -dt * self.off
        return solve_tridiagonal(off, 1.0 - dt * self.diag, off, np.array(rhs, dtype=float))


def half_point_average(beta_nodal: np.ndarray) -> np.ndarray:
    """Arithmetic means of nodal samples at x_0..x_{nx+1}, giving the nx+1 half-point values."""
    beta_nodal = np.asarray(beta_nodal, dtype=float)
    return 0.5 * (beta_nodal[:-1] + beta_nodal[1:])


def assemble_diffusion(beta_half, grid: Grid1D, beta0: float = 0.0) -> DiffusionOperator:
    beta_half = np.broadcast_to(np.asarray(beta_half, dtype=float), (grid.nx + 1,)).copy()
    floor = max(beta0, 0.0)
    bad = np.flatnonzero(~(beta_half > 0.0) | (beta_half < floor))
    if bad.size:
        raise EllipticityViolation(
            f"diffusion coefficient below floor {floor} at half points {bad.tolist()}"
        )
    inv_h2 = 1.0 / grid.h**2
    diag = -(beta_half[:-1] + beta_half[1:]) * inv_h2
    off = beta_half[1:-1] * inv_h2
    return DiffusionOperator(diag, off, beta_half)


def _check_length(v, grid):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != grid.nx:
        raise InvalidArgument(f"field length {v.shape[-1]} != grid size {grid.nx}")
    return v


def gradient(v, grid: Grid1D) -> np.ndarray:
    """Centered difference with zero ghost values."""
    v = _check_length(v, grid)
    out = np.zeros(v.shape)
    out[..., :-1] += v[..., 1:]
    out[..., 1:] -= v[..., :-1]
    return out / (2.0 * grid.h)


def divergence_of_product(c_field, z_field, grid: Grid1D) -> np.ndarray:
    c_field = _check_length(c_field, grid)
    z_field = _check_length(z_field, grid)
    return gradient(c_field * z_field, grid)


def l2_inner(a, b, grid: Grid1D) -> float:
    a = _check_length(a, grid)
    b = _check_length(b, grid)
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch {a.shape} vs {b.shape}")
    return float(grid.h * np.sum(a * b))


def h1_seminorm_sq(v, grid: Grid1D) -> float:
    """``h * sum ((v_{j+1} - v_j) / h)^2`` over all nx+1 cells, ghosts included."""
    v = _check_length(v, grid)
    padded = np.concatenate([np.zeros(v.shape[:-1] + (1,)), v, np.zeros(v.shape[:-1] + (1,))], axis=-1)
    return float(np.sum(np.diff(padded, axis=-1) ** 2) / grid.h)
