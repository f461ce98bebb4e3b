"""Coefficient data for the cascade system and its explicit constants.

Index convention: matrices are 0-based in code, so ``a[(1, 0)]`` is the
coupling coefficient written a_21 in the usual notation. Labels in reports
and configs use the 1-based form ("a21").
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import InvalidArgument
from .grid import DiffusionOperator, Grid1D, SubdomainMask, assemble_diffusion, half_point_average
from .tree import ScenarioTree

KINDS = ("a", "b", "c")


@dataclass(frozen=True)
class PiecewiseField:
    """``value + t_slope * t`` on ``lo < x < hi`` and ``outside`` elsewhere."""

    value: float
    lo: float = 0.0
    hi: float = 1.0
    outside: float = 0.0
    t_slope: float = 0.0

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = (x > self.lo) & (x < self.hi)
        return np.where(inside, self.value + self.t_slope * t, self.outside)


Field = Union[float, Callable[[float, np.ndarray], np.ndarray]]


def sample(f: Field, t: float, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if callable(f):
        return np.broadcast_to(np.asarray(f(t, x), dtype=float), x.shape).copy()
    return np.full(x.shape, float(f))


def label(kind: str, i: int, j: int) -> str:
    return f"{kind}{i + 1}{j + 1}"


@dataclass
class CascadeCoefficients:
    n: int
    a: dict = field(default_factory=dict)
    b: dict = field(default_factory=dict)
    c: dict = field(default_factory=dict)
    beta: list | None = None
    a0: float = 0.5
    beta0: float = 0.1

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgument(f"n must be >= 1, got {self.n}")
        if self.beta is None:
            self.beta = [1.0] * self.n
        if len(self.beta) != self.n:
            raise InvalidArgument(f"need {self.n} diffusion coefficients, got {len(self.beta)}")
        for kind in KINDS:
            for (i, j) in getattr(self, kind):
                if not (0 <= i < self.n and 0 <= j < self.n):
                    raise InvalidArgument(f"entry {label(kind, i, j)} outside a {self.n}x{self.n} matrix")
        if not self.a0 > 0:
            raise InvalidArgument("coupling floor a0 must be positive")
        if not self.beta0 > 0:
            raise InvalidArgument("ellipticity floor beta0 must be positive")

    def entries(self, kind: str) -> dict:
        return getattr(self, kind)

    def matrix(self, kind: str, t: float, x: np.ndarray) -> np.ndarray | None:
        """Samples of matrix ``kind`` at time t, shape (n, n, len(x)); None when all entries are absent."""
        ent = self.entries(kind)
        if not ent:
            return None
        out = np.zeros((self.n, self.n, len(x)))
        for (i, j), f in ent.items():
            out[i, j] = sample(f, t, x)
        return out if np.any(out) else None

    def diffusion(self, k: int, t: float, grid: Grid1D) -> DiffusionOperator:
        nodal = sample(self.beta[k], t, grid.x_all)
        return assemble_diffusion(half_point_average(nodal), grid, self.beta0)

    def sup_norms(self, T: float, tree: ScenarioTree | None = None, grid: Grid1D | None = None) -> dict:
        """Exhaustive max of |entry| over the (time level, grid point) lattice.

        Without a tree or grid, a default 65 x 255 lattice on [0, T] x (0, 1) is used.
        """
        times = tree.times if tree is not None else np.linspace(0.0, T, 65)
        x = grid.x if grid is not None else np.arange(1, 256) / 256.0
        out = {}
        for kind in KINDS:
            norms = np.zeros((self.n, self.n))
            for (i, j), f in self.entries(kind).items():
                norms[i, j] = max(float(np.max(np.abs(sample(f, t, x)))) for t in times)
            out[kind] = norms
        return out

    def m0(self, T: float, tree=None, grid=None) -> float:
        norms = self.sup_norms(T, tree, grid)["a"]
        return max((norms[i, i - 1] for i in range(1, self.n)), default=0.0)


@dataclass
class ValidationReport:
    structure_violations: list = field(default_factory=list)
    coupling_violations: list = field(default_factory=list)
    ellipticity_violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.structure_violations or self.coupling_violations or self.ellipticity_violations)


def _forbidden(kind: str, i: int, j: int) -> bool:
    if kind == "a":
        return i > j + 1
    return i > j


def validate_structure(
    coeffs: CascadeCoefficients, mask: SubdomainMask, tree: ScenarioTree
) -> ValidationReport:
    """Check the cascade block pattern, the coupling floor on the mask, and ellipticity.

    Violations are returned, never raised. Coupling entries are ``(label, t, x)``;
    each coupling coefficient may satisfy the floor with either sign, and the
    reported samples are those failing the sign that holds on the majority.
    """
    report = ValidationReport()
    grid = mask.grid
    times = tree.times
    for kind in KINDS:
        for (i, j), f in sorted(coeffs.entries(kind).items()):
            if _forbidden(kind, i, j) and any(np.any(sample(f, t, grid.x) != 0.0) for t in times):
                report.structure_violations.append(label(kind, i, j))
    xs = grid.x[mask.indices]
    for i in range(1, coeffs.n):
        f = coeffs.a.get((i, i - 1), 0.0)
        vals = np.array([sample(f, t, xs) for t in times])
        sign = 1.0 if vals.sum() >= 0 else -1.0
        bad_t, bad_x = np.nonzero(~(sign * vals >= coeffs.a0))
        for m, jx in zip(bad_t, bad_x):
            report.coupling_violations.append((label("a", i, i - 1), float(times[m]), float(xs[jx])))
    for k in range(coeffs.n):
        for t in times:
            b = sample(coeffs.beta[k], t, grid.x_all)
            low = np.flatnonzero(half_point_average(b) < coeffs.beta0)
            for jx in low:
                report.ellipticity_violations.append((f"beta{k + 1}", float(t), float(grid.x_half[jx])))
    return report


def _potential_max(norms: dict, n: int) -> float:
    best = 0.0
    for i in range(n):
        for j in range(i, n):
            gap = j - i
            term = (
                norms["a"][i, j] ** (2.0 / (3 * gap + 3))
                + norms["c"][i, j] ** (2.0 / (3 * gap + 1))
                + norms["b"][i, j] ** (2.0 / (3 * gap + 1))
            )
            best = max(best, term)
    return best


def _linear_max(norms: dict, n: int) -> float:
    best = 0.0
    for i in range(n):
        for j in range(i, n):
            best = max(best, norms["a"][i, j] + norms["c"][i, j] ** 2 + norms["b"][i, j] ** 2)
    return best


def control_cost_constant(norms: dict, n: int, T: float) -> float:
    """Exponent constant K from sup norms (dict of (n, n) arrays keyed 'a', 'b', 'c')."""
    if not T > 0:
        raise InvalidArgument(f"T must be positive, got {T}")
    best = 0.0
    for i in range(n):
        for j in range(i, n):
            gap = j - i
            term = (
                norms["a"][i, j] ** (2.0 / (3 * gap + 3))
                + norms["c"][i, j] ** (2.0 / (3 * gap + 1))
                + norms["b"][i, j] ** (2.0 / (3 * gap + 1))
                + T * (norms["a"][i, j] + norms["c"][i, j] ** 2 + norms["b"][i, j] ** 2)
            )
            best = max(best, term)
    return 1.0 + T + 1.0 / T + best


def compute_K(coeffs: CascadeCoefficients, T: float, tree=None, grid=None) -> float:
    if not T > 0:
        raise InvalidArgument(f"T must be positive, got {T}")
    return control_cost_constant(coeffs.sup_norms(T, tree, grid), coeffs.n, T)


def compute_lambda0(coeffs: CascadeCoefficients, T: float, C0: float = 1.0, tree=None, grid=None) -> float:
    if not T > 0:
        raise InvalidArgument(f"T must be positive, got {T}")
    if not C0 > 0:
        raise InvalidArgument(f"C0 must be positive, got {C0}")
    norms = coeffs.sup_norms(T, tree, grid)
    return C0 * (T + T**2 + T**2 * _potential_max(norms, coeffs.n))


def gronwall_rate_constant(coeffs: CascadeCoefficients, T: float, tree=None, grid=None) -> float:
    """``1 + max_{i<=j}(|a_ij| + |C_ij|^2 + |b_ij|^2)``, the energy growth rate scale."""
    return 1.0 + _linear_max(coeffs.sup_norms(T, tree, grid), coeffs.n)
