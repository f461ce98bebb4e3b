"""Forward adjoint system on the scenario tree.

One step from level m to m+1 at every node:

1. drift:     z~ = z_m + dt (-A^* z_m + div(C^* z_m) + F0_m + div F_m)
2. diffusion: (I - dt L(t_{m+1})) z- = z~, one tridiagonal solve per component
3. noise:     z_{m+1} = z- +/- sqrt(dt) (-B^* z_m + F1_m) on the two child edges
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NumericalBlowup
from .grid import Grid1D, gradient
from .model import CascadeCoefficients, gronwall_rate_constant
from .steps import StepOperators
from .tree import AdaptedField, ScenarioTree, branch


@dataclass
class Sources:
    """Optional extra forcing, each an AdaptedField over levels 0..M-1 with per-node shape (n, nx)."""

    f0: AdaptedField | None = None
    f: AdaptedField | None = None
    f1: AdaptedField | None = None


@dataclass
class AdjointTrajectory:
    z: AdaptedField
    dt: float
    scheme: str = "semi-implicit"

    @property
    def tree(self) -> ScenarioTree:
        return self.z.tree

    def terminal(self) -> np.ndarray:
        return self.z[self.z.m_hi]


def as_state(v, n: int, nx: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.size != n * nx:
        raise InvalidArgument(f"expected {n * nx} values for an ({n}, {nx}) state, got {v.size}")
    return v.reshape(n, nx)


def check_finite(arr: np.ndarray, what: str, m: int):
    if not np.all(np.isfinite(arr)):
        raise NumericalBlowup(f"non-finite values in {what} at level {m}")


def solve_adjoint(
    z0,
    coeffs: CascadeCoefficients,
    tree: ScenarioTree,
    grid: Grid1D,
    sources: Sources | None = None,
    *,
    include_diffusion: bool = True,
    ops: StepOperators | None = None,
) -> AdjointTrajectory:
    ops = ops or StepOperators(coeffs, tree, grid, include_diffusion)
    z = as_state(z0, coeffs.n, grid.nx)
    check_finite(z, "initial state", 0)
    dt = tree.dt
    levels = [z[None].copy()]
    # overflow is reported by check_finite, not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(tree.depth):
            zm = levels[m]
            drift = ops.adjoint_drift(m, zm)
            if sources is not None:
                if sources.f0 is not None:
                    drift = drift + sources.f0[m]
                if sources.f is not None:
                    drift = drift + gradient(sources.f[m], grid)
            zbar = ops.implicit(m + 1, zm + dt * drift)
            noise = ops.adjoint_noise(m, zm)
            if sources is not None and sources.f1 is not None:
                noise = sources.f1[m] if noise is None else noise + sources.f1[m]
            nxt = branch(zbar, noise, m, tree)
            check_finite(nxt, "adjoint state", m + 1)
            levels.append(nxt)
    return AdjointTrajectory(AdaptedField(tree, levels), dt)


def energy_history(traj: AdjointTrajectory, grid: Grid1D) -> np.ndarray:
    """``E sum_i |z_i(t_m)|^2_h`` for every level m."""
    z = traj.z
    return np.array([grid.h * float(np.mean(np.sum(z[m] ** 2, axis=(1, 2)))) for m in z.levels()])


@dataclass
class GronwallReport:
    growth: float
    bound_rate: float
    C_fit: float
    passed: bool
    undefined: bool = False


def check_gronwall(
    traj: AdjointTrajectory,
    coeffs: CascadeCoefficients,
    T: float,
    grid: Grid1D,
    C_fit: float | None = None,
) -> GronwallReport:
    """Empirical exponential growth rate of the energy against the Gronwall rate.

    ``growth = max_m log(E|z(T)|^2 / E|z(t_m)|^2) / (T - t_m)`` over levels with
    nonzero energy. The bound rate is ``1 + max_{i<=j}(|a_ij| + |C_ij|^2 + |b_ij|^2)``
    and the check passes when ``growth <= C_fit * bound_rate``. ``C_fit`` defaults
    to ``2 n``, the factor produced by Ito's formula and Young's inequality.
    """
    C_fit = 2.0 * coeffs.n if C_fit is None else C_fit
    tree = traj.tree
    energy = energy_history(traj, grid)
    bound = gronwall_rate_constant(coeffs, T, tree, grid)
    times = tree.times
    rates = []
    for m in range(tree.depth):
        if energy[m] > 0:
            with np.errstate(divide="ignore"):
                rates.append(np.log(energy[-1] / energy[m]) / (times[-1] - times[m]))
    if not rates:
        return GronwallReport(float("nan"), bound, C_fit, False, undefined=True)
    growth = float(max(rates))
    return GronwallReport(growth, bound, C_fit, growth <= C_fit * bound)
