"""Penalized null-control synthesis.

For ``J(u) = 1/2 E int u^2 + 1/(2 eps) |y(0)|^2`` the minimizer is
``u = chi_G0 z_1`` where z solves the adjoint system from ``z0 = y(0) / eps``.
Writing ``y(0) = y_free(0) - Lambda z0`` turns the optimality condition into
``(eps I + Lambda) z0 = y_free(0)``, solved here by matrix-free CG.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import AdjointTrajectory, solve_adjoint
from .backward import BackwardTrajectory, solve_backward_transpose
from .grid import Grid1D, SubdomainMask
from .linalg import conjugate_gradient
from .model import CascadeCoefficients
from .steps import StepOperators
from .tree import AdaptedField, ScenarioTree


def observed_control(traj: AdjointTrajectory, mask: SubdomainMask) -> AdaptedField:
    """``chi_G0 z_1`` on levels 0..M-1, exactly zero off the mask."""
    chi = mask.indicator
    z = traj.z
    return AdaptedField(z.tree, [z[m][:, 0] * chi for m in range(z.tree.depth)])


def apply_gramian(
    z0,
    coeffs: CascadeCoefficients,
    tree: ScenarioTree,
    grid: Grid1D,
    mask: SubdomainMask,
    *,
    ops: StepOperators | None = None,
    return_trajectory: bool = False,
):
    """``Lambda z0 = -y(0)`` where y solves the transposed backward system with y(T) = 0, u = chi z_1."""
    ops = ops or StepOperators(coeffs, tree, grid)
    traj = solve_adjoint(z0, coeffs, tree, grid, ops=ops)
    u = observed_control(traj, mask)
    back = solve_backward_transpose(np.zeros((coeffs.n, grid.nx)), u, coeffs, tree, grid, mask, ops=ops)
    out = -back.initial()
    if return_trajectory:
        return out, traj
    return out


def observation_energy(traj: AdjointTrajectory, mask: SubdomainMask, grid: Grid1D) -> float:
    """``sum_m dt E |chi z_1(t_m)|^2_h`` over m = 0..M-1, by direct quadrature."""
    tree = traj.tree
    chi = mask.indicator
    total = 0.0
    for m in range(tree.depth):
        z1 = traj.z[m][:, 0] * chi
        total += tree.dt * grid.h * float(np.mean(np.sum(z1**2, axis=-1)))
    return total


def control_cost(u: AdaptedField, grid: Grid1D) -> float:
    tree = u.tree
    return sum(tree.dt * grid.h * float(np.mean(np.sum(u[m] ** 2, axis=-1))) for m in range(tree.depth))


def leaf_energy(yT: np.ndarray, grid: Grid1D) -> float:
    """``E |y^T|^2_h`` for leaf data of shape (leaves, n, nx), (1, n, nx) or (n, nx)."""
    yT = np.asarray(yT, dtype=float)
    if yT.ndim == 2:
        yT = yT[None]
    return grid.h * float(np.mean(np.sum(yT**2, axis=(1, 2))))


@dataclass
class HUMResult:
    u: AdaptedField
    z0: np.ndarray
    y: BackwardTrajectory
    residual: float
    cost: float
    cg_iterations: int
    cg_relative_residual: float
    epsilon: float
    optimality_residual: float
    optimality_bound: float

    @property
    def optimality_ok(self) -> bool:
        return self.optimality_residual <= self.optimality_bound

    def record(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "residual": self.residual,
            "cost": self.cost,
            "cg_iterations": self.cg_iterations,
            "cg_relative_residual": self.cg_relative_residual,
            "optimality_residual": self.optimality_residual,
            "optimality_bound": self.optimality_bound,
        }


def synthesize_control(
    yT,
    epsilon: float,
    coeffs: CascadeCoefficients,
    tree: ScenarioTree,
    grid: Grid1D,
    mask: SubdomainMask,
    cg_tol: float = 1e-10,
    cg_max_iter: int = 500,
    *,
    ops: StepOperators | None = None,
) -> HUMResult:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not cg_tol > 0:
        raise ValueError(f"cg_tol must be positive, got {cg_tol}")
    ops = ops or StepOperators(coeffs, tree, grid)
    n, nx, h = coeffs.n, grid.nx, grid.h
    free = solve_backward_transpose(yT, None, coeffs, tree, grid, mask, ops=ops)
    rhs = free.initial().reshape(-1)

    def inner(a, b):
        return h * float(a @ b)

    def apply(v):
        return epsilon * v + apply_gramian(v, coeffs, tree, grid, mask, ops=ops).reshape(-1)

    z0, iters, rel = conjugate_gradient(apply, rhs, inner, cg_tol, cg_max_iter)
    traj = solve_adjoint(z0, coeffs, tree, grid, ops=ops)
    u = observed_control(traj, mask)
    y = solve_backward_transpose(yT, u, coeffs, tree, grid, mask, ops=ops)
    y0 = y.initial().reshape(-1)
    gap = np.sqrt(inner(y0 - epsilon * z0, y0 - epsilon * z0))
    bound = 10.0 * cg_tol * np.sqrt(inner(rhs, rhs))
    return HUMResult(
        u=u,
        z0=z0.reshape(n, nx),
        y=y,
        residual=inner(y0, y0),
        cost=control_cost(u, grid),
        cg_iterations=iters,
        cg_relative_residual=rel,
        epsilon=epsilon,
        optimality_residual=float(gap),
        optimality_bound=float(bound),
    )


@dataclass
class UniformEstimateReport:
    lhs: float
    rhs: float
    passed: bool


def certify_uniform_estimate(
    result: HUMResult, C_obs_num: float, yT_norm_sq: float, cg_tol: float = 1e-10
) -> UniformEstimateReport:
    """``cost + (2/eps) |y(0)|^2 <= C_obs |y^T|^2 (1 + 10 cg_tol)``."""
    lhs = result.cost + 2.0 / result.epsilon * result.residual
    rhs = C_obs_num * yT_norm_sq
    return UniformEstimateReport(lhs, rhs, lhs <= rhs * (1.0 + 10.0 * cg_tol))
