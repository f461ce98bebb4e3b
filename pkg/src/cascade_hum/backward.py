"""Controlled backward system, solved two ways.

``direct`` is a BSDE-style backward induction:

    E = E[y_{m+1} | node],  Y_m = E[y_{m+1} dW | node] / dt
    (I - dt L(t_m)) y_m = E - dt (A E + C.grad E + B Y_m + e_1 chi u_m)

``transpose`` applies, in reverse order, the transposes of the three
stages of the forward adjoint step. With R = (I - dt L(t_{m+1}))^{-1}:

    w = R E,  y_m = w + dt (-A w - C.grad w) - dt B Y_m - dt e_1 chi u_m

which makes E<y(T), z(T)> - <y(0), z(0)> = sum_m dt E<chi u_m, z_1(t_m)>
hold to roundoff for every adjoint trajectory z.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import AdjointTrajectory, check_finite
from .errors import InvalidArgument
from .grid import Grid1D, SubdomainMask
from .model import CascadeCoefficients
from .steps import StepOperators
from .tree import AdaptedField, ScenarioTree, conditional_expectation, martingale_coefficient


@dataclass
class BackwardTrajectory:
    y: AdaptedField
    Y: AdaptedField
    scheme: str

    def initial(self) -> np.ndarray:
        return self.y[0][0]


def _terminal_array(yT, n: int, tree: ScenarioTree, grid: Grid1D) -> np.ndarray:
    yT = np.asarray(yT, dtype=float)
    if yT.shape == (n, grid.nx) or yT.shape == (n * grid.nx,):
        return yT.reshape(1, n, grid.nx).copy()
    if yT.ndim == 3 and yT.shape[1:] == (n, grid.nx) and yT.shape[0] in (1, 2**tree.depth):
        return yT.copy()
    raise InvalidArgument(f"terminal data of shape {yT.shape} does not fit ({n}, {grid.nx}) on the leaves")


def _control_at(u: AdaptedField | None, m: int, chi: np.ndarray | None):
    if u is None:
        return None
    um = u[m]
    if chi is not None:
        um = um * chi
    return um if np.any(um) else None


def _check_control(u: AdaptedField | None, tree: ScenarioTree, grid: Grid1D):
    if u is None:
        return
    if u.m_lo != 0 or u.m_hi < tree.depth - 1:
        raise InvalidArgument("control must be defined on levels 0..M-1")
    if u.shape != (grid.nx,):
        raise InvalidArgument(f"control must be a scalar field of length {grid.nx} per node")


def solve_backward_direct(
    yT,
    u: AdaptedField | None,
    coeffs: CascadeCoefficients,
    tree: ScenarioTree,
    grid: Grid1D,
    control_mask: SubdomainMask | None = None,
    *,
    ops: StepOperators | None = None,
) -> BackwardTrajectory:
    ops = ops or StepOperators(coeffs, tree, grid)
    _check_control(u, tree, grid)
    chi = control_mask.indicator if control_mask is not None else None
    dt = tree.dt
    M = tree.depth
    ys = [None] * (M + 1)
    Ys = [None] * M
    ys[M] = _terminal_array(yT, coeffs.n, tree, grid)
    check_finite(ys[M], "terminal data", M)
    for m in range(M - 1, -1, -1):
        E = conditional_expectation(ys[m + 1], m + 1, tree)
        Y = martingale_coefficient(ys[m + 1], m + 1, tree)
        force = ops.state_drift(m, E)
        BY = ops.state_noise(m, Y)
        if BY is not None:
            force = force + BY
        um = _control_at(u, m, chi)
        if um is not None:
            force = np.broadcast_to(force, (max(force.shape[0], um.shape[0]),) + force.shape[1:]).copy()
            force[:, 0] += um
        rhs = E - dt * force
        ys[m] = ops.implicit(m, rhs)
        Ys[m] = Y
        check_finite(ys[m], "backward state", m)
    return BackwardTrajectory(AdaptedField(tree, ys), AdaptedField(tree, Ys), "direct")


def solve_backward_transpose(
    yT,
    u: AdaptedField | None,
    coeffs: CascadeCoefficients,
    tree: ScenarioTree,
    grid: Grid1D,
    control_mask: SubdomainMask | None = None,
    *,
    ops: StepOperators | None = None,
) -> BackwardTrajectory:
    ops = ops or StepOperators(coeffs, tree, grid)
    _check_control(u, tree, grid)
    chi = control_mask.indicator if control_mask is not None else None
    dt = tree.dt
    M = tree.depth
    ys = [None] * (M + 1)
    ys[M] = _terminal_array(yT, coeffs.n, tree, grid)
    check_finite(ys[M], "terminal data", M)
    for m in range(M - 1, -1, -1):
        E = conditional_expectation(ys[m + 1], m + 1, tree)
        w = ops.implicit(m + 1, E)
        ym = w + dt * ops.adjoint_drift_T(m, w)
        Y = martingale_coefficient(ys[m + 1], m + 1, tree)
        BY = ops.state_noise(m, Y)
        if BY is not None:
            ym = ym - dt * BY
        um = _control_at(u, m, chi)
        if um is not None:
            ym = np.broadcast_to(ym, (max(ym.shape[0], um.shape[0]),) + ym.shape[1:]).copy()
            ym[:, 0] -= dt * um
        ys[m] = ym
        check_finite(ym, "backward state", m)
    Ys = [martingale_coefficient(ys[m + 1], m + 1, tree) for m in range(M)]
    return BackwardTrajectory(AdaptedField(tree, ys), AdaptedField(tree, Ys), "transpose")


def _mean_inner(a: np.ndarray, b: np.ndarray, h: float) -> float:
    """E<a, b>_h for two level arrays, broadcasting deterministic levels."""
    nodes = max(a.shape[0], b.shape[0])
    a = np.broadcast_to(a, (nodes,) + a.shape[1:]).reshape(nodes, -1)
    b = np.broadcast_to(b, (nodes,) + b.shape[1:]).reshape(nodes, -1)
    return h * float(np.einsum("ij,ij->", a, b)) / nodes


def duality_terms(
    back: BackwardTrajectory,
    adj: AdjointTrajectory,
    u: AdaptedField | None,
    grid: Grid1D,
    control_mask: SubdomainMask | None = None,
) -> tuple[float, float, float]:
    """``(E<y(T), z(T)>, <y(0), z(0)>, sum_m dt E<chi u_m, z_1(t_m)>)``."""
    tree = adj.tree
    if back.y.tree.depth != tree.depth or back.y.shape != adj.z.shape:
        raise InvalidArgument("trajectories live on different discretizations")
    M = tree.depth
    h = grid.h
    terminal = _mean_inner(back.y[M], adj.z[M], h)
    initial = _mean_inner(back.y[0], adj.z[0], h)
    observed = 0.0
    if u is not None:
        chi = control_mask.indicator if control_mask is not None else 1.0
        for m in range(M):
            observed += tree.dt * _mean_inner(u[m] * chi, adj.z[m][:, 0], h)
    return terminal, initial, observed


def duality_gap(back, adj, u, grid, control_mask=None) -> float:
    terminal, initial, observed = duality_terms(back, adj, u, grid, control_mask)
    return abs(terminal - initial - observed)
