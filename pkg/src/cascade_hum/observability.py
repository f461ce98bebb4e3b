"""Observation and terminal Gramians, observability constants, unique continuation.

Both matrices are stored in coordinates of the nodal basis:

    obs[i, j]      = <Lambda e_i, e_j>_h = sum_m dt E <chi z_1^(i), z_1^(j)>_h
    terminal[i, j] = E <z^(i)(T), z^(j)(T)>_h

so ``v @ obs @ v`` and ``v @ terminal @ v`` are the two sides of the
observability inequality for the initial datum with nodal values v.

Alongside each matrix the assembly keeps a factor with ``F.T @ F`` equal to
it: the rows of ``obs_factor`` are weighted samples of chi z_1 over all
levels and nodes, the rows of ``terminal_factor`` weighted leaf values of
z(T). Spectral work is done on the factors, which resolves observation
energies down to about eps^2 relative instead of eps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import solve_adjoint
from .grid import Grid1D, SubdomainMask
from .hum import apply_gramian
from .linalg import EPS, jacobi_eigh, jacobi_svd
from .model import CascadeCoefficients, compute_K
from .steps import StepOperators
from .tree import ScenarioTree, build_tree, expand


@dataclass
class GramianMatrix:
    obs: np.ndarray
    terminal: np.ndarray
    n: int
    nx: int
    obs_factor: np.ndarray | None = field(default=None, repr=False)
    terminal_factor: np.ndarray | None = field(default=None, repr=False)

    @property
    def symmetry_error(self) -> float:
        return float(np.max(np.abs(self.obs - self.obs.T)) / max(np.linalg.norm(self.obs, 2), 1e-300))

    @property
    def min_eig_relative(self) -> float:
        w = np.linalg.eigvalsh(0.5 * (self.obs + self.obs.T))
        return float(w[0] / max(abs(w[-1]), 1e-300))

    def block(self, i: int, j: int) -> np.ndarray:
        nx = self.nx
        return self.obs[i * nx:(i + 1) * nx, j * nx:(j + 1) * nx]


def assemble_gramian(
    coeffs: CascadeCoefficients,
    tree: ScenarioTree,
    grid: Grid1D,
    mask: SubdomainMask,
    *,
    ops: StepOperators | None = None,
) -> GramianMatrix:
    """Columns of the observation form via ``apply_gramian`` on basis vectors."""
    ops = ops or StepOperators(coeffs, tree, grid)
    d = coeffs.n * grid.nx
    obs = np.zeros((d, d))
    trajs = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        col, traj = apply_gramian(e, coeffs, tree, grid, mask, ops=ops, return_trajectory=True)
        obs[i] = grid.h * col.reshape(-1)
        trajs.append(traj)
    phi, psi = _factors(trajs, tree, grid, mask)
    terminal = psi.T @ psi
    return GramianMatrix(obs, terminal, coeffs.n, grid.nx, phi, psi)


def _stack_level(values: list, level: int) -> np.ndarray:
    """Columns = basis trajectories, rows = (node, point) samples of one level."""
    if any(v.shape[0] > 1 for v in values):
        values = [expand(v, level) for v in values]
    return np.stack([v.reshape(-1) for v in values], axis=1), values[0].shape[0]


def _factors(trajs, tree: ScenarioTree, grid: Grid1D, mask: SubdomainMask):
    idx = mask.indices
    blocks = []
    for m in range(tree.depth):
        rows, nodes = _stack_level([t.z[m][:, 0][:, idx] for t in trajs], m)
        blocks.append(np.sqrt(tree.dt * grid.h / nodes) * rows)
    leaves, nodes = _stack_level([t.terminal() for t in trajs], tree.depth)
    return np.concatenate(blocks, axis=0), np.sqrt(grid.h / nodes) * leaves


def gramian_by_quadrature(
    coeffs: CascadeCoefficients, tree: ScenarioTree, grid: Grid1D, mask: SubdomainMask
) -> np.ndarray:
    """Observation matrix from adjoint trajectories alone (no backward solve)."""
    ops = StepOperators(coeffs, tree, grid)
    d = coeffs.n * grid.nx
    chi = mask.indicator
    per_level = [[] for _ in range(tree.depth)]
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        traj = solve_adjoint(e, coeffs, tree, grid, ops=ops)
        for m in range(tree.depth):
            per_level[m].append(expand(traj.z[m][:, 0] * chi, m))
    obs = np.zeros((d, d))
    for m in range(tree.depth):
        Z = np.stack(per_level[m])
        obs += tree.dt * grid.h * np.einsum("ilk,jlk->ij", Z, Z) / Z.shape[1]
    return obs


@dataclass
class ObservabilityEstimate:
    observable: bool
    C_obs: float
    obs_eigenvalues: np.ndarray
    generalized_eigenvalues: np.ndarray
    kept: int
    witness: np.ndarray | None = None
    witness_energy: float = 0.0
    info: dict = field(default_factory=dict)


def noise_floor(w: np.ndarray) -> float:
    """Relative eigenvalue level below which an assembled ``obs`` is roundoff.

    The larger of ``d * eps`` and ten times the most negative computed eigenvalue.
    """
    top = max(w[-1], 1e-300)
    return max(w.size * EPS, 10.0 * max(-w[0], 0.0) / top)


def _matrix_factor(a: np.ndarray) -> np.ndarray:
    w, V = jacobi_eigh(a)
    return np.sqrt(np.clip(w, 0.0, None))[:, None] * V.T


def _observation_svd(gram: GramianMatrix):
    """Singular values (descending), right vectors and roundoff floor of the observation factor."""
    if gram.obs_factor is not None:
        s, V = jacobi_svd(gram.obs_factor)
        return s, V, s.size * EPS
    w, V = jacobi_eigh(0.5 * (gram.obs + gram.obs.T))
    floor = np.sqrt(noise_floor(w))
    return np.sqrt(np.clip(w[::-1], 0.0, None)), V[:, ::-1], floor


def _terminal_factor(gram: GramianMatrix) -> np.ndarray:
    return gram.terminal_factor if gram.terminal_factor is not None else _matrix_factor(gram.terminal)


def _split_kernel(gram: GramianMatrix, rank_tol: float, kernel_tol: float | None):
    s, V, floor = _observation_svd(gram)
    tol = max(rank_tol if kernel_tol is None else kernel_tol, floor)
    keep = s > tol * max(s[0], 0.0)
    return s, V, keep, tol


def _top_sq_singular(b: np.ndarray) -> float:
    if b.size == 0:
        return 0.0
    small = b.T @ b if b.shape[0] >= b.shape[1] else b @ b.T
    return float(jacobi_eigh(small)[0][-1])


def _kernel_witness(gram: GramianMatrix, V: np.ndarray, keep: np.ndarray):
    """Unit vector in the discarded subspace with the largest relative terminal energy."""
    psi = _terminal_factor(gram)
    nmax = max(_top_sq_singular(psi), 1e-300)
    K = V[:, ~keep]
    if K.shape[1] == 0:
        return None, 0.0
    B = psi @ K
    _, Vk = jacobi_eigh(B.T @ B)
    witness = K @ Vk[:, -1]
    pw = psi @ witness
    return witness, float(pw @ pw) / nmax


def estimate_observability_constant(
    gram: GramianMatrix, rank_tol: float = 1e-10, kernel_tol: float | None = None
) -> ObservabilityEstimate:
    """Largest ``mu`` with ``terminal v = mu obs v`` on the numerical range of ``obs``.

    Singular values of the observation factor at or below ``kernel_tol * s_max``
    (default ``rank_tol``, never below the roundoff floor) span the numerical
    kernel, i.e. ``obs`` eigenvalues below ``kernel_tol**2 * max``. If a unit
    kernel direction carries terminal energy above ``rank_tol`` relative to the
    largest terminal eigenvalue, the system is reported not observable with
    that direction as witness. Otherwise the answer is the squared largest
    singular value of ``terminal_factor @ V_kept @ diag(1 / s_kept)``.
    """
    s, V, keep, tol = _split_kernel(gram, rank_tol, kernel_tol)
    witness, energy = _kernel_witness(gram, V, keep)
    info = {"kernel_tol": tol, "rank_tol": rank_tol}
    obs_eigs = np.sort(s**2)
    if witness is not None and energy > rank_tol:
        return ObservabilityEstimate(False, float("inf"), obs_eigs, np.array([]), int(keep.sum()), witness, energy, info)
    B = _terminal_factor(gram) @ (V[:, keep] / s[keep])
    mu, _ = jacobi_eigh(B.T @ B)
    return ObservabilityEstimate(True, float(mu[-1]), obs_eigs, mu, int(keep.sum()), witness, energy, info)


@dataclass
class UniqueContinuationReport:
    passed: bool
    kernel_dim: int
    witness: np.ndarray | None
    witness_energy: float
    witness_component_mass: list


def unique_continuation_probe(
    gram: GramianMatrix, rank_tol: float = 1e-10, kernel_tol: float | None = None
) -> UniqueContinuationReport:
    """Check numerically that ker(obs) lies in ker(terminal).

    Passes when every unit direction of the numerical kernel of ``obs`` has
    relative terminal energy at most ``rank_tol``.
    """
    _, V, keep, _ = _split_kernel(gram, rank_tol, kernel_tol)
    witness, energy = _kernel_witness(gram, V, keep)
    mass = []
    if witness is not None:
        parts = witness.reshape(gram.n, gram.nx)
        mass = [float(np.sum(p**2)) for p in parts]
    passed = witness is None or energy <= rank_tol
    return UniqueContinuationReport(passed, int((~keep).sum()), witness, energy, mass)


@dataclass
class SweepRow:
    T: float
    C_obs_num: float
    K: float
    logC: float
    C0_fit: float = float("nan")


def cost_sweep(
    T_list,
    coeffs: CascadeCoefficients,
    depth: int,
    grid: Grid1D,
    mask: SubdomainMask,
    rank_tol: float = 1e-10,
    kernel_tol: float | None = None,
) -> list[SweepRow]:
    rows = []
    for T in T_list:
        tree = build_tree(depth, T)
        est = estimate_observability_constant(assemble_gramian(coeffs, tree, grid, mask), rank_tol, kernel_tol)
        K = compute_K(coeffs, T, tree, grid)
        rows.append(SweepRow(float(T), est.C_obs, K, float(np.log(est.C_obs))))
    fit = max(r.logC / r.K for r in rows)
    for r in rows:
        r.C0_fit = fit
    return rows
