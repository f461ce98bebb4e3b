"""Per-level discrete operators shared by the forward and backward solvers.

Arrays carrying the state have shape ``(nodes, n, nx)``. Coefficient matrices
are sampled once per level and cached; A, B, C at the left endpoint t_m and
the diffusion operators at t_{m+1} (forward step) or t_m (direct backward step).
"""
from __future__ import annotations

import numpy as np

from .grid import DiffusionOperator, Grid1D, gradient
from .model import CascadeCoefficients
from .tree import ScenarioTree


class StepOperators:
    def __init__(self, coeffs: CascadeCoefficients, tree: ScenarioTree, grid: Grid1D, include_diffusion: bool = True):
        self.coeffs = coeffs
        self.tree = tree
        self.grid = grid
        self.include_diffusion = include_diffusion
        self.n = coeffs.n
        self._mats = {}
        self._diff = {}

    @property
    def dt(self) -> float:
        return self.tree.dt

    def mat(self, kind: str, m: int):
        key = (kind, m)
        if key not in self._mats:
            self._mats[key] = self.coeffs.matrix(kind, self.tree.time(m), self.grid.x)
        return self._mats[key]

    def diffusion(self, m: int) -> list[DiffusionOperator]:
        """Diffusion operators of every component at time level m."""
        if m not in self._diff:
            t = self.tree.time(m)
            self._diff[m] = [self.coeffs.diffusion(k, t, self.grid) for k in range(self.n)]
        return self._diff[m]

    def implicit(self, m: int, v: np.ndarray) -> np.ndarray:
        """Componentwise ``(I - dt L_k(t_m))^{-1}``."""
        if not self.include_diffusion:
            return v.copy()
        out = np.empty_like(v)
        for k, op in enumerate(self.diffusion(m)):
            out[:, k] = op.solve_implicit(self.dt, v[:, k])
        return out

    # z -> -A^* z + div(C^* z), evaluated at t_m
    def adjoint_drift(self, m: int, z: np.ndarray) -> np.ndarray:
        out = np.zeros_like(z)
        A = self.mat("a", m)
        if A is not None:
            out -= np.einsum("jix,njx->nix", A, z)
        C = self.mat("c", m)
        if C is not None:
            out += gradient(np.einsum("jix,njx->nix", C, z), self.grid)
        return out

    # exact transpose of adjoint_drift: y -> -A y - C . grad y
    def adjoint_drift_T(self, m: int, y: np.ndarray) -> np.ndarray:
        return -self.state_drift(m, y)

    # y -> A y + C . grad y, evaluated at t_m
    def state_drift(self, m: int, y: np.ndarray) -> np.ndarray:
        out = np.zeros_like(y)
        A = self.mat("a", m)
        if A is not None:
            out += np.einsum("ijx,njx->nix", A, y)
        C = self.mat("c", m)
        if C is not None:
            out += np.einsum("ijx,njx->nix", C, gradient(y, self.grid))
        return out

    # z -> -B^* z
    def adjoint_noise(self, m: int, z: np.ndarray):
        B = self.mat("b", m)
        if B is None:
            return None
        return -np.einsum("jix,njx->nix", B, z)

    # y -> B y, so that the transpose of adjoint_noise is -state_noise
    def state_noise(self, m: int, y: np.ndarray):
        B = self.mat("b", m)
        if B is None:
            return None
        return np.einsum("ijx,njx->nix", B, y)
