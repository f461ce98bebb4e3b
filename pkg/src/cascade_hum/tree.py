"""Binary scenario tree standing in for the Brownian filtration.

Level ``m`` holds ``2**m`` nodes. The children of node ``(m, k)`` are
``(m+1, 2k)`` (increment ``+sqrt(dt)``) and ``(m+1, 2k+1)`` (increment
``-sqrt(dt)``), each with conditional probability 1/2.

Adapted fields store one array per level with the node index on axis 0.
A level whose array has a single row is *deterministic*: the row is shared
by every node of that level. This keeps noise-free problems at O(M) memory
regardless of depth, while general levels are stored in full.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class ScenarioTree:
    depth: int
    horizon: float

    def __post_init__(self):
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 1:
            raise InvalidArgument(f"tree depth must be an integer >= 1, got {self.depth!r}")
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise InvalidArgument(f"horizon must be positive, got {self.horizon!r}")

    @property
    def dt(self) -> float:
        return self.horizon / self.depth

    @property
    def sqrt_dt(self) -> float:
        return float(np.sqrt(self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.depth + 1) * self.dt

    def time(self, m: int) -> float:
        return m * self.dt

    def n_nodes(self, m: int) -> int:
        self._check_level(m)
        return 2**m

    @property
    def total_nodes(self) -> int:
        return 2 ** (self.depth + 1) - 1

    def node_index(self, m: int, k: int) -> int:
        """Flat index of node ``(m, k)`` in level-contiguous order."""
        if not 0 <= k < self.n_nodes(m):
            raise InvalidArgument(f"node {k} does not exist at level {m}")
        return 2**m - 1 + k

    def children(self, m: int, k: int) -> tuple[tuple[int, int], tuple[int, int]]:
        if m >= self.depth:
            raise InvalidArgument(f"level {m} nodes are leaves")
        self.node_index(m, k)
        return (m + 1, 2 * k), (m + 1, 2 * k + 1)

    def increments(self, m: int) -> np.ndarray:
        """Brownian increment on the edge entering each level-``m`` node (m >= 1)."""
        if m < 1:
            raise InvalidArgument("the root has no incoming edge")
        signs = np.where(np.arange(self.n_nodes(m)) % 2 == 0, 1.0, -1.0)
        return signs * self.sqrt_dt

    def weights(self, m: int) -> np.ndarray:
        return np.full(self.n_nodes(m), 2.0**-m)

    def path_increments(self, k: int) -> np.ndarray:
        """Increments along the root-to-leaf path ending at leaf ``k``."""
        self.node_index(self.depth, k)
        bits = [(k >> (self.depth - 1 - i)) & 1 for i in range(self.depth)]
        return np.where(np.array(bits) == 0, 1.0, -1.0) * self.sqrt_dt

    def _check_level(self, m):
        if not 0 <= m <= self.depth:
            raise InvalidArgument(f"level {m} outside [0, {self.depth}]")


def build_tree(depth: int, horizon: float) -> ScenarioTree:
    return ScenarioTree(int(depth) if isinstance(depth, (int, np.integer)) else depth, float(horizon))


def _check_level_array(values: np.ndarray, level: int, tree: ScenarioTree) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    tree._check_level(level)
    if values.ndim == 0 or values.shape[0] not in (1, 2**level):
        raise InvalidArgument(
            f"array with leading size {values.shape[0] if values.ndim else 'scalar'} "
            f"is not a level-{level} field"
        )
    return values


def conditional_expectation(values: np.ndarray, level: int, tree: ScenarioTree) -> np.ndarray:
    """Average of the two children: maps a level-``level`` field to ``level - 1``."""
    values = _check_level_array(values, level, tree)
    if level < 1:
        raise InvalidArgument("cannot condition the root level")
    if values.shape[0] == 1:
        return values.copy()
    return 0.5 * (values[0::2] + values[1::2])


def martingale_coefficient(values: np.ndarray, level: int, tree: ScenarioTree) -> np.ndarray:
    """``E[xi * dW | node] / dt``, i.e. ``(up - down) / (2 sqrt(dt))``."""
    values = _check_level_array(values, level, tree)
    if level < 1:
        raise InvalidArgument("cannot condition the root level")
    if values.shape[0] == 1:
        return np.zeros_like(values)
    return (values[0::2] - values[1::2]) / (2.0 * tree.sqrt_dt)


def expectation(values: np.ndarray, level: int, tree: ScenarioTree) -> np.ndarray | float:
    values = _check_level_array(values, level, tree)
    out = values.mean(axis=0)
    return float(out) if out.ndim == 0 else out


def expand(values: np.ndarray, level: int) -> np.ndarray:
    """Broadcast a deterministic level to its full node count."""
    if values.shape[0] == 2**level:
        return values
    return np.broadcast_to(values, (2**level,) + values.shape[1:])


def branch(center: np.ndarray, noise: np.ndarray | None, level: int, tree: ScenarioTree) -> np.ndarray:
    """Children values ``center +/- sqrt(dt) * noise`` of level-``level`` nodes.

    Both operands are level-``level`` arrays. The result lives on ``level + 1``
    and stays deterministic when ``center`` is deterministic and ``noise`` is
    absent or identically zero.
    """
    if noise is None or not np.any(noise):
        if center.shape[0] == 1:
            return center.copy()
        return np.repeat(center, 2, axis=0)
    nodes = max(center.shape[0], noise.shape[0])
    c = np.broadcast_to(center, (nodes,) + center.shape[1:])
    s = tree.sqrt_dt * np.broadcast_to(noise, (nodes,) + noise.shape[1:])
    out = np.empty((2 * nodes,) + center.shape[1:])
    out[0::2] = c + s
    out[1::2] = c - s
    if nodes == 1 and level > 0:
        # deterministic parent with deterministic nonzero noise: same (+, -) pair under every node
        out = np.tile(out, (2**level,) + (1,) * (out.ndim - 1))
    return out


@dataclass
class AdaptedField:
    """Node-indexed family of arrays over levels ``m_lo..m_hi``."""

    tree: ScenarioTree
    values: list
    m_lo: int = 0

    def __post_init__(self):
        for i, v in enumerate(self.values):
            _check_level_array(v, self.m_lo + i, self.tree)
        if self.m_lo < 0 or self.m_hi > self.tree.depth:
            raise InvalidArgument("field levels outside the tree")

    @classmethod
    def zeros(cls, tree: ScenarioTree, shape: Sequence[int], m_lo: int = 0, m_hi: int | None = None):
        m_hi = tree.depth if m_hi is None else m_hi
        return cls(tree, [np.zeros((1,) + tuple(shape)) for _ in range(m_lo, m_hi + 1)], m_lo)

    @classmethod
    def deterministic(cls, tree: ScenarioTree, vector: np.ndarray, m_lo: int = 0, m_hi: int | None = None):
        """Same vector at every node of every level."""
        m_hi = tree.depth if m_hi is None else m_hi
        vector = np.asarray(vector, dtype=float)
        return cls(tree, [vector[None].copy() for _ in range(m_lo, m_hi + 1)], m_lo)

    @property
    def m_hi(self) -> int:
        return self.m_lo + len(self.values) - 1

    @property
    def shape(self) -> tuple:
        return self.values[0].shape[1:]

    def __getitem__(self, m: int) -> np.ndarray:
        if not self.m_lo <= m <= self.m_hi:
            raise InvalidArgument(f"level {m} not in field range [{self.m_lo}, {self.m_hi}]")
        return self.values[m - self.m_lo]

    def __setitem__(self, m: int, v: np.ndarray):
        if not self.m_lo <= m <= self.m_hi:
            raise InvalidArgument(f"level {m} not in field range [{self.m_lo}, {self.m_hi}]")
        self.values[m - self.m_lo] = _check_level_array(v, m, self.tree)

    def levels(self):
        return range(self.m_lo, self.m_hi + 1)

    def full(self, m: int) -> np.ndarray:
        return expand(self[m], m)

    def is_deterministic(self, m: int) -> bool:
        return self[m].shape[0] == 1

    def expectation(self, m: int):
        return expectation(self[m], m, self.tree)

    def component(self, i: int) -> "AdaptedField":
        """Slice component ``i`` (axis 1 of the per-node arrays)."""
        return AdaptedField(self.tree, [v[:, i] for v in self.values], self.m_lo)

    def map(self, fn) -> "AdaptedField":
        return AdaptedField(self.tree, [fn(v) for v in self.values], self.m_lo)

    def _combine(self, other, op):
        if not isinstance(other, AdaptedField):
            return NotImplemented
        if other.m_lo != self.m_lo or other.m_hi != self.m_hi:
            raise InvalidArgument("fields cover different level ranges")
        return AdaptedField(self.tree, [op(a, b) for a, b in zip(self.values, other.values)], self.m_lo)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, s):
        return AdaptedField(self.tree, [s * v for v in self.values], self.m_lo)

    __rmul__ = __mul__

    def max_abs_diff(self, other: "AdaptedField") -> float:
        return max(
            float(np.max(np.abs(self.full(m) - other.full(m)))) for m in self.levels()
        )
