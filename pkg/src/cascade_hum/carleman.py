"""Carleman weights and empirical checks of the weighted estimates.

Weights on interior levels t_1..t_{M-1}:

    alpha = (exp(mu psi) - exp(2 mu |psi|_inf)) / (t (T - t))
    gamma = 1 / (t (T - t)),   theta = exp(lambda alpha)

theta**2 underflows long before desk-scale lambda values become large, so
every weighted integral is accumulated as a logarithm. Ratios of integrals
are taken between logarithms and only then exponentiated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .adjoint import Sources, solve_adjoint
from .errors import InvalidArgument, OutOfDomain, UnsupportedGeometry
from .grid import Grid1D, SubdomainMask, gradient
from .model import CascadeCoefficients, compute_lambda0
from .steps import StepOperators
from .tree import AdaptedField, ScenarioTree

UNDERFLOW = 1e-300


def build_psi(grid: Grid1D, g1: SubdomainMask) -> np.ndarray:
    """``psi(x) = 4 x (1 - x)``; its only critical point x = 1/2 must lie in G1."""
    idx = g1.indices
    if idx.size == 0 or np.min(np.abs(grid.x[idx] - 0.5)) > grid.h:
        raise UnsupportedGeometry("G1 must contain x = 1/2 (within one grid cell)")
    x = grid.x
    slope = np.abs(4.0 - 8.0 * x)
    outside = np.setdiff1d(np.arange(grid.nx), idx)
    if np.any(slope[outside] == 0.0):
        raise UnsupportedGeometry("the grid point x = 1/2 lies outside G1")
    return 4.0 * x * (1.0 - x)


def _underflow(logv: np.ndarray) -> np.ndarray:
    v = np.exp(logv)
    return np.where(v < UNDERFLOW, 0.0, v)


@dataclass
class CarlemanWeights:
    lam: float
    mu: float
    T: float
    depth: int
    psi: np.ndarray
    times: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    log_theta: np.ndarray = field(repr=False)

    @property
    def psi_sup(self) -> float:
        return float(np.max(np.abs(self.psi)))

    @property
    def theta(self) -> np.ndarray:
        return _underflow(self.log_theta)

    def log_weight(self, power: float) -> np.ndarray:
        """``log(lambda^p theta^2 gamma^p)`` on interior levels, shape (M-1, nx)."""
        return power * np.log(self.lam) + 2.0 * self.log_theta + power * np.log(self.gamma)[:, None]

    def theta_level(self, m: int) -> np.ndarray:
        """theta at level m, extended by zero at t = 0 and t = T."""
        if m in (0, self.depth):
            return np.zeros_like(self.psi)
        return _underflow(self.log_theta[m - 1])

    def with_lambda(self, lam: float) -> "CarlemanWeights":
        return CarlemanWeights(lam, self.mu, self.T, self.depth, self.psi, self.times, self.gamma,
                               self.alpha, lam * self.alpha)


def weights_at_time(t: float, lam: float, mu: float, T: float, psi: np.ndarray):
    """``(alpha, gamma, theta)`` at a single time in (0, T)."""
    if not 0.0 < t < T:
        raise OutOfDomain(f"weights are singular at t = {t}; theta is extended by 0 there")
    g = 1.0 / (t * (T - t))
    a = (np.exp(mu * psi) - np.exp(2.0 * mu * np.max(np.abs(psi)))) * g
    return a, g, _underflow(lam * a)


def eval_weights(lam: float, mu: float, T: float, psi: np.ndarray, grid: Grid1D, tree: ScenarioTree) -> CarlemanWeights:
    if lam < 1 or mu < 1:
        raise InvalidArgument(f"need lambda, mu >= 1, got lambda={lam}, mu={mu}")
    if abs(tree.horizon - T) > 1e-12 * T:
        raise InvalidArgument("tree horizon does not match T")
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (grid.nx,):
        raise InvalidArgument("psi does not match the grid")
    M = tree.depth
    if M < 2:
        raise InvalidArgument("need at least one interior time level (depth >= 2)")
    t = T * np.arange(1, M) / M
    gamma = 1.0 / (t * (T - t))
    top = np.exp(2.0 * mu * np.max(np.abs(psi)))
    alpha = (np.exp(mu * psi)[None, :] - top) * gamma[:, None]
    w = CarlemanWeights(float(lam), float(mu), float(T), M, psi, t, gamma, alpha, lam * alpha)
    assert np.all(gamma >= 4.0 / T**2)
    assert np.all(alpha < 0.0)
    return w


def alpha_rate_constant(weights: CarlemanWeights) -> float:
    """Smallest C with ``|d alpha / dt| <= C T exp(2 mu |psi|) gamma^2`` on the sampled levels.

    The time derivative is a centered difference over the interior levels.
    """
    a, g, t = weights.alpha, weights.gamma, weights.times
    if a.shape[0] < 3:
        raise InvalidArgument("need at least 4 time levels")
    dt = t[1] - t[0]
    da = (a[2:] - a[:-2]) / (2.0 * dt)
    scale = weights.T * np.exp(2.0 * weights.mu * weights.psi_sup) * g[1:-1, None] ** 2
    return float(np.max(np.abs(da) / scale))


def _field_levels(fld: AdaptedField, component: int | None):
    if component is not None:
        fld = fld.component(component)
    if len(fld.shape) != 1:
        raise InvalidArgument("weighted integrals need a scalar field per node; pass component=")
    return fld


def log_weighted_integral(
    fld: AdaptedField,
    log_w: np.ndarray,
    weights: CarlemanWeights,
    grid: Grid1D,
    *,
    component: int | None = None,
    mask: SubdomainMask | None = None,
    grad: bool = False,
) -> float:
    """``log E int int exp(log_w) |v|^2 dx dt`` over interior levels, v = field or its gradient.

    Time quadrature is the trapezoid rule with zero endpoint values, i.e. dt times
    the sum over levels 1..M-1; space is h times the sum over grid points.
    """
    fld = _field_levels(fld, component)
    tree = fld.tree
    if tree.depth != weights.depth or fld.shape != (grid.nx,):
        raise InvalidArgument("field and weights use different discretizations")
    cols = slice(None) if mask is None else mask.indices
    per_level = []
    for m in range(1, tree.depth):
        v = fld[m]
        if grad:
            v = gradient(v, grid)
        with np.errstate(divide="ignore"):
            lv = np.log(v[:, cols] ** 2)
        terms = log_w[m - 1][cols][None, :] + lv
        per_level.append(logsumexp(terms) + np.log(tree.dt * grid.h / v.shape[0]) if np.any(np.isfinite(terms)) else -np.inf)
    per_level = np.array(per_level)
    if not np.any(np.isfinite(per_level)):
        return -np.inf
    return float(logsumexp(per_level))


def functional_parts(d: float, fld: AdaptedField, weights: CarlemanWeights, grid: Grid1D, component: int | None = None):
    """Logs of ``E int theta^2 gamma^d z^2`` and ``E int theta^2 gamma^(d-2) |grad z|^2``."""
    lam_free = weights.log_weight(d) - d * np.log(weights.lam)
    q1 = log_weighted_integral(fld, lam_free, weights, grid, component=component)
    lam_free2 = weights.log_weight(d - 2) - (d - 2) * np.log(weights.lam)
    q2 = log_weighted_integral(fld, lam_free2, weights, grid, component=component, grad=True)
    return q1, q2


def log_carleman_functional(d: float, fld: AdaptedField, weights: CarlemanWeights, grid: Grid1D, component: int | None = None) -> float:
    q1, q2 = functional_parts(d, fld, weights, grid, component)
    loglam = np.log(weights.lam)
    return float(np.logaddexp(d * loglam + q1, (d - 2) * loglam + q2))


def carleman_functional_I(d: float, fld: AdaptedField, weights: CarlemanWeights, grid: Grid1D, component: int | None = None) -> float:
    """``lambda^d E int theta^2 gamma^d z^2 + lambda^(d-2) E int theta^2 gamma^(d-2) |grad z|^2``.

    May underflow to 0; use ``log_carleman_functional`` for comparisons.
    """
    return float(_underflow(np.array(log_carleman_functional(d, fld, weights, grid, component))))


def log_local_term(power: float, fld: AdaptedField, weights: CarlemanWeights, grid: Grid1D,
                   mask: SubdomainMask, component: int | None = None) -> float:
    """``log(lambda^p E int_0^T int_mask theta^2 gamma^p z^2)``."""
    return log_weighted_integral(fld, weights.log_weight(power), weights, grid, component=component, mask=mask)


def _ratio(log_lhs: float, log_rhs: float) -> tuple[float, str]:
    if log_lhs == -np.inf and log_rhs == -np.inf:
        return float("nan"), "skipped"
    if log_rhs == -np.inf:
        return float("inf"), "violation"
    return float(np.exp(log_lhs - log_rhs)), "ok"


@dataclass
class CascadeCheck:
    max_ratio: float
    rows: list
    violations: list

    @property
    def finite(self) -> bool:
        return np.isfinite(self.max_ratio)


def carleman_check_cascade(
    coeffs: CascadeCoefficients,
    tree: ScenarioTree,
    grid: Grid1D,
    weights: CarlemanWeights,
    l: float,
    sample_z0,
    mask: SubdomainMask,
    C0_cal: float = 1.0,
) -> CascadeCheck:
    """``sum_i I(3(n+1-i), z_i)`` against ``lambda^l E int int_mask theta^2 gamma^l |z_1|^2``.

    Samples whose two sides both vanish are skipped; a vanishing right side
    with a nonzero left side is recorded as a violation.
    """
    lam0 = compute_lambda0(coeffs, tree.horizon, C0_cal, tree, grid)
    if weights.lam < lam0 * (1 - 1e-12):
        raise InvalidArgument(f"lambda={weights.lam} is below lambda0={lam0}")
    n = coeffs.n
    ops = StepOperators(coeffs, tree, grid)
    rows, violations = [], []
    for s, z0 in enumerate(sample_z0):
        traj = solve_adjoint(z0, coeffs, tree, grid, ops=ops)
        terms = [log_carleman_functional(3 * (n - i), traj.z, weights, grid, component=i) for i in range(n)]
        log_lhs = float(logsumexp(terms)) if np.any(np.isfinite(terms)) else -np.inf
        log_rhs = log_local_term(l, traj.z, weights, grid, mask, component=0)
        ratio, status = _ratio(log_lhs, log_rhs)
        row = {
            "sample": s,
            "lambda": weights.lam,
            "LHS": float(_underflow(np.array(log_lhs))),
            "RHS": float(_underflow(np.array(log_rhs))),
            "ratio": ratio,
            "log_LHS": log_lhs,
            "log_RHS": log_rhs,
            "status": status,
        }
        rows.append(row)
        if status == "violation":
            violations.append(row)
    finite = [r["ratio"] for r in rows if r["status"] != "skipped"]
    max_ratio = max(finite) if finite else float("nan")
    return CascadeCheck(max_ratio, rows, violations)


@dataclass
class SingleCheck:
    ratio: float
    status: str
    log_lhs: float
    log_rhs: float
    log_terms: dict


def carleman_check_single(
    d: float,
    sources: Sources | None,
    z0,
    coeffs_single: CascadeCoefficients,
    tree: ScenarioTree,
    grid: Grid1D,
    weights: CarlemanWeights,
    region: SubdomainMask,
    C2_cal: float = 1.0,
) -> SingleCheck:
    """Ratio of the two sides of the single-equation estimate with parameter d.

    Right side: local ``lambda^d`` term on ``region`` plus the source terms
    ``lambda^(d-3) F0^2``, ``lambda^(d-1) F1^2`` and ``lambda^(d-1) |F|^2``,
    all weighted by ``theta^2 gamma^p`` with the matching power.
    """
    if coeffs_single.n != 1:
        raise InvalidArgument("the single-equation check needs n = 1")
    T = tree.horizon
    if weights.lam < C2_cal * (T + T**2) * (1 - 1e-12):
        raise InvalidArgument(f"lambda={weights.lam} is below C2 (T + T^2) = {C2_cal * (T + T**2)}")
    sources = sources or Sources()
    traj = solve_adjoint(z0, coeffs_single, tree, grid, sources)
    log_lhs = log_carleman_functional(d, traj.z, weights, grid, component=0)
    terms = {"local": log_local_term(d, traj.z, weights, grid, region, component=0)}
    for name, fld, p in (("F0", sources.f0, d - 3), ("F1", sources.f1, d - 1), ("F", sources.f, d - 1)):
        if fld is not None:
            terms[name] = log_weighted_integral(fld, weights.log_weight(p), weights, grid, component=0)
    vals = [v for v in terms.values() if np.isfinite(v)]
    log_rhs = float(logsumexp(vals)) if vals else -np.inf
    ratio, status = _ratio(log_lhs, log_rhs)
    return SingleCheck(ratio, status, log_lhs, log_rhs, terms)


def random_initial_states(n: int, nx: int, count: int, seed: int) -> list[np.ndarray]:
    """Standard normal nodal values from ``numpy.random.default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    return [rng.standard_normal((n, nx)) for _ in range(count)]
