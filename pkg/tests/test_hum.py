import numpy as np
import pytest

from cascade_hum import build_tree, solve_adjoint
from cascade_hum.errors import ConvergenceFailure
from cascade_hum.hum import (
    apply_gramian,
    certify_uniform_estimate,
    leaf_energy,
    observation_energy,
    synthesize_control,
)
from cascade_hum.observability import assemble_gramian, estimate_observability_constant
from cascade_hum.steps import StepOperators


@pytest.fixture
def sine_terminal(grid):
    return np.stack([np.sin(np.pi * grid.x)] * 2)


@pytest.fixture
def c_obs(coupled, tree, grid, masks):
    return estimate_observability_constant(assemble_gramian(coupled, tree, grid, masks["G0"])).C_obs


def inner(a, b, grid):
    return grid.h * float(np.sum(a * b))


def test_gramian_of_zero(rich, grid, tree, masks):
    assert not np.any(apply_gramian(np.zeros((2, grid.nx)), rich, tree, grid, masks["G0"]))


def test_gramian_symmetric(rich, grid, tree, masks, rng):
    ops = StepOperators(rich, tree, grid)
    for _ in range(10):
        a, b = rng.standard_normal((2, 2, grid.nx))
        la = apply_gramian(a, rich, tree, grid, masks["G0"], ops=ops)
        lb = apply_gramian(b, rich, tree, grid, masks["G0"], ops=ops)
        assert abs(inner(la, b, grid) - inner(lb, a, grid)) <= 1e-11 * max(1.0, abs(inner(la, b, grid)))


def test_gramian_matches_quadrature(rich, grid, tree, masks, rng):
    ops = StepOperators(rich, tree, grid)
    for _ in range(5):
        a = rng.standard_normal((2, grid.nx))
        quad = observation_energy(solve_adjoint(a, rich, tree, grid, ops=ops), masks["G0"], grid)
        form = inner(apply_gramian(a, rich, tree, grid, masks["G0"], ops=ops), a, grid)
        assert form >= 0 and abs(form - quad) <= 1e-11 * max(1.0, quad)


def test_zero_terminal(coupled, grid, tree, masks):
    res = synthesize_control(np.zeros((2, grid.nx)), 1e-4, coupled, tree, grid, masks["G0"])
    assert res.cg_iterations == 0 and res.residual == 0.0 and res.cost == 0.0
    assert all(not np.any(res.u[m]) for m in range(tree.depth))
    assert certify_uniform_estimate(res, 1.0, 0.0).passed


def test_coupled_benchmark(coupled, grid, tree, masks, sine_terminal, c_obs):
    y2 = leaf_energy(sine_terminal, grid)
    residuals = []
    for eps in (1e-2, 1e-3, 1e-4):
        res = synthesize_control(sine_terminal, eps, coupled, tree, grid, masks["G0"])
        assert res.optimality_ok
        assert res.residual <= 0.5 * eps * c_obs * y2
        assert certify_uniform_estimate(res, c_obs, y2).passed
        out = np.setdiff1d(np.arange(grid.nx), masks["G0"].indices)
        assert all(np.all(res.u[m][:, out] == 0.0) for m in range(tree.depth))
        assert res.residual >= 0 and res.cost >= 0
        residuals.append(res.residual)
    assert residuals[0] > residuals[1] > residuals[2]
    slopes = np.array(residuals) / np.array([1e-2, 1e-3, 1e-4])
    assert slopes.max() <= c_obs * y2 / 2
    assert slopes.max() / slopes.min() < 1e3


def test_certificate_inverts(coupled, grid, tree, masks, sine_terminal):
    res = synthesize_control(sine_terminal, 1e-3, coupled, tree, grid, masks["G0"])
    assert not certify_uniform_estimate(res, 0.0, leaf_energy(sine_terminal, grid)).passed


def test_linear_in_terminal_data(coupled, grid, tree, masks, sine_terminal):
    r1 = synthesize_control(sine_terminal, 1e-3, coupled, tree, grid, masks["G0"], cg_tol=1e-12)
    r3 = synthesize_control(-3.0 * sine_terminal, 1e-3, coupled, tree, grid, masks["G0"], cg_tol=1e-12)
    scale = max(float(np.max(np.abs(r1.u[m]))) for m in range(tree.depth))
    assert r3.u.max_abs_diff(-3.0 * r1.u) <= 1e-8 * 3 * scale
    assert r3.cost == pytest.approx(9.0 * r1.cost, rel=1e-8)


def test_shifted_operator_rayleigh(coupled, grid, tree, masks, rng):
    eps = 1e-3
    for _ in range(5):
        v = rng.standard_normal((2, grid.nx))
        q = inner(eps * v + apply_gramian(v, coupled, tree, grid, masks["G0"]), v, grid) / inner(v, v, grid)
        assert q >= eps * (1 - 1e-12)


def test_random_leaf_data(rich, grid, masks, rng):
    tree = build_tree(6, 1.0)
    yT = rng.standard_normal((2**6, 2, grid.nx))
    res = synthesize_control(yT, 1e-3, rich, tree, grid, masks["G0"])
    assert res.optimality_ok


def test_cg_cap_reports(coupled, grid, tree, masks, sine_terminal):
    with pytest.raises(ConvergenceFailure):
        synthesize_control(sine_terminal, 1e-6, coupled, tree, grid, masks["G0"], cg_tol=1e-14, cg_max_iter=2)


@pytest.mark.parametrize("eps, tol", [(0.0, 1e-10), (-1.0, 1e-10), (1e-3, 0.0)])
def test_bad_parameters(coupled, grid, tree, masks, sine_terminal, eps, tol):
    with pytest.raises(ValueError):
        synthesize_control(sine_terminal, eps, coupled, tree, grid, masks["G0"], cg_tol=tol)
