import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import solve_banded

from cascade_hum.errors import EllipticityViolation, InvalidArgument
from cascade_hum.grid import (
    Grid1D,
    SubdomainMask,
    assemble_diffusion,
    divergence_of_product,
    gradient,
    h1_seminorm_sq,
    half_point_average,
    l2_inner,
    solve_tridiagonal,
)

from oracles import dense_gradient, dense_laplacian, discrete_sine_eigenvalue


@given(st.integers(3, 400))
def test_grid_spacing(nx):
    g = Grid1D(nx)
    assert abs(g.h * (nx + 1) - 1.0) <= 1e-15
    assert g.x[0] == g.h and g.x.size == nx


def test_grid_too_small():
    with pytest.raises(InvalidArgument):
        Grid1D(2)


def test_unit_laplacian_stencil():
    op = assemble_diffusion(np.ones(4), Grid1D(3))
    np.testing.assert_array_equal(op.diag, [-32.0, -32.0, -32.0])
    np.testing.assert_array_equal(op.off, [16.0, 16.0])


def test_sine_mode_eigenpair():
    g = Grid1D(31)
    op = assemble_diffusion(np.ones(32), g)
    v = np.sin(np.pi * g.x)
    np.testing.assert_allclose(op.matvec(v), discrete_sine_eigenvalue(1, g.h) * v, atol=1e-12 * np.abs(op.diag).max())


def test_ellipticity_violation():
    beta = np.ones(8)
    beta[3] = 0.0
    with pytest.raises(EllipticityViolation):
        assemble_diffusion(beta, Grid1D(7))
    with pytest.raises(EllipticityViolation):
        assemble_diffusion(np.full(8, 0.05), Grid1D(7), beta0=0.1)


@given(st.lists(st.floats(0.1, 10.0), min_size=6, max_size=40))
def test_symmetric_and_matches_dense(beta):
    beta = np.array(beta)
    g = Grid1D(beta.size - 1)
    op = assemble_diffusion(beta, g)
    D = op.dense()
    assert np.array_equal(D, D.T)
    np.testing.assert_allclose(D, dense_laplacian(beta, g.h), rtol=1e-15)
    # Gershgorin: every eigenvalue negative
    radius = np.abs(D).sum(axis=1) - np.abs(np.diag(D))
    assert np.all(np.diag(D) + radius <= 1e-12 * np.abs(np.diag(D)))
    assert np.max(np.linalg.eigvalsh(D)) < 0.0


def test_quadratic_form_bound(rng):
    g = Grid1D(25)
    beta = rng.uniform(0.3, 2.0, g.nx + 1)
    op = assemble_diffusion(beta, g, beta0=0.3)
    for _ in range(100):
        v = rng.standard_normal(g.nx)
        lhs = l2_inner(op.matvec(v), v, g)
        assert lhs <= -0.3 * h1_seminorm_sq(v, g) + 1e-10 * abs(lhs)


def test_second_order_refinement():
    errs = []
    for nx in (15, 31, 63):
        g = Grid1D(nx)
        beta = half_point_average(1.0 + 0.5 * np.sin(np.pi * g.x_all))
        op = assemble_diffusion(beta, g)
        x = g.x
        v = np.sin(np.pi * x) * x
        b = 1.0 + 0.5 * np.sin(np.pi * x)
        db = 0.5 * np.pi * np.cos(np.pi * x)
        dv = np.pi * np.cos(np.pi * x) * x + np.sin(np.pi * x)
        d2v = -np.pi**2 * np.sin(np.pi * x) * x + 2 * np.pi * np.cos(np.pi * x)
        errs.append(np.max(np.abs(op.matvec(v) - (db * dv + b * d2v))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_thomas_against_banded(rng):
    n = 40
    sub, sup = rng.uniform(-1, 1, n - 1), rng.uniform(-1, 1, n - 1)
    diag = 4.0 + rng.uniform(0, 1, n)
    rhs = rng.standard_normal((3, n))
    ab = np.zeros((3, n))
    ab[0, 1:], ab[1], ab[2, :-1] = sup, diag, sub
    ref = solve_banded((1, 1), ab, rhs.T).T
    np.testing.assert_allclose(solve_tridiagonal(sub, diag, sup, rhs), ref, rtol=1e-12, atol=1e-14)


def test_implicit_solve_inverts(rng):
    g = Grid1D(20)
    op = assemble_diffusion(rng.uniform(0.5, 1.5, 21), g)
    r = rng.standard_normal((4, 20))
    v = op.solve_implicit(0.01, r)
    np.testing.assert_allclose(v - 0.01 * op.matvec(v), r, atol=1e-12)


def test_gradient_stencil():
    g = Grid1D(9)
    x, h = g.x, g.h
    lin = gradient(x, g)
    np.testing.assert_allclose(lin[1:-1], 1.0, rtol=1e-13)
    assert lin[0] == pytest.approx(x[1] / (2 * h))
    assert lin[-1] == pytest.approx(-x[-2] / (2 * h))
    const = gradient(np.full(9, 3.0), g)
    np.testing.assert_allclose(const[1:-1], 0.0, atol=1e-12)
    assert const[0] == pytest.approx(3.0 / (2 * h)) and const[-1] == pytest.approx(-3.0 / (2 * h))
    quad = gradient(x**2, g)
    np.testing.assert_allclose(quad[1:-1], 2 * x[1:-1], rtol=1e-13)
    np.testing.assert_allclose(gradient(x, g), dense_gradient(9, h) @ x, rtol=1e-14)


def test_gradient_is_skew():
    g = Grid1D(17)
    D = np.stack([gradient(e, g) for e in np.eye(17)], axis=1)
    assert np.array_equal(D, -D.T)


def test_divergence_of_product(rng):
    g = Grid1D(13)
    z = rng.standard_normal(13)
    np.testing.assert_array_equal(divergence_of_product(np.zeros(13), z, g), 0.0)
    np.testing.assert_allclose(divergence_of_product(np.ones(13), z, g), gradient(z, g))


def test_summation_by_parts_is_first_order():
    rem = []
    for nx in (31, 63, 127):
        g = Grid1D(nx)
        x = g.x
        C, z, w = 1 + x, np.sin(np.pi * x), x * (1 - x) + 0.3
        rem.append(abs(l2_inner(divergence_of_product(C, z, g), w, g) + l2_inner(z, C * gradient(w, g), g)))
    assert rem[-1] <= 2.0 * (1.0 / 128) and rem[0] >= rem[-1]


def test_l2_inner_examples():
    g = Grid1D(3)
    assert l2_inner(np.ones(3), np.ones(3), g) == pytest.approx(0.75)
    assert l2_inner(np.zeros(3), np.ones(3), g) == 0.0
    g = Grid1D(31)
    assert abs(l2_inner(np.sin(np.pi * g.x), np.sin(2 * np.pi * g.x), g)) <= 1e-13
    with pytest.raises(InvalidArgument):
        l2_inner(np.ones(3), np.ones(4), g)


def test_masks_nest():
    g = Grid1D(31)
    g0, gt, g1 = SubdomainMask(g, 0.3, 0.8), SubdomainMask(g, 0.35, 0.75), SubdomainMask(g, 0.45, 0.65)
    assert gt in g0 and g1 in gt and gt.compactly_contains(g1)
    assert np.all(g0.indicator[g0.indices] == 1.0) and g0.indicator.sum() == g0.indices.size
    with pytest.raises(InvalidArgument):
        SubdomainMask(g, 0.6, 0.4)
