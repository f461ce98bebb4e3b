import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascade_hum.errors import ConvergenceFailure, EigensolverFailure
from cascade_hum.linalg import conjugate_gradient, jacobi_eigh, jacobi_svd


@given(st.integers(1, 25), st.integers(0, 2**32 - 1))
def test_jacobi_matches_lapack(n, seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal((n, n))
    a = a + a.T
    w, V = jacobi_eigh(a)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-12 * max(1.0, np.abs(w).max()))
    np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(a @ V, V * w, atol=1e-11 * max(1.0, np.abs(w).max()))


def test_jacobi_small_eigenvalues_of_psd(rng):
    # graded PSD matrix: eigenvalues spread over 14 decades
    Q, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    lam = 10.0 ** -np.arange(12, dtype=float) * 1.3
    a = (Q * lam) @ Q.T
    w, _ = jacobi_eigh(a)
    assert np.all(np.abs(w[::-1][:6] - lam[:6]) <= 1e-12 * lam[0])


def test_jacobi_sweep_cap(rng):
    a = rng.standard_normal((8, 8))
    with pytest.raises(EigensolverFailure):
        jacobi_eigh(a + a.T, max_sweeps=1)


def test_cg_solves_spd(rng):
    A = rng.standard_normal((20, 20))
    A = A @ A.T + 20 * np.eye(20)
    b = rng.standard_normal(20)
    x, iters, rel = conjugate_gradient(lambda v: A @ v, b, lambda p, q: float(p @ q), 1e-12, 200)
    np.testing.assert_allclose(A @ x, b, atol=1e-10)
    assert rel <= 1e-12 and iters <= 40


def test_cg_zero_rhs():
    x, iters, rel = conjugate_gradient(lambda v: v, np.zeros(4), lambda p, q: float(p @ q))
    assert iters == 0 and rel == 0.0 and not np.any(x)


def test_cg_cap(rng):
    A = np.diag(np.logspace(0, 8, 50))
    with pytest.raises(ConvergenceFailure) as exc:
        conjugate_gradient(lambda v: A @ v, np.ones(50), lambda p, q: float(p @ q), 1e-14, 3)
    assert exc.value.iterations == 3 and exc.value.relative_residual > 1e-14


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_svd_matches_lapack(m, n, seed):
    a = np.random.default_rng(seed).standard_normal((m, n))
    s, V = jacobi_svd(a)
    ref = np.linalg.svd(a, compute_uv=False)
    top = max(ref[0], 1e-300)
    np.testing.assert_allclose(s[: ref.size], ref, atol=1e-13 * top)
    np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-13)
    # A V has orthogonal columns with norms s
    av = a @ V
    np.testing.assert_allclose(av.T @ av, np.diag(s**2), atol=1e-12 * top**2)


def test_svd_rank_deficient_wide(rng):
    a = rng.standard_normal((5, 3)) @ rng.standard_normal((3, 9))
    s, _ = jacobi_svd(a)
    assert np.all(s[3:] <= 1e-13 * s[0]) and s[2] > 1e-3 * s[0]


def test_svd_small_values_beat_gram(rng):
    # singular values down to 1e-12 survive; forming a.T @ a would lose them
    U, _ = np.linalg.qr(rng.standard_normal((40, 6)))
    W, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    sig = np.logspace(0, -12, 6)
    s, _ = jacobi_svd(U @ np.diag(sig) @ W.T)
    np.testing.assert_allclose(s, sig, rtol=1e-3)
