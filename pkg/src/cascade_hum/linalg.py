"""Jacobi eigen- and singular-value solvers and matrix-free conjugate gradient."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import ConvergenceFailure, EigensolverFailure

EPS = np.finfo(float).eps


def jacobi_eigh(a: np.ndarray, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a real symmetric matrix.

    Returns ascending eigenvalues ``w`` and orthonormal eigenvectors ``V``
    (columns) with ``a @ V = V @ diag(w)``. A rotation is skipped once
    ``|a_pq| <= eps * sqrt(|a_pp a_qq|)``, which keeps small eigenvalues of
    positive semidefinite matrices accurate relative to their own size.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    floor = 1e-300 + EPS**2 * float(np.linalg.norm(a))
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                app = a[p, p]
                aqq = a[q, q]
                if abs(apq) <= max(EPS * math.sqrt(abs(app * aqq)), floor):
                    a[p, q] = a[q, p] = 0.0
                    continue
                rotated = True
                theta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            w = a.diagonal().copy()
            order = np.argsort(w, kind="stable")
            return w[order], v[:, order]
    raise EigensolverFailure(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def jacobi_svd(a: np.ndarray, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Singular values (descending) and right singular vectors of ``a`` by one-sided Jacobi.

    Tall inputs are first reduced to their triangular QR factor. Column pairs
    are rotated until every pair is orthogonal to working precision; the
    singular values are then the column norms. Working on the factor instead
    of ``a.T @ a`` keeps small singular values accurate to about
    ``eps * s_max`` rather than ``sqrt(eps) * s_max``.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    m, n = a.shape
    u = np.linalg.qr(a, mode="r") if m > n else a.copy()
    v = np.eye(n)
    # columns below this squared norm are roundoff and are left alone
    dead = (EPS * float(np.linalg.norm(u))) ** 2
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                up, uq = u[:, p], u[:, q]
                alpha = float(up @ up)
                beta = float(uq @ uq)
                gamma = float(up @ uq)
                if abs(gamma) <= EPS * math.sqrt(alpha * beta) or min(alpha, beta) <= dead:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * up - s * uq
                u[:, q] = s * up + c * uq
                u[:, p] = new_p
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if not rotated:
            sv = np.sqrt(np.einsum("ij,ij->j", u, u))
            order = np.argsort(-sv, kind="stable")
            return sv[order], v[:, order]
    raise EigensolverFailure(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")


def conjugate_gradient(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    inner: Callable[[np.ndarray, np.ndarray], float],
    tol: float = 1e-10,
    max_iter: int = 500,
) -> tuple[np.ndarray, int, float]:
    """Solve ``apply(x) = b`` for a self-adjoint positive operator in the given inner product.

    Stops when the recomputed residual satisfies ``|b - apply(x)| <= tol |b|``.
    Returns ``(x, iterations, relative_residual)``.
    """
    x = np.zeros_like(b)
    bnorm = math.sqrt(inner(b, b))
    if bnorm == 0.0:
        return x, 0, 0.0
    r = b.copy()
    p = r.copy()
    rr = inner(r, r)
    for k in range(1, max_iter + 1):
        ap = apply(p)
        alpha = rr / inner(p, ap)
        x = x + alpha * p
        r = r - alpha * ap
        rr_new = inner(r, r)
        if math.sqrt(rr_new) <= tol * bnorm:
            # guard against drift of the recursive residual
            r_true = b - apply(x)
            rel = math.sqrt(inner(r_true, r_true)) / bnorm
            if rel <= tol:
                return x, k, rel
            r = r_true
            rr_new = inner(r, r)
            p = r.copy()
            rr = rr_new
            continue
        p = r + (rr_new / rr) * p
        rr = rr_new
    r_true = b - apply(x)
    rel = math.sqrt(inner(r_true, r_true)) / bnorm
    raise ConvergenceFailure(
        f"CG reached {max_iter} iterations with relative residual {rel:.3e} > {tol:.1e}",
        iterations=max_iter,
        relative_residual=rel,
    )
