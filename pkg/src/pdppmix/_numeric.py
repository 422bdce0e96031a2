"""Low-level kernels shared by the samplers.

Everything here works on plain arrays so it can be compiled by numba.  Points
are rows of 2-d float arrays; a projection kernel is described by
``(width, ell, inv_vol)`` where ``width`` is the per-coordinate side length
of the domain and ``inv_vol = 1 / prod(width)``.

Random draws go through a ``numpy.random.Generator``; numba consumes the same
bit stream as numpy, so seeded runs match across the two code paths.
"""

import math

import numpy as np
from scipy.linalg import solve_triangular

from ._jit import jit

TWO_PI = 2.0 * math.pi
LOG_2PI = math.log(2.0 * math.pi)

# Schur-complement pivots below this fraction of the diagonal count as singular.
SINGULAR_RTOL = 1e-10

OK = 0
SINGULAR = 1
CAP_EXCEEDED = 2


# ---------------------------------------------------------------------------
# Projection kernel
# ---------------------------------------------------------------------------


@jit
def dirichlet_sum(t, ell):
    """Return sum_{j=-ell}^{ell} cos(2 pi j t) via the Chebyshev recurrence."""
    c1 = math.cos(TWO_PI * t)
    total = 1.0
    prev = 1.0
    cur = c1
    for _ in range(ell):
        total += 2.0 * cur
        nxt = 2.0 * c1 * cur - prev
        prev = cur
        cur = nxt
    return total


@jit
def kernel_value(x, y, width, ell, inv_vol):
    out = inv_vol
    for e in range(x.shape[0]):
        out *= dirichlet_sum((x[e] - y[e]) / width[e], ell)
    return out


def _kernel_matrix_numpy(X, Y, width, ell, inv_vol):
    t = (X[:, None, :] - Y[None, :, :]) / width
    c1 = np.cos(TWO_PI * t)
    total = np.ones_like(t)
    prev = np.ones_like(t)
    cur = c1
    for _ in range(ell):
        total += 2.0 * cur
        prev, cur = cur, 2.0 * c1 * cur - prev
    return inv_vol * np.prod(total, axis=2)


@jit(fallback=_kernel_matrix_numpy)
def kernel_matrix(X, Y, width, ell, inv_vol):
    nx = X.shape[0]
    ny = Y.shape[0]
    out = np.empty((nx, ny))
    for i in range(nx):
        for j in range(ny):
            out[i, j] = kernel_value(X[i], Y[j], width, ell, inv_vol)
    return out


# ---------------------------------------------------------------------------
# Incremental Cholesky of Gram matrices
# ---------------------------------------------------------------------------


@jit
def kernel_forward_solve(z, X, q, L, width, ell, inv_vol, v):
    """Solve ``L v = k(z)`` against the first ``q`` factored rows; return v.v."""
    ss = 0.0
    for j in range(q):
        acc = kernel_value(z, X[j], width, ell, inv_vol)
        for l in range(j):
            acc -= L[j, l] * v[l]
        vj = acc / L[j, j]
        v[j] = vj
        ss += vj * vj
    return ss


@jit
def cholesky_append(X, q, L, width, ell, inv_vol, v):
    """Extend the factor of the Gram of ``X[:q]`` by the row ``X[q]``.

    Returns False (leaving ``L`` untouched past row ``q - 1``) when the new
    pivot is numerically zero.
    """
    diag = kernel_value(X[q], X[q], width, ell, inv_vol)
    ss = kernel_forward_solve(X[q], X, q, L, width, ell, inv_vol, v)
    resid = diag - ss
    if resid <= SINGULAR_RTOL * diag:
        return False
    for l in range(q):
        L[q, l] = v[l]
    L[q, q] = math.sqrt(resid)
    return True


@jit
def gram_cholesky(X, width, ell, inv_vol, L):
    """Factor the Gram matrix of all rows of ``X`` into ``L``.

    Returns the number of rows factored before a singular pivot (equal to
    ``len(X)`` on success).
    """
    v = np.empty(X.shape[0])
    for q in range(X.shape[0]):
        if not cholesky_append(X, q, L, width, ell, inv_vol, v):
            return q
    return X.shape[0]


def _palm_diagonal_numpy(Z, X, q, L, width, ell, inv_vol):
    base = inv_vol * (2.0 * ell + 1.0) ** Z.shape[1]
    if q == 0:
        return np.full(Z.shape[0], base)
    K = _kernel_matrix_numpy(Z, X[:q], width, ell, inv_vol)
    V = solve_triangular(L[:q, :q], K.T, lower=True)
    return base - np.sum(V * V, axis=0)


@jit(fallback=_palm_diagonal_numpy)
def palm_diagonal(Z, X, q, L, width, ell, inv_vol):
    """Reduced Palm intensity K^!(z, z) at every row of ``Z``."""
    base = inv_vol
    for _ in range(Z.shape[1]):
        base *= 2.0 * ell + 1.0
    out = np.empty(Z.shape[0])
    v = np.empty(max(q, 1))
    for i in range(Z.shape[0]):
        out[i] = base - kernel_forward_solve(Z[i], X, q, L, width, ell, inv_vol, v)
    return out


# ---------------------------------------------------------------------------
# Sequential rejection sampling of projection DPPs
# ---------------------------------------------------------------------------


@jit
def palm_draw_one(X, q, L, lower, width, ell, inv_vol, m, rng, cap, out, v):
    """Draw one point from the density K^!(z, z) / (m - q) by rejection.

    The proposal is uniform on the domain and the envelope is the constant
    diagonal m / vol of the base kernel.  Returns ``(rejections, accepted)``
    and leaves the solve vector of the accepted point in ``v``.
    """
    d = lower.shape[0]
    diag = m * inv_vol
    rejections = 0
    while rejections < cap:
        for e in range(d):
            out[e] = lower[e] + width[e] * rng.random()
        ss = kernel_forward_solve(out, X, q, L, width, ell, inv_vol, v)
        if rng.random() < (diag - ss) / diag:
            return rejections, True
        rejections += 1
    return rejections, False


@jit
def sample_palm_points(cond, n_new, lower, width, ell, inv_vol, m, rng, cap):
    """Sequentially draw ``n_new`` points of the Palm DPP reduced at ``cond``.

    Returns ``(points, rejections, status)``.  With an empty ``cond`` this is
    exact sampling of the base projection DPP.
    """
    q0 = cond.shape[0]
    d = lower.shape[0]
    total = q0 + n_new
    X = np.empty((total, d))
    L = np.zeros((max(total, 1), max(total, 1)))
    v = np.empty(max(total, 1))
    points = np.empty((n_new, d))
    for j in range(q0):
        for e in range(d):
            X[j, e] = cond[j, e]
    if gram_cholesky(cond, width, ell, inv_vol, L) < q0:
        return points, 0, SINGULAR
    rejections = 0
    z = np.empty(d)
    q = q0
    while q < total:
        rej, accepted = palm_draw_one(X, q, L, lower, width, ell, inv_vol, m, rng, cap, z, v)
        rejections += rej
        if not accepted:
            return points[: q - q0].copy(), rejections, CAP_EXCEEDED
        for e in range(d):
            X[q, e] = z[e]
        if cholesky_append(X, q, L, width, ell, inv_vol, v):
            for e in range(d):
                points[q - q0, e] = z[e]
            q += 1
        else:
            rejections += 1
    return points, rejections, OK


# ---------------------------------------------------------------------------
# Small dense linear algebra and Gaussian / inverse-Wishart helpers
# ---------------------------------------------------------------------------


@jit
def cholesky_small(A, out):
    """Lower Cholesky factor of a small SPD matrix; False if not SPD."""
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = 0.0
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= out[j, k] * out[j, k]
        if not s > 0.0:
            return False
        out[j, j] = math.sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= out[i, k] * out[j, k]
            out[i, j] = s / out[j, j]
    return True


@jit
def half_logdet_chol(Lc):
    s = 0.0
    for i in range(Lc.shape[0]):
        s += math.log(Lc[i, i])
    return s


@jit
def mvn_logpdf_chol(y, mean, Lc, half_logdet):
    d = y.shape[0]
    ss = 0.0
    w = np.empty(d)
    for i in range(d):
        acc = y[i] - mean[i]
        for k in range(i):
            acc -= Lc[i, k] * w[k]
        w[i] = acc / Lc[i, i]
        ss += w[i] * w[i]
    return -0.5 * ss - half_logdet - 0.5 * d * LOG_2PI


@jit
def inverse_wishart_draw(nu, psi_chol, rng, out):
    """Draw from InvWi(nu, Psi) given the lower Cholesky factor of Psi.

    Bartlett: A A^T ~ Wi(nu, I), so U (A A^T)^{-1} U^T ~ InvWi(nu, U U^T).
    """
    d = psi_chol.shape[0]
    A = np.zeros((d, d))
    for i in range(d):
        A[i, i] = math.sqrt(2.0 * rng.standard_gamma(0.5 * (nu - i)))
    for i in range(d):
        for j in range(i):
            A[i, j] = rng.standard_normal()
    # Ainv: inverse of the lower-triangular A
    Ainv = np.zeros((d, d))
    for j in range(d):
        Ainv[j, j] = 1.0 / A[j, j]
        for i in range(j + 1, d):
            acc = 0.0
            for k in range(j, i):
                acc -= A[i, k] * Ainv[k, j]
            Ainv[i, j] = acc / A[i, i]
    # B = U Ainv^T, Sigma = B B^T
    B = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += psi_chol[i, k] * Ainv[j, k]
            B[i, j] = acc
    for i in range(d):
        for j in range(i + 1):
            acc = 0.0
            for k in range(d):
                acc += B[i, k] * B[j, k]
            out[i, j] = acc
            out[j, i] = acc
