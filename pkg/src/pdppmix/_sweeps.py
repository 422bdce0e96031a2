"""Compiled inner loops of the MCMC sweeps.

State arrays are mutated in place.  Labels are 0-based; ``counts[h]`` is the
number of observations allocated to component ``h``.
"""

import math

import numpy as np

from . import _numeric as nm
from ._jit import jit

NEG_INF = -np.inf


def _allocation_logweights_numpy(Y, loc, chol, hld, log_s):
    from scipy.linalg import solve_triangular

    n, d = Y.shape
    out = np.empty((n, loc.shape[0]))
    for h in range(loc.shape[0]):
        Z = solve_triangular(chol[h], (Y - loc[h]).T, lower=True)
        out[:, h] = log_s[h] - 0.5 * np.sum(Z * Z, axis=0) - hld[h] - 0.5 * d * nm.LOG_2PI
    return out


@jit(fallback=_allocation_logweights_numpy)
def allocation_logweights(Y, loc, chol, hld, log_s):
    """``log s_h + log N(y_i | loc_h, Sigma_h)`` for every pair ``(i, h)``."""
    n = Y.shape[0]
    m = loc.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for h in range(m):
            out[i, h] = log_s[h] + nm.mvn_logpdf_chol(Y[i], loc[h], chol[h], hld[h])
    return out


@jit
def categorical_from_logs(logw, count, u):
    """Index drawn from ``softmax(logw[:count])`` using the uniform ``u``."""
    top = NEG_INF
    for j in range(count):
        if logw[j] > top:
            top = logw[j]
    total = 0.0
    for j in range(count):
        total += math.exp(logw[j] - top)
    target = u * total
    acc = 0.0
    for j in range(count):
        acc += math.exp(logw[j] - top)
        if target < acc:
            return j
    # round-off: fall back to the last index with positive weight
    for j in range(count - 1, -1, -1):
        if logw[j] > NEG_INF:
            return j
    return count - 1


# ---------------------------------------------------------------------------
# Metropolis-Hastings move of one atom
# ---------------------------------------------------------------------------


@jit
def _cluster_loglik(Yh, x, Lc, hl):
    s = 0.0
    for i in range(Yh.shape[0]):
        s += nm.mvn_logpdf_chol(Yh[i], x, Lc, hl)
    return s


@jit
def _inside(x, lower, width):
    for e in range(x.shape[0]):
        if x[e] < lower[e] or x[e] > lower[e] + width[e]:
            return False
    return True


@jit
def _others_factor(atoms, h, width, ell, inv_vol):
    """Atoms other than ``h`` and the Cholesky factor of their Gram matrix."""
    K, d = atoms.shape
    X = np.empty((max(K - 1, 1), d))
    r = 0
    for j in range(K):
        if j != h:
            for e in range(d):
                X[r, e] = atoms[j, e]
            r += 1
    L = np.zeros((max(K - 1, 1), max(K - 1, 1)))
    done = nm.gram_cholesky(X[: K - 1], width, ell, inv_vol, L)
    return X, L, done == K - 1


@jit
def atom_log_ratio(cand, x, X, q, L, Yh, Lc, hl, lower, width, ell, inv_vol, m,
                   palm_card, w_local, var_local, hastings):
    """Log acceptance ratio for moving atom ``x`` to ``cand``.

    Target: cluster likelihood times the Gram determinant of all atoms, whose
    ratio is ``K^!(cand, cand) / K^!(x, x)`` with ``K^!`` reduced at the other
    atoms ``X[:q]``.  With ``hastings`` the proposal-density ratio of the
    local-Gaussian / Palm mixture is included.
    """
    if not _inside(cand, lower, width):
        return NEG_INF
    d = x.shape[0]
    diag = m * inv_vol
    v = np.empty(max(q, 1))
    r_cand = diag - nm.kernel_forward_solve(cand, X, q, L, width, ell, inv_vol, v)
    if r_cand <= nm.SINGULAR_RTOL * diag:
        return NEG_INF
    r_cur = diag - nm.kernel_forward_solve(x, X, q, L, width, ell, inv_vol, v)
    out = _cluster_loglik(Yh, cand, Lc, hl) - _cluster_loglik(Yh, x, Lc, hl)
    out += math.log(r_cand) - math.log(max(r_cur, 1e-300))
    if hastings:
        ss = 0.0
        for e in range(d):
            ss += (cand[e] - x[e]) ** 2
        g = w_local * math.exp(-0.5 * ss / var_local - 0.5 * d * math.log(2.0 * math.pi * var_local))
        fwd = g + (1.0 - w_local) * r_cand / palm_card
        rev = g + (1.0 - w_local) * r_cur / palm_card
        out += math.log(rev) - math.log(fwd)
    return out


@jit
def mh_atom_move(atoms, h, Yh, Lc, hl, lower, width, ell, inv_vol, m,
                 w_local, var_local, hastings, rng, cap):
    """One MH update of ``atoms[h]`` against the other rows of ``atoms``.

    Returns ``(accepted, status)``; ``atoms[h]`` is overwritten on acceptance.
    """
    K, d = atoms.shape
    X, L, ok = _others_factor(atoms, h, width, ell, inv_vol)
    if not ok:
        return False, nm.SINGULAR
    q = K - 1
    palm_card = m - q
    x = atoms[h].copy()
    cand = np.empty(d)
    if rng.random() < w_local:
        sd = math.sqrt(var_local)
        for e in range(d):
            cand[e] = x[e] + sd * rng.standard_normal()
    else:
        v = np.empty(max(q, 1))
        rej, accepted = nm.palm_draw_one(X, q, L, lower, width, ell, inv_vol, m, rng, cap, cand, v)
        if not accepted:
            return False, nm.CAP_EXCEEDED
    lr = atom_log_ratio(cand, x, X, q, L, Yh, Lc, hl, lower, width, ell, inv_vol, m,
                        palm_card, w_local, var_local, hastings)
    if lr == NEG_INF:
        return False, nm.OK
    if math.log(rng.random()) < lr:
        for e in range(d):
            atoms[h, e] = cand[e]
        return True, nm.OK
    return False, nm.OK


# ---------------------------------------------------------------------------
# Marginal scans
# ---------------------------------------------------------------------------


@jit
def _refactor_active(counts, loc, width, ell, inv_vol, Xc, Lc, labels):
    """Factor the Gram of the occupied atoms; returns their number (or -1 if singular)."""
    d = loc.shape[1]
    q = 0
    for h in range(counts.shape[0]):
        if counts[h] > 0:
            labels[q] = h
            for e in range(d):
                Xc[q, e] = loc[h, e]
            q += 1
    if nm.gram_cholesky(Xc[:q], width, ell, inv_vol, Lc) < q:
        return -1
    return q


@jit
def _same_active(counts, cached):
    for h in range(counts.shape[0]):
        if (counts[h] > 0) != cached[h]:
            return False
    return True


@jit
def _set_cached(counts, cached):
    for h in range(counts.shape[0]):
        cached[h] = counts[h] > 0


@jit
def _first_free(counts, preferred):
    if counts[preferred] == 0:
        return preferred
    for h in range(counts.shape[0]):
        if counts[h] == 0:
            return h
    return -1


@jit
def neal8_scan(Y, c, counts, loc, cov, chol, hld, a_s, T, tau, omega_chol,
               lower, width, ell, inv_vol, rng, cap):
    """Reallocate every observation with ``T`` auxiliary components.

    Auxiliary locations are i.i.d. from ``K^!(t, t)`` reduced at the other
    occupied atoms, auxiliary covariances from the prior, each with weight
    ``a_s (m - q) / T``.  When observation ``i`` is alone in its cluster, its
    current pair is the first auxiliary.
    Returns a status code.
    """
    n, d = Y.shape
    m = counts.shape[0]
    Xc = np.empty((m, d))
    Lc = np.zeros((m, m))
    labels = np.empty(m, np.int64)
    cached = np.zeros(m, np.bool_)
    q = -2
    aux_loc = np.empty((T, d))
    aux_cov = np.empty((T, d, d))
    aux_chol = np.empty((T, d, d))
    aux_hld = np.empty(T)
    logw = np.empty(m + T)
    v = np.empty(m)
    z = np.empty(d)
    for i in range(n):
        h = c[i]
        counts[h] -= 1
        singleton = counts[h] == 0
        if q == -2 or not _same_active(counts, cached):
            q = _refactor_active(counts, loc, width, ell, inv_vol, Xc, Lc, labels)
            if q < 0:
                return nm.SINGULAR
            _set_cached(counts, cached)
        n_aux = 0
        if singleton:
            for e in range(d):
                aux_loc[0, e] = loc[h, e]
                for f in range(d):
                    aux_cov[0, e, f] = cov[h, e, f]
                    aux_chol[0, e, f] = chol[h, e, f]
            aux_hld[0] = hld[h]
            n_aux = 1
        if q < m:
            while n_aux < T:
                rej, ok = nm.palm_draw_one(Xc, q, Lc, lower, width, ell, inv_vol, m, rng, cap, z, v)
                if not ok:
                    return nm.CAP_EXCEEDED
                for e in range(d):
                    aux_loc[n_aux, e] = z[e]
                nm.inverse_wishart_draw(tau, omega_chol, rng, aux_cov[n_aux])
                nm.cholesky_small(aux_cov[n_aux], aux_chol[n_aux])
                aux_hld[n_aux] = nm.half_logdet_chol(aux_chol[n_aux])
                n_aux += 1
        for j in range(q):
            lab = labels[j]
            logw[j] = math.log(counts[lab] + a_s) + nm.mvn_logpdf_chol(Y[i], loc[lab], chol[lab], hld[lab])
        # the m - q free atoms carry total prior mass a_s (m - q), split over T auxiliaries
        log_aux = math.log(a_s * (m - q) / T) if q < m else 0.0
        for t in range(n_aux):
            logw[q + t] = log_aux + nm.mvn_logpdf_chol(Y[i], aux_loc[t], aux_chol[t], aux_hld[t])
        pick = categorical_from_logs(logw, q + n_aux, rng.random())
        if pick < q:
            lab = labels[pick]
        else:
            t = pick - q
            lab = _first_free(counts, h)
            for e in range(d):
                loc[lab, e] = aux_loc[t, e]
                for f in range(d):
                    cov[lab, e, f] = aux_cov[t, e, f]
                    chol[lab, e, f] = aux_chol[t, e, f]
            hld[lab] = aux_hld[t]
        c[i] = lab
        counts[lab] += 1
    return nm.OK


@jit
def _omega_quad(y, z, omega_chol, w):
    d = y.shape[0]
    ss = 0.0
    for a in range(d):
        acc = y[a] - z[a]
        for b in range(a):
            acc -= omega_chol[a, b] * w[b]
        w[a] = acc / omega_chol[a, a]
        ss += w[a] * w[a]
    return ss


@jit
def _mc_integral(y, Zmc, P, q, m, vol, log_tconst, tpow, omega_chol):
    """``vol * mean_j P_j * t(y - Z_j)``: Monte Carlo value of the new-pair integral."""
    if q >= m:
        return 0.0
    d = y.shape[0]
    total = 0.0
    w = np.empty(d)
    for j in range(Zmc.shape[0]):
        pj = P[j]
        if pj <= 0.0:
            continue
        ss = _omega_quad(y, Zmc[j], omega_chol, w)
        total += pj * math.exp(log_tconst - tpow * math.log1p(ss))
    return vol * total / Zmc.shape[0]


@jit
def _uniform_points(lower, width, count, rng):
    d = lower.shape[0]
    out = np.empty((count, d))
    for j in range(count):
        for e in range(d):
            out[j, e] = lower[e] + width[e] * rng.random()
    return out


@jit
def neal2_scan(Y, c, counts, loc, cov, chol, hld, a_s, tau, omega, omega_chol, Zmc,
               lower, width, ell, inv_vol, rng, cap):
    """Reallocate every observation using the Monte Carlo new-pair integral.

    ``Zmc`` are uniform points on the domain shared by the whole scan; the
    Palm intensities at them are recomputed whenever the set of occupied
    atoms changes.  A new pair is drawn exactly: its location from
    ``K^!(theta, theta) t(y_i | theta)``, the t density being the marginal of
    ``N(y_i | theta, Delta)`` under the covariance prior, then its covariance
    from the conjugate posterior given ``(theta, y_i)``.  Returns a status code.
    """
    n, d = Y.shape
    m = counts.shape[0]
    vol = 1.0 / inv_vol
    log_tconst = (math.lgamma(0.5 * (1.0 + tau)) - math.lgamma(0.5 * (1.0 + tau - d))
                  - 0.5 * d * math.log(math.pi) - nm.half_logdet_chol(omega_chol))
    tpow = 0.5 * (1.0 + tau)
    Xc = np.empty((m, d))
    Lc = np.zeros((m, m))
    labels = np.empty(m, np.int64)
    cached = np.zeros(m, np.bool_)
    q = -2
    P = np.empty(Zmc.shape[0])
    logw = np.empty(m + 1)
    new_cov = np.empty((d, d))
    new_chol = np.empty((d, d))
    post = np.empty((d, d))
    post_chol = np.empty((d, d))
    w = np.empty(d)
    # largest eigenvalue of Omega: r^T Omega^{-1} r >= |r|^2 / omega_lmax
    omega_lmax = np.linalg.eigvalsh(omega)[-1]
    z = np.empty(d)
    v = np.empty(m)
    diag = m * inv_vol
    for i in range(n):
        h = c[i]
        counts[h] -= 1
        if q == -2 or not _same_active(counts, cached):
            q = _refactor_active(counts, loc, width, ell, inv_vol, Xc, Lc, labels)
            if q < 0:
                return nm.SINGULAR
            _set_cached(counts, cached)
            P[:] = nm.palm_diagonal(Zmc, Xc, q, Lc, width, ell, inv_vol)
        for j in range(q):
            lab = labels[j]
            logw[j] = math.log(counts[lab] + a_s) + nm.mvn_logpdf_chol(Y[i], loc[lab], chol[lab], hld[lab])
        n_new = 0
        if q < m:
            integral = _mc_integral(Y[i], Zmc, P, q, m, vol, log_tconst, tpow, omega_chol)
            if integral <= 0.0:
                Zx = _uniform_points(lower, width, 4 * Zmc.shape[0], rng)
                Px = nm.palm_diagonal(Zx, Xc, q, Lc, width, ell, inv_vol)
                integral = _mc_integral(Y[i], Zx, Px, q, m, vol, log_tconst, tpow, omega_chol)
                if integral <= 0.0:
                    return nm.SINGULAR
            logw[q] = math.log(a_s) + math.log(integral)
            n_new = 1
        pick = categorical_from_logs(logw, q + n_new, rng.random())
        if pick < q:
            lab = labels[pick]
        else:
            # theta ~ K^!(theta, theta) t(y | theta) by rejection under the bound
            # t_max = t at the smallest r^T Omega^{-1} r possible over the box,
            # then Delta | theta, y from its conjugate inverse-Wishart posterior
            dist2 = 0.0
            for e in range(d):
                gap = max(lower[e] - Y[i, e], Y[i, e] - lower[e] - width[e], 0.0)
                dist2 += gap * gap
            log_tmax = -tpow * math.log1p(dist2 / omega_lmax)
            tries = 0
            while True:
                for e in range(d):
                    z[e] = lower[e] + width[e] * rng.random()
                kz = diag - nm.kernel_forward_solve(z, Xc, q, Lc, width, ell, inv_vol, v)
                ss = _omega_quad(Y[i], z, omega_chol, w)
                if rng.random() < (kz / diag) * math.exp(-tpow * math.log1p(ss) - log_tmax):
                    break
                tries += 1
                if tries >= cap:
                    return nm.CAP_EXCEEDED
            for a in range(d):
                for b in range(d):
                    post[a, b] = omega[a, b] + (Y[i, a] - z[a]) * (Y[i, b] - z[b])
            nm.cholesky_small(post, post_chol)
            nm.inverse_wishart_draw(tau + 1.0, post_chol, rng, new_cov)
            nm.cholesky_small(new_cov, new_chol)
            nhl = nm.half_logdet_chol(new_chol)
            lab = _first_free(counts, h)
            for e in range(d):
                loc[lab, e] = z[e]
                for f in range(d):
                    cov[lab, e, f] = new_cov[e, f]
                    chol[lab, e, f] = new_chol[e, f]
            hld[lab] = nhl
        c[i] = lab
        counts[lab] += 1
    return nm.OK
