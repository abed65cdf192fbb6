"""Pure numpy implementations of the fitting kernels.

Used when the compiled extension is unavailable or when
``GREEDYBN_BACKEND=python`` is set. Results agree with the compiled kernels
to rounding, not bitwise.
"""

import numpy as np


def config_codes(disc, pidx, nlev):
    n = disc.shape[0]
    code = np.zeros(n, dtype=np.int64)
    for k, c in enumerate(pidx):
        code *= int(nlev[k])
        code += disc[:, c]
    return code


def cpt_counts(disc, child, pidx, nlev, nchild):
    q = int(np.prod(nlev)) if len(nlev) else 1
    code = config_codes(disc, pidx, nlev) * nchild + disc[:, child]
    return np.bincount(code, minlength=q * nchild).reshape(q, nchild).astype(np.int64)


def cpt_logprob_sum(disc, child, pidx, nlev, logp):
    code = config_codes(disc, pidx, nlev)
    return float(logp[code, disc[:, child]].sum())


def _group_index(codes, n):
    if codes is None:
        return np.zeros(n, dtype=np.int64), np.ones(n, dtype=bool)
    keep = codes >= 0
    return codes, keep


def _design(cont, xs, rows):
    return [cont[rows, c] for c in xs]


def moments_fit(cont, y, xs, codes, ngroups, sing_tol):
    xs = list(xs)
    j = len(xs)
    if j > 2:
        raise ValueError("closed form handles at most two regressors")
    n = cont.shape[0]
    counts = np.zeros(ngroups, dtype=np.int64)
    coef = np.full((ngroups, j + 1), np.nan)
    ssr = np.full(ngroups, np.nan)
    singular = np.zeros(ngroups, dtype=np.uint8)
    if n == 0 or ngroups == 0:
        return counts, coef, ssr, singular
    g, keep = _group_index(codes, n)
    g = g[keep]
    cols = [cont[keep, y]] + _design(cont, xs, keep)
    counts = np.bincount(g, minlength=ngroups).astype(np.int64)
    seen = counts > 0
    safe = np.where(seen, counts, 1).astype(float)
    means = [np.bincount(g, weights=c, minlength=ngroups) / safe for c in cols]
    centred = [c - m[g] for c, m in zip(cols, means)]

    def cov(a, b):
        return np.bincount(g, weights=centred[a] * centred[b], minlength=ngroups) / safe

    if j == 0:
        coef[seen, 0] = means[0][seen]
    elif j == 1:
        c01, c11 = cov(0, 1), cov(1, 1)
        bad = c11 <= sing_tol * (c11 + means[1] ** 2)
        ok = seen & ~bad
        singular[seen & bad] = 1
        beta = c01[ok] / c11[ok]
        coef[ok, 1] = beta
        coef[ok, 0] = means[0][ok] - beta * means[1][ok]
    else:
        c01, c02 = cov(0, 1), cov(0, 2)
        c11, c12, c22 = cov(1, 1), cov(1, 2), cov(2, 2)
        d = c11 * c22 - c12 * c12
        bad = np.abs(d) <= sing_tol * c11 * c22
        ok = seen & ~bad
        singular[seen & bad] = 1
        b1 = (c22[ok] * c01[ok] - c12[ok] * c02[ok]) / d[ok]
        b2 = (c11[ok] * c02[ok] - c12[ok] * c01[ok]) / d[ok]
        coef[ok, 1] = b1
        coef[ok, 2] = b2
        coef[ok, 0] = means[0][ok] - b1 * means[1][ok] - b2 * means[2][ok]

    fitted = coef[g, 0].copy()
    for k in range(j):
        fitted += coef[g, k + 1] * cols[k + 1]
    good = seen & (singular == 0)
    rowgood = good[g]
    resid = np.where(rowgood, cols[0] - fitted, 0.0)
    s = np.bincount(g, weights=resid * resid, minlength=ngroups)
    ssr[good] = s[good]
    return counts, coef, ssr, singular


def _householder_lstsq(A, b, rank_tol):
    m, p = A.shape
    out = np.zeros(p)
    kept = []
    row = 0
    for c in range(p):
        if row >= m:
            break
        nrm0 = np.linalg.norm(A[:, c])
        x = A[row:, c]
        nrm = np.linalg.norm(x)
        if nrm0 == 0.0 or nrm <= rank_tol * nrm0:
            continue
        alpha = -np.copysign(nrm, x[0])
        v = x.copy()
        v[0] -= alpha
        vn2 = 2.0 * nrm * (nrm + abs(x[0]))
        if c + 1 < p:
            tail = A[row:, c + 1:]
            tail -= np.outer(v, (2.0 / vn2) * (v @ tail))
        b[row:] -= (2.0 * (v @ b[row:]) / vn2) * v
        A[row, c] = alpha
        kept.append(c)
        row += 1
    z = np.zeros(row)
    for k in range(row - 1, -1, -1):
        s = b[k] - sum(A[k, kept[t]] * z[t] for t in range(k + 1, row))
        z[k] = s / A[k, kept[k]]
    out[kept] = z
    return out


def qr_fit(cont, y, xs, codes, ngroups, rank_tol):
    xs = list(xs)
    j = len(xs)
    p = j + 1
    n = cont.shape[0]
    counts = np.zeros(ngroups, dtype=np.int64)
    coef = np.full((ngroups, p), np.nan)
    ssr = np.full(ngroups, np.nan)
    if n == 0 or ngroups == 0:
        return counts, coef, ssr
    g, keep = _group_index(codes, n)
    rows = np.flatnonzero(keep)
    gk = g[rows]
    counts = np.bincount(gk, minlength=ngroups).astype(np.int64)
    order = rows[np.argsort(gk, kind="stable")]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    for grp in range(ngroups):
        m = counts[grp]
        if m == 0:
            continue
        idx = order[offsets[grp]:offsets[grp + 1]]
        # shift by the group's first row; slopes are unchanged
        shift = cont[idx[0], [y] + xs]
        A = np.empty((m, p), order="F")
        A[:, 0] = 1.0
        for k, c in enumerate(xs):
            A[:, k + 1] = cont[idx, c] - shift[k + 1]
        sol = _householder_lstsq(A, cont[idx, y] - shift[0], rank_tol)
        sol[0] += shift[0] - sol[1:] @ shift[1:]
        coef[grp] = sol
    c2, s2 = resid_ssr(cont, y, xs, codes, coef)
    ssr[counts > 0] = s2[counts > 0]
    return counts, coef, ssr


def resid_ssr(cont, y, xs, codes, coef):
    xs = list(xs)
    ngroups = coef.shape[0]
    n = cont.shape[0]
    if n == 0 or ngroups == 0:
        return np.zeros(ngroups, dtype=np.int64), np.zeros(ngroups)
    g, keep = _group_index(codes, n)
    g = g[keep]
    e = cont[keep, y] - coef[g, 0]
    for k, c in enumerate(xs):
        e = e - coef[g, k + 1] * cont[keep, c]
    counts = np.bincount(g, minlength=ngroups).astype(np.int64)
    return counts, np.bincount(g, weights=e * e, minlength=ngroups)
