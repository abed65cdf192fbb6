# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-node fitting kernels.

Every kernel reads columns in place from the column-major data matrices held
by :class:`greedybn.dataset.Dataset`. Rows whose group code is negative are
skipped, which lets callers fit an arbitrary subset of groups without copying.
"""

import numpy as np

from libc.math cimport sqrt, fabs, copysign, NAN, isnan
from libc.stdlib cimport malloc, calloc, free
from libc.string cimport memcpy

cdef enum:
    BLOCK = 128   # rows per partial sum in the moment passes


cdef inline long long _mixed_code(const int[::1, :] disc, Py_ssize_t r,
                                  const Py_ssize_t[::1] pidx,
                                  const long long[::1] nlev) noexcept nogil:
    cdef long long code = 0
    cdef Py_ssize_t k
    for k in range(pidx.shape[0]):
        code = code * nlev[k] + disc[r, pidx[k]]
    return code


def config_codes(const int[::1, :] disc, const Py_ssize_t[::1] pidx,
                 const long long[::1] nlev):
    cdef Py_ssize_t n = disc.shape[0], r
    out = np.zeros(n, dtype=np.int64)
    cdef long long[::1] o = out
    if pidx.shape[0] == 0:
        return out
    with nogil:
        for r in range(n):
            o[r] = _mixed_code(disc, r, pidx, nlev)
    return out


def cpt_counts(const int[::1, :] disc, Py_ssize_t child,
               const Py_ssize_t[::1] pidx, const long long[::1] nlev,
               Py_ssize_t nchild):
    cdef Py_ssize_t n = disc.shape[0], r
    cdef long long q = 1
    cdef Py_ssize_t k
    for k in range(nlev.shape[0]):
        q *= nlev[k]
    out = np.zeros((q, nchild), dtype=np.int64)
    cdef long long[:, ::1] c = out
    with nogil:
        for r in range(n):
            c[_mixed_code(disc, r, pidx, nlev), disc[r, child]] += 1
    return out


def cpt_logprob_sum(const int[::1, :] disc, Py_ssize_t child,
                    const Py_ssize_t[::1] pidx, const long long[::1] nlev,
                    const double[:, ::1] logp):
    cdef Py_ssize_t n = disc.shape[0], r
    cdef double total = 0.0
    with nogil:
        for r in range(n):
            total += logp[_mixed_code(disc, r, pidx, nlev), disc[r, child]]
    return total


cdef inline const double* _col(const double[::1, :] cont, Py_ssize_t c) noexcept nogil:
    return &cont[0, c]


def moments_fit(const double[::1, :] cont, Py_ssize_t y,
                const Py_ssize_t[::1] xs, codes, Py_ssize_t ngroups,
                double sing_tol):
    """Closed-form regression of column ``y`` on at most two columns ``xs``.

    Returns ``(counts, coef, ssr, singular)``; ``coef[g]`` is
    ``(intercept, beta...)``. Groups flagged singular carry NaN coefficients
    and SSR and must be refitted by the caller.
    """
    cdef Py_ssize_t n = cont.shape[0], j = xs.shape[0], r, g, t
    if j > 2:
        raise ValueError("closed form handles at most two regressors")
    cdef bint grouped = codes is not None
    cdef const long long[::1] cv
    if grouped:
        cv = codes
    counts = np.zeros(ngroups, dtype=np.int64)
    coef = np.full((ngroups, j + 1), np.nan)
    ssr = np.full(ngroups, np.nan)
    singular = np.zeros(ngroups, dtype=np.uint8)
    if n == 0 or ngroups == 0:
        return counts, coef, ssr, singular

    cdef long long[::1] cnt = counts
    cdef double[:, ::1] cf = coef
    cdef double[::1] ss = ssr
    cdef unsigned char[::1] sg = singular
    # per group: shift[3], sums[3], cross[6] (upper triangle of 3x3)
    cdef double* acc = <double*> calloc(ngroups * 12, sizeof(double))
    if acc == NULL:
        raise MemoryError()
    cdef double* a
    cdef const double* py = _col(cont, y)
    cdef const double* p1 = _col(cont, xs[0]) if j > 0 else NULL
    cdef const double* p2 = _col(cont, xs[1]) if j > 1 else NULL
    cdef double u, v, w, m, my, m1, m2, c00, c01, c02, c11, c12, c22
    cdef double d, b1, b2, mu, e

    cdef double s3 = 0.0, s4 = 0.0, s5 = 0.0, s6 = 0.0, s7 = 0.0, s8 = 0.0
    cdef double s9 = 0.0, s10 = 0.0, s11 = 0.0, sse = 0.0
    cdef double t3, t4, t5, t6, t7, t8, t9, t10, t11

    try:
        with nogil:
            if not grouped:
                # single group: keep the running sums in registers
                a = acc
                a[0] = py[0]
                if j > 0:
                    a[1] = p1[0]
                if j > 1:
                    a[2] = p2[0]
                cnt[0] = n
                # two-level (blocked) summation keeps the rounding error of
                # the moment sums near sqrt(BLOCK) ulps instead of sqrt(n)
                r = 0
                while r < n:
                    t = r + BLOCK if r + BLOCK < n else n
                    if j == 0:
                        t3 = t6 = 0.0
                        while r < t:
                            u = py[r] - a[0]
                            t3 += u
                            t6 += u * u
                            r += 1
                        s3 += t3
                        s6 += t6
                    elif j == 1:
                        t3 = t4 = t6 = t7 = t9 = 0.0
                        while r < t:
                            u = py[r] - a[0]
                            v = p1[r] - a[1]
                            t3 += u
                            t4 += v
                            t6 += u * u
                            t7 += u * v
                            t9 += v * v
                            r += 1
                        s3 += t3
                        s4 += t4
                        s6 += t6
                        s7 += t7
                        s9 += t9
                    else:
                        t3 = t4 = t5 = t6 = t7 = t8 = t9 = t10 = t11 = 0.0
                        while r < t:
                            u = py[r] - a[0]
                            v = p1[r] - a[1]
                            w = p2[r] - a[2]
                            t3 += u
                            t4 += v
                            t5 += w
                            t6 += u * u
                            t7 += u * v
                            t8 += u * w
                            t9 += v * v
                            t10 += v * w
                            t11 += w * w
                            r += 1
                        s3 += t3
                        s4 += t4
                        s5 += t5
                        s6 += t6
                        s7 += t7
                        s8 += t8
                        s9 += t9
                        s10 += t10
                        s11 += t11
                a[3] = s3
                a[4] = s4
                a[5] = s5
                a[6] = s6
                a[7] = s7
                a[8] = s8
                a[9] = s9
                a[10] = s10
                a[11] = s11
            for r in range(n if grouped else 0):
                g = cv[r]
                if g < 0:
                    continue
                a = acc + 12 * g
                if cnt[g] == 0:
                    a[0] = py[r]
                    if j > 0:
                        a[1] = p1[r]
                    if j > 1:
                        a[2] = p2[r]
                cnt[g] += 1
                u = py[r] - a[0]
                a[3] += u
                a[6] += u * u
                if j > 0:
                    v = p1[r] - a[1]
                    a[4] += v
                    a[7] += u * v
                    a[9] += v * v
                    if j > 1:
                        w = p2[r] - a[2]
                        a[5] += w
                        a[8] += u * w
                        a[10] += v * w
                        a[11] += w * w

            for g in range(ngroups):
                if cnt[g] == 0:
                    continue
                a = acc + 12 * g
                m = <double> cnt[g]
                my = a[0] + a[3] / m
                if j == 0:
                    cf[g, 0] = my
                    continue
                m1 = a[1] + a[4] / m
                c01 = (a[7] - a[3] * a[4] / m) / m
                c11 = (a[9] - a[4] * a[4] / m) / m
                if j == 1:
                    if c11 <= sing_tol * (c11 + m1 * m1):
                        sg[g] = 1
                        continue
                    b1 = c01 / c11
                    cf[g, 0] = my - b1 * m1
                    cf[g, 1] = b1
                    continue
                m2 = a[2] + a[5] / m
                c02 = (a[8] - a[3] * a[5] / m) / m
                c12 = (a[10] - a[4] * a[5] / m) / m
                c22 = (a[11] - a[5] * a[5] / m) / m
                d = c11 * c22 - c12 * c12
                if fabs(d) <= sing_tol * c11 * c22:
                    sg[g] = 1
                    continue
                b1 = (c22 * c01 - c12 * c02) / d
                b2 = (c11 * c02 - c12 * c01) / d
                cf[g, 0] = my - b1 * m1 - b2 * m2
                cf[g, 1] = b1
                cf[g, 2] = b2

            for g in range(ngroups):
                if cnt[g] > 0 and sg[g] == 0:
                    ss[g] = 0.0
            if not grouped:
                if sg[0] == 0:
                    mu = cf[0, 0]
                    b1 = cf[0, 1] if j > 0 else 0.0
                    b2 = cf[0, 2] if j > 1 else 0.0
                    if j == 0:
                        for r in range(n):
                            e = py[r] - mu
                            sse += e * e
                    elif j == 1:
                        for r in range(n):
                            e = py[r] - mu - b1 * p1[r]
                            sse += e * e
                    else:
                        for r in range(n):
                            e = py[r] - mu - b1 * p1[r] - b2 * p2[r]
                            sse += e * e
                    ss[0] = sse
            else:
                for r in range(n):
                    g = cv[r]
                    if g < 0 or sg[g]:
                        continue
                    e = py[r] - cf[g, 0]
                    if j > 0:
                        e = e - cf[g, 1] * p1[r]
                        if j > 1:
                            e = e - cf[g, 2] * p2[r]
                    ss[g] += e * e
    finally:
        free(acc)
    return counts, coef, ssr, singular


cdef void _householder_lstsq(double* A, Py_ssize_t m, Py_ssize_t p, double* b,
                             double* out, double rank_tol) noexcept nogil:
    """Least squares on a column-major m x p buffer; dependent columns get 0.

    The Householder vector of each reflector is kept in the lower part of its
    own column, and each reflector is applied to all trailing columns and to
    ``b`` with one fused pass for the dot products and one for the update.
    """
    cdef Py_ssize_t c, c2, i, k, row = 0
    cdef double nrm, nrm0, alpha, vn2, vr, vi, s, db
    cdef Py_ssize_t* kept = <Py_ssize_t*> malloc(p * sizeof(Py_ssize_t))
    cdef double* z = <double*> malloc(p * sizeof(double))
    cdef double* dots = <double*> malloc(p * sizeof(double))
    cdef double* norms0 = <double*> malloc(p * sizeof(double))
    cdef double* col
    cdef double* col2
    for c in range(p):
        out[c] = 0.0
        col = A + c * m
        s = 0.0
        for i in range(m):
            s += col[i] * col[i]
        norms0[c] = sqrt(s)
    for c in range(p):
        if row >= m:
            break
        col = A + c * m
        nrm0 = norms0[c]
        if row == 0:
            nrm = nrm0
        else:
            s = 0.0
            for i in range(row, m):
                s += col[i] * col[i]
            nrm = sqrt(s)
        if nrm0 == 0.0 or nrm <= rank_tol * nrm0:
            continue
        alpha = -copysign(nrm, col[row])
        vr = col[row] - alpha
        vn2 = 2.0 * nrm * (nrm + fabs(col[row]))
        col[row] = vr
        for c2 in range(c + 1, p):
            col2 = A + c2 * m
            s = 0.0
            for i in range(row, m):
                s += col[i] * col2[i]
            dots[c2] = 2.0 * s / vn2
        db = 0.0
        for i in range(row, m):
            db += col[i] * b[i]
        db = 2.0 * db / vn2
        for c2 in range(c + 1, p):
            col2 = A + c2 * m
            s = dots[c2]
            for i in range(row, m):
                col2[i] -= s * col[i]
        for i in range(row, m):
            b[i] -= db * col[i]
        col[row] = alpha
        kept[row] = c
        row += 1
    # back substitution on the kept columns
    for k in range(row - 1, -1, -1):
        s = b[k]
        for c2 in range(k + 1, row):
            s -= A[kept[c2] * m + k] * z[c2]
        z[k] = s / A[kept[k] * m + k]
    for k in range(row):
        out[kept[k]] = z[k]
    free(kept)
    free(z)
    free(dots)
    free(norms0)


def qr_fit(const double[::1, :] cont, Py_ssize_t y, const Py_ssize_t[::1] xs,
           codes, Py_ssize_t ngroups, double rank_tol):
    """Householder least squares of ``y`` on ``[1, xs]`` within each group.

    Rows are scattered, in one sequential pass, into contiguous per-group
    column-major blocks before factorisation. Each column is shifted by the
    group's first row on the way in: this leaves the slopes unchanged but
    keeps the regressors far from collinear with the intercept column when
    their means are large relative to their spread. Returns
    ``(counts, coef, ssr)``.
    """
    cdef Py_ssize_t n = cont.shape[0], j = xs.shape[0], p = j + 1
    cdef Py_ssize_t r, g, i, k, total
    cdef bint grouped = codes is not None
    cdef const long long[::1] cv
    if grouped:
        cv = codes
    counts = np.zeros(ngroups, dtype=np.int64)
    coef = np.full((ngroups, p), np.nan)
    ssr = np.full(ngroups, np.nan)
    if n == 0 or ngroups == 0:
        return counts, coef, ssr
    cdef long long[::1] cnt = counts
    cdef double[:, ::1] cf = coef
    cdef double[::1] ss = ssr
    cdef const double* py = _col(cont, y)
    cdef const double** px = <const double**> malloc((j + 1) * sizeof(double*))
    for k in range(j):
        px[k] = _col(cont, xs[k])

    if not grouped:
        cnt[0] = n
    else:
        for r in range(n):
            g = cv[r]
            if g >= 0:
                cnt[g] += 1
    offsets = np.zeros(ngroups + 1, dtype=np.int64)
    cdef long long[::1] off = offsets
    for g in range(ngroups):
        off[g + 1] = off[g] + cnt[g]
    total = off[ngroups]
    fill = offsets[:ngroups].copy()
    cdef long long[::1] fl = fill

    cdef double* A = <double*> malloc(total * p * sizeof(double) + 1)
    cdef double* b = <double*> malloc(total * sizeof(double) + 1)
    cdef double* sol = <double*> malloc(p * sizeof(double))
    cdef double* sh = <double*> malloc(ngroups * p * sizeof(double))
    cdef Py_ssize_t m, base
    cdef double* blk
    cdef double e, sse = 0.0
    try:
        with nogil:
            if not grouped:
                sh[0] = py[0]
                for i in range(n):
                    A[i] = 1.0
                    b[i] = py[i] - sh[0]
                for k in range(j):
                    sh[k + 1] = px[k][0]
                    blk = A + (k + 1) * n
                    for i in range(n):
                        blk[i] = px[k][i] - sh[k + 1]
            else:
                for r in range(n):
                    g = cv[r]
                    if g < 0:
                        continue
                    i = fl[g]
                    fl[g] += 1
                    if i == off[g]:
                        sh[g * p] = py[r]
                        for k in range(j):
                            sh[g * p + k + 1] = px[k][r]
                    m = cnt[g]
                    base = off[g] * p + (i - off[g])
                    A[base] = 1.0
                    for k in range(j):
                        A[base + (k + 1) * m] = px[k][r] - sh[g * p + k + 1]
                    b[i] = py[r] - sh[g * p]
            for g in range(ngroups):
                m = cnt[g]
                if m == 0:
                    continue
                _householder_lstsq(A + off[g] * p, m, p, b + off[g], sol, rank_tol)
                e = sol[0] + sh[g * p]
                for k in range(j):
                    e = e - sol[k + 1] * sh[g * p + k + 1]
                    cf[g, k + 1] = sol[k + 1]
                cf[g, 0] = e
                ss[g] = 0.0
            # fitted values and residuals on the original rows
            if not grouped:
                for r in range(n):
                    e = py[r] - cf[0, 0]
                    for k in range(j):
                        e = e - cf[0, k + 1] * px[k][r]
                    sse += e * e
                ss[0] = sse
            else:
                for r in range(n):
                    g = cv[r]
                    if g < 0:
                        continue
                    e = py[r] - cf[g, 0]
                    for k in range(j):
                        e = e - cf[g, k + 1] * px[k][r]
                    ss[g] += e * e
    finally:
        free(A)
        free(b)
        free(sol)
        free(sh)
        free(px)
    return counts, coef, ssr


def resid_ssr(const double[::1, :] cont, Py_ssize_t y, const Py_ssize_t[::1] xs,
              codes, const double[:, ::1] coef):
    """Per-group row counts and residual sums of squares under ``coef``."""
    cdef Py_ssize_t n = cont.shape[0], j = xs.shape[0], ngroups = coef.shape[0]
    cdef Py_ssize_t r, g, k
    cdef bint grouped = codes is not None
    cdef const long long[::1] cv
    if grouped:
        cv = codes
    counts = np.zeros(ngroups, dtype=np.int64)
    ssr = np.zeros(ngroups)
    if n == 0 or ngroups == 0:
        return counts, ssr
    cdef long long[::1] cnt = counts
    cdef double[::1] ss = ssr
    cdef const double* py = _col(cont, y)
    cdef const double* p1 = _col(cont, xs[0]) if j > 0 else NULL
    cdef const double* p2 = _col(cont, xs[1]) if j > 1 else NULL
    cdef const double** px = <const double**> malloc((j + 1) * sizeof(double*))
    for k in range(j):
        px[k] = _col(cont, xs[k])
    cdef double e, sse = 0.0, mu, b1, b2
    try:
        with nogil:
            if not grouped:
                mu = coef[0, 0]
                b1 = coef[0, 1] if j > 0 else 0.0
                b2 = coef[0, 2] if j > 1 else 0.0
                if j == 0:
                    for r in range(n):
                        e = py[r] - mu
                        sse += e * e
                elif j == 1:
                    for r in range(n):
                        e = py[r] - mu - b1 * p1[r]
                        sse += e * e
                elif j == 2:
                    for r in range(n):
                        e = py[r] - mu - b1 * p1[r] - b2 * p2[r]
                        sse += e * e
                else:
                    for r in range(n):
                        e = py[r] - mu
                        for k in range(j):
                            e = e - coef[0, k + 1] * px[k][r]
                        sse += e * e
                cnt[0] = n
                ss[0] = sse
            elif j <= 2:
                for r in range(n):
                    g = cv[r] if grouped else 0
                    if g < 0:
                        continue
                    e = py[r] - coef[g, 0]
                    if j > 0:
                        e = e - coef[g, 1] * p1[r]
                        if j > 1:
                            e = e - coef[g, 2] * p2[r]
                    cnt[g] += 1
                    ss[g] += e * e
            else:
                for r in range(n):
                    g = cv[r] if grouped else 0
                    if g < 0:
                        continue
                    e = py[r] - coef[g, 0]
                    for k in range(j):
                        e = e - coef[g, k + 1] * px[k][r]
                    cnt[g] += 1
                    ss[g] += e * e
    finally:
        free(px)
    return counts, ssr
