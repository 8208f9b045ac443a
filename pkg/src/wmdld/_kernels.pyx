# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-time-frequency-point kernels (see ``_pykernels`` for the reference)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef double EPS_REL = 1e-12
cdef double MIN_NORM = 1e-9
cdef double TIE_TOL = 1e-12


cdef inline double fmax0(double x) noexcept nogil:
    return x if x > 0 else 0.0


cdef void _jacobi_eigvals(double[:, ::1] a, double[::1] lam, int n) noexcept nogil:
    """Cyclic Jacobi on the symmetric matrix ``a`` (destroyed); eigenvalues into ``lam``."""
    cdef int sweep, p, r, j
    cdef double off, theta, t, c, s, tau, apq, app, aqq, arp, arq, scale
    for sweep in range(100):
        off = 0.0
        scale = 0.0
        for p in range(n):
            scale += a[p, p] * a[p, p]
            for r in range(p + 1, n):
                off += a[p, r] * a[p, r]
        if off <= 1e-32 * scale or off == 0.0:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apq = a[p, r]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[r, r]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                a[p, p] = app - t * apq
                a[r, r] = aqq + t * apq
                a[p, r] = 0.0
                a[r, p] = 0.0
                for j in range(n):
                    if j != p and j != r:
                        arp = a[j, p]
                        arq = a[j, r]
                        a[j, p] = arp - s * (arq + tau * arp)
                        a[p, j] = a[j, p]
                        a[j, r] = arq + s * (arp - tau * arq)
                        a[r, j] = a[j, r]
    for p in range(n):
        lam[p] = a[p, p]


cdef double _confidence(double[:, ::1] a, double[::1] lam, int n) noexcept nogil:
    cdef double top, rest, tr, det, disc, v
    cdef int p
    if n == 2:
        tr = a[0, 0] + a[1, 1]
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[0, 1]
        disc = sqrt(fmax0(0.25 * (a[0, 0] - a[1, 1]) * (a[0, 0] - a[1, 1]) + a[0, 1] * a[0, 1]))
        top = 0.5 * tr + disc
        # det / top avoids the cancellation in tr/2 - disc
        rest = det / top if top > 0 else 0.0
    else:
        _jacobi_eigvals(a, lam, n)
        top = lam[0]
        for p in range(1, n):
            if lam[p] > top:
                top = lam[p]
        rest = 0.0
        v = 0.0
        for p in range(n):
            v = lam[p] if lam[p] > 0 else 0.0
            rest += v
        rest = (rest - top) / (n - 1)
    if top <= 0:
        return 0.0
    if rest < 0:
        rest = 0.0
    if rest < EPS_REL * top:
        rest = EPS_REL * top
    return top / rest


def neighborhood_confidence(double[:, :, ::1] re, double[:, :, ::1] im, int q):
    cdef int K = re.shape[0], T = re.shape[1], F = re.shape[2]
    cdef int before = (q + 1) // 2 - 1, after = q // 2
    cdef int t, f, tt, ff, k, j
    cdef double xr, xi
    out_arr = np.zeros((T, F))
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] a = np.zeros((K, K))
    cdef double[::1] lam = np.zeros(K)
    with nogil:
        for t in range(T):
            for f in range(F):
                for k in range(K):
                    for j in range(K):
                        a[k, j] = 0.0
                for tt in range(t - before, t + after + 1):
                    if tt < 0 or tt >= T:
                        continue
                    for ff in range(f - before, f + after + 1):
                        if ff < 0 or ff >= F:
                            continue
                        for k in range(K):
                            xr = re[k, tt, ff]
                            xi = im[k, tt, ff]
                            for j in range(k, K):
                                a[k, j] += xr * re[j, tt, ff] + xi * im[j, tt, ff]
                for k in range(K):
                    for j in range(k + 1, K):
                        a[j, k] = a[k, j]
                out[t, f] = _confidence(a, lam, K)
    return out_arr


def assign_labels(double[:, :, ::1] re, double[:, :, ::1] im, double[:, ::1] means):
    cdef int K = re.shape[0], T = re.shape[1], F = re.shape[2], R = means.shape[0]
    cdef int t, f, k, i, best_i, n_best
    cdef long ties = 0
    cdef double nr, ni, cr, ci, s, best
    labels_arr = np.zeros((T, F), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] labels = labels_arr
    cdef double[::1] score = np.zeros(R)
    with nogil:
        for t in range(T):
            for f in range(F):
                nr = 0.0
                ni = 0.0
                for k in range(K):
                    nr += re[k, t, f] * re[k, t, f]
                    ni += im[k, t, f] * im[k, t, f]
                if sqrt(nr + ni) < MIN_NORM:
                    labels[t, f] = 0
                    continue
                nr = sqrt(nr)
                ni = sqrt(ni)
                for i in range(R):
                    s = 0.0
                    if nr >= MIN_NORM:
                        cr = 0.0
                        for k in range(K):
                            cr += re[k, t, f] / nr * means[i, k]
                        s += sqrt(fmax0(1.0 - cr * cr)) if cr * cr < 1.0 else 0.0
                    if ni >= MIN_NORM:
                        ci = 0.0
                        for k in range(K):
                            ci += im[k, t, f] / ni * means[i, k]
                        s += sqrt(fmax0(1.0 - ci * ci)) if ci * ci < 1.0 else 0.0
                    score[i] = s
                best_i = 0
                best = score[0]
                for i in range(1, R):
                    if score[i] < best:
                        best = score[i]
                        best_i = i
                n_best = 0
                for i in range(R):
                    if score[i] <= best + TIE_TOL:
                        n_best += 1
                if n_best > 1:
                    ties += 1
                labels[t, f] = best_i
    return labels_arr, int(ties)
