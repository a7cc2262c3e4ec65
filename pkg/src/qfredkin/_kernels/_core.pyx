# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; signatures mirror ``_fallback``."""
import numpy as np

from libc.math cimport log, sqrt, fabs


cdef double[16] _FACT = [1, 1, 2, 6, 24, 120, 720, 5040, 40320, 362880, 3628800,
                         39916800, 479001600, 6227020800, 87178291200, 1307674368000]


def expand_subspace(tuple sub, matrix):
    cdef Py_ssize_t k = len(sub)
    cdef const double complex[:, ::1] U = np.ascontiguousarray(matrix, dtype=complex)
    cdef int n_total = 0
    cdef Py_ssize_t i, j, m
    cdef int n
    cdef double norm = 1.0
    for i in range(k):
        n = sub[i]
        n_total += n
        norm *= _FACT[n]
    # packed keys must fit in a C long
    if n_total > 15 or k > 16 or (n_total + 1) ** k >= 2**62:
        from ._fallback import expand_subspace as slow
        return slow(sub, matrix)
    # occupations packed base (n_total + 1), mode 0 least significant
    cdef long base = n_total + 1
    cdef long[16] powers
    powers[0] = 1
    for i in range(1, k):
        powers[i] = powers[i - 1] * base
    cdef dict partial = {0: 1.0 / sqrt(norm)}
    cdef dict nxt
    cdef long key
    cdef double complex c, u
    cdef int rep
    for i in range(k):
        n = sub[i]
        for rep in range(n):
            nxt = {}
            for key, c in partial.items():
                for j in range(k):
                    u = U[j, i]
                    if u.real == 0 and u.imag == 0:
                        continue
                    m = key + powers[j]
                    nxt[m] = nxt.get(m, 0j) + c * u
            partial = nxt
    cdef dict out = {}
    cdef list occ
    cdef long rem
    cdef double f
    for key, c in partial.items():
        occ = [0] * k
        rem = key
        f = 1.0
        for j in range(k):
            occ[j] = rem % base
            rem //= base
            f *= _FACT[occ[j]]
        c = c * sqrt(f)
        if fabs(c.real) + fabs(c.imag) > 1e-15:
            out[tuple(occ)] = c
    return out


cdef void _probs(const double complex[:, ::1] V, double complex[:, ::1] rho, double[::1] p) noexcept nogil:
    cdef Py_ssize_t J = V.shape[0], d = V.shape[1]
    cdef Py_ssize_t j, a, b
    cdef double complex acc, row
    for j in range(J):
        acc = 0
        for a in range(d):
            row = 0
            for b in range(d):
                row = row + rho[a, b] * V[j, b]
            acc = acc + V[j, a].conjugate() * row
        p[j] = acc.real


cdef double _loglik(const double[::1] counts, double[::1] p) noexcept nogil:
    cdef Py_ssize_t j
    cdef double L = 0, pj
    for j in range(counts.shape[0]):
        if counts[j] > 0:
            pj = p[j]
            if pj < 1e-300:
                pj = 1e-300
            L += counts[j] * log(pj)
    return L


cdef void _matmul(double complex[:, ::1] A, double complex[:, ::1] B, double complex[:, ::1] C) noexcept nogil:
    cdef Py_ssize_t d = A.shape[0], i, j, m
    cdef double complex acc
    for i in range(d):
        for j in range(d):
            acc = 0
            for m in range(d):
                acc = acc + A[i, m] * B[m, j]
            C[i, j] = acc


def mle_rhor(vecs, counts, rho0, int max_iter=10000, double tol=1e-10, double slack=1e-12):
    cdef const double complex[:, ::1] V = np.ascontiguousarray(vecs, dtype=complex)
    cdef const double[::1] n = np.ascontiguousarray(counts, dtype=float)
    cdef Py_ssize_t J = V.shape[0], d = V.shape[1]
    rho_arr = np.array(rho0, dtype=complex, order="C")
    cdef double complex[:, ::1] rho = rho_arr
    cdef double complex[:, ::1] R = np.zeros((d, d), dtype=complex)
    cdef double complex[:, ::1] G = np.zeros((d, d), dtype=complex)
    cdef double complex[:, ::1] tmp = np.zeros((d, d), dtype=complex)
    cdef double complex[:, ::1] new = np.zeros((d, d), dtype=complex)
    cdef double[::1] p = np.zeros(J)
    cdef double[::1] p_new = np.zeros(J)
    hist_arr = np.zeros(max_iter + 1)
    cdef double[::1] hist = hist_arr
    cdef double total = 0, L, L_new, step = 1.0, w, tr, delta, x
    cdef Py_ssize_t j, a, b, it = 0
    cdef bint converged = False
    cdef double complex va, z

    with nogil:
        for j in range(J):
            total += n[j]
        _probs(V, rho, p)
        L = _loglik(n, p)
        hist[0] = L
        while it < max_iter:
            it += 1
            for a in range(d):
                for b in range(d):
                    R[a, b] = 0
            for j in range(J):
                if n[j] <= 0:
                    continue
                x = p[j]
                if x < 1e-300:
                    x = 1e-300
                w = n[j] / x / total
                for a in range(d):
                    va = w * V[j, a]
                    for b in range(d):
                        R[a, b] = R[a, b] + va * V[j, b].conjugate()
            while True:
                for a in range(d):
                    for b in range(d):
                        G[a, b] = step * R[a, b]
                    G[a, a] = G[a, a] + (1.0 - step)
                _matmul(G, rho, tmp)
                # G is Hermitian: new = tmp @ G
                _matmul(tmp, G, new)
                tr = 0
                for a in range(d):
                    tr += new[a, a].real
                for a in range(d):
                    for b in range(a, d):
                        z = 0.5 * (new[a, b] + new[b, a].conjugate()) / tr
                        new[a, b] = z
                        new[b, a] = z.conjugate()
                _probs(V, new, p_new)
                L_new = _loglik(n, p_new)
                if L_new >= L - slack or step < 1e-12:
                    break
                step *= 0.5
            delta = 0
            for a in range(d):
                for b in range(d):
                    z = new[a, b] - rho[a, b]
                    x = sqrt(z.real * z.real + z.imag * z.imag)
                    if x > delta:
                        delta = x
                    rho[a, b] = new[a, b]
            for j in range(J):
                p[j] = p_new[j]
            L = L_new
            hist[it] = L
            step = 2.0 * step
            if step > 1.0:
                step = 1.0
            if delta < tol:
                converged = True
                break
    return rho_arr, hist_arr[: it + 1].copy(), int(it), bool(converged)
