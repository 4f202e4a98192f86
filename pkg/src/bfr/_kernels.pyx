# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path kernels; see ``_pykernels.py`` for the reference version."""
from libc.math cimport exp, log
from libc.stdlib cimport malloc, free

import numpy as np


cdef inline Py_ssize_t _choose(double* w, Py_ssize_t nw, double u, double* lp) noexcept nogil:
    cdef Py_ssize_t i, pick
    cdef double mx = w[0], total = 0.0, target, acc = 0.0
    for i in range(1, nw):
        if w[i] > mx:
            mx = w[i]
    for i in range(nw):
        w[i] = exp(w[i] - mx)
        total += w[i]
    target = u * total
    pick = nw - 1
    for i in range(nw):
        acc += w[i]
        if target < acc:
            pick = i
            break
    lp[0] = log(w[pick]) - log(total)
    return pick


def ap_sweep(long long[::1] path, const double[:, ::1] log_psi,
             const double[::1] log_fact, const double[::1] uniforms):
    cdef Py_ssize_t n = path.shape[0] - 1
    cdef Py_ssize_t r, q, i, nw, pick, a, b
    cdef long long lo, sq, hi, k
    cdef double v, lp
    cdef double* w = <double*> malloc((n + 1) * sizeof(double))
    if w == NULL:
        raise MemoryError()
    try:
        with nogil:
            for r in range(1, n):
                q = r + 1
                while path[q] == path[q - 1]:
                    q += 1
                lo = path[r - 1]
                sq = path[q]
                hi = r if r < sq - 1 else sq - 1
                nw = 0
                k = lo
                while k <= hi:
                    v = 0.0
                    if k > lo:
                        a = r - 1 - lo
                        b = r - k
                        v += log_fact[a] - log_fact[b] - log_fact[a - b] + log_psi[r, k - lo]
                    a = q - 1 - k
                    b = q - sq
                    v += log_fact[a] - log_fact[b] - log_fact[a - b] + log_psi[q, sq - k]
                    w[nw] = v
                    nw += 1
                    k += 1
                pick = _choose(w, nw, uniforms[r - 1], &lp)
                k = lo + pick
                for i in range(r, q):
                    path[i] = k
    finally:
        free(w)


def sip_draw(Py_ssize_t n, const double[:, ::1] log_psi, const double[::1] log_fact,
             const long long[::1] perm, const double[::1] uniforms, long long[::1] path):
    cdef Py_ssize_t r, ir, p, q, nw, pick, a, b
    cdef long long sp, sq, hi, k
    cdef double v, lp, log_sigma = 0.0
    cdef double* w = <double*> malloc((n + 1) * sizeof(double))
    cdef char* det = <char*> malloc((n + 1) * sizeof(char))
    if w == NULL or det == NULL:
        free(w)
        free(det)
        raise MemoryError()
    try:
        with nogil:
            for r in range(n + 1):
                det[r] = 0
            det[0] = 1
            det[n] = 1
            path[0] = 0
            path[n] = n
            for r in range(n - 1):
                ir = perm[r]
                p = ir - 1
                while not det[p]:
                    p -= 1
                q = ir + 1
                while not det[q]:
                    q += 1
                sp = path[p]
                sq = path[q]
                hi = ir if ir < sq else sq
                nw = 0
                k = sp
                while k <= hi:
                    v = 0.0
                    if k > sp:
                        a = ir - 1 - sp
                        b = ir - k
                        v += log_fact[a] - log_fact[b] - log_fact[a - b] + log_psi[ir, k - sp]
                    if sq > k:
                        a = q - 1 - k
                        b = q - sq
                        v += log_fact[a] - log_fact[b] - log_fact[a - b] + log_psi[q, sq - k]
                    w[nw] = v
                    nw += 1
                    k += 1
                pick = _choose(w, nw, uniforms[r], &lp)
                log_sigma += lp
                path[ir] = sp + pick
                det[ir] = 1
    finally:
        free(w)
        free(det)
    return log_sigma
