# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; same signatures as ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def conv_volterra(K, double gh):
    cdef const double[::1] k = np.ascontiguousarray(K, dtype=np.float64)
    cdef Py_ssize_t N = k.shape[0] - 1
    out = np.empty(N + 1)
    cdef double[::1] m = out
    cdef Py_ssize_t n, j
    cdef double acc
    cdef double denom = 1.0 + 0.5 * gh * k[0]
    m[0] = 1.0
    for n in range(1, N + 1):
        acc = 0.5 * k[n] * m[0]
        for j in range(1, n):
            acc += k[j] * m[n - j]
        m[n] = (1.0 - gh * acc) / denom
    return out


def path_overlaps(trap_ptr, jump_times, start, pos_after, sel,
                  path_times, path_pos, double t0, double t1):
    cdef const long long[::1] ptr = np.ascontiguousarray(trap_ptr, dtype=np.int64)
    cdef const double[::1] jt = np.ascontiguousarray(jump_times, dtype=np.float64)
    cdef const long long[:, ::1] st = np.ascontiguousarray(start, dtype=np.int64)
    cdef const long long[:, ::1] pa = np.ascontiguousarray(pos_after, dtype=np.int64)
    cdef const long long[::1] sl = np.ascontiguousarray(sel, dtype=np.int64)
    cdef const double[::1] pt = np.ascontiguousarray(path_times, dtype=np.float64)
    cdef const long long[:, ::1] pp = np.ascontiguousarray(path_pos, dtype=np.int64)
    cdef Py_ssize_t M = sl.shape[0]
    cdef Py_ssize_t d = pp.shape[1]
    cdef Py_ssize_t K = pt.shape[0]
    out = np.zeros(M)
    cdef double[::1] res = out
    cdef Py_ssize_t i, c, a, a_end, b, trap
    cdef double cur, nxt, ta, tb, acc
    cdef bint same
    if t1 <= t0:
        return out
    # path index: number of path jumps <= t0
    cdef Py_ssize_t b0 = 0
    while b0 < K and pt[b0] <= t0:
        b0 += 1
    for i in range(M):
        trap = sl[i]
        a = ptr[trap]
        a_end = ptr[trap + 1]
        while a < a_end and jt[a] <= t0:
            a += 1
        b = b0
        cur = t0
        acc = 0.0
        while cur < t1:
            ta = jt[a] if a < a_end else t1
            tb = pt[b] if b < K else t1
            nxt = ta if ta < tb else tb
            if nxt > t1:
                nxt = t1
            same = True
            for c in range(d):
                if a > ptr[trap]:
                    if pa[a - 1, c] != pp[b, c]:
                        same = False
                        break
                elif st[trap, c] != pp[b, c]:
                    same = False
                    break
            if same:
                acc += nxt - cur
            cur = nxt
            while a < a_end and jt[a] <= cur:
                a += 1
            while b < K and pt[b] <= cur:
                b += 1
        res[i] = acc
    return out
