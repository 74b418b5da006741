# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the threshold-family scan and the oracle edge search.

Both functions mirror ``fairlevel._kernels_py`` exactly; see that module for
the contract of each return value.
"""
import numpy as np


def breakpoint_scan(const double[::1] eta, const double[::1] nu,
                    const double[::1] weight, double c,
                    const double[::1] lambdas, double tol):
    cdef Py_ssize_t n = eta.shape[0]
    cdef Py_ssize_t k = lambdas.shape[0]
    cdef Py_ssize_t i, j
    cdef double lam, h, wn, dm_acc, gain_acc, dm_pos, dm_neg
    out = np.zeros((4, k), dtype=np.float64)
    cdef double[:, ::1] o = out
    for j in range(k):
        lam = lambdas[j]
        dm_acc = 0.0
        gain_acc = 0.0
        dm_pos = 0.0
        dm_neg = 0.0
        for i in range(n):
            h = eta[i] - c - lam * nu[i]
            wn = weight[i] * nu[i]
            if h > tol:
                dm_acc += wn
                gain_acc += weight[i] * (c - eta[i])
            elif h >= -tol:
                if nu[i] > 0.0:
                    dm_pos += wn
                elif nu[i] < 0.0:
                    dm_neg += wn
        o[0, j] = dm_acc
        o[1, j] = gain_acc
        o[2, j] = dm_pos
        o[3, j] = dm_neg
    return out


def edge_search(const double[::1] gain, const double[::1] slope,
                double lo, double hi):
    cdef Py_ssize_t n = gain.shape[0]
    cdef Py_ssize_t i, u
    cdef unsigned long long corner, ncorners
    cdef double full_gain, full_dm, t, t1, t2, tl, th, value
    cdef double best = np.inf
    cdef bint found = False, better
    if n > 62:
        raise ValueError("edge_search supports at most 62 coordinates")
    ncorners = (<unsigned long long>1) << n
    best_vec = np.zeros(n, dtype=np.float64)
    cand = np.zeros(n, dtype=np.float64)
    cdef double[::1] bv = best_vec
    cdef double[::1] cv = cand
    for corner in range(ncorners):
        full_gain = 0.0
        full_dm = 0.0
        for u in range(n):
            if (corner >> u) & 1:
                full_gain += gain[u]
                full_dm += slope[u]
        for i in range(n):
            if (corner >> i) & 1:
                continue
            if slope[i] == 0.0:
                if full_dm < lo or full_dm > hi:
                    continue
                t = 0.0 if gain[i] >= 0.0 else 1.0
            else:
                t1 = (lo - full_dm) / slope[i]
                t2 = (hi - full_dm) / slope[i]
                tl = t1 if t1 < t2 else t2
                th = t2 if t1 < t2 else t1
                if tl < 0.0:
                    tl = 0.0
                if th > 1.0:
                    th = 1.0
                if tl > th + 1e-15:
                    continue
                if tl > th:
                    th = tl
                t = tl if gain[i] >= 0.0 else th
            value = full_gain + gain[i] * t
            for u in range(n):
                cv[u] = <double>((corner >> u) & 1)
            cv[i] = t
            better = False
            if not found or value < best - 1e-15:
                better = True
            elif value <= best + 1e-15:
                for u in range(n):
                    if cv[u] != bv[u]:
                        better = cv[u] < bv[u]
                        break
            if better:
                found = True
                best = value
                for u in range(n):
                    bv[u] = cv[u]
    if not found:
        return None
    return best, best_vec
