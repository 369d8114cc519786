# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Same call surface and table layouts as py_backend; see that module for the
layout documentation. Scoring loops run one triple at a time, so batch
results are trivially identical to repeated single-triple calls. Gradient
accumulation walks triples in input order.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()

NAME = "c"

ctypedef cnp.int64_t i64


cdef int _method_code(str method) except -1:
    if method == "transe":
        return 0
    if method == "distmult":
        return 1
    if method == "complex":
        return 2
    if method == "rescal":
        return 3
    if method == "rotate":
        return 4
    raise ValueError(f"unknown scoring method: {method!r}")


cdef double _score_one(int m, const double[:, ::1] ent, const double[:, ::1] rel,
                       Py_ssize_t h, Py_ssize_t r, Py_ssize_t t) noexcept:
    cdef Py_ssize_t d = ent.shape[1]
    cdef Py_ssize_t j, k, dc
    cdef double acc = 0.0
    cdef double u, ure, uim, cj, sj, hw

    if m == 0:
        for j in range(d):
            u = ent[h, j] + rel[r, j] - ent[t, j]
            acc += u * u
        return -sqrt(acc)
    elif m == 1:
        for j in range(d):
            acc += ent[h, j] * rel[r, j] * ent[t, j]
        return acc
    elif m == 2:
        dc = d // 2
        for j in range(dc):
            acc += (ent[h, j] * rel[r, j] * ent[t, j]
                    + ent[h, dc + j] * rel[r, j] * ent[t, dc + j]
                    + ent[h, j] * rel[r, dc + j] * ent[t, dc + j]
                    - ent[h, dc + j] * rel[r, dc + j] * ent[t, j])
        return acc
    elif m == 3:
        for k in range(d):
            hw = 0.0
            for j in range(d):
                hw += ent[h, j] * rel[r, j * d + k]
            acc += hw * ent[t, k]
        return acc
    else:
        dc = d // 2
        for j in range(dc):
            cj = cos(rel[r, j])
            sj = sin(rel[r, j])
            ure = ent[h, j] * cj - ent[h, dc + j] * sj - ent[t, j]
            uim = ent[h, j] * sj + ent[h, dc + j] * cj - ent[t, dc + j]
            acc += ure * ure + uim * uim
        return -sqrt(acc)


def score_triples(str method, const double[:, ::1] ent, const double[:, ::1] rel,
                  const i64[:] h, const i64[:] r, const i64[:] t):
    cdef int m = _method_code(method)
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    for i in range(n):
        ov[i] = _score_one(m, ent, rel, h[i], r[i], t[i])
    return out


def score_candidates(str method, const double[:, ::1] ent, const double[:, ::1] rel,
                     Py_ssize_t fixed, Py_ssize_t relation, bint tail_query):
    cdef int m = _method_code(method)
    cdef Py_ssize_t n = ent.shape[0]
    cdef Py_ssize_t e
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    if tail_query:
        for e in range(n):
            ov[e] = _score_one(m, ent, rel, fixed, relation, e)
    else:
        for e in range(n):
            ov[e] = _score_one(m, ent, rel, e, relation, fixed)
    return out


def accumulate_gradients(str method, const double[:, ::1] ent, const double[:, ::1] rel,
                         const i64[:] h, const i64[:] r, const i64[:] t,
                         const double[:] coeff,
                         double[:, ::1] g_ent, double[:, ::1] g_rel):
    cdef int m = _method_code(method)
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t d = ent.shape[1]
    cdef Py_ssize_t dc = d // 2
    cdef Py_ssize_t i, j, k, hi, ri, ti
    cdef double c, u, nrm, inv, cj, sj, rre, rim, gre, gim, hw

    buf_re = np.empty(d, dtype=np.float64)
    buf_im = np.empty(d, dtype=np.float64)
    cdef double[::1] ure = buf_re
    cdef double[::1] uim = buf_im

    for i in range(n):
        hi = h[i]
        ri = r[i]
        ti = t[i]
        c = coeff[i]
        if m == 0:
            nrm = 0.0
            for j in range(d):
                u = ent[hi, j] + rel[ri, j] - ent[ti, j]
                ure[j] = u
                nrm += u * u
            nrm = sqrt(nrm)
            if nrm > 0.0:
                inv = c / nrm
                for j in range(d):
                    g_ent[hi, j] -= inv * ure[j]
                    g_rel[ri, j] -= inv * ure[j]
                    g_ent[ti, j] += inv * ure[j]
        elif m == 1:
            for j in range(d):
                g_ent[hi, j] += c * rel[ri, j] * ent[ti, j]
                g_rel[ri, j] += c * ent[hi, j] * ent[ti, j]
                g_ent[ti, j] += c * ent[hi, j] * rel[ri, j]
        elif m == 2:
            for j in range(dc):
                g_ent[hi, j] += c * (rel[ri, j] * ent[ti, j] + rel[ri, dc + j] * ent[ti, dc + j])
                g_ent[hi, dc + j] += c * (rel[ri, j] * ent[ti, dc + j] - rel[ri, dc + j] * ent[ti, j])
                g_rel[ri, j] += c * (ent[hi, j] * ent[ti, j] + ent[hi, dc + j] * ent[ti, dc + j])
                g_rel[ri, dc + j] += c * (ent[hi, j] * ent[ti, dc + j] - ent[hi, dc + j] * ent[ti, j])
                g_ent[ti, j] += c * (ent[hi, j] * rel[ri, j] - ent[hi, dc + j] * rel[ri, dc + j])
                g_ent[ti, dc + j] += c * (ent[hi, dc + j] * rel[ri, j] + ent[hi, j] * rel[ri, dc + j])
        elif m == 3:
            for j in range(d):
                hw = 0.0
                for k in range(d):
                    hw += rel[ri, j * d + k] * ent[ti, k]
                g_ent[hi, j] += c * hw
            for k in range(d):
                hw = 0.0
                for j in range(d):
                    hw += ent[hi, j] * rel[ri, j * d + k]
                g_ent[ti, k] += c * hw
            for j in range(d):
                for k in range(d):
                    g_rel[ri, j * d + k] += c * ent[hi, j] * ent[ti, k]
        else:
            nrm = 0.0
            for j in range(dc):
                cj = cos(rel[ri, j])
                sj = sin(rel[ri, j])
                ure[j] = ent[hi, j] * cj - ent[hi, dc + j] * sj - ent[ti, j]
                uim[j] = ent[hi, j] * sj + ent[hi, dc + j] * cj - ent[ti, dc + j]
                nrm += ure[j] * ure[j] + uim[j] * uim[j]
            nrm = sqrt(nrm)
            if nrm > 0.0:
                inv = c / nrm
                for j in range(dc):
                    cj = cos(rel[ri, j])
                    sj = sin(rel[ri, j])
                    rre = ent[hi, j] * cj - ent[hi, dc + j] * sj
                    rim = ent[hi, j] * sj + ent[hi, dc + j] * cj
                    g_ent[hi, j] -= inv * (ure[j] * cj + uim[j] * sj)
                    g_ent[hi, dc + j] -= inv * (uim[j] * cj - ure[j] * sj)
                    g_ent[ti, j] += inv * ure[j]
                    g_ent[ti, dc + j] += inv * uim[j]
                    g_rel[ri, j] += inv * (ure[j] * rim - uim[j] * rre)
