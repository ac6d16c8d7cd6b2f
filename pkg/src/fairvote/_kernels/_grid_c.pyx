# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid evaluation kernel.

Must stay bit-identical to the numpy fallback in _grid_py.py: margins are
accumulated as task + w_0*gs_0 + w_1*gs_1 + ... in ascending group order,
one multiply and one add per step. Built with -ffp-contract=off so the
compiler cannot fuse that multiply-add. Counting is branchless (masks and
integer adds only) so the hot loop has no data-dependent branches, and the
common 1-3 group cases get dedicated loops with the weights held in
registers.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def grid_counts(task, gscores, labels, groups, weights):
    """See fairvote._kernels._grid_py.grid_counts."""
    cdef const double[::1] task_v = np.ascontiguousarray(task, dtype=np.float64)
    cdef const double[:, ::1] gs_v = np.ascontiguousarray(gscores, dtype=np.float64)
    cdef const double[:, ::1] w_v = np.ascontiguousarray(weights, dtype=np.float64)

    cdef Py_ssize_t n = task_v.shape[0]
    cdef Py_ssize_t n_cand = w_v.shape[0]
    cdef Py_ssize_t n_groups = w_v.shape[1]

    # 0/1 masks computed once: pos8[j] marks positives, pg[g, j] marks
    # positives belonging to group g.
    lab_np = np.ascontiguousarray(labels, dtype=np.int8)
    grp_np = np.ascontiguousarray(groups, dtype=np.int32)
    pos_np = lab_np == 1
    pg_np = np.ascontiguousarray(
        (pos_np[None, :] & (grp_np[None, :] == np.arange(n_groups)[:, None]))
        .astype(np.int8)
    )
    pos8_np = pos_np.astype(np.int8)
    cdef const signed char[::1] pos8 = pos8_np
    cdef const signed char[:, ::1] pg = pg_np
    cdef const int[::1] grp_v = grp_np

    correct_arr = np.zeros(n_cand, dtype=np.int64)
    tp_arr = np.zeros((n_cand, n_groups), dtype=np.int64)
    cdef long long[::1] correct = correct_arr
    cdef long long[:, ::1] tp = tp_arr

    cdef Py_ssize_t c, j, g
    cdef double m, w0, w1, w2
    cdef int pred
    cdef long long acc, t0, t1, t2
    with nogil:
        if n_groups == 1:
            for c in range(n_cand):
                w0 = w_v[c, 0]
                acc = 0
                t0 = 0
                for j in range(n):
                    m = task_v[j]
                    m = m + w0 * gs_v[j, 0]
                    pred = m >= 0.5
                    acc = acc + (pred == pos8[j])
                    t0 = t0 + (pred & pg[0, j])
                correct[c] = acc
                tp[c, 0] = t0
        elif n_groups == 2:
            for c in range(n_cand):
                w0 = w_v[c, 0]
                w1 = w_v[c, 1]
                acc = 0
                t0 = 0
                t1 = 0
                for j in range(n):
                    m = task_v[j]
                    m = m + w0 * gs_v[j, 0]
                    m = m + w1 * gs_v[j, 1]
                    pred = m >= 0.5
                    acc = acc + (pred == pos8[j])
                    t0 = t0 + (pred & pg[0, j])
                    t1 = t1 + (pred & pg[1, j])
                correct[c] = acc
                tp[c, 0] = t0
                tp[c, 1] = t1
        elif n_groups == 3:
            for c in range(n_cand):
                w0 = w_v[c, 0]
                w1 = w_v[c, 1]
                w2 = w_v[c, 2]
                acc = 0
                t0 = 0
                t1 = 0
                t2 = 0
                for j in range(n):
                    m = task_v[j]
                    m = m + w0 * gs_v[j, 0]
                    m = m + w1 * gs_v[j, 1]
                    m = m + w2 * gs_v[j, 2]
                    pred = m >= 0.5
                    acc = acc + (pred == pos8[j])
                    t0 = t0 + (pred & pg[0, j])
                    t1 = t1 + (pred & pg[1, j])
                    t2 = t2 + (pred & pg[2, j])
                correct[c] = acc
                tp[c, 0] = t0
                tp[c, 1] = t1
                tp[c, 2] = t2
        else:
            for c in range(n_cand):
                acc = 0
                for j in range(n):
                    m = task_v[j]
                    for g in range(n_groups):
                        m = m + w_v[c, g] * gs_v[j, g]
                    pred = m >= 0.5
                    acc = acc + (pred == pos8[j])
                    tp[c, grp_v[j]] += pred & pos8[j]
                correct[c] = acc
    return correct_arr, tp_arr
