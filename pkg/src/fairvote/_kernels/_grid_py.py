"""Pure-numpy grid evaluation kernel.

Reference implementation of the hot loop; the compiled Cython kernel in
_grid_c.pyx must produce bit-identical counts. Both accumulate each
candidate margin as task + w_0*gs_0 + w_1*gs_1 + ... in ascending group
order with one multiply and one add per group, so the float rounding
sequence is the same in both backends.
"""

from __future__ import annotations

import numpy as np

# Candidates are processed in fixed-size blocks to bound memory; block
# boundaries cannot affect results because candidates are independent.
_BLOCK = 512


def grid_counts(task, gscores, labels, groups, weights):
    """Evaluate every candidate weight vector on one member's fold.

    Parameters: task (n,), gscores (n, G), labels (n,) in {0,1},
    groups (n,) int32 true-group indices, weights (C, G).

    Returns (correct, tp): correct[c] counts samples the candidate
    classifies correctly; tp[c, g] counts its true positives in group g.
    """
    task = np.ascontiguousarray(task, dtype=np.float64)
    gscores = np.ascontiguousarray(gscores, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    labels = np.asarray(labels)
    groups = np.asarray(groups)
    n = task.shape[0]
    n_cand, n_groups = weights.shape

    positive = labels == 1
    pos_masks = [positive & (groups == g) for g in range(n_groups)]
    correct = np.empty(n_cand, dtype=np.int64)
    tp = np.empty((n_cand, n_groups), dtype=np.int64)
    for start in range(0, n_cand, _BLOCK):
        w = weights[start:start + _BLOCK]
        margins = np.broadcast_to(task, (w.shape[0], n)).copy()
        for g in range(n_groups):
            margins += w[:, g:g + 1] * gscores[:, g]
        preds = margins >= 0.5
        correct[start:start + _BLOCK] = (preds == positive).sum(axis=1)
        for g in range(n_groups):
            tp[start:start + _BLOCK, g] = preds[:, pos_masks[g]].sum(axis=1)
    return correct, tp
