"""Pure-Python/numpy implementations of the compiled kernels."""

import numpy as np


def pava(y, w, increasing=True):
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    sign = 1.0 if increasing else -1.0
    levels, weights, counts = [], [], []
    for yi, wi in zip(sign * y, w):
        levels.append(yi)
        weights.append(wi)
        counts.append(1)
        while len(levels) > 1 and levels[-2] > levels[-1]:
            wsum = weights[-2] + weights[-1]
            levels[-2] = (weights[-2] * levels[-2] + weights[-1] * levels[-1]) / wsum
            weights[-2] = wsum
            counts[-2] += counts[-1]
            del levels[-1], weights[-1], counts[-1]
    return sign * np.repeat(levels, counts)


def group_gram(M, group_of, n_groups):
    M = np.asarray(M, dtype=float)
    group_of = np.asarray(group_of)
    out = np.zeros((n_groups, M.shape[1], M.shape[1]))
    order = np.argsort(group_of, kind="stable")
    bounds = np.searchsorted(group_of[order], np.arange(n_groups + 1))
    for g in range(n_groups):
        block = M[order[bounds[g]:bounds[g + 1]]]
        out[g] = block.T @ block
    return out
