"""Numba @njit versions of the hot kernels.

Mirrors `obsdx._kernels_numpy` function for function. fastmath stays off:
the contrastive kernel's exact-complement property and the AUROC rank
arithmetic rely on strict IEEE semantics. cache=True persists compiled
code next to the package so repeat runs skip JIT warmup.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def contrastive_probs(sim_pos, sim_neg, tau):
    n = sim_pos.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        z = (sim_pos[i] - sim_neg[i]) / tau
        q = np.exp(-abs(z))
        small = q / (1.0 + q)
        if z < 0.0:
            out[i] = small
        else:
            out[i] = 1.0 - small
    return out


@njit(cache=True)
def pool_log_mean(probs, eps):
    total = 0.0
    for i in range(probs.shape[0]):
        p = probs[i]
        if p < eps:
            p = eps
        elif p > 1.0:
            p = 1.0
        total += np.log(p)
    return total / probs.shape[0]


@njit(cache=True)
def rank_auroc(scores, labels):
    n = scores.shape[0]
    order = np.argsort(scores, kind="mergesort")
    pos_rank_sum = 0.0
    n_pos = 0
    i = 0
    while i < n:
        j = i + 1
        while j < n and scores[order[j]] == scores[order[i]]:
            j += 1
        midrank = (i + j + 1) * 0.5
        for k in range(i, j):
            if labels[order[k]] == 1:
                pos_rank_sum += midrank
                n_pos += 1
        i = j
    n_neg = n - n_pos
    u = pos_rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@njit(cache=True)
def gnb_log_odds(x, mean0, var0, mean1, var1, log_prior_ratio):
    n, d = x.shape
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        acc = log_prior_ratio
        for j in range(d):
            d1 = x[i, j] - mean1[j]
            d0 = x[i, j] - mean0[j]
            acc += -0.5 * (np.log(2.0 * np.pi * var1[j]) + d1 * d1 / var1[j])
            acc -= -0.5 * (np.log(2.0 * np.pi * var0[j]) + d0 * d0 / var0[j])
        out[i] = acc
    return out


def warmup():
    """Force compilation of every kernel (first call otherwise pays JIT cost)."""
    a = np.array([0.1, -0.2])
    contrastive_probs(a, a[::-1].copy(), 1.0)
    pool_log_mean(np.array([0.5, 0.9]), 1e-12)
    rank_auroc(np.array([0.1, 0.2, 0.2, 0.9]), np.array([0, 1, 0, 1], dtype=np.uint8))
    gnb_log_odds(
        np.array([[0.3, 0.7]]),
        np.array([0.2, 0.5]),
        np.array([0.01, 0.01]),
        np.array([0.8, 0.5]),
        np.array([0.01, 0.01]),
        0.0,
    )
