"""Pure-numpy implementations of the hot numeric kernels.

This module is the fallback path; `obsdx._kernels_numba` mirrors every
function with an @njit version. Both must stay algorithmically identical:
tests compare the two paths element-wise.
"""

import numpy as np


def contrastive_probs(sim_pos: np.ndarray, sim_neg: np.ndarray, tau: float) -> np.ndarray:
    """Pairwise softmax probability of the positive prompt.

    Stable form of exp(p/tau) / (exp(p/tau) + exp(n/tau)). The larger side
    is computed as 1 - smaller so that probs(a, b) + probs(b, a) sums to
    exactly 1.0 in floating point.
    """
    z = (sim_pos - sim_neg) / tau
    q = np.exp(-np.abs(z))
    small = q / (1.0 + q)
    return np.where(z < 0.0, small, 1.0 - small)


def pool_log_mean(probs: np.ndarray, eps: float) -> float:
    """Mean of log probabilities, clamped to [eps, 1] before the log."""
    return float(np.mean(np.log(np.clip(probs, eps, 1.0))))


def rank_auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUROC with 0.5 credit per tied pair, via midranks.

    Rank sums stay exact in float64 (integer halves below 2**52), so this
    agrees bit-for-bit with pairwise enumeration.
    """
    n = scores.shape[0]
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    boundaries = np.nonzero(np.diff(sorted_scores))[0]
    starts = np.concatenate(([0], boundaries + 1))
    ends = np.concatenate((boundaries + 1, [n]))
    # 1-based average rank of each tie block
    midranks = (starts + ends + 1) * 0.5
    ranks = np.repeat(midranks, ends - starts)
    pos_mask = labels[order] == 1
    n_pos = int(np.count_nonzero(pos_mask))
    n_neg = n - n_pos
    u = float(np.sum(ranks[pos_mask])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def gnb_log_odds(
    x: np.ndarray,
    mean0: np.ndarray,
    var0: np.ndarray,
    mean1: np.ndarray,
    var1: np.ndarray,
    log_prior_ratio: float,
) -> np.ndarray:
    """Log posterior odds log P(y=1|x) - log P(y=0|x) for rows of x."""
    ll1 = -0.5 * (np.log(2.0 * np.pi * var1) + (x - mean1) ** 2 / var1)
    ll0 = -0.5 * (np.log(2.0 * np.pi * var0) + (x - mean0) ** 2 / var0)
    return log_prior_ratio + np.sum(ll1 - ll0, axis=1)
