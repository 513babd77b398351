"""SOM training and best-matching-unit search.

Ties in the BMU search go to the lowest node index in both flavours
(strict ``<`` in the loop, first minimum in ``argmin``).
"""
from __future__ import annotations

import numpy as np

from .._accel import njit


@njit
def _bmu_one(weights, x):
    best = 0
    best_d2 = np.inf
    for i in range(weights.shape[0]):
        d2 = 0.0
        for k in range(weights.shape[1]):
            diff = x[k] - weights[i, k]
            d2 += diff * diff
        if d2 < best_d2:
            best_d2 = d2
            best = i
    return best, best_d2


@njit
def bmu_batch_numba(weights, data):
    n = data.shape[0]
    idx = np.empty(n, np.int64)
    dist = np.empty(n)
    for j in range(n):
        c, d2 = _bmu_one(weights, data[j])
        idx[j] = c
        dist[j] = np.sqrt(d2)
    return idx, dist


def bmu_batch_numpy(weights, data, chunk=4096):
    n = data.shape[0]
    idx = np.empty(n, np.int64)
    dist = np.empty(n)
    for lo in range(0, n, chunk):
        block = data[lo:lo + chunk]
        diff = block[:, None, :] - weights[None, :, :]
        d2 = np.einsum("abk,abk->ab", diff, diff)
        c = np.argmin(d2, axis=1)
        idx[lo:lo + chunk] = c
        dist[lo:lo + chunk] = np.sqrt(d2[np.arange(len(block)), c])
    return idx, dist


@njit
def train_numba(weights, grid_d2, data, picks, alpha, sigma):
    n_nodes, dim = weights.shape
    for t in range(picks.shape[0]):
        x = data[picks[t]]
        c, _ = _bmu_one(weights, x)
        two_s2 = 2.0 * sigma[t] * sigma[t]
        for i in range(n_nodes):
            h = alpha[t] * np.exp(-grid_d2[c, i] / two_s2)
            for k in range(dim):
                weights[i, k] += h * (x[k] - weights[i, k])
    return weights


def train_numpy(weights, grid_d2, data, picks, alpha, sigma):
    for t in range(picks.shape[0]):
        x = data[picks[t]]
        diff = x - weights
        c = int(np.argmin(np.einsum("ik,ik->i", diff, diff)))
        h = alpha[t] * np.exp(-grid_d2[c] / (2.0 * sigma[t] * sigma[t]))
        weights += h[:, None] * diff
    return weights
