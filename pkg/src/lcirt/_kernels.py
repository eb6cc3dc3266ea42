"""Inner loops of the E-step.

Two kernels dominate the cost of a fit: gathering ``log p(x | c)`` for
every observed pattern and scattering posterior weights back into
per-class category counts.  Both come in a numba and a plain numpy
version; numba is used when importable unless ``LCIRT_DISABLE_NUMBA=1``.
"""

import os

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is optional
    njit = None

USE_NUMBA = njit is not None and os.environ.get("LCIRT_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def pattern_logprob_numpy(log_lam, patterns):
    """``out[c, p] = sum_j log_lam[c, j, patterns[p, j]]``."""
    r = patterns.shape[1]
    return log_lam[:, np.arange(r)[None, :], patterns].sum(axis=-1)


def category_counts_numpy(weights, patterns, n_cat):
    """``out[c, j, x] = sum_p weights[c, p] * [patterns[p, j] == x]``."""
    k = weights.shape[0]
    n_pat, r = patterns.shape
    out = np.zeros((k, r, n_cat))
    flat = (np.arange(r)[None, :] * n_cat + patterns).ravel()
    for c in range(k):
        w = np.repeat(weights[c], r)
        out[c] = np.bincount(flat, weights=w, minlength=r * n_cat).reshape(r, n_cat)
    return out


if njit is not None:

    @njit(cache=True, nogil=True)
    def pattern_logprob_numba(log_lam, patterns):
        k = log_lam.shape[0]
        n_pat, r = patterns.shape
        out = np.zeros((k, n_pat))
        for c in range(k):
            for p in range(n_pat):
                acc = 0.0
                for j in range(r):
                    acc += log_lam[c, j, patterns[p, j]]
                out[c, p] = acc
        return out

    @njit(cache=True, nogil=True)
    def category_counts_numba(weights, patterns, n_cat):
        k = weights.shape[0]
        n_pat, r = patterns.shape
        out = np.zeros((k, r, n_cat))
        for c in range(k):
            for p in range(n_pat):
                w = weights[c, p]
                for j in range(r):
                    out[c, j, patterns[p, j]] += w
        return out

else:  # pragma: no cover
    pattern_logprob_numba = None
    category_counts_numba = None


def pattern_logprob(log_lam, patterns):
    if USE_NUMBA:
        return pattern_logprob_numba(
            np.ascontiguousarray(log_lam, dtype=np.float64),
            np.ascontiguousarray(patterns, dtype=np.int64),
        )
    return pattern_logprob_numpy(log_lam, patterns)


def category_counts(weights, patterns, n_cat):
    if USE_NUMBA:
        return category_counts_numba(
            np.ascontiguousarray(weights, dtype=np.float64),
            np.ascontiguousarray(patterns, dtype=np.int64),
            int(n_cat),
        )
    return category_counts_numpy(weights, patterns, n_cat)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
