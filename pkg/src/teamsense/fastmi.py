"""Compiled inner loop for the mutual-information recursion.

The oracle gets called tens of thousands of times per solver run and the
covariance blocks are tiny (2x2 or 4x4), where numpy's per-call overhead
dominates. This module carries a numba version of the exact same
recursion as filtering.mi_from_info_stacks, with a hand-rolled Cholesky
sized for small blocks. Results agree with the numpy path to far better
than 1e-10; a test pins that down.

Everything here is an internal fast path. If numba is unavailable the
evaluator transparently falls back to the numpy implementation.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _cholesky_logdet(a, chol):
    """In-place lower Cholesky of a into chol; returns logdet or nan if not PD."""
    d = a.shape[0]
    ld = 0.0
    for i in range(d):
        for j in range(i + 1):
            acc = a[i, j]
            for p in range(j):
                acc -= chol[i, p] * chol[j, p]
            if i == j:
                if acc <= 0.0:
                    return np.nan
                chol[i, i] = np.sqrt(acc)
                ld += np.log(chol[i, i])
            else:
                chol[i, j] = acc / chol[j, j]
    return 2.0 * ld


@njit(cache=True)
def _spd_inverse_from_chol(chol, out):
    """Inverse from a lower Cholesky factor, via two triangular solves."""
    d = chol.shape[0]
    # columns of the identity solved in place
    for col in range(d):
        # forward solve L y = e_col
        for i in range(d):
            acc = 1.0 if i == col else 0.0
            for p in range(i):
                acc -= chol[i, p] * out[p, col]
            out[i, col] = acc / chol[i, i]
        # back solve L^T x = y
        for i in range(d - 1, -1, -1):
            acc = out[i, col]
            for p in range(i + 1, d):
                acc -= chol[p, i] * out[p, col]
            out[i, col] = acc / chol[i, i]
    # enforce symmetry against rounding drift
    for i in range(d):
        for j in range(i):
            v = 0.5 * (out[i, j] + out[j, i])
            out[i, j] = v
            out[j, i] = v


@njit(cache=True)
def _mi_stacked(a_blocks, w_blocks, sigma0_blocks, info_sum):
    """Mutual information over the horizon; mirrors the numpy recursion.

    a_blocks, w_blocks, sigma0_blocks: (k, d, d); info_sum: (T, k, d, d).
    Raises on a non-PD covariance, which signals a caller bug.
    """
    horizon = info_sum.shape[0]
    k = a_blocks.shape[0]
    d = a_blocks.shape[1]
    sig = sigma0_blocks.copy()
    pred = np.empty((d, d))
    tmp = np.empty((d, d))
    chol = np.zeros((d, d))
    inv = np.empty((d, d))
    total = 0.0
    for t in range(horizon):
        for b in range(k):
            # predict: A S A^T + W, symmetrized
            for i in range(d):
                for j in range(d):
                    acc = 0.0
                    for p in range(d):
                        acc += a_blocks[b, i, p] * sig[b, p, j]
                    tmp[i, j] = acc
            for i in range(d):
                for j in range(d):
                    acc = w_blocks[b, i, j]
                    for p in range(d):
                        acc += tmp[i, p] * a_blocks[b, j, p]
                    pred[i, j] = acc
            for i in range(d):
                for j in range(i):
                    v = 0.5 * (pred[i, j] + pred[j, i])
                    pred[i, j] = v
                    pred[j, i] = v
            zero = True
            for i in range(d):
                for j in range(d):
                    if info_sum[t, b, i, j] != 0.0:
                        zero = False
                        break
                if not zero:
                    break
            if zero:
                # no information this step: logdet terms cancel exactly
                for i in range(d):
                    for j in range(d):
                        sig[b, i, j] = pred[i, j]
                continue
            ld_p = _cholesky_logdet(pred, chol)
            if np.isnan(ld_p):
                raise np.linalg.LinAlgError("predicted covariance lost positive definiteness")
            _spd_inverse_from_chol(chol, inv)
            for i in range(d):
                for j in range(d):
                    tmp[i, j] = inv[i, j] + info_sum[t, b, i, j]
            ld_y = _cholesky_logdet(tmp, chol)
            if np.isnan(ld_y):
                raise np.linalg.LinAlgError("information matrix not positive definite")
            _spd_inverse_from_chol(chol, inv)
            for i in range(d):
                for j in range(d):
                    sig[b, i, j] = inv[i, j]
            # 0.5 * (logdet predicted - logdet updated); updated = Y^-1
            total += 0.5 * (ld_p + ld_y)
    return total


@njit(cache=True)
def _mi_batch(a_blocks, w_blocks, sigma0_blocks, info_stacks, out):
    """Standalone scores for a batch of candidates: info_stacks (C, T, k, d, d)."""
    for c in range(info_stacks.shape[0]):
        out[c] = _mi_stacked(a_blocks, w_blocks, sigma0_blocks, info_stacks[c])


def mi_stacked(a_blocks, w_blocks, sigma0_blocks, info_sum) -> float:
    return float(
        _mi_stacked(
            np.ascontiguousarray(a_blocks),
            np.ascontiguousarray(w_blocks),
            np.ascontiguousarray(sigma0_blocks),
            np.ascontiguousarray(info_sum),
        )
    )


def mi_batch(a_blocks, w_blocks, sigma0_blocks, info_stacks) -> np.ndarray:
    out = np.empty(info_stacks.shape[0])
    _mi_batch(
        np.ascontiguousarray(a_blocks),
        np.ascontiguousarray(w_blocks),
        np.ascontiguousarray(sigma0_blocks),
        np.ascontiguousarray(info_stacks),
        out,
    )
    return out
