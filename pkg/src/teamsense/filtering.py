"""Kalman covariance recursion and mutual-information scoring.

Target state is tracked as a stack of independent blocks (one block per
target), so every covariance here is either a single (d, d) matrix or a
(k, d, d) stack. All of the information content of a candidate plan is
computed from the covariance recursion alone: predict with the target
model, then fuse the information matrices contributed by whichever
robots observe the targets. No measurement values are ever sampled.

Covariances must stay symmetric positive definite. A non-PD matrix
showing up anywhere in the recursion is a bug in the caller, so it
raises instead of being clamped or jittered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import block_diag

# Information matrices are plain float64 ndarrays, shape (d, d), PSD.
InfoMatrix = np.ndarray


def sym(m: np.ndarray) -> np.ndarray:
    """Symmetrize, batched over leading dimensions."""
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def logdet(m: np.ndarray) -> float:
    """Log determinant of an SPD matrix via Cholesky.

    Raises np.linalg.LinAlgError if the matrix is not positive definite.
    """
    chol = np.linalg.cholesky(m)
    return 2.0 * float(np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1))))


def spd_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix (or stack of them) through Cholesky factors.

    Cholesky both verifies positive definiteness and gives the factors for
    the inverse, so indefinite input fails loudly here.
    """
    chol = np.linalg.cholesky(m)
    inv_chol = np.linalg.inv(chol)
    return np.swapaxes(inv_chol, -1, -2) @ inv_chol


def _logdet_stack(m: np.ndarray) -> np.ndarray:
    """Per-block log determinants of a (k, d, d) SPD stack."""
    chol = np.linalg.cholesky(m)
    return 2.0 * np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1)), axis=-1)


@dataclass(frozen=True)
class TargetModel:
    """Linear-Gaussian target dynamics, stored block-per-target.

    a_blocks, w_blocks: (k, d, d) for constant dynamics, or (T, k, d, d)
    for per-step dynamics. Both scenario families use constants; the
    per-step form exists for completeness and only runs on the plain
    numpy path.
    """

    a_blocks: np.ndarray
    w_blocks: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.a_blocks, dtype=np.float64)
        w = np.asarray(self.w_blocks, dtype=np.float64)
        if a.shape != w.shape or a.ndim not in (3, 4) or a.shape[-1] != a.shape[-2]:
            raise ValueError(f"inconsistent model shapes {a.shape} vs {w.shape}")
        if not np.allclose(w, np.swapaxes(w, -1, -2), atol=1e-12):
            raise ValueError("process noise must be symmetric")
        # PSD check on W; eigvalsh is cheap at these block sizes
        eigs = np.linalg.eigvalsh(sym(w))
        if np.min(eigs) < -1e-10:
            raise ValueError("process noise must be positive semidefinite")
        object.__setattr__(self, "a_blocks", np.ascontiguousarray(a))
        object.__setattr__(self, "w_blocks", np.ascontiguousarray(sym(w)))

    @property
    def is_constant(self) -> bool:
        return self.a_blocks.ndim == 3

    @property
    def n_blocks(self) -> int:
        return self.a_blocks.shape[-3]

    @property
    def block_dim(self) -> int:
        return self.a_blocks.shape[-1]

    @property
    def dim(self) -> int:
        return self.n_blocks * self.block_dim

    def a_at(self, t: int) -> np.ndarray:
        return self.a_blocks if self.is_constant else self.a_blocks[t]

    def w_at(self, t: int) -> np.ndarray:
        return self.w_blocks if self.is_constant else self.w_blocks[t]

    def full_a(self, t: int = 0) -> np.ndarray:
        return block_diag(*self.a_at(t))

    def full_w(self, t: int = 0) -> np.ndarray:
        return block_diag(*self.w_at(t))


@dataclass(frozen=True)
class BeliefCov:
    """A target covariance tagged with the time index it belongs to."""

    sigma: np.ndarray
    t: int = 0

    def __post_init__(self) -> None:
        s = np.asarray(self.sigma, dtype=np.float64)
        if s.ndim not in (2, 3) or s.shape[-1] != s.shape[-2]:
            raise ValueError(f"covariance shape {s.shape} is not square")
        if not np.allclose(s, np.swapaxes(s, -1, -2), atol=1e-9):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "sigma", np.ascontiguousarray(sym(s)))


def kf_predict(sigma: np.ndarray, model: TargetModel, t: int = 0) -> np.ndarray:
    """One prediction step on the full stacked covariance: A S A^T + W."""
    a = model.full_a(t)
    w = model.full_w(t)
    if sigma.shape != a.shape:
        raise ValueError(f"covariance shape {sigma.shape} does not match model dim {a.shape}")
    return sym(a @ sigma @ a.T + w)


def kf_update_info(sigma: np.ndarray, infos: Sequence[InfoMatrix]) -> np.ndarray:
    """Information-form measurement update.

    Returns (sigma^-1 + sum_i M_i)^-1, symmetrized. An empty info list is
    the identity update. Raises np.linalg.LinAlgError when sigma is not
    positive definite.
    """
    if len(infos) == 0:
        return sym(np.array(sigma, dtype=np.float64))
    y = spd_inverse(sigma)
    for m in infos:
        if m.shape != y.shape:
            raise ValueError(f"info matrix shape {m.shape} does not match state dim {y.shape}")
        y = y + m
    return sym(spd_inverse(y))


def mi_from_info_stacks(
    a_blocks: np.ndarray,
    w_blocks: np.ndarray,
    sigma0_blocks: np.ndarray,
    info_sum: np.ndarray,
) -> float:
    """Mutual information accumulated over a horizon, plain numpy path.

    a_blocks, w_blocks, sigma0_blocks: (k, d, d). info_sum: (T, k, d, d),
    the summed information matrices of all selected trajectories at each
    step. Steps and blocks that receive no information contribute exactly
    zero, so an empty selection scores exactly 0.0.
    """
    horizon = info_sum.shape[0]
    sig = np.array(sigma0_blocks, dtype=np.float64)
    total = 0.0
    for t in range(horizon):
        a = a_blocks if a_blocks.ndim == 3 else a_blocks[t]
        w = w_blocks if w_blocks.ndim == 3 else w_blocks[t]
        sig = sym(np.matmul(np.matmul(a, sig), np.swapaxes(a, -1, -2)) + w)
        m_t = info_sum[t]
        if not m_t.any():
            continue
        active = np.abs(m_t).sum(axis=(-1, -2)) > 0.0
        p_act = sig[active]
        chol_p = np.linalg.cholesky(p_act)
        ld_p = 2.0 * np.sum(np.log(np.diagonal(chol_p, axis1=-2, axis2=-1)), axis=-1)
        inv_chol = np.linalg.inv(chol_p)
        p_inv = np.swapaxes(inv_chol, -1, -2) @ inv_chol
        y = p_inv + m_t[active]
        chol_y = np.linalg.cholesky(y)
        ld_y = 2.0 * np.sum(np.log(np.diagonal(chol_y, axis1=-2, axis2=-1)), axis=-1)
        inv_chol_y = np.linalg.inv(chol_y)
        sig[active] = sym(np.swapaxes(inv_chol_y, -1, -2) @ inv_chol_y)
        # per step: 0.5 * (logdet predicted - logdet updated), and
        # logdet updated = -logdet(Y) because updated = Y^-1
        total += 0.5 * float(np.sum(ld_p + ld_y))
    return total


def mutual_information(
    trajectories: Iterable,
    model: TargetModel,
    prior: BeliefCov | np.ndarray,
    horizon: int,
) -> float:
    """Mutual information between target states and the measurements that
    the given trajectories would collect over the horizon.

    Each trajectory must expose an info_stack of shape (T, k, d, d); those
    are precomputed once per candidate by the world module. The empty
    collection scores exactly 0.0.
    """
    sigma0 = prior.sigma if isinstance(prior, BeliefCov) else np.asarray(prior, dtype=np.float64)
    if sigma0.ndim == 2:
        k, d = model.n_blocks, model.block_dim
        sigma0 = sigma0.reshape(k, d, d) if k == 1 else _split_blocks(sigma0, k, d)
    stacks = [traj.info_stack for traj in trajectories]
    if not stacks:
        return 0.0
    info_sum = stacks[0].copy()
    for s in stacks[1:]:
        info_sum += s
    if info_sum.shape[0] != horizon:
        raise ValueError(f"info stacks cover {info_sum.shape[0]} steps, expected {horizon}")
    return mi_from_info_stacks(model.a_blocks, model.w_blocks, sigma0, info_sum)


def _split_blocks(full: np.ndarray, k: int, d: int) -> np.ndarray:
    """Split a block-diagonal (k*d, k*d) matrix into its (k, d, d) stack."""
    out = np.empty((k, d, d))
    for j in range(k):
        out[j] = full[j * d : (j + 1) * d, j * d : (j + 1) * d]
    return out
