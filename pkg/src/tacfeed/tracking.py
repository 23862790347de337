"""Kalman tracking of the aligned observations at a smart MS.

Per tap, the spatial vector is re-expressed in the eigenbasis of its
covariance; the resulting coefficient vector follows the same Gauss-Markov
recursion with a diagonal stationary covariance, and a group observation
becomes a rotated-eigenbasis mix of the coefficient vectors of its taps.

Two filter flavours are provided.  The joint filter carries a full
(M T) x (M T) error covariance and is exact for any shift-step schedule;
it serves as the reference implementation.  The decoupled filter carries
one M x M block per tap, regroups the blocks at each RS to match the
current partition, and updates group by group, which is exact under a
fixed shift step and a block-diagonal approximation when the step varies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SpatialCovariance
from .errors import ValidationError
from .linalg import (
    block_diag,
    eigh_descending,
    ensure_psd,
    hermitize,
    solve_hermitian,
)


@dataclass(frozen=True)
class KldBasis:
    """Eigenbasis of one tap covariance: unitary vectors, eigenvalues descending."""

    vectors: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.vectors, dtype=complex)
        w = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "vectors", u)
        object.__setattr__(self, "values", w)
        if u.ndim != 2 or u.shape[0] != u.shape[1] or w.shape != (u.shape[0],):
            raise ValidationError("basis must be square with one value per vector")
        if np.any(w < 0):
            raise ValidationError("eigenvalues must be non-negative")
        if np.any(w[:-1] < w[1:]):
            raise ValidationError("eigenvalues must be sorted descending")

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def from_covariance(cls, cov: SpatialCovariance | np.ndarray) -> "KldBasis":
        mat = cov.matrix if isinstance(cov, SpatialCovariance) else np.asarray(cov)
        w, v = eigh_descending(mat)
        w = np.maximum(w, 0.0)
        rebuilt = (v * w) @ v.conj().T
        scale = max(float(np.abs(mat).max()), np.finfo(float).tiny)
        if float(np.abs(rebuilt - mat).max()) > 1e-10 * scale:
            raise ValidationError("eigendecomposition failed to reproduce the covariance")
        return cls(v, w)


def kld_transform(shifted_vec: np.ndarray, basis: KldBasis, shift: int) -> np.ndarray:
    """Coefficients of a rotated tap vector: undo the rotation, project."""
    g = np.asarray(shifted_vec, dtype=complex)
    if g.shape != (basis.dim,):
        raise ValidationError("vector length must match the basis dimension")
    return basis.vectors.conj().T @ np.roll(g, -shift % basis.dim)


def kld_inverse(coeffs: np.ndarray, basis: KldBasis, shift: int) -> np.ndarray:
    """Rotated tap vector from its eigen coefficients."""
    f = np.asarray(coeffs, dtype=complex)
    if f.shape != (basis.dim,):
        raise ValidationError("coefficient length must match the basis dimension")
    return np.roll(basis.vectors @ f, shift % basis.dim)


@dataclass(frozen=True)
class KalmanState:
    """Posterior estimate and error covariance after a correction step.

    time is the RS index of the last correction; -1 denotes the stationary
    prior before any observation.
    """

    estimate: np.ndarray
    mse: np.ndarray
    time: int

    def __post_init__(self) -> None:
        e = np.asarray(self.estimate, dtype=complex)
        m = np.asarray(self.mse, dtype=complex)
        object.__setattr__(self, "estimate", e)
        object.__setattr__(self, "mse", m)
        if e.ndim != 1 or m.shape != (len(e), len(e)):
            raise ValidationError("mse must be square and match the estimate length")


def initial_joint_state(lam_stack: np.ndarray) -> KalmanState:
    """Stationary prior for the joint filter.

    Stored as a time -1 posterior: because the prediction of a stationary
    posterior (0, Lambda) is again (0, Lambda), the first prediction
    reproduces the usual initialization exactly.
    """
    lam = np.asarray(lam_stack, dtype=float)
    return KalmanState(np.zeros(len(lam), dtype=complex), np.diag(lam).astype(complex), -1)


def initial_tap_states(lam_list: list[np.ndarray]) -> list[KalmanState]:
    """Stationary per-tap priors for the decoupled filter."""
    return [
        KalmanState(np.zeros(len(lam), dtype=complex), np.diag(np.asarray(lam, float)).astype(complex), -1)
        for lam in lam_list
    ]


def kalman_step_smart(
    state: KalmanState,
    obs: np.ndarray,
    a_blocks: list[np.ndarray],
    tap_order: np.ndarray,
    lam_stack: np.ndarray,
    rho: float,
    sigma2: float,
) -> KalmanState:
    """One predict-and-correct step of the joint filter.

    obs stacks the group observations in partition order; a_blocks holds
    the per-group measurement matrices in eigen coordinates; tap_order
    gives the support position of each stacked tap, so that permutations
    reduce to index gymnastics.  Exact for any shift-step schedule.
    """
    lam = np.asarray(lam_stack, dtype=float)
    order = np.asarray(tap_order, dtype=int)
    total = len(state.estimate)
    if len(lam) != total:
        raise ValidationError("lam_stack length must match the state dimension")
    m = a_blocks[0].shape[0]
    if sorted(order.tolist()) != list(range(total // m)):
        raise ValidationError("tap_order must be a permutation of the taps")
    idx = (order[:, None] * m + np.arange(m)[None, :]).ravel()

    est_pred = rho * state.estimate
    mse_pred = rho * rho * state.mse + (1.0 - rho * rho) * np.diag(lam)

    a = block_diag(a_blocks)
    mp = mse_pred[np.ix_(idx, idx)]
    a_mp = a @ mp
    s = hermitize(a_mp @ a.conj().T) + sigma2 * np.eye(a.shape[0])
    gain_perm = solve_hermitian(s, a_mp).conj().T
    gain = np.zeros((total, a.shape[0]), dtype=complex)
    gain[idx] = gain_perm

    innovation = np.asarray(obs, dtype=complex) - a @ est_pred[idx]
    est_new = est_pred + gain @ innovation
    mse_new = ensure_psd(mse_pred - gain @ (a @ mse_pred[idx, :]))
    return KalmanState(est_new, mse_new, state.time + 1)


@dataclass(frozen=True)
class DecoupledInfo:
    """Side products of one decoupled step, consumed by the feedback chain.

    pred_mses: per-tap predicted error covariances (support order).
    tap_gains: per-tap row block of the owning group's Kalman gain.
    innov_covs: per-group noise-free innovation covariance A M A^H.
    group_gains: per-group full Kalman gain.
    """

    pred_mses: list[np.ndarray]
    tap_gains: list[np.ndarray]
    innov_covs: list[np.ndarray]
    group_gains: list[np.ndarray]


def _decoupled_core(
    mses: list[np.ndarray],
    groups_idx: list[list[int]],
    a_blocks: list[np.ndarray],
    lam_list: list[np.ndarray],
    rho: float,
    sigma2: float,
) -> tuple[list[np.ndarray], DecoupledInfo]:
    num_taps = len(mses)
    if len(lam_list) != num_taps:
        raise ValidationError("need one eigenvalue vector per tap")
    if len(groups_idx) != len(a_blocks):
        raise ValidationError("need one measurement matrix per group")
    seen = sorted(q for g in groups_idx for q in g)
    if seen != list(range(num_taps)):
        raise ValidationError("groups must cover every tap exactly once")

    drive = 1.0 - rho * rho
    pred = [
        rho * rho * mse + drive * np.diag(np.asarray(lam, float))
        for mse, lam in zip(mses, lam_list)
    ]
    new: list[np.ndarray] = [np.empty(0)] * num_taps
    tap_gains: list[np.ndarray] = [np.empty(0)] * num_taps
    innov_covs: list[np.ndarray] = []
    group_gains: list[np.ndarray] = []

    for gi, a in zip(groups_idx, a_blocks):
        m = a.shape[0]
        mi = block_diag([pred[q] for q in gi])
        a_mi = a @ mi
        covd = hermitize(a_mi @ a.conj().T)
        s = covd + sigma2 * np.eye(m)
        ki = solve_hermitian(s, a_mi).conj().T
        mi_new = mi - ki @ a_mi
        for p, q in enumerate(gi):
            rows = slice(p * m, (p + 1) * m)
            new[q] = ensure_psd(mi_new[rows, rows])
            tap_gains[q] = ki[rows, :]
        innov_covs.append(covd)
        group_gains.append(ki)

    return new, DecoupledInfo(pred, tap_gains, innov_covs, group_gains)


def mse_only_step(
    mses: list[np.ndarray],
    groups_idx: list[list[int]],
    a_blocks: list[np.ndarray],
    lam_list: list[np.ndarray],
    rho: float,
    sigma2: float,
) -> tuple[list[np.ndarray], DecoupledInfo]:
    """Advance the decoupled error covariances without any observation.

    The gain and covariance recursion is data independent, so a replica fed
    with the same shift-step schedule reproduces the filter's gains bit for
    bit; this is what lets the BS mirror the MS filter.
    """
    return _decoupled_core(mses, groups_idx, a_blocks, lam_list, rho, sigma2)


def kalman_step_smart_decoupled(
    states: list[KalmanState],
    obs_groups: list[np.ndarray],
    groups_idx: list[list[int]],
    a_blocks: list[np.ndarray],
    lam_list: list[np.ndarray],
    rho: float,
    sigma2: float,
) -> tuple[list[KalmanState], DecoupledInfo]:
    """One predict-and-correct step of the per-tap decoupled filter."""
    if len(obs_groups) != len(groups_idx):
        raise ValidationError("need one observation per group")
    new_mses, info = _decoupled_core(
        [s.mse for s in states], groups_idx, a_blocks, lam_list, rho, sigma2
    )
    time = states[0].time + 1
    est_pred = [rho * s.estimate for s in states]
    new_est: list[np.ndarray] = [np.empty(0)] * len(states)
    for x, gi, a, ki in zip(obs_groups, groups_idx, a_blocks, info.group_gains):
        m = a.shape[0]
        stacked = np.concatenate([est_pred[q] for q in gi])
        innovation = np.asarray(x, dtype=complex) - a @ stacked
        updated = stacked + ki @ innovation
        for p, q in enumerate(gi):
            new_est[q] = updated[p * m : (p + 1) * m]
    new_states = [
        KalmanState(new_est[q], new_mses[q], time) for q in range(len(states))
    ]
    return new_states, info


def block_diag_project(mse: np.ndarray, block_size: int) -> np.ndarray:
    """Keep only the per-tap diagonal blocks of a stacked error covariance.

    Off-diagonal blocks are zeroed; each kept block is re-symmetrized and,
    if rounding pushed it off the PSD cone, eigenvalue-clamped.
    """
    mat = np.asarray(mse, dtype=complex)
    n = mat.shape[0]
    if mat.ndim != 2 or mat.shape[1] != n or n % block_size != 0:
        raise ValidationError("matrix size must be a multiple of block_size")
    out = np.zeros_like(mat)
    for p in range(n // block_size):
        sl = slice(p * block_size, (p + 1) * block_size)
        out[sl, sl] = ensure_psd(mat[sl, sl])
    return out
