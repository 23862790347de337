"""Feedback compression for a smart MS and the matching BS-side recovery.

The MS runs the decoupled tracker itself and feeds back, per tap, a few
projections of its posterior estimate.  Because the tracker's gain and
covariance recursion never touches data, the BS replays it from the shared
shift-step schedule (the mirror), derives the same projection bases, and
treats the received scalars as observations of the MS estimate, whose
innovation covariance it also knows in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import eigh_descending, ensure_psd, solve_hermitian
from .tracking import DecoupledInfo, KalmanState, mse_only_step


@dataclass(frozen=True)
class CompressionZ:
    """Per-tap feedback projection; columns are unit norm."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", z)
        if z.ndim != 2 or not 1 <= z.shape[1] <= z.shape[0]:
            raise ValidationError("projection must be tall with at least one column")
        norms = np.linalg.norm(z, axis=0)
        if float(np.abs(norms - 1.0).max()) > 1e-10:
            raise ValidationError("projection columns must be unit norm")

    @property
    def width(self) -> int:
        return self.matrix.shape[1]


def optimal_z(pred_mse: np.ndarray, width: int) -> CompressionZ:
    """Trace-optimal projection: dominant eigenvectors of the predicted MSE.

    Among all unit-norm-column projections of the given width, projecting
    the estimate onto the leading eigenvectors of the predicted error
    covariance minimizes the recovery error trace at the BS.
    """
    mat = np.asarray(pred_mse, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError("pred_mse must be square")
    if not 1 <= width <= mat.shape[0]:
        raise ValidationError("width must lie in [1, dim]")
    _, vecs = eigh_descending(mat)
    return CompressionZ(vecs[:, :width])


def compress_feedback(estimate: np.ndarray, z: CompressionZ) -> np.ndarray:
    """The scalars the MS reports for one tap."""
    est = np.asarray(estimate, dtype=complex)
    if est.shape != (z.matrix.shape[0],):
        raise ValidationError("estimate length must match the projection")
    return z.matrix.conj().T @ est


class BsMirror:
    """Data-free replica of the MS tracker's covariance recursion.

    Fed the same per-RS partition and measurement matrices as the MS, it
    reproduces the predicted covariances, Kalman gains and innovation
    covariances without seeing a single observation.
    """

    def __init__(self, lam_list: list[np.ndarray], rho: float, sigma2: float) -> None:
        if not lam_list:
            raise ValidationError("need at least one tap")
        self.lam_list = [np.asarray(lam, dtype=float) for lam in lam_list]
        self.mses = [np.diag(lam).astype(complex) for lam in self.lam_list]
        self.rho = float(rho)
        self.sigma2 = float(sigma2)
        self.time = -1

    def step(
        self, groups_idx: list[list[int]], a_blocks: list[np.ndarray]
    ) -> DecoupledInfo:
        """Advance one RS; returns the same side info the MS filter produces."""
        self.mses, info = mse_only_step(
            self.mses, groups_idx, a_blocks, self.lam_list, self.rho, self.sigma2
        )
        self.time += 1
        return info


def initial_recovery_state(lam: np.ndarray) -> KalmanState:
    """Stationary prior of one tap's recovery filter at the BS."""
    lam = np.asarray(lam, dtype=float)
    return KalmanState(np.zeros(len(lam), dtype=complex), np.diag(lam).astype(complex), -1)


def bs_recovery_predict(
    state: KalmanState,
    tap_gain: np.ndarray,
    innov_cov: np.ndarray,
    rho: float,
) -> KalmanState:
    """Advance one tap's recovery filter when no scalars arrive for it.

    Used when the per-round budget split assigns the tap zero feedback
    width: the tracked MS posterior still moves, so the recovery state
    must still be propagated through the shared dynamics.
    """
    est_pred = rho * state.estimate
    if state.time < 0:
        mse_pred = state.mse
    else:
        noise = tap_gain @ innov_cov @ tap_gain.conj().T
        mse_pred = ensure_psd(rho * rho * state.mse + noise)
    return KalmanState(est_pred, mse_pred, state.time + 1)


def bs_kalman_step_recovery(
    state: KalmanState,
    feedback: np.ndarray,
    z: CompressionZ,
    tap_gain: np.ndarray,
    innov_cov: np.ndarray,
    rho: float,
    sigma_o2: float,
) -> KalmanState:
    """One BS recovery step for a single tap.

    The tracked quantity is the MS posterior, which moves by the shared
    prediction plus the MS gain acting on its innovation; tap_gain and
    innov_cov come from the mirror and define the process noise term.
    sigma_o2 regularizes the gain solve and models the feedback link as
    effectively error free otherwise.
    """
    if sigma_o2 < 0:
        raise ValidationError("sigma_o2 must be non-negative")
    x = np.asarray(feedback, dtype=complex)
    if x.shape != (z.width,):
        raise ValidationError("feedback length must match the projection width")

    est_pred = rho * state.estimate
    if state.time < 0:
        mse_pred = state.mse
    else:
        noise = tap_gain @ innov_cov @ tap_gain.conj().T
        mse_pred = rho * rho * state.mse + noise

    zm = z.matrix
    s = sigma_o2 * np.eye(z.width) + zm.conj().T @ mse_pred @ zm
    gain = solve_hermitian(s, zm.conj().T @ mse_pred).conj().T
    est_new = est_pred + gain @ (x - zm.conj().T @ est_pred)
    mse_new = ensure_psd(mse_pred - gain @ (zm.conj().T @ mse_pred))
    return KalmanState(est_new, mse_new, state.time + 1)
