"""Single-shot MMSE estimation of the taps inside one observation group.

A group observation is the sum of rotated tap vectors plus white noise.
Conditioned on nothing but the covariances, the linear MMSE estimate of a
tap treats the other taps as colored interference; when the rotated
covariances are mutually orthogonal the estimate coincides with the
interference-free one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .linalg import hermitize, solve_hermitian

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class GroupObservation:
    """One group's length-M observation and the rotated tap covariances.

    shifted_covs[p] is the covariance of tap p's rotated spatial vector,
    i.e. the plain covariance conjugated by the tap's cyclic rotation.
    """

    x: np.ndarray
    shifted_covs: tuple[np.ndarray, ...]
    noise_var: float

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=complex)
        object.__setattr__(self, "x", x)
        covs = tuple(np.asarray(c, dtype=complex) for c in self.shifted_covs)
        object.__setattr__(self, "shifted_covs", covs)
        if x.ndim != 1:
            raise ValidationError("observation must be a vector")
        if not covs:
            raise ValidationError("at least one tap covariance is required")
        m = len(x)
        for c in covs:
            if c.shape != (m, m):
                raise ValidationError("covariance shapes must match the observation")
            scale = max(float(np.abs(c).max()), np.finfo(float).tiny)
            if float(np.abs(c - c.conj().T).max()) > 1e-10 * scale:
                raise ValidationError("covariances must be Hermitian")
        if self.noise_var < 0:
            raise ValidationError("noise_var must be non-negative")

    @property
    def num_taps(self) -> int:
        return len(self.shifted_covs)

    def gram(self) -> np.ndarray:
        """Covariance of the observation: sum of tap covariances plus noise."""
        m = len(self.x)
        total = np.zeros((m, m), dtype=complex)
        for c in self.shifted_covs:
            total = total + c
        return hermitize(total) + self.noise_var * np.eye(m)


def _check_invertible(s: np.ndarray) -> None:
    eigs = np.linalg.eigvalsh(hermitize(s))
    largest = max(float(eigs[-1]), np.finfo(float).tiny)
    if eigs[0] <= 0 or largest / max(float(eigs[0]), np.finfo(float).tiny) > _COND_LIMIT:
        raise NumericalError(
            "group covariance is singular or too ill-conditioned for a "
            "noise-free MMSE solve"
        )


def mmse_estimate(obs: GroupObservation, tap_index: int) -> np.ndarray:
    """Linear MMSE estimate of one rotated tap vector from the group sum."""
    if not 0 <= tap_index < obs.num_taps:
        raise ValidationError("tap_index out of range")
    s = obs.gram()
    if obs.noise_var == 0:
        _check_invertible(s)
    return obs.shifted_covs[tap_index] @ solve_hermitian(s, obs.x)


def mmse_error_cov(obs: GroupObservation, tap_index: int) -> np.ndarray:
    """Error covariance of the group MMSE estimate for one tap.

    Equals R - R S^{-1} R with R the tap's rotated covariance and S the
    observation covariance; Hermitian and dominated by R.
    """
    if not 0 <= tap_index < obs.num_taps:
        raise ValidationError("tap_index out of range")
    r = obs.shifted_covs[tap_index]
    s = obs.gram()
    if obs.noise_var == 0:
        _check_invertible(s)
    return hermitize(r - r @ solve_hermitian(s, r))
