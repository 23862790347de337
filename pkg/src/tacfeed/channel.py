"""Ground-truth channel synthesis.

A user's downlink channel is a sparse set of delay taps.  Each tap carries a
length-M spatial vector whose covariance follows the one-ring scattering
model for a half-wavelength ULA, and the vectors evolve in time as a
first-order Gauss-Markov process that is stationary tap by tap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError
from .linalg import crandn, hermitize, matrix_sqrt_psd

_QUAD_REL_TOL = 1e-9
_QUAD_MAX_NODES = 1 << 21


@dataclass(frozen=True)
class PathSupport:
    """Delay-domain support of one user's channel.

    delays are sample-spaced, strictly increasing and non-negative;
    delay_spread is the exclusive upper bound nu on any delay.
    """

    delays: tuple[int, ...]
    delay_spread: int

    def __post_init__(self) -> None:
        delays = tuple(int(d) for d in self.delays)
        object.__setattr__(self, "delays", delays)
        if len(delays) == 0:
            raise ValidationError("support must contain at least one delay")
        if any(d < 0 for d in delays):
            raise ValidationError("delays must be non-negative")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValidationError("delays must be strictly increasing")
        if self.delay_spread <= delays[-1]:
            raise ValidationError(
                f"delay_spread {self.delay_spread} must exceed the largest delay {delays[-1]}"
            )

    @property
    def num_taps(self) -> int:
        return len(self.delays)


@dataclass(frozen=True)
class OneRingConfig:
    """One-ring scattering geometry for a single tap.

    aod_deg is the mean azimuth angle of departure, as_deg the angular
    half-spread, both in degrees.  spacing_wavelengths is the ULA element
    spacing in carrier wavelengths.
    """

    aod_deg: float
    as_deg: float
    num_antennas: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self) -> None:
        if not -90.0 <= self.aod_deg <= 90.0:
            raise ValidationError("aod_deg must lie in [-90, 90]")
        if self.as_deg <= 0:
            raise ValidationError("as_deg must be positive")
        if self.num_antennas < 1:
            raise ValidationError("num_antennas must be at least 1")
        if self.spacing_wavelengths <= 0:
            raise ValidationError("spacing_wavelengths must be positive")


@dataclass(frozen=True)
class SpatialCovariance:
    """Spatial covariance of one tap; Hermitian PSD with trace M * tap_power."""

    matrix: np.ndarray
    tap_power: float

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("covariance must be square")
        scale = max(float(np.abs(m).max()), np.finfo(float).tiny)
        if float(np.abs(m - m.conj().T).max()) > 1e-12 * scale:
            raise ValidationError("covariance must be Hermitian")
        eigs = np.linalg.eigvalsh(hermitize(m))
        if eigs[0] < -1e-10 * max(eigs[-1], np.finfo(float).tiny):
            raise ValidationError("covariance must be positive semidefinite")
        expected = m.shape[0] * self.tap_power
        if abs(float(np.trace(m).real) - expected) > 1e-8 * max(expected, 1.0):
            raise ValidationError("trace must equal num_antennas * tap_power")

    @property
    def num_antennas(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ChannelRealization:
    """Spatial vectors of every tap at one reference-signal instant.

    taps has shape (num_taps, num_antennas); row p belongs to the p-th
    delay of the owning PathSupport.
    """

    taps: np.ndarray
    time_index: int = 0
    _skip_checks: bool = field(default=False, repr=False)

    def __post_init__(self) -> None:
        t = np.asarray(self.taps, dtype=complex)
        object.__setattr__(self, "taps", t)
        if not self._skip_checks and t.ndim != 2:
            raise ValidationError("taps must be a (num_taps, num_antennas) array")

    @property
    def num_taps(self) -> int:
        return self.taps.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.taps.shape[1]


def _one_ring_lags(cfg: OneRingConfig) -> np.ndarray:
    """First covariance column by adaptive composite Simpson quadrature.

    The integrand exp(-2j pi d k sin(theta)) is averaged over the angular
    interval for every antenna lag k at once; the node count doubles until
    the whole lag vector changes by less than the relative tolerance.
    """
    center = np.deg2rad(cfg.aod_deg)
    half = np.deg2rad(cfg.as_deg)
    lags = np.arange(cfg.num_antennas)

    def simpson(num_intervals: int) -> np.ndarray:
        theta = np.linspace(center - half, center + half, num_intervals + 1)
        weights = np.ones(num_intervals + 1)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        phase = np.exp(-2j * np.pi * cfg.spacing_wavelengths * np.outer(np.sin(theta), lags))
        integral = (2 * half / (3 * num_intervals)) * (weights @ phase)
        return integral / (2 * half)

    n = 64
    prev = simpson(n)
    while n <= _QUAD_MAX_NODES:
        n *= 2
        cur = simpson(n)
        err = float(np.abs(cur - prev).max())
        if err <= _QUAD_REL_TOL * max(float(np.abs(cur).max()), np.finfo(float).tiny):
            return cur
        prev = cur
    raise NumericalError(
        f"one-ring quadrature did not converge below rel tol {_QUAD_REL_TOL}"
    )


def one_ring_covariance(cfg: OneRingConfig, tap_power: float = 1.0) -> SpatialCovariance:
    """Spatial covariance of a tap under the one-ring model.

    Entry (p, q) is tap_power times the average of
    exp(-2j pi d (p - q) sin(theta)) over theta in the angular interval.
    The result is Hermitian Toeplitz with tap_power on the diagonal.
    """
    if tap_power <= 0:
        raise ValidationError("tap_power must be positive")
    col = tap_power * _one_ring_lags(cfg)
    mat = scipy.linalg.toeplitz(col, col.conj())
    return SpatialCovariance(hermitize(mat), tap_power)


def matrix_sqrt(cov: SpatialCovariance) -> np.ndarray:
    """Hermitian square root of a covariance, for driving-noise coloring."""
    return matrix_sqrt_psd(cov.matrix)


def generate_initial(
    covs: list[SpatialCovariance], rng: np.random.Generator
) -> ChannelRealization:
    """Draw the tap vectors from their stationary distribution at time 0."""
    taps = np.stack([matrix_sqrt(c) @ crandn(rng, c.num_antennas) for c in covs])
    return ChannelRealization(taps, time_index=0)


def evolve(
    prev: ChannelRealization,
    rho: float,
    cov_roots: list[np.ndarray],
    rng: np.random.Generator,
) -> ChannelRealization:
    """One Gauss-Markov update of every tap vector.

    Each tap p moves to rho * g_p + sqrt(1 - rho^2) * root_p @ u with u a
    fresh standard complex normal vector, which preserves the stationary
    covariance root_p @ root_p^H.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValidationError("rho must lie in [0, 1]")
    if len(cov_roots) != prev.num_taps:
        raise ValidationError("need one covariance root per tap")
    drive = np.sqrt(1.0 - rho * rho)
    taps = np.empty_like(prev.taps)
    for p, root in enumerate(cov_roots):
        taps[p] = rho * prev.taps[p] + drive * (root @ crandn(rng, prev.num_antennas))
    return ChannelRealization(taps, time_index=prev.time_index + 1, _skip_checks=True)
