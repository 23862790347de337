"""Downlink pilots and the time-domain aggregate channel (TAC).

All M antennas sound the band simultaneously.  Antenna m sends the common
unit-modulus base sequence with an extra per-tone phase ramp that acts as a
cyclic delay of m * delta samples.  De-ramping the received tones with the
base sequence and returning to the time domain therefore yields the TAC:
the superposition of every antenna's impulse response, each cyclically
delayed by its own multiple of delta, plus noise that stays white because
the DFT convention is unitary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .align import delta_allowed
from .channel import ChannelRealization, PathSupport
from .errors import AlignmentError, ValidationError
from .linalg import crandn


@dataclass(frozen=True)
class PilotConfig:
    """Shifted-FFT pilot parameters for one RS instant."""

    fft_size: int
    num_antennas: int
    base_sequence: np.ndarray
    delta: int

    def __post_init__(self) -> None:
        seq = np.asarray(self.base_sequence, dtype=complex)
        object.__setattr__(self, "base_sequence", seq)
        if seq.shape != (self.fft_size,):
            raise ValidationError("base sequence length must equal fft_size")
        if float(np.abs(np.abs(seq) - 1.0).max()) > 1e-12:
            raise ValidationError("base sequence must be unit modulus")
        if self.delta < 1:
            raise ValidationError("delta must be at least 1")
        if self.num_antennas * self.delta > self.fft_size:
            raise ValidationError(
                "num_antennas * delta must not exceed fft_size, otherwise the "
                "antenna ramps collide within one FFT period"
            )

    @property
    def shifts(self) -> np.ndarray:
        """Cyclic delay of each antenna's pilot, in samples."""
        return np.arange(self.num_antennas) * self.delta


def zadoff_chu(length: int, root: int = 1) -> np.ndarray:
    """Constant-amplitude zero-autocorrelation style base sequence."""
    if length < 1:
        raise ValidationError("length must be positive")
    k = np.arange(length)
    if length % 2:
        phase = k * (k + 1)
    else:
        phase = k * k
    return np.exp(-1j * np.pi * root * phase / length)


@dataclass(frozen=True)
class TacVector:
    """Time-domain aggregate channel observed at one MS, with its noise level."""

    samples: np.ndarray
    noise_var: float

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=complex)
        object.__setattr__(self, "samples", s)
        if s.ndim != 1:
            raise ValidationError("TAC samples must form a vector")
        if self.noise_var < 0:
            raise ValidationError("noise_var must be non-negative")


@dataclass(frozen=True)
class FoldedTac:
    """TAC truncated to M * delta samples with the structured excess folded in."""

    samples: np.ndarray
    delta: int

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=complex)
        object.__setattr__(self, "samples", s)
        if self.delta < 1 or s.ndim != 1 or len(s) % self.delta != 0:
            raise ValidationError("folded length must be a multiple of delta")

    @property
    def num_antennas(self) -> int:
        return len(self.samples) // self.delta


def cir_matrix(channel: ChannelRealization, support: PathSupport, fft_size: int) -> np.ndarray:
    """Per-antenna impulse responses, zero padded to the FFT length.

    Returns shape (num_antennas, fft_size); row m holds antenna m's taps at
    their delays.
    """
    if support.num_taps != channel.num_taps:
        raise ValidationError("channel and support disagree on the tap count")
    if support.delay_spread > fft_size:
        raise ValidationError("delay spread exceeds the FFT length")
    cirs = np.zeros((channel.num_antennas, fft_size), dtype=complex)
    cirs[:, list(support.delays)] = channel.taps.T
    return cirs


def rx_pilot_signal(
    channel: ChannelRealization,
    support: PathSupport,
    cfg: PilotConfig,
    noise_var: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Received pilot tones at the MS.

    Tone k carries sum_m exp(-2j pi k m delta / N) * s0(k) * H_m(k) plus
    white complex noise of variance noise_var, where H_m is the unitary DFT
    of antenna m's impulse response.
    """
    if channel.num_antennas != cfg.num_antennas:
        raise ValidationError("channel and pilot config disagree on antennas")
    if noise_var < 0:
        raise ValidationError("noise_var must be non-negative")
    n = cfg.fft_size
    cirs = cir_matrix(channel, support, n)
    spectra = np.fft.fft(cirs, axis=1) / np.sqrt(n)
    tones = np.arange(n)
    ramps = np.exp(-2j * np.pi * np.outer(cfg.shifts, tones) / n)
    y = cfg.base_sequence * (ramps * spectra).sum(axis=0)
    if noise_var > 0:
        y = y + np.sqrt(noise_var) * crandn(rng, n)
    return y


def compute_tac(y: np.ndarray, cfg: PilotConfig, noise_var: float) -> TacVector:
    """De-ramp the received tones and return to the time domain.

    Because the base sequence is unit modulus and the DFT is unitary, the
    noise in the result is white with the same variance as on the tones.
    """
    y = np.asarray(y, dtype=complex)
    if y.shape != (cfg.fft_size,):
        raise ValidationError("received vector length must equal fft_size")
    samples = np.fft.ifft(cfg.base_sequence.conj() * y) * np.sqrt(cfg.fft_size)
    return TacVector(samples, noise_var)


def cyclic_shift_matrix(tau: int, size: int) -> np.ndarray:
    """Permutation matrix that rotates a vector down by tau positions."""
    if size < 1:
        raise ValidationError("size must be positive")
    if not 0 <= tau < size:
        raise ValidationError("tau must lie in [0, size)")
    return np.roll(np.eye(size), tau, axis=0)


def fold_tac(
    tac: TacVector,
    delta: int,
    nu: int,
    num_antennas: int,
    check: bool = True,
) -> FoldedTac:
    """Compress the TAC to M * delta samples by folding the structured excess.

    Samples beyond M * delta, up to min((M - 1) delta + nu, N), are added
    onto the head of the kept window; they carry the antenna contributions
    whose rotation index passed M and belong there modulo M.  With check
    enabled the shift step must admit exact aligning for spread nu.
    """
    n = len(tac.samples)
    m = num_antennas
    if check and not delta_allowed(n, m, nu, delta):
        raise AlignmentError(
            f"delta={delta} does not align supports of spread {nu} with "
            f"N={n}, M={m}"
        )
    n_fold = m * delta
    if n_fold > n:
        raise ValidationError("M * delta exceeds the TAC length")
    n_ext = min((m - 1) * delta + nu, n)
    out = tac.samples[:n_fold].copy()
    excess = n_ext - n_fold
    if excess > 0:
        if excess > n_fold:
            raise ValidationError("excess exceeds the folded window; delta too small")
        out[:excess] += tac.samples[n_fold:n_ext]
    return FoldedTac(out, delta)


def sample_group(folded: FoldedTac, remainder: int, num_antennas: int) -> np.ndarray:
    """Length-M observation of one remainder group: every delta-th sample."""
    if not 0 <= remainder < folded.delta:
        raise ValidationError("remainder must lie in [0, delta)")
    if folded.num_antennas != num_antennas:
        raise ValidationError("folded length disagrees with the antenna count")
    return folded.samples[remainder :: folded.delta].copy()
