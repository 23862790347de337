"""Quality metrics: frequency-domain reconstruction, NMSE, precoded sum rate.

The estimators work on time-domain tap vectors; the link-level figures of
merit live on the subcarrier grid.  This module bridges the two and scores
multi-user precoding built from the estimated responses.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import MetricError, ValidationError

_COND_LIMIT = 1e12
_LOAD_REL = 1e-10


def reconstruct_frequency(
    taps: np.ndarray, support: tuple[int, ...] | list[int], fft_size: int
) -> np.ndarray:
    """Per-antenna frequency response of a sparse impulse response.

    taps is (T, M) over the given delay support; the result is (N, M) on
    the subcarrier grid, using the same unit-norm transform convention as
    the pilot processing so that tap power and tone power agree.
    """
    g = np.atleast_2d(np.asarray(taps, dtype=complex))
    support = tuple(int(t) for t in support)
    if g.shape[0] != len(support):
        raise ValidationError("one tap row per support delay required")
    if any(not 0 <= t < fft_size for t in support):
        raise ValidationError("support delays must lie in [0, fft_size)")
    cir = np.zeros((fft_size, g.shape[1]), dtype=complex)
    cir[list(support), :] = g
    return np.fft.fft(cir, axis=0) / np.sqrt(fft_size)


def frequency_rows(
    taps: np.ndarray,
    support: tuple[int, ...] | list[int],
    fft_size: int,
    tones: np.ndarray | list[int],
) -> np.ndarray:
    """Frequency response restricted to the given tones, without a full FFT.

    Matches reconstruct_frequency row for row: entry (t, a) is the unit-norm
    transform of antenna a's sparse impulse response at tone t.
    """
    g = np.atleast_2d(np.asarray(taps, dtype=complex))
    support = tuple(int(t) for t in support)
    if g.shape[0] != len(support):
        raise ValidationError("one tap row per support delay required")
    tone_arr = np.asarray(tones, dtype=int)
    if np.any(tone_arr < 0) or np.any(tone_arr >= fft_size):
        raise ValidationError("tones must lie in [0, fft_size)")
    phases = np.exp(
        -2j * np.pi * np.outer(tone_arr, np.asarray(support)) / fft_size
    ) / np.sqrt(fft_size)
    return phases @ g


def nmse(truth: np.ndarray, estimate: np.ndarray) -> float:
    """Total squared error over total true power, across all axes."""
    t = np.asarray(truth, dtype=complex)
    e = np.asarray(estimate, dtype=complex)
    if t.shape != e.shape:
        raise ValidationError("truth and estimate shapes must match")
    power = float(np.sum(np.abs(t) ** 2))
    if power <= 0.0:
        raise MetricError("true signal has zero power; NMSE is undefined")
    return float(np.sum(np.abs(t - e) ** 2)) / power


@dataclass(frozen=True)
class PrecoderSet:
    """Per-tone precoding columns, one per user, jointly unit power."""

    mode: str
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if self.mode not in ("mf", "zf"):
            raise ValidationError(f"unknown precoder mode {self.mode!r}")
        w = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", w)
        if w.ndim != 2 or w.shape[1] < 1:
            raise ValidationError("precoder needs at least one column")


def build_precoders(channel_rows: np.ndarray, mode: str) -> PrecoderSet:
    """Matched-filter or zero-forcing precoders from per-user channel rows.

    channel_rows is (K, M): one row per user at a single tone.  Columns are
    scaled to norm 1/sqrt(K) so the set radiates unit total power.  A
    near-singular user Gram matrix gets a small diagonal load (with a
    warning) instead of failing.
    """
    h = np.atleast_2d(np.asarray(channel_rows, dtype=complex))
    k = h.shape[0]
    if mode == "mf":
        w = h.conj().T
    elif mode == "zf":
        gram = h @ h.conj().T
        eig = np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))
        if eig[0] <= 0 or eig[-1] / eig[0] > _COND_LIMIT:
            warnings.warn(
                "ill-conditioned user Gram matrix; applying diagonal loading",
                RuntimeWarning,
                stacklevel=2,
            )
            gram = gram + _LOAD_REL * max(float(np.trace(gram).real), 1.0) * np.eye(k)
        w = h.conj().T @ np.linalg.solve(gram, np.eye(k))
    else:
        raise ValidationError(f"unknown precoder mode {mode!r}")
    norms = np.linalg.norm(w, axis=0)
    if np.any(norms <= 0):
        raise MetricError("a user channel row is zero; cannot normalize precoder")
    return PrecoderSet(mode, w / (norms * np.sqrt(k)))


def spectral_efficiency(
    channel_rows: np.ndarray, precoders: PrecoderSet, noise_var: float
) -> np.ndarray:
    """Per-user rate log2(1 + SINR) at one tone under the given precoders."""
    if noise_var < 0:
        raise ValidationError("noise_var must be non-negative")
    h = np.atleast_2d(np.asarray(channel_rows, dtype=complex))
    w = precoders.matrix
    if w.shape != (h.shape[1], h.shape[0]):
        raise ValidationError("precoder shape must be (num_antennas, num_users)")
    cross = np.abs(h @ w) ** 2
    signal = np.diag(cross).copy()
    interference = cross.sum(axis=1) - signal
    return np.log2(1.0 + signal / (interference + noise_var))


def precode_and_se(
    frequency_responses: np.ndarray,
    noise_var: float,
    tones: np.ndarray | list[int] | None = None,
    design_responses: np.ndarray | None = None,
) -> tuple[float, float]:
    """Tone-averaged sum rate under matched-filter and zero-forcing precoding.

    frequency_responses is (K, N, M) and carries the true channels the
    rates are evaluated on; design_responses, of the same shape, feeds the
    precoder construction and defaults to the truth (perfect CSI).
    Returns (mf_sum_rate, zf_sum_rate).
    """
    hf = np.asarray(frequency_responses, dtype=complex)
    if hf.ndim != 3:
        raise ValidationError("frequency_responses must be (num_users, tones, antennas)")
    if design_responses is None:
        design = hf
    else:
        design = np.asarray(design_responses, dtype=complex)
        if design.shape != hf.shape:
            raise ValidationError("design responses must match the truth in shape")
    tone_list = range(hf.shape[1]) if tones is None else [int(t) for t in tones]
    mf_total = 0.0
    zf_total = 0.0
    count = 0
    for t in tone_list:
        rows = hf[:, t, :]
        drows = design[:, t, :]
        mf_total += float(
            spectral_efficiency(rows, build_precoders(drows, "mf"), noise_var).sum()
        )
        zf_total += float(
            spectral_efficiency(rows, build_precoders(drows, "zf"), noise_var).sum()
        )
        count += 1
    if count == 0:
        raise MetricError("no tones evaluated")
    return mf_total / count, zf_total / count
