"""Shared helpers for the test suite.

Oracles here are written against the math, not against the package: index
arithmetic uses explicit modular loops and covariances are built from first
principles, so agreement with the library is evidence rather than tautology.
"""

from __future__ import annotations

import numpy as np
import pytest


def crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    """Random Hermitian PSD matrix with unit-order trace."""
    r = n if rank is None else rank
    a = crandn(rng, n, r)
    mat = a @ a.conj().T / r
    return (mat + mat.conj().T) / 2.0


def random_unit_modulus(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(n))


def unitary_dft(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def circulant_cov(spectrum: np.ndarray) -> np.ndarray:
    """Circulant PSD matrix with the given (nonnegative) DFT spectrum."""
    f = unitary_dft(len(spectrum))
    mat = (f * np.asarray(spectrum, dtype=float)) @ f.conj().T
    return (mat + mat.conj().T) / 2.0


def random_support(rng: np.random.Generator, nu: int, count: int) -> tuple[int, ...]:
    return tuple(sorted(rng.choice(nu, size=count, replace=False).tolist()))


def shift_and_sum_oracle(cirs: np.ndarray, delta: int) -> np.ndarray:
    """Direct evaluation of the aggregated, antenna-shifted impulse response.

    cirs has shape (M, N); antenna m contributes its response rotated down
    by m*delta.  Pure modular index arithmetic on purpose.
    """
    m_ant, n = cirs.shape
    out = np.zeros(n, dtype=complex)
    for m in range(m_ant):
        for i in range(n):
            out[i] += cirs[m, (i - m * delta) % n]
    return out


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0xC0FFEE)
