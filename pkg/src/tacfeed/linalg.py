"""Dense linear-algebra helpers shared across the package.

Everything here operates on complex Hermitian matrices.  Solves go through
Cholesky (or a Hermitian-indefinite factorization as a fallback); matrices
are never inverted explicitly.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError

# Eigenvector entries below this magnitude are treated as zero when picking
# the component that fixes the phase convention.
_PHASE_TOL = 1e-10


def crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Circularly symmetric complex normal samples with unit variance."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def eigh_descending(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Eigenvector phases are canonicalized so that the first component whose
    magnitude exceeds a small threshold is real and positive.  This keeps
    eigenbases reproducible across independent computations of the same
    matrix, which the feedback protocol relies on.
    """
    w, v = np.linalg.eigh(hermitize(np.asarray(a)))
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    sig = np.abs(v) > _PHASE_TOL
    # argmax returns the first True row per column; all-zero columns keep 0.
    first = np.argmax(sig, axis=0)
    anchors = v[first, np.arange(v.shape[1])]
    mags = np.abs(anchors)
    phases = np.where(mags > 0, anchors / np.where(mags > 0, mags, 1.0), 1.0)
    return w, v * phases.conj()[None, :]


def clamp_psd(a: np.ndarray, rel_floor: float = 1e-10) -> np.ndarray:
    """Project a Hermitian matrix onto the PSD cone by clamping eigenvalues.

    Negative eigenvalues above ``-rel_floor * trace`` are treated as noise
    and clamped to zero; anything more negative is clamped as well, the
    threshold only documents the magnitude we consider benign.
    """
    w, v = np.linalg.eigh(hermitize(a))
    w = np.maximum(w, 0.0)
    return (v * w) @ v.conj().T


def ensure_psd(a: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Hermitize and, only if a Cholesky test fails, eigenvalue-clamp."""
    h = hermitize(a)
    t = float(np.trace(h).real)
    probe = h + (rel_tol * max(t, 0.0) + np.finfo(float).tiny) * np.eye(h.shape[0])
    try:
        np.linalg.cholesky(probe)
        return h
    except np.linalg.LinAlgError:
        return clamp_psd(h)


def matrix_sqrt_psd(a: np.ndarray) -> np.ndarray:
    """Hermitian square root; negative eigenvalues are clamped to zero."""
    w, v = np.linalg.eigh(hermitize(a))
    w = np.maximum(w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def inv_sqrt_psd(a: np.ndarray, floor: float) -> np.ndarray:
    """Inverse Hermitian square root with an eigenvalue floor.

    Eigenvalues below ``floor`` are raised to it before inversion so that
    near-singular whitening stays bounded.
    """
    if floor <= 0:
        raise ValidationError("floor must be positive")
    w, v = np.linalg.eigh(hermitize(a))
    w = np.maximum(w, floor)
    return (v / np.sqrt(w)) @ v.conj().T


def solve_hermitian(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b for Hermitian positive (semi)definite a.

    Tries a Cholesky solve first and falls back to the Hermitian-indefinite
    factorization; a singular system raises NumericalError.
    """
    a = hermitize(a)
    try:
        return scipy.linalg.solve(a, b, assume_a="pos")
    except np.linalg.LinAlgError:
        pass
    try:
        return scipy.linalg.solve(a, b, assume_a="her")
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular Hermitian system: {exc}") from exc


def block_diag(blocks: list[np.ndarray]) -> np.ndarray:
    """Complex block-diagonal assembly (scipy's version upcasts poorly)."""
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=complex)
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out
