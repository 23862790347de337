"""BS-side tracking with compressed uplink reports from a dumb MS.

The MS only folds, samples and linearly compresses its TAC observation;
all statistical knowledge lives at the BS, which runs a Kalman filter over
the stacked tap vectors.  The compression matrix is designed at the BS
from the predicted error covariance, either jointly, per observation
group, from a DFT codebook whose column indices are cheap to signal, or
as a random Householder reflector baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .align import GroupPartition
from .errors import ProtocolError, ValidationError
from .linalg import (
    block_diag,
    eigh_descending,
    ensure_psd,
    hermitize,
    inv_sqrt_psd,
    solve_hermitian,
)
from .pilots import TacVector, fold_tac, sample_group
from .tracking import KalmanState

_MODES = ("optimal-joint", "optimal-block", "dft-codebook", "householder-baseline")


@dataclass(frozen=True)
class CompressionQ:
    """Uplink compression matrix, possibly with per-group block structure.

    matrix maps the stacked group observations (length M G) to the L
    reported scalars.  For block-structured modes the per-group blocks and
    their column budgets are kept alongside.
    """

    mode: str
    matrix: np.ndarray
    blocks: tuple[np.ndarray, ...] | None = None
    group_budgets: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValidationError(f"unknown compression mode {self.mode!r}")
        q = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", q)
        if q.ndim != 2 or q.shape[1] < 1:
            raise ValidationError("compression matrix needs at least one column")
        norms = np.linalg.norm(q, axis=0)
        if float(np.abs(norms - 1.0).max()) > 1e-10:
            raise ValidationError("compression columns must be unit norm")
        if self.blocks is not None:
            blocks = tuple(np.asarray(b, dtype=complex) for b in self.blocks)
            object.__setattr__(self, "blocks", blocks)
            budgets = tuple(b.shape[1] for b in blocks)
            if self.group_budgets is None:
                object.__setattr__(self, "group_budgets", budgets)
            elif tuple(self.group_budgets) != budgets:
                raise ValidationError("group budgets disagree with the blocks")
            if sum(budgets) != q.shape[1]:
                raise ValidationError("blocks do not add up to the matrix width")

    @property
    def budget(self) -> int:
        return self.matrix.shape[1]


def initial_dumb_state(rbar: np.ndarray) -> KalmanState:
    """Stationary prior over the stacked tap vectors.

    Stored as a time -1 posterior; predicting a stationary posterior
    reproduces the prior, so the first step starts from (0, rbar) exactly.
    """
    r = np.asarray(rbar, dtype=complex)
    return KalmanState(np.zeros(r.shape[0], dtype=complex), r.copy(), -1)


def dumb_predict(
    state: KalmanState, rbar: np.ndarray, rho: float
) -> tuple[np.ndarray, np.ndarray]:
    """Prediction half-step of the BS filter."""
    est = rho * state.estimate
    mse = rho * rho * state.mse + (1.0 - rho * rho) * np.asarray(rbar, dtype=complex)
    return est, mse


def _stacked_element_indices(tap_order: np.ndarray, block: int) -> np.ndarray:
    order = np.asarray(tap_order, dtype=int)
    return (order[:, None] * block + np.arange(block)[None, :]).ravel()


def bs_kalman_step_dumb(
    state: KalmanState,
    feedback: np.ndarray,
    q: CompressionQ,
    b_blocks: list[np.ndarray],
    tap_order: np.ndarray,
    rbar: np.ndarray,
    rho: float,
    sigma2: float,
) -> KalmanState:
    """One predict-and-correct step of the BS filter on compressed reports.

    The effective measurement is Q^H applied to the stacked rotated tap
    sums, with report noise covariance sigma2 * Q^H Q inherited from the
    TAC noise through the linear compression.
    """
    x = np.asarray(feedback, dtype=complex)
    if x.shape != (q.budget,):
        raise ValidationError("feedback length must match the compression budget")
    m = b_blocks[0].shape[0]
    est_pred, mse_pred = dumb_predict(state, rbar, rho)

    # W = Pi^H B^H Q maps support-ordered states to the reported scalars.
    v_rows: list[np.ndarray] = []
    at = 0
    for b in b_blocks:
        v_rows.append(b.conj().T @ q.matrix[at : at + m, :])
        at += m
    if at != q.matrix.shape[0]:
        raise ValidationError("compression rows disagree with the group count")
    v_stacked = np.vstack(v_rows)
    w = np.empty_like(v_stacked)
    w[_stacked_element_indices(tap_order, m)] = v_stacked

    s = sigma2 * (q.matrix.conj().T @ q.matrix) + w.conj().T @ mse_pred @ w
    gain = solve_hermitian(hermitize(s), w.conj().T @ mse_pred).conj().T
    innovation = x - w.conj().T @ est_pred
    est_new = est_pred + gain @ innovation
    mse_new = hermitize(mse_pred - gain @ (w.conj().T @ mse_pred))
    return KalmanState(est_new, mse_new, state.time + 1)


def _whitened_rayleigh(
    pred: np.ndarray, b: np.ndarray, sigma2: float
) -> tuple[np.ndarray, np.ndarray]:
    """Whitener and score matrix whose top eigenvectors minimize the MSE trace.

    With A = B pred^2 B^H and Bb = sigma2 I + B pred B^H, the achievable
    trace reduction of any unit-column compression Q equals the blockwise
    Rayleigh quotient of C = Bb^{-1/2} A Bb^{-1/2} at Qtilde = Bb^{1/2} Q.
    """
    bm = b @ pred
    a = bm @ bm.conj().T
    bb = hermitize(bm @ b.conj().T) + sigma2 * np.eye(b.shape[0])
    floor = max(sigma2 / 100.0, 1e-14 * max(float(np.trace(bb).real), 1.0) / bb.shape[0])
    white = inv_sqrt_psd(bb, floor)
    c = hermitize(white @ a @ white)
    return white, c


def optimal_q(
    pred_mse: np.ndarray,
    b_blocks: list[np.ndarray],
    tap_order: np.ndarray,
    sigma2: float,
    budget: int,
) -> CompressionQ:
    """Jointly optimal compression across all groups.

    Whitens the stacked observation, keeps the leading eigenvectors of the
    whitened score matrix, un-whitens and normalizes the columns.  The
    resulting trace reduction equals the sum of the leading eigenvalues
    and no unit-column matrix of the same width does better.
    """
    m = b_blocks[0].shape[0]
    idx = _stacked_element_indices(tap_order, m)
    pred = np.asarray(pred_mse, dtype=complex)[np.ix_(idx, idx)]
    b = block_diag(b_blocks)
    if not 1 <= budget <= b.shape[0]:
        raise ValidationError("budget must lie in [1, M * G]")
    white, c = _whitened_rayleigh(pred, b, sigma2)
    _, vecs = eigh_descending(c)
    q = white @ vecs[:, :budget]
    q = q / np.linalg.norm(q, axis=0, keepdims=True)
    return CompressionQ("optimal-joint", q)


def optimal_q_block(
    group_pred_mses: list[np.ndarray],
    b_blocks: list[np.ndarray],
    sigma2: float,
    budgets: list[int] | tuple[int, ...],
) -> CompressionQ:
    """Per-group optimal compression.

    Exact when the permuted predicted covariance is block diagonal across
    groups, which holds under a fixed shift step with per-group
    compression, and serves as the projected approximation otherwise.
    """
    if not len(group_pred_mses) == len(b_blocks) == len(budgets):
        raise ValidationError("need one predicted covariance and budget per group")
    blocks: list[np.ndarray] = []
    for pred, b, width in zip(group_pred_mses, b_blocks, budgets):
        if width < 0 or width > b.shape[0]:
            raise ValidationError("group budgets must lie in [0, M]")
        if width == 0:
            blocks.append(np.zeros((b.shape[0], 0), dtype=complex))
            continue
        white, c = _whitened_rayleigh(np.asarray(pred, dtype=complex), b, sigma2)
        _, vecs = eigh_descending(c)
        q = white @ vecs[:, :width]
        blocks.append(q / np.linalg.norm(q, axis=0, keepdims=True))
    if sum(b.shape[1] for b in blocks) < 1:
        raise ValidationError("total budget must be at least 1")
    return CompressionQ("optimal-block", block_diag(blocks), tuple(blocks))


def allocate_budget(
    score_lists: list[np.ndarray] | list[list[float]], total: int
) -> list[int]:
    """Split a scalar budget across groups by global greedy score ranking.

    Ties break toward the lower group index, then the lower score index,
    so the split is deterministic.
    """
    if total < 0:
        raise ValidationError("total budget must be non-negative")
    ranked = sorted(
        ((-float(s), g, j) for g, scores in enumerate(score_lists) for j, s in enumerate(scores)),
    )
    if total > len(ranked):
        raise ValidationError("budget exceeds the number of available directions")
    counts = [0] * len(score_lists)
    for _, g, _ in ranked[:total]:
        counts[g] += 1
    return counts


@lru_cache(maxsize=8)
def _dft_matrix(m: int) -> np.ndarray:
    k = np.arange(m)
    return np.exp(-2j * np.pi * np.outer(k, k) / m) / np.sqrt(m)


def _b_from_shifts(shifts: tuple[int, ...] | list[int], m: int) -> np.ndarray:
    return np.hstack([np.roll(np.eye(m), z % m, axis=0) for z in shifts])


def dft_rayleigh_scores(
    group_pred_mse: np.ndarray, shifts: tuple[int, ...] | list[int], sigma2: float
) -> np.ndarray:
    """Score of every DFT column against one group's whitened score matrix."""
    pred = np.asarray(group_pred_mse, dtype=complex)
    m = pred.shape[0] // len(shifts)
    if pred.shape != (m * len(shifts), m * len(shifts)):
        raise ValidationError("group covariance must be square of size M * P")
    b = _b_from_shifts(shifts, m)
    _, c = _whitened_rayleigh(pred, b, sigma2)
    f = _dft_matrix(m)
    return np.einsum("ml,mn,nl->l", f.conj(), c, f).real


def optimal_scores(
    group_pred_mse: np.ndarray, shifts: tuple[int, ...] | list[int], sigma2: float
) -> np.ndarray:
    """Descending eigenvalues of one group's whitened score matrix.

    Eigenvalue j is the trace reduction bought by the j-th optimal
    compression direction for this group, so the lists are what a greedy
    budget split across groups should rank.
    """
    pred = np.asarray(group_pred_mse, dtype=complex)
    m = pred.shape[0] // len(shifts)
    if pred.shape != (m * len(shifts), m * len(shifts)):
        raise ValidationError("group covariance must be square of size M * P")
    b = _b_from_shifts(shifts, m)
    _, c = _whitened_rayleigh(pred, b, sigma2)
    w, _ = eigh_descending(c)
    return w


def dft_codebook_q(
    group_pred_mse: np.ndarray,
    shifts: tuple[int, ...] | list[int],
    sigma2: float,
    budget: int,
) -> tuple[np.ndarray, list[int]]:
    """Best DFT columns for one group, by whitened Rayleigh score.

    Returns the M x budget column block and the selected indices in
    ascending order.  Ties break toward the lower column index.  When the
    per-tap covariances are circulant the whitener shares the DFT
    eigenbasis and this selection coincides with the per-group optimum.
    """
    m = np.asarray(group_pred_mse).shape[0] // len(shifts)
    if not 0 <= budget <= m:
        raise ValidationError("budget must lie in [0, M]")
    scores = dft_rayleigh_scores(group_pred_mse, shifts, sigma2)
    picked = sorted(np.argsort(-scores, kind="stable")[:budget].tolist())
    return _dft_matrix(m)[:, picked].copy(), picked


def householder_q(rng: np.random.Generator, budget: int, m: int) -> np.ndarray:
    """Random reflector baseline: leading columns of I - 2 v v^H."""
    if not 0 <= budget <= m:
        raise ValidationError("budget must lie in [0, M]")
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    v = v / np.linalg.norm(v)
    return (np.eye(m) - 2.0 * np.outer(v, v.conj()))[:, :budget]


@dataclass(frozen=True)
class CodebookMessage:
    """Downlink codebook message: per group, which DFT columns to apply."""

    group_indices: tuple[tuple[int, ...], ...]
    num_antennas: int

    def __post_init__(self) -> None:
        groups = tuple(tuple(int(c) for c in g) for g in self.group_indices)
        object.__setattr__(self, "group_indices", groups)
        if not 1 <= len(groups) <= 255:
            raise ValidationError("message must cover between 1 and 255 groups")
        if self.num_antennas < 1 or self.num_antennas > 65536:
            raise ValidationError("num_antennas must fit a 16-bit column index")
        for g in groups:
            if len(g) > 255:
                raise ValidationError("per-group budget must fit one byte")
            if len(set(g)) != len(g):
                raise ValidationError("column indices must be distinct per group")
            if any(not 0 <= c < self.num_antennas for c in g):
                raise ValidationError("column indices must lie in [0, M)")

    @property
    def total_budget(self) -> int:
        return sum(len(g) for g in self.group_indices)

    @property
    def bit_cost(self) -> int:
        """Index bits the BS must signal: budget times ceil(log2 M)."""
        return self.total_budget * (self.num_antennas - 1).bit_length()

    def encode(self) -> bytes:
        """Little-endian wire format: G, then per group its budget and u16 indices."""
        out = bytearray([len(self.group_indices)])
        for g in self.group_indices:
            out.append(len(g))
            for c in g:
                out += int(c).to_bytes(2, "little")
        return bytes(out)

    @classmethod
    def decode(cls, data: bytes, num_antennas: int) -> "CodebookMessage":
        if len(data) < 1:
            raise ProtocolError("empty message")
        num_groups = data[0]
        if num_groups < 1:
            raise ProtocolError("message must cover at least one group")
        at = 1
        groups: list[tuple[int, ...]] = []
        for _ in range(num_groups):
            if at >= len(data):
                raise ProtocolError("truncated message: missing group budget")
            width = data[at]
            at += 1
            end = at + 2 * width
            if end > len(data):
                raise ProtocolError("truncated message: missing column indices")
            cols = tuple(
                int.from_bytes(data[at + 2 * j : at + 2 * j + 2], "little")
                for j in range(width)
            )
            groups.append(cols)
            at = end
        if at != len(data):
            raise ProtocolError("trailing bytes after the last group")
        try:
            return cls(tuple(groups), num_antennas)
        except ValidationError as exc:
            raise ProtocolError(str(exc)) from exc


@dataclass(frozen=True)
class RoundContext:
    """Everything one codebook signalling round needs about the current RS.

    project selects the per-tap block-diagonal approximation of the
    predicted covariance before the codebook design; use it whenever the
    shift step varies between RS instants.
    """

    partition: GroupPartition
    support: tuple[int, ...]
    delay_spread: int
    num_antennas: int
    tap_order: np.ndarray
    b_blocks: tuple[np.ndarray, ...]
    rbar: np.ndarray
    rho: float
    sigma2: float
    total_budget: int
    project: bool = True


def group_pred_blocks(
    mse_pred: np.ndarray,
    groups_idx: list[list[int]],
    block: int,
    project: bool,
) -> list[np.ndarray]:
    """Per-group predicted covariance blocks in stacked group order.

    With project, cross-tap terms are dropped and only the per-tap diagonal
    blocks survive; otherwise the full within-group block is extracted.
    """
    out: list[np.ndarray] = []
    for gi in groups_idx:
        if project:
            parts = []
            for q in gi:
                sl = slice(q * block, (q + 1) * block)
                parts.append(ensure_psd(mse_pred[sl, sl]))
            out.append(block_diag(parts))
        else:
            el = np.concatenate([np.arange(q * block, (q + 1) * block) for q in gi])
            out.append(ensure_psd(mse_pred[np.ix_(el, el)]))
    return out


def signalling_round(
    bs_state: KalmanState, tac: TacVector, ctx: RoundContext
) -> tuple[CodebookMessage, np.ndarray, KalmanState]:
    """One full codebook round trip.

    The BS scores the DFT columns per group on its predicted covariance,
    splits the budget greedily, signals the winning indices; the MS folds
    and samples its TAC, applies the signalled columns and reports the
    scalars; the BS folds them into its filter.
    """
    from .align import group_support_indices

    m = ctx.num_antennas
    groups_idx = group_support_indices(ctx.partition, ctx.support)
    _, mse_pred = dumb_predict(bs_state, ctx.rbar, ctx.rho)
    group_mses = group_pred_blocks(mse_pred, groups_idx, m, ctx.project)

    scores = [
        dft_rayleigh_scores(gm, z, ctx.sigma2)
        for gm, z in zip(group_mses, ctx.partition.shifts)
    ]
    budgets = allocate_budget(scores, ctx.total_budget)

    f = _dft_matrix(m)
    blocks: list[np.ndarray] = []
    indices: list[tuple[int, ...]] = []
    for sc, width in zip(scores, budgets):
        picked = sorted(np.argsort(-sc, kind="stable")[:width].tolist())
        blocks.append(f[:, picked].copy())
        indices.append(tuple(picked))
    message = CodebookMessage(tuple(indices), m)
    q = CompressionQ("dft-codebook", block_diag(blocks), tuple(blocks), tuple(budgets))

    # MS side: it only needs the folded TAC and the signalled columns.
    decoded = CodebookMessage.decode(message.encode(), m)
    folded = fold_tac(tac, ctx.partition.delta, ctx.delay_spread, m)
    x_groups = [sample_group(folded, r, m) for r in ctx.partition.remainders]
    ms_blocks = [f[:, list(g)] for g in decoded.group_indices]
    feedback = np.concatenate(
        [b.conj().T @ x for b, x in zip(ms_blocks, x_groups)]
    )

    new_state = bs_kalman_step_dumb(
        bs_state,
        feedback,
        q,
        list(ctx.b_blocks),
        ctx.tap_order,
        ctx.rbar,
        ctx.rho,
        ctx.sigma2,
    )
    return message, feedback, new_state
