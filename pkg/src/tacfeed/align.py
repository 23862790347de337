"""Delay-domain path aligning.

With pilot shift step delta, taps whose delays share a remainder modulo
delta land in the same length-M observation group, each tap appearing as
its spatial vector cyclically rotated by floor(delay / delta).  This module
owns the grouping combinatorics: which delta values keep that structure
exact, how to partition a support, how to build the per-group measurement
and permutation matrices, and when two taps in a group stay separable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedRegimeError, ValidationError


@dataclass(frozen=True)
class GroupPartition:
    """Remainder partition of a delay support for one shift step delta.

    groups[i] lists the delays with remainder remainders[i]; shifts[i]
    holds the matching rotations floor(delay / delta).  Groups are ordered
    by ascending remainder and are all non-empty.
    """

    delta: int
    remainders: tuple[int, ...]
    groups: tuple[tuple[int, ...], ...]
    shifts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.delta < 1:
            raise ValidationError("delta must be at least 1")
        if not self.groups or len(self.groups) != len(self.remainders):
            raise ValidationError("one delay group per remainder required")
        if list(self.remainders) != sorted(set(self.remainders)):
            raise ValidationError("remainders must be unique and ascending")
        for r, g, z in zip(self.remainders, self.groups, self.shifts):
            if not g or len(g) != len(z):
                raise ValidationError("groups must be non-empty with matching shifts")
            if not 0 <= r < self.delta:
                raise ValidationError("remainders must lie in [0, delta)")
            for t, zz in zip(g, z):
                if t % self.delta != r or t // self.delta != zz:
                    raise ValidationError("group entries inconsistent with delta")

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(t for g in self.groups for t in g))

    def group_sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)


def remainder_partition(support: tuple[int, ...] | list[int], delta: int) -> GroupPartition:
    """Partition a delay support by remainder modulo delta."""
    if delta < 1:
        raise ValidationError("delta must be at least 1")
    delays = [int(t) for t in support]
    if len(set(delays)) != len(delays) or any(t < 0 for t in delays):
        raise ValidationError("support must hold distinct non-negative delays")
    buckets: dict[int, list[int]] = {}
    for t in sorted(delays):
        buckets.setdefault(t % delta, []).append(t)
    remainders = tuple(sorted(buckets))
    groups = tuple(tuple(buckets[r]) for r in remainders)
    shifts = tuple(tuple(t // delta for t in g) for g in groups)
    return GroupPartition(delta, remainders, groups, shifts)


def delta_allowed(n_fft: int, num_antennas: int, nu: int, delta: int) -> bool:
    """Whether the folded TAC keeps the rotated-sum structure exact.

    True when every tap position t + m * delta (t < nu, m < M) survives the
    fold onto the first M * delta samples at the slot the rotation model
    predicts.  That holds when either no position wraps modulo n_fft, or
    the wrap coincides with the fold because M * delta == n_fft, and in
    both cases at most one fold is needed.
    """
    m = num_antennas
    if delta < 1 or m < 1 or nu < 1:
        return False
    if nu > n_fft or m * delta > n_fft:
        return False
    n_fold = m * delta
    n_ext = min((m - 1) * delta + nu, n_fft)
    if n_ext - n_fold > n_fold:
        return False
    if (nu - 1) // delta > m:
        return False
    return (m - 1) * delta + nu <= n_fft or n_fft == n_fold


def delta_candidates(n_fft: int, num_antennas: int, nu: int) -> list[int]:
    """All shift steps with exact aligning for any support of spread nu.

    With delta_0 = floor(N / M) and r = N - M * delta_0 the candidates are
    [1, delta_0] when r = 0 or delta_0 + r >= nu, and [1, delta_0 - 1]
    otherwise.  Requires the nu < M < N regime; outside it the closed form
    carries no guarantee and the call is rejected.
    """
    m = num_antennas
    if not m < n_fft:
        raise ValidationError("num_antennas must be smaller than n_fft")
    if nu < 1:
        raise ValidationError("delay spread must be positive")
    if nu >= m:
        raise UnsupportedRegimeError(
            f"delay spread {nu} must be smaller than the antenna count {m}"
        )
    delta0 = n_fft // m
    r = n_fft - m * delta0
    hi = delta0 if (r == 0 or delta0 + r >= nu) else delta0 - 1
    if hi < 1:
        raise UnsupportedRegimeError(
            f"no shift step admits exact aligning for N={n_fft}, M={m}, nu={nu}"
        )
    return list(range(1, hi + 1))


@dataclass(frozen=True)
class DeltaSet:
    """A set of shift steps scheduled in rotation across RS instants.

    The cycle must be drawn from the candidate list and no member may
    divide another, so that tap pairs colliding under one step separate
    under the others.
    """

    candidates: tuple[int, ...]
    cycle: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.cycle:
            raise ValidationError("cycle must be non-empty")
        if len(set(self.cycle)) != len(self.cycle):
            raise ValidationError("cycle entries must be distinct")
        if not set(self.cycle) <= set(self.candidates):
            raise ValidationError("cycle must be a subset of the candidates")
        for a in self.cycle:
            for b in self.cycle:
                if a != b and a % b == 0:
                    raise ValidationError(
                        f"cycle step {a} is divisible by {b}; pairs are required "
                        "to leave a non-zero remainder"
                    )


def delta_cycle_set(candidates: list[int] | tuple[int, ...]) -> DeltaSet:
    """Greedy cycle construction from the largest candidate downwards.

    A candidate joins the cycle when it leaves a non-zero remainder against
    every member picked so far, in both division orders.
    """
    cands = tuple(sorted(set(int(c) for c in candidates)))
    if not cands or cands[0] < 1:
        raise ValidationError("candidates must be positive integers")
    cycle: list[int] = []
    for c in sorted(cands, reverse=True):
        if all(c % k != 0 and k % c != 0 for k in cycle):
            cycle.append(c)
    return DeltaSet(cands, tuple(cycle))


def delta_schedule(
    deltas: DeltaSet | tuple[int, ...] | list[int],
    num_rs: int,
    mode: str = "round-robin",
    rng: np.random.Generator | None = None,
) -> list[int]:
    """Per-RS shift steps: plain rotation, or a seeded per-block shuffle."""
    cycle = tuple(deltas.cycle) if isinstance(deltas, DeltaSet) else tuple(deltas)
    if not cycle:
        raise ValidationError("need at least one shift step")
    if num_rs < 1:
        raise ValidationError("num_rs must be positive")
    if mode == "round-robin":
        return [cycle[n % len(cycle)] for n in range(num_rs)]
    if mode == "shuffle":
        if rng is None:
            raise ValidationError("shuffle scheduling needs an rng")
        out: list[int] = []
        while len(out) < num_rs:
            out.extend(cycle[i] for i in rng.permutation(len(cycle)))
        return out[:num_rs]
    raise ValidationError(f"unknown schedule mode {mode!r}")


def _rolled_identity(shift: int, size: int) -> np.ndarray:
    return np.roll(np.eye(size), shift % size, axis=0)


def measurement_matrix_smart(
    partition: GroupPartition, group_index: int, bases: list[np.ndarray]
) -> np.ndarray:
    """Group observation matrix in eigen coordinates.

    bases holds, per tap of the group, the M x M eigenvector matrix of the
    tap covariance.  The result stacks the row-rotated bases side by side:
    column block p maps tap p's eigen coefficients to its rotated spatial
    contribution.
    """
    shifts = partition.shifts[group_index]
    if len(bases) != len(shifts):
        raise ValidationError("need one eigenbasis per tap in the group")
    m = bases[0].shape[0]
    blocks = []
    for z, u in zip(shifts, bases):
        if u.shape != (m, m):
            raise ValidationError("eigenbases must be square and equally sized")
        blocks.append(np.roll(u, z % m, axis=0))
    return np.hstack(blocks)


def measurement_matrix_dumb(
    partition: GroupPartition, group_index: int, num_antennas: int
) -> np.ndarray:
    """Group observation matrix in spatial coordinates: stacked rotations."""
    shifts = partition.shifts[group_index]
    return np.hstack([_rolled_identity(z, num_antennas) for z in shifts])


def group_support_indices(
    partition: GroupPartition, support: tuple[int, ...] | list[int]
) -> list[list[int]]:
    """Per group, the positions of its delays inside the support tuple."""
    pos = {int(t): i for i, t in enumerate(support)}
    if len(pos) != len(support):
        raise ValidationError("support entries must be distinct")
    try:
        return [[pos[t] for t in g] for g in partition.groups]
    except KeyError as exc:
        raise ValidationError(f"partition delay {exc} missing from support") from exc


def stacked_tap_order(
    partition: GroupPartition, support: tuple[int, ...] | list[int]
) -> np.ndarray:
    """Support positions in stacked group order (the permutation, as indices)."""
    return np.array(
        [i for grp in group_support_indices(partition, support) for i in grp], dtype=int
    )


def permutation(
    partition: GroupPartition,
    support: tuple[int, ...] | list[int],
    num_antennas: int,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Tap-reordering permutation from support order to stacked group order.

    Returns the full (M T) x (M T) permutation and the per-group row blocks.
    Row block p of group i selects the antenna block of the tap that sits
    at group position p.
    """
    order = stacked_tap_order(partition, support)
    t = len(support)
    eye_t = np.eye(t)
    eye_m = np.eye(num_antennas)
    per_group: list[np.ndarray] = []
    at = 0
    for g in partition.groups:
        sel = eye_t[order[at : at + len(g)], :]
        per_group.append(np.kron(sel, eye_m))
        at += len(g)
    full = np.vstack(per_group)
    return full, per_group


def orthogonality_check(
    covs: list[np.ndarray], shifts: list[int] | tuple[int, ...], tol: float = 1e-8
) -> np.ndarray:
    """Pairwise separability test for the taps of one group.

    Entry (p, q) is True when R_p Theta_{z_q - z_p} R_q vanishes relative
    to the covariance norms, meaning taps p and q can be estimated in the
    group as if the other were absent.  The diagonal is True by convention.
    """
    if len(covs) != len(shifts):
        raise ValidationError("need one rotation per covariance")
    n = len(covs)
    m = covs[0].shape[0]
    out = np.eye(n, dtype=bool)
    norms = [np.linalg.norm(c) for c in covs]
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            rolled = np.roll(covs[q], (shifts[q] - shifts[p]) % m, axis=0)
            cross = np.linalg.norm(covs[p] @ rolled)
            denom = max(norms[p] * norms[q], np.finfo(float).tiny)
            out[p, q] = cross <= tol * denom
    return out
