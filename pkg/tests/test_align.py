import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tacfeed.align import (
    DeltaSet,
    delta_allowed,
    delta_candidates,
    delta_cycle_set,
    delta_schedule,
    group_support_indices,
    measurement_matrix_dumb,
    measurement_matrix_smart,
    orthogonality_check,
    permutation,
    remainder_partition,
    stacked_tap_order,
)
from tacfeed.channel import ChannelRealization, PathSupport
from tacfeed.errors import UnsupportedRegimeError, ValidationError
from tacfeed.pilots import (
    PilotConfig,
    compute_tac,
    cyclic_shift_matrix,
    fold_tac,
    rx_pilot_signal,
    sample_group,
    zadoff_chu,
)

from conftest import circulant_cov, crandn


supports = st.lists(st.integers(0, 40), min_size=1, max_size=6, unique=True).map(
    lambda xs: tuple(sorted(xs))
)


@given(supports, st.integers(1, 12))
def test_remainder_partition_is_a_partition(support, delta):
    part = remainder_partition(support, delta)
    assert part.support == support
    seen = [t for g in part.groups for t in g]
    assert sorted(seen) == list(support)
    for r, grp, shf in zip(part.remainders, part.groups, part.shifts):
        for t, z in zip(grp, shf):
            assert t % delta == r
            assert t // delta == z
    assert list(part.remainders) == sorted(set(part.remainders))


def test_remainder_partition_rejects_duplicates():
    with pytest.raises(ValidationError):
        remainder_partition((3, 3), 2)
    with pytest.raises(ValidationError):
        remainder_partition((1, 2), 0)


def structured_group_sum(taps, partition, support, m):
    """Independent oracle: each group is the sum of rotated tap vectors."""
    out = []
    pos = {t: i for i, t in enumerate(support)}
    for grp, shf in zip(partition.groups, partition.shifts):
        acc = np.zeros(m, dtype=complex)
        for t, z in zip(grp, shf):
            acc += cyclic_shift_matrix(z % m, m) @ taps[pos[t]]
        out.append(acc)
    return out


def fold_and_sample(rng, n, m, support_tuple, delta, check=True):
    support = PathSupport(support_tuple, max(support_tuple) + 1)
    cfg = PilotConfig(n, m, zadoff_chu(n), delta=delta)
    taps = crandn(rng, len(support_tuple), m)
    chan = ChannelRealization(taps)
    y = rx_pilot_signal(chan, support, cfg, 0.0, rng)
    tac = compute_tac(y, cfg, 0.0)
    folded = fold_tac(tac, delta, support.delay_spread, m, check=check)
    part = remainder_partition(support_tuple, delta)
    got = [sample_group(folded, r, m) for r in part.remainders]
    want = structured_group_sum(taps, part, support_tuple, m)
    return got, want


@settings(deadline=None, max_examples=60)
@given(st.data())
def test_allowed_steps_give_exact_group_sums(data):
    """Every candidate shift step aligns every support of the stated spread."""
    rng = np.random.default_rng(99)
    m = data.draw(st.sampled_from([4, 6, 8]))
    n = data.draw(st.sampled_from([48, 64, 80, 96]))
    nu = data.draw(st.integers(1, m - 1))
    count = data.draw(st.integers(1, min(3, nu)))
    delays = data.draw(
        st.lists(st.integers(0, nu - 1), min_size=count, max_size=count, unique=True)
    )
    support_tuple = tuple(sorted(set(delays) | {nu - 1}))
    for delta in delta_candidates(n, m, nu):
        got, want = fold_and_sample(rng, n, m, support_tuple, delta)
        for g, w in zip(got, want):
            np.testing.assert_allclose(g, w, atol=1e-10)


def test_delta_allowed_matches_structure_empirically(rng):
    """The feasibility predicate agrees with brute-force structure checks."""
    cases_good = [(64, 8, 7, 8), (48, 6, 5, 7), (16, 4, 7, 4), (13, 6, 4, 1)]
    for n, m, nu, delta in cases_good:
        assert delta_allowed(n, m, nu, delta)
        support = tuple(sorted({0, nu // 2, nu - 1}))
        got, want = fold_and_sample(rng, n, m, support, delta)
        for g, w in zip(got, want):
            np.testing.assert_allclose(g, w, atol=1e-10)
    cases_bad = [(16, 4, 7, 1), (13, 6, 4, 2), (18, 4, 7, 4), (26, 8, 8, 3)]
    for n, m, nu, delta in cases_bad:
        assert not delta_allowed(n, m, nu, delta)
        support = tuple(sorted({0, nu // 2, nu - 1}))
        try:
            got, want = fold_and_sample(rng, n, m, support, delta, check=False)
        except ValidationError:
            continue  # fold window bound already rejects it
        worst = max(
            float(np.max(np.abs(g - w))) for g, w in zip(got, want)
        )
        assert worst > 1e-6, f"disallowed delta={delta} unexpectedly aligned"


def test_delta_candidates_closed_form():
    assert delta_candidates(64, 8, 7) == list(range(1, 9))
    assert delta_candidates(1024, 128, 55) == list(range(1, 9))
    # remainder rule: N=13, M=6 leaves r=1 and delta_0+r < nu trims the top step
    assert delta_candidates(13, 6, 4) == [1]
    with pytest.raises(UnsupportedRegimeError):
        delta_candidates(16, 4, 7)
    with pytest.raises(ValidationError):
        delta_candidates(8, 8, 3)


def test_delta_allowed_corner_cases():
    # spread >= antennas is fine for a specific delta, just not for the closed form
    assert delta_allowed(16, 4, 7, 4)
    assert delta_allowed(16, 4, 7, 3)
    assert delta_allowed(16, 4, 7, 2)
    assert not delta_allowed(16, 4, 7, 1)
    assert not delta_allowed(16, 4, 7, 5)
    assert not delta_allowed(16, 4, 3, 0)


def test_cycle_set_greedy_non_divisible():
    ds = delta_cycle_set(list(range(1, 9)))
    assert ds.cycle == (8, 7, 6, 5)
    for a in ds.cycle:
        for b in ds.cycle:
            if a != b:
                assert a % b != 0 and b % a != 0
    assert set(ds.cycle) <= set(ds.candidates)


def test_cycle_set_validation():
    with pytest.raises(ValidationError):
        DeltaSet((2, 4), (4, 2))
    with pytest.raises(ValidationError):
        DeltaSet((2, 3), (5,))
    DeltaSet((2, 3), (3, 2))


def test_delta_schedule_round_robin():
    sched = delta_schedule((8, 7, 6, 5), 10)
    assert sched == [8, 7, 6, 5, 8, 7, 6, 5, 8, 7]


def test_delta_schedule_shuffle_blocks():
    rng = np.random.default_rng(5)
    sched = delta_schedule((8, 7, 6, 5), 12, mode="shuffle", rng=rng)
    for i in range(0, 12, 4):
        assert sorted(sched[i : i + 4]) == [5, 6, 7, 8]
    again = delta_schedule((8, 7, 6, 5), 12, mode="shuffle", rng=np.random.default_rng(5))
    assert again == sched
    with pytest.raises(ValidationError):
        delta_schedule((8, 7), 4, mode="shuffle")


def test_measurement_matrix_smart_explicit_assembly(rng):
    support = (0, 4, 6, 9)
    part = remainder_partition(support, 4)
    m = 6
    bases = {}
    for t in support:
        q, _ = np.linalg.qr(crandn(rng, m, m))
        bases[t] = q
    for i, (grp, shf) in enumerate(zip(part.groups, part.shifts)):
        blocks = [
            cyclic_shift_matrix(z % m, m) @ bases[t] for t, z in zip(grp, shf)
        ]
        want = np.hstack(blocks)
        got = measurement_matrix_smart(part, i, [bases[t] for t in grp])
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_measurement_matrix_dumb_explicit_assembly():
    support = (1, 5, 8)
    part = remainder_partition(support, 4)
    m = 6
    for i, shf in enumerate(part.shifts):
        want = np.hstack([cyclic_shift_matrix(z % m, m) for z in shf])
        got = measurement_matrix_dumb(part, i, m)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_group_support_indices_and_order():
    support = (0, 4, 6, 9)
    part = remainder_partition(support, 4)
    idx = group_support_indices(part, support)
    # remainders 0 -> {0,4}, 1 -> {9}, 2 -> {6}
    assert idx == [[0, 1], [3], [2]]
    order = stacked_tap_order(part, support)
    np.testing.assert_array_equal(order, [0, 1, 3, 2])


def test_permutation_selects_group_blocks(rng):
    support = (0, 4, 6, 9)
    m = 3
    part = remainder_partition(support, 4)
    full, per_group = permutation(part, support, m)
    assert full.shape == (12, 12)
    np.testing.assert_allclose(full @ full.T, np.eye(12), atol=1e-12)
    stacked = crandn(rng, 4 * m)
    got = full @ stacked
    order = stacked_tap_order(part, support)
    want = np.concatenate([stacked[i * m : (i + 1) * m] for i in order])
    np.testing.assert_array_equal(got, want)
    np.testing.assert_array_equal(np.vstack(per_group), full)


def test_permutation_single_group_is_identity():
    support = (0, 4, 8)
    part = remainder_partition(support, 4)
    full, _ = permutation(part, support, 2)
    np.testing.assert_array_equal(full, np.eye(6))


def test_two_tap_group_example(rng):
    """Shift step 4 stacks delays 0 and 4 into one doubly-rotated group."""
    n, m = 16, 4
    support_tuple = (0, 4, 6)
    taps = crandn(rng, 3, m)
    chan = ChannelRealization(taps)
    support = PathSupport(support_tuple, 7)
    cfg = PilotConfig(n, m, zadoff_chu(n), delta=4)
    tac = compute_tac(rx_pilot_signal(chan, support, cfg, 0.0, rng), cfg, 0.0)
    folded = fold_tac(tac, 4, 7, m)
    x0 = sample_group(folded, 0, m)
    want = np.roll(taps[0], 0) + np.roll(taps[1], 1)
    np.testing.assert_allclose(x0, want, atol=1e-10)
    x2 = sample_group(folded, 2, m)
    np.testing.assert_allclose(x2, np.roll(taps[2], 1), atol=1e-10)


def test_orthogonality_check_circulant_spectra():
    m = 16
    spec_a = np.zeros(m)
    spec_a[:4] = [3.0, 2.0, 1.0, 1.0]
    spec_b = np.zeros(m)
    spec_b[8:12] = [2.0, 2.0, 1.0, 0.5]
    ra, rb = circulant_cov(spec_a), circulant_cov(spec_b)
    # disjoint circulant spectra separate under any pair of rotations
    for shifts in [(0, 1), (2, 5), (0, 0)]:
        flags = orthogonality_check([ra, rb], shifts)
        assert flags.all()
    overlapping = circulant_cov(spec_a + 0.5)
    flags = orthogonality_check([ra, overlapping], (0, 1))
    assert not flags[0, 1] and not flags[1, 0]
    with pytest.raises(ValidationError):
        orthogonality_check([ra], (0, 1))
