"""Fast built-in sanity checks, runnable from the CLI without test deps.

Each check exercises one structural identity of the chain at a small
problem size and raises AssertionError with a human-readable message on
violation.  The whole battery runs in a few seconds.
"""

from __future__ import annotations

import numpy as np

from .align import (
    delta_allowed,
    delta_candidates,
    delta_cycle_set,
    group_support_indices,
    measurement_matrix_dumb,
    remainder_partition,
)
from .channel import (
    ChannelRealization,
    OneRingConfig,
    PathSupport,
    generate_initial,
    one_ring_covariance,
)
from .feedback_dumb import CodebookMessage
from .feedback_smart import BsMirror
from .linalg import crandn
from .metrics import frequency_rows, reconstruct_frequency
from .mmse import GroupObservation, mmse_estimate
from .pilots import PilotConfig, compute_tac, fold_tac, rx_pilot_signal, sample_group, zadoff_chu
from .tracking import KldBasis, initial_tap_states, kalman_step_smart_decoupled, kld_inverse, kld_transform


def _random_cov(rng: np.random.Generator, m: int, rank: int | None = None) -> np.ndarray:
    a = crandn(rng, m, rank or m)
    return a @ a.conj().T / m


def _small_setup(rng: np.random.Generator):
    n, m, delta, nu = 64, 8, 8, 7
    support = (0, 3, 6)
    covs = [one_ring_covariance(OneRingConfig(10.0 * (p + 1), 5.0, m), 1.0 / 3) for p in range(3)]
    chan = generate_initial(covs, rng)
    path = PathSupport(support, nu)
    pilot = PilotConfig(n, m, zadoff_chu(n), delta)
    return n, m, delta, nu, support, covs, chan, path, pilot


def check_pilot_tac_structure() -> None:
    rng = np.random.default_rng(7)
    n, m, delta, _, support, _, chan, path, pilot = _small_setup(rng)
    y = rx_pilot_signal(chan, path, pilot, 0.0, rng)
    tac = compute_tac(y, pilot, 0.0)
    cir = np.zeros((m, n), dtype=complex)
    cir[:, list(support)] = chan.taps.T
    expected = sum(np.roll(cir[a], a * delta) for a in range(m))
    err = float(np.abs(tac.samples - expected).max())
    assert err < 1e-10, f"aggregate channel mismatch: {err:.2e}"


def check_group_observation_model() -> None:
    rng = np.random.default_rng(11)
    n, m, delta, nu, support, _, chan, path, pilot = _small_setup(rng)
    y = rx_pilot_signal(chan, path, pilot, 0.0, rng)
    tac = compute_tac(y, pilot, 0.0)
    folded = fold_tac(tac, delta, nu, m)
    part = remainder_partition(support, delta)
    gidx = group_support_indices(part, support)
    for i, r in enumerate(part.remainders):
        x = sample_group(folded, r, m)
        b = measurement_matrix_dumb(part, i, m)
        stacked = np.concatenate([chan.taps[q] for q in gidx[i]])
        err = float(np.abs(x - b @ stacked).max())
        assert err < 1e-10, f"group {r} deviates from its structured sum: {err:.2e}"


def check_shift_step_candidates() -> None:
    cands = delta_candidates(64, 8, 7)
    assert cands == list(range(1, 9)), f"unexpected candidates {cands}"
    assert not delta_allowed(16, 4, 7, 1), "step 1 cannot align a spread of 7 here"
    assert delta_allowed(16, 4, 7, 3), "step 3 aligns a spread of 7 here"


def check_cycle_set() -> None:
    cycle = delta_cycle_set(list(range(1, 9))).cycle
    assert cycle == (8, 7, 6, 5), f"unexpected cycle {cycle}"
    for i, a in enumerate(cycle):
        for b in cycle[i + 1 :]:
            assert a % b != 0 and b % a != 0, f"{a} and {b} divide one another"


def check_kld_round_trip() -> None:
    rng = np.random.default_rng(13)
    m = 16
    basis = KldBasis.from_covariance(_random_cov(rng, m))
    g = crandn(rng, m)
    for shift in (0, 3, 11):
        rotated = np.roll(g, shift)
        coeffs = kld_transform(rotated, basis, shift)
        back = kld_inverse(coeffs, basis, shift)
        err = float(np.abs(back - rotated).max())
        assert err < 1e-10, f"round trip failed at shift {shift}: {err:.2e}"


def check_static_filter_equals_mmse() -> None:
    rng = np.random.default_rng(17)
    m = 8
    support = (0, 3, 6)
    delta = 3
    part = remainder_partition(support, delta)
    gidx = group_support_indices(part, support)
    covs = [_random_cov(rng, m) for _ in support]
    bases = [KldBasis.from_covariance(c) for c in covs]
    lam_list = [b.values for b in bases]
    sigma2 = 0.05
    from .align import measurement_matrix_smart

    a_blocks = [
        measurement_matrix_smart(part, i, [bases[q].vectors for q in gidx[i]])
        for i in range(part.num_groups)
    ]
    obs = [crandn(rng, m) for _ in a_blocks]
    states = initial_tap_states(lam_list)
    new_states, _ = kalman_step_smart_decoupled(
        states, obs, gidx, a_blocks, lam_list, 0.0, sigma2
    )
    for i, x in enumerate(obs):
        shifted = [
            np.roll(np.roll(covs[q], z % m, axis=0), z % m, axis=1)
            for q, z in zip(gidx[i], part.shifts[i])
        ]
        gobs = GroupObservation(x, tuple(shifted), sigma2)
        for p, q in enumerate(gidx[i]):
            direct = mmse_estimate(gobs, p)
            via_filter = np.roll(bases[q].vectors @ new_states[q].estimate, part.shifts[i][p] % m)
            err = float(np.abs(direct - via_filter).max())
            assert err < 1e-8, f"static filter and MMSE disagree on tap {q}: {err:.2e}"


def check_bs_mirror_bitwise() -> None:
    rng = np.random.default_rng(19)
    m = 8
    support = (0, 3, 6)
    covs = [_random_cov(rng, m) for _ in support]
    bases = [KldBasis.from_covariance(c) for c in covs]
    lam_list = [b.values for b in bases]
    states = initial_tap_states(lam_list)
    mirror = BsMirror(lam_list, 0.9, 0.02)
    from .align import measurement_matrix_smart

    for delta in (3, 4, 3):
        part = remainder_partition(support, delta)
        gidx = group_support_indices(part, support)
        a_blocks = [
            measurement_matrix_smart(part, i, [bases[q].vectors for q in gidx[i]])
            for i in range(part.num_groups)
        ]
        obs = [crandn(rng, m) for _ in a_blocks]
        states, _ = kalman_step_smart_decoupled(
            states, obs, gidx, a_blocks, lam_list, 0.9, 0.02
        )
        mirror.step(gidx, a_blocks)
        for q in range(len(support)):
            assert np.array_equal(states[q].mse, mirror.mses[q]), (
                f"mirror diverged from the tracker on tap {q} at step {delta}"
            )


def check_codebook_message_roundtrip() -> None:
    msg = CodebookMessage(((0, 5, 127), (3,), ()), 128)
    wire = msg.encode()
    back = CodebookMessage.decode(wire, 128)
    assert back == msg, "decode(encode(m)) != m"
    assert msg.bit_cost == 4 * 7, f"unexpected bit cost {msg.bit_cost}"


def check_frequency_rows_consistency() -> None:
    rng = np.random.default_rng(23)
    taps = crandn(rng, 3, 4)
    support = (1, 5, 9)
    full = reconstruct_frequency(taps, support, 32)
    tones = [0, 7, 13, 31]
    rows = frequency_rows(taps, support, 32, tones)
    err = float(np.abs(rows - full[tones, :]).max())
    assert err < 1e-12, f"tone rows disagree with the full transform: {err:.2e}"
    power_ratio = float(np.sum(np.abs(full) ** 2) / np.sum(np.abs(taps) ** 2))
    assert abs(power_ratio - 1.0) < 1e-10, "transform does not preserve power"


def check_one_ring_covariance() -> None:
    cov = one_ring_covariance(OneRingConfig(30.0, 5.0, 12), 0.5)
    mat = cov.matrix
    assert float(np.abs(mat - mat.conj().T).max()) < 1e-12, "not Hermitian"
    eig = np.linalg.eigvalsh(mat)
    assert eig.min() > -1e-10, f"negative eigenvalue {eig.min():.2e}"
    assert abs(np.trace(mat).real - 12 * 0.5) < 1e-8, "trace must equal M * tap power"
    d = np.diag(mat)
    assert float(np.abs(d - d[0]).max()) < 1e-12, "diagonal must be constant"


CHECKS = [
    ("pilot-tac-structure", check_pilot_tac_structure),
    ("group-observation-model", check_group_observation_model),
    ("shift-step-candidates", check_shift_step_candidates),
    ("cycle-set", check_cycle_set),
    ("kld-round-trip", check_kld_round_trip),
    ("static-filter-equals-mmse", check_static_filter_equals_mmse),
    ("bs-mirror-bitwise", check_bs_mirror_bitwise),
    ("codebook-message-roundtrip", check_codebook_message_roundtrip),
    ("frequency-rows-consistency", check_frequency_rows_consistency),
    ("one-ring-covariance", check_one_ring_covariance),
]


def run_selftest(verbose: bool = True) -> bool:
    """Run every check; returns True when all pass."""
    ok = True
    for name, fn in CHECKS:
        try:
            fn()
        except AssertionError as exc:
            ok = False
            if verbose:
                print(f"FAIL {name}: {exc}")
        else:
            if verbose:
                print(f"pass {name}")
    return ok
