"""End-to-end simulation harness with deterministic, replayable output.

One run advances every user's channel, pilots, tracker and feedback chain
through the configured reference-signal instants and emits one record per
instant for the traced user: its estimation quality on both sides of the
feedback link, the multi-user sum rates the BS-side estimates support, and
the signalling cost of the round.

Randomness is split into named streams keyed by (seed, user, purpose):
purpose 0 drives the channel evolution, 1 the pilot noise, 2 the delay
support draw and 3 the random-reflector compression baseline.  Because
the channel stream is consumed by nothing else, a perfect-CSI rerun
replays the exact trajectories of a recorded simulation.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .align import (
    GroupPartition,
    delta_allowed,
    delta_candidates,
    delta_cycle_set,
    delta_schedule,
    group_support_indices,
    measurement_matrix_dumb,
    measurement_matrix_smart,
    remainder_partition,
    stacked_tap_order,
)
from .channel import (
    OneRingConfig,
    PathSupport,
    SpatialCovariance,
    evolve,
    generate_initial,
    matrix_sqrt,
    one_ring_covariance,
)
from .config import ScenarioConfig
from .errors import AlignmentError, ValidationError
from .feedback_dumb import (
    CompressionQ,
    RoundContext,
    allocate_budget,
    bs_kalman_step_dumb,
    dumb_predict,
    group_pred_blocks,
    householder_q,
    optimal_q,
    optimal_q_block,
    optimal_scores,
    signalling_round,
)
from .feedback_smart import (
    BsMirror,
    CompressionZ,
    bs_kalman_step_recovery,
    bs_recovery_predict,
    compress_feedback,
    initial_recovery_state,
)
from .feedback_dumb import initial_dumb_state
from .linalg import block_diag, eigh_descending
from .metrics import frequency_rows, nmse, precode_and_se
from .pilots import PilotConfig, compute_tac, fold_tac, rx_pilot_signal, sample_group, zadoff_chu
from .tracking import KldBasis, initial_tap_states, kalman_step_smart_decoupled

CSV_HEADER = (
    "seed,user,rs_index,delta_used,nmse_ms,nmse_bs,"
    "se_mf_sum,se_zf_sum,feedback_scalars,bit_cost_dl"
)


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


@dataclass(frozen=True)
class ResultRecord:
    """One reference-signal instant of one simulated drop.

    nmse_ms is the traced user's local estimate quality (1.0, i.e. no
    estimate, when the MS does not form one); nmse_bs is the BS-side
    reconstruction.  The sum rates use the BS estimates of every user for
    precoding and the true channels for evaluation.  bit_cost_dl counts
    the downlink index bits of codebook signalling; modes whose
    compression is derivable on both sides cost nothing.
    """

    seed: int
    user: int
    rs_index: int
    delta_used: int
    nmse_ms: float
    nmse_bs: float
    se_mf_sum: float
    se_zf_sum: float
    feedback_scalars: int
    bit_cost_dl: int

    def csv_row(self) -> str:
        return ",".join(
            [
                str(self.seed),
                str(self.user),
                str(self.rs_index),
                str(self.delta_used),
                _fmt(self.nmse_ms),
                _fmt(self.nmse_bs),
                _fmt(self.se_mf_sum),
                _fmt(self.se_zf_sum),
                str(self.feedback_scalars),
                str(self.bit_cost_dl),
            ]
        )


_COV_CACHE: dict[tuple, SpatialCovariance] = {}


def _tap_covariance(aod_deg: float, cfg: ScenarioConfig) -> SpatialCovariance:
    key = (
        round(float(aod_deg), 9),
        round(cfg.angular_spread_deg, 9),
        cfg.num_antennas,
        round(cfg.antenna_spacing_wavelengths, 9),
        round(cfg.tap_power, 12),
    )
    if key not in _COV_CACHE:
        ring = OneRingConfig(
            float(aod_deg),
            cfg.angular_spread_deg,
            cfg.num_antennas,
            cfg.antenna_spacing_wavelengths,
        )
        _COV_CACHE[key] = one_ring_covariance(ring, cfg.tap_power)
    return _COV_CACHE[key]


def user_support(cfg: ScenarioConfig, seed: int, user: int) -> tuple[int, ...]:
    """The user's delay support for this seed: pinned for the traced user,
    drawn without replacement from [0, delay_spread) for everyone else."""
    if user == cfg.traced_user and cfg.traced_support is not None:
        return cfg.traced_support
    rng = np.random.default_rng((seed, user, 2))
    delays = rng.choice(cfg.delay_spread, size=cfg.num_taps, replace=False)
    return tuple(sorted(int(d) for d in delays))


def resolve_schedule(cfg: ScenarioConfig, seed: int) -> tuple[list[int], tuple[int, ...]]:
    """Per-RS shift steps plus the underlying cycle of distinct steps."""
    if cfg.delta_mode == "fixed":
        d = int(cfg.delta_fixed)  # type: ignore[arg-type]
        if not delta_allowed(cfg.fft_size, cfg.num_antennas, cfg.delay_spread, d):
            raise AlignmentError(
                f"fixed shift step {d} cannot align supports of spread "
                f"{cfg.delay_spread} at this array and FFT size"
            )
        return [d] * cfg.num_rs, (d,)
    cands = delta_candidates(cfg.fft_size, cfg.num_antennas, cfg.delay_spread)
    dset = delta_cycle_set(cands)
    rng = np.random.default_rng((seed, 9999)) if cfg.schedule == "shuffle" else None
    return delta_schedule(dset, cfg.num_rs, cfg.schedule, rng), dset.cycle


def _se_tones(cfg: ScenarioConfig) -> np.ndarray:
    count = min(cfg.se_num_tones, cfg.fft_size)
    return np.unique((np.arange(count) * cfg.fft_size) // count)


@dataclass(frozen=True)
class _Alignment:
    """Everything that depends only on (support, shift step)."""

    partition: GroupPartition
    groups_idx: list[list[int]]
    tap_order: np.ndarray
    pilot: PilotConfig
    a_blocks: list[np.ndarray] | None
    b_blocks: list[np.ndarray] | None


def _build_alignment(
    cfg: ScenarioConfig,
    support: tuple[int, ...],
    delta: int,
    base: np.ndarray,
    bases: list[KldBasis] | None,
) -> _Alignment:
    part = remainder_partition(support, delta)
    gidx = group_support_indices(part, support)
    order = stacked_tap_order(part, support)
    pilot = PilotConfig(cfg.fft_size, cfg.num_antennas, base, delta)
    a_blocks = None
    b_blocks = None
    if bases is not None:
        a_blocks = [
            measurement_matrix_smart(part, i, [bases[q].vectors for q in gidx[i]])
            for i in range(part.num_groups)
        ]
    else:
        b_blocks = [
            measurement_matrix_dumb(part, i, cfg.num_antennas)
            for i in range(part.num_groups)
        ]
    return _Alignment(part, gidx, order, pilot, a_blocks, b_blocks)


class _UserSim:
    """Per-user channel, pilot and tracking state, advanced one RS at a time."""

    def __init__(self, cfg: ScenarioConfig, seed: int, user: int, deltas: list[int]):
        self.cfg = cfg
        self.user = user
        self.support = user_support(cfg, seed, user)
        self.path = PathSupport(self.support, cfg.delay_spread)
        self.covs = [_tap_covariance(a, cfg) for a in cfg.user_aods_deg(user)]
        self.roots = [matrix_sqrt(c) for c in self.covs]
        self.rng_ch = np.random.default_rng((seed, user, 0))
        self.rng_noise = np.random.default_rng((seed, user, 1))
        self.chan = generate_initial(self.covs, self.rng_ch)
        base = zadoff_chu(cfg.fft_size)
        self.bases: list[KldBasis] | None = None
        if cfg.mode == "smart":
            self.bases = [KldBasis.from_covariance(c) for c in self.covs]
            self.lam_list = [b.values for b in self.bases]
            self.ms_states = initial_tap_states(self.lam_list)
            self.mirror = BsMirror(self.lam_list, cfg.rho, cfg.noise_var)
            self.rec_states = [initial_recovery_state(lam) for lam in self.lam_list]
        else:
            self.rbar = block_diag([c.matrix for c in self.covs])
            self.bs_state = initial_dumb_state(self.rbar)
            self.rng_hh = np.random.default_rng((seed, user, 3))
        self.align = {
            d: _build_alignment(cfg, self.support, d, base, self.bases)
            for d in sorted(set(deltas))
        }

    def advance_channel(self) -> None:
        self.chan = evolve(self.chan, self.cfg.rho, self.roots, self.rng_ch)

    def observe(self, delta: int) -> tuple[_Alignment, np.ndarray]:
        ad = self.align[delta]
        y = rx_pilot_signal(
            self.chan, self.path, ad.pilot, self.cfg.noise_var, self.rng_noise
        )
        return ad, compute_tac(y, ad.pilot, self.cfg.noise_var)

    # -- smart MS: local tracker, eigencoded feedback, BS mirror recovery --

    def step_smart(self, delta: int) -> tuple[np.ndarray, np.ndarray, int]:
        cfg = self.cfg
        m = cfg.num_antennas
        ad, tac = self.observe(delta)
        folded = fold_tac(tac, delta, cfg.delay_spread, m)
        obs = [sample_group(folded, r, m) for r in ad.partition.remainders]
        self.ms_states, _ = kalman_step_smart_decoupled(
            self.ms_states,
            obs,
            ad.groups_idx,
            ad.a_blocks,
            self.lam_list,
            cfg.rho,
            cfg.noise_var,
        )
        info = self.mirror.step(ad.groups_idx, ad.a_blocks)
        group_of = {q: i for i, g in enumerate(ad.groups_idx) for q in g}

        # The projection must target what the BS does not yet know: the
        # predicted error of its recovery filter, a recursion both sides
        # can replay because it never touches the observed data.
        scores: list[np.ndarray] = []
        vec_sets: list[np.ndarray] = []
        for p in range(cfg.num_taps):
            state = self.rec_states[p]
            if state.time < 0:
                rec_pred = state.mse
            else:
                kp = info.tap_gains[p]
                rec_pred = cfg.rho * cfg.rho * state.mse + kp @ info.innov_covs[
                    group_of[p]
                ] @ kp.conj().T
            w, v = eigh_descending(rec_pred)
            scores.append(np.maximum(w.real, 0.0))
            vec_sets.append(v)
        widths = allocate_budget(scores, cfg.total_feedback)

        new_rec = []
        for p, width in enumerate(widths):
            gi = group_of[p]
            if width == 0:
                new_rec.append(
                    bs_recovery_predict(
                        self.rec_states[p], info.tap_gains[p], info.innov_covs[gi], cfg.rho
                    )
                )
                continue
            z = CompressionZ(vec_sets[p][:, :width])
            fb = compress_feedback(self.ms_states[p].estimate, z)
            new_rec.append(
                bs_kalman_step_recovery(
                    self.rec_states[p],
                    fb,
                    z,
                    info.tap_gains[p],
                    info.innov_covs[gi],
                    cfg.rho,
                    cfg.recovery_reg,
                )
            )
        self.rec_states = new_rec

        assert self.bases is not None
        est_ms = np.stack(
            [self.bases[p].vectors @ self.ms_states[p].estimate for p in range(cfg.num_taps)]
        )
        est_bs = np.stack(
            [self.bases[p].vectors @ new_rec[p].estimate for p in range(cfg.num_taps)]
        )
        return est_ms, est_bs, sum(widths)

    # -- dumb MS: compress-and-forward, all statistics at the BS --

    def step_dumb(self, delta: int) -> tuple[np.ndarray, int, int]:
        cfg = self.cfg
        m = cfg.num_antennas
        ad, tac = self.observe(delta)
        project = cfg.delta_mode == "cycle"
        bit_cost = 0

        if cfg.q_mode == "dft-codebook":
            ctx = RoundContext(
                ad.partition,
                self.support,
                cfg.delay_spread,
                m,
                ad.tap_order,
                tuple(ad.b_blocks or ()),
                self.rbar,
                cfg.rho,
                cfg.noise_var,
                cfg.total_feedback,
                project,
            )
            message, fb, self.bs_state = signalling_round(self.bs_state, tac, ctx)
            bit_cost = message.bit_cost
            used = len(fb)
        else:
            _, mse_pred = dumb_predict(self.bs_state, self.rbar, cfg.rho)
            if cfg.q_mode == "optimal-joint":
                q = optimal_q(
                    mse_pred, ad.b_blocks, ad.tap_order, cfg.noise_var, cfg.total_feedback
                )
            else:
                gm = group_pred_blocks(mse_pred, ad.groups_idx, m, project)
                score_lists = [
                    optimal_scores(g, z, cfg.noise_var)
                    for g, z in zip(gm, ad.partition.shifts)
                ]
                budgets = allocate_budget(score_lists, cfg.total_feedback)
                if cfg.q_mode == "optimal-block":
                    q = optimal_q_block(gm, ad.b_blocks, cfg.noise_var, budgets)
                else:
                    blocks = [householder_q(self.rng_hh, b, m) for b in budgets]
                    q = CompressionQ(
                        "householder-baseline",
                        block_diag(blocks),
                        tuple(blocks),
                        tuple(budgets),
                    )
            folded = fold_tac(tac, delta, cfg.delay_spread, m)
            x = np.concatenate(
                [sample_group(folded, r, m) for r in ad.partition.remainders]
            )
            fb = q.matrix.conj().T @ x
            self.bs_state = bs_kalman_step_dumb(
                self.bs_state,
                fb,
                q,
                ad.b_blocks,
                ad.tap_order,
                self.rbar,
                cfg.rho,
                cfg.noise_var,
            )
            used = q.budget

        est_bs = self.bs_state.estimate.reshape(cfg.num_taps, m)
        return est_bs, used, bit_cost


def run_scenario(cfg: ScenarioConfig, seed: int) -> list[ResultRecord]:
    """Simulate one seed end to end; one record per RS instant.

    Estimation error is measured on the tap vectors, which equals the
    error on the full subcarrier response because the transform between
    them preserves norms.
    """
    sched, _ = resolve_schedule(cfg, seed)
    tones = _se_tones(cfg)
    sims = [_UserSim(cfg, seed, k, sched) for k in range(cfg.num_users)]
    traced = cfg.traced_user

    records: list[ResultRecord] = []
    shape = (cfg.num_users, len(tones), cfg.num_antennas)
    for n, delta in enumerate(sched):
        truth_rows = np.empty(shape, dtype=complex)
        est_rows = np.empty(shape, dtype=complex)
        nmse_ms = 1.0
        nmse_bs = 1.0
        used = cfg.total_feedback
        bit_cost = 0
        for k, sim in enumerate(sims):
            if n > 0:
                sim.advance_channel()
            if cfg.mode == "smart":
                est_ms, est_bs, used_k = sim.step_smart(delta)
                cost_k = 0
            else:
                est_bs, used_k, cost_k = sim.step_dumb(delta)
                est_ms = None
            if k == traced:
                if est_ms is not None:
                    nmse_ms = nmse(sim.chan.taps, est_ms)
                nmse_bs = nmse(sim.chan.taps, est_bs)
                used = used_k
                bit_cost = cost_k
            truth_rows[k] = frequency_rows(
                sim.chan.taps, sim.support, cfg.fft_size, tones
            )
            est_rows[k] = frequency_rows(est_bs, sim.support, cfg.fft_size, tones)
        se_mf, se_zf = precode_and_se(
            truth_rows, cfg.data_noise_var, design_responses=est_rows
        )
        records.append(
            ResultRecord(
                seed, traced, n, delta, nmse_ms, nmse_bs, se_mf, se_zf, used, bit_cost
            )
        )
    return records


def perfect_csi_se(
    cfg: ScenarioConfig, seed: int, tones: np.ndarray | list[int] | None = None
) -> list[tuple[int, float, float]]:
    """Sum rates with perfect BS-side CSI on the same channel trajectories.

    Replays the channel random streams of run_scenario without touching
    any other stream, so the comparison is paired drop for drop.  Returns
    (rs_index, mf_sum_rate, zf_sum_rate) per RS instant.
    """
    tone_arr = _se_tones(cfg) if tones is None else np.asarray(tones, dtype=int)
    supports = []
    roots = []
    covs_all = []
    rngs = []
    chans = []
    for k in range(cfg.num_users):
        supports.append(user_support(cfg, seed, k))
        covs = [_tap_covariance(a, cfg) for a in cfg.user_aods_deg(k)]
        covs_all.append(covs)
        roots.append([matrix_sqrt(c) for c in covs])
        rngs.append(np.random.default_rng((seed, k, 0)))
        chans.append(None)

    out: list[tuple[int, float, float]] = []
    rows = np.empty((cfg.num_users, len(tone_arr), cfg.num_antennas), dtype=complex)
    for n in range(cfg.num_rs):
        for k in range(cfg.num_users):
            if n == 0:
                chans[k] = generate_initial(covs_all[k], rngs[k])
            else:
                chans[k] = evolve(chans[k], cfg.rho, roots[k], rngs[k])
            rows[k] = frequency_rows(
                chans[k].taps, supports[k], cfg.fft_size, tone_arr
            )
        mf, zf = precode_and_se(rows, cfg.data_noise_var)
        out.append((n, mf, zf))
    return out


def run_scenarios(
    cfg: ScenarioConfig, seeds: list[int], workers: int = 1
) -> list[ResultRecord]:
    """Run one scenario over many seeds, optionally on a process pool.

    Seeds are independent work units (users within a seed share the
    multi-user sum-rate evaluation, so a seed is the smallest unit that
    can run alone).  The returned records are sorted by
    (seed, user, rs_index) whatever the completion order, so output is
    identical for any worker count.
    """
    if workers < 1:
        raise ValidationError("workers must be >= 1")
    records: list[ResultRecord] = []
    if workers == 1 or len(seeds) <= 1:
        for seed in seeds:
            records.extend(run_scenario(cfg, seed))
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            for chunk in pool.map(partial(run_scenario, cfg), seeds):
                records.extend(chunk)
    records.sort(key=lambda r: (r.seed, r.user, r.rs_index))
    return records


def emit(
    records: list[ResultRecord], cfg: ScenarioConfig, out_csv: str | Path
) -> tuple[Path, Path]:
    """Write the record CSV and a JSON sidecar that makes it reproducible.

    The sidecar embeds the resolved configuration (feed it back to
    load_config as-is), the derived noise variances, shift-step cycle,
    evaluated tones and every user's delay support per seed.  Formatting
    is pinned so identical records produce byte-identical files.
    """
    out_csv = Path(out_csv)
    records = sorted(records, key=lambda r: (r.seed, r.user, r.rs_index))
    lines = [CSV_HEADER] + [r.csv_row() for r in records]
    out_csv.write_text("\n".join(lines) + "\n", encoding="utf-8")

    seeds = sorted({r.seed for r in records})
    _, cycle = resolve_schedule(cfg, seeds[0] if seeds else 0)
    sidecar = {
        "version": __version__,
        "config": cfg.to_dict(),
        "num_records": len(records),
        "resolved": {
            "noise_var": cfg.noise_var,
            "data_noise_var": cfg.data_noise_var,
            "delta_cycle": list(cycle),
            "se_tones": [int(t) for t in _se_tones(cfg)],
            "user_supports": {
                str(seed): {
                    str(k): list(user_support(cfg, seed, k))
                    for k in range(cfg.num_users)
                }
                for seed in seeds
            },
        },
    }
    out_json = out_csv.with_suffix(".json")
    out_json.write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out_csv, out_json
