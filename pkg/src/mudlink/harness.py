"""Experiment configuration, Monte Carlo engine, operation counting, and CSV
emission.

Every trial (one frame) owns an independent RNG stream derived from the master
seed, the SNR-point index, and the trial index, so results are bit-identical
no matter how trials are distributed over workers.  All randomness of a trial
is drawn before the receiver runs, which makes runs with different detectors
but equal seeds see identical channels, symbols, and noise.

Frame structure: ``frame_len`` symbol vectors, the first ``pilots`` of which
are known training vectors.  Pilot symbols never enter BER tallies.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import gen_block_fading, gen_jakes, sigma_v2_from_ebn0
from .coding import ConvCode, Interleaver, conv_encode
from .constellation import Constellation, make_constellation
from .detectors import (
    ML_SEARCH_CAP,
    compute_order,
    ml_detect,
    pdf_detect,
    pdfcc_detect,
    sdf_detect,
)
from .estimation import (
    channel_estimate_update,
    channel_update_ops,
    init_channel_estimator,
    init_receiver,
    rls_update,
    rls_update_ops,
)
from .idd import CodedFrame, IddConfig, run_idd

__all__ = [
    "ExperimentConfig",
    "SnrPoint",
    "ResultRecord",
    "MseTrace",
    "OpsTally",
    "run_uncoded_sweep",
    "run_mse_trace",
    "run_coded_sweep",
    "count_ops",
    "wilson_interval",
    "write_csv",
    "CSV_SCHEMA_VERSION",
]

CSV_SCHEMA_VERSION = 1

DETECTORS = ("ml", "sdf", "pdf", "pdfcc")
CHANNELS = ("block", "jakes")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated description of one simulation run."""

    detector: str = "pdfcc"
    n_users: int = 4
    n_rx: int = 4
    modulation: str = "qpsk"
    channel: str = "block"
    fdt: float = 1e-3
    ebn0_db: tuple = (10.0,)
    frames: int = 1000
    frame_len: int = 500
    pilots: int = 10
    forgetting: float = 0.998
    delta: float = 0.01
    d_th: float = 0.05
    tau_max: int = 4
    gamma_cap: int = 4096
    coded: bool = False
    turbo_iters: int = 4
    block_bits: int = 1000
    seed: int = 12345
    threads: int = 1
    refine_feedback: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ebn0_db", tuple(float(x) for x in self.ebn0_db))
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}")
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}")
        if self.n_users < 1 or self.n_users > self.n_rx:
            raise ValueError("need 1 <= n_users <= n_rx")
        if self.channel == "jakes" and not 0.0 < self.fdt < 0.5:
            raise ValueError("fdt must lie in (0, 0.5) for the jakes channel")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if not 0 < self.pilots < self.frame_len:
            raise ValueError("pilots must lie in (0, frame_len)")
        if not 0.0 < self.forgetting <= 1.0:
            raise ValueError("forgetting factor must lie in (0, 1]")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.d_th < 0:
            raise ValueError("d_th must be non-negative")
        if self.tau_max < 1 or self.gamma_cap < 1:
            raise ValueError("tau_max and gamma_cap must be >= 1")
        if self.turbo_iters < 1:
            raise ValueError("turbo_iters must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if not self.ebn0_db:
            raise ValueError("ebn0_db sweep must not be empty")
        c = make_constellation(self.modulation)
        if self.detector == "ml" and c.size**self.n_users > ML_SEARCH_CAP:
            raise ValueError("ml detector infeasible: |X|^K exceeds the search cap")
        if self.coded and (2 * (self.block_bits + 2)) % c.bits_per_symbol:
            raise ValueError("coded block length must map to whole symbols")

    @property
    def code_rate(self) -> float:
        return 0.5 if self.coded else 1.0

    def sigma_v2(self, ebn0_db: float) -> float:
        c = make_constellation(self.modulation)
        return sigma_v2_from_ebn0(ebn0_db, self.n_rx, self.code_rate, c.size)


@dataclass
class SnrPoint:
    """Aggregated Monte Carlo outcome at one sweep point."""

    ebn0_db: float
    bit_errors: int
    n_bits: int
    ber: float
    ber_ci_lo: float
    ber_ci_hi: float
    mean_gamma: float
    mean_detect_ops: float
    mean_adapt_ops: float
    trials: int
    wall_time: float
    turbo_iter: int | None = None
    coded_ber: float | None = None
    msg_ber: float | None = None


@dataclass
class ResultRecord:
    config: ExperimentConfig
    kind: str  # "uncoded" | "coded" | "mse"
    points: list = field(default_factory=list)


@dataclass
class MseTrace:
    """Per-symbol-index MSE of the soft estimates, averaged over runs."""

    mse: np.ndarray  # (frame_len,)
    tail_means: np.ndarray  # (runs,) mean over the trailing window, per run
    runs: int
    tail_window: int


@dataclass
class OpsTally:
    """Mean per-symbol complex-multiplication counts of one instrumented run."""

    detect_per_symbol: float
    adapt_per_symbol: float
    mean_gamma: float

    @property
    def total_per_symbol(self) -> float:
        return self.detect_per_symbol + self.adapt_per_symbol


def wilson_interval(errors: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = errors / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _trial_rng(seed: int, point: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, point, trial])


def _symbols_from_bits(bits: np.ndarray, c: Constellation) -> np.ndarray:
    """Pack (..., J) bit words into alphabet indices and map them to symbols."""
    j = c.bits_per_symbol
    weights = 1 << np.arange(j - 1, -1, -1)
    idx = (bits * weights).sum(axis=-1)
    return c.points[idx]


def _generate_uncoded_frame(cfg: ExperimentConfig, sigma_v2: float, rng):
    """Draw bits, channel, and noise for one frame (fixed consumption order)."""
    c = make_constellation(cfg.modulation)
    t, k = cfg.frame_len, cfg.n_users
    bits = rng.integers(0, 2, size=(t, k, c.bits_per_symbol))
    symbols = _symbols_from_bits(bits, c)
    if cfg.channel == "block":
        h = gen_block_fading(k, cfg.n_rx, 1, rng).gains[0]
        clean = symbols @ h.T
        gains = None
    else:
        gains = gen_jakes(k, cfg.n_rx, t, cfg.fdt, rng).gains
        clean = np.einsum("tnk,tk->tn", gains, symbols)
    noise = (
        rng.standard_normal((t, cfg.n_rx)) + 1j * rng.standard_normal((t, cfg.n_rx))
    ) * math.sqrt(sigma_v2 / 2.0)
    received = clean + noise
    return c, bits, symbols, received, gains


def _stage1_decisions(states, r, n_rx, c):
    """First-pass slices from every user's forward filter section."""
    weights = np.stack([st.weights[:n_rx] for st in states])
    u1 = weights.conj() @ r
    return c.points[np.argmin(np.abs(u1[:, None] - c.points[None, :]), axis=1)]


def _train_receiver(cfg: ExperimentConfig, c, symbols, received):
    """Pilot passes: channel estimation, ordering, then RLS filter training.

    Parallel-feedback filters train against the pilot reference with the
    feedback entries the detector will actually see (its own first-pass
    slices), so the regressor statistics match decision-directed operation.
    Training with the true interfering symbols instead leaves the forward
    section useless as a stand-alone first stage.
    """
    k, n_rx, p = cfg.n_users, cfg.n_rx, cfg.pilots
    chan = init_channel_estimator(k, n_rx, cfg.delta, cfg.forgetting)
    h_hat = np.zeros((n_rx, k), dtype=complex)
    for i in range(p):
        h_hat = channel_estimate_update(chan, received[i], symbols[i])
    order = compute_order(h_hat)
    states = None
    if cfg.detector in ("pdf", "pdfcc"):
        states = init_receiver(k, n_rx, "pdf", cfg.delta, cfg.forgetting)
        for i in range(p):
            s = symbols[i]
            fb = _stage1_decisions(states, received[i], n_rx, c)
            for kk in range(k):
                x = np.concatenate([received[i], np.delete(fb, kk)])
                rls_update(states[kk], x, complex(s[kk]))
    elif cfg.detector == "sdf":
        states = init_receiver(k, n_rx, "sdf", cfg.delta, cfg.forgetting)
        for i in range(p):
            s = symbols[i]
            for j in range(k):
                x = np.concatenate([received[i], s[order[:j]]])
                rls_update(states[j], x, complex(s[order[j]]))
    return chan, h_hat, order, states


def _detect_and_adapt(cfg, c, r, chan, h_hat, order, states):
    """One decision-directed step; returns (result, new h_hat, adapt ops)."""
    k, n_rx = cfg.n_users, cfg.n_rx
    if cfg.detector == "ml":
        res = ml_detect(r, h_hat, c, k)
        adapt = channel_update_ops(n_rx, k)
    elif cfg.detector == "sdf":
        res = sdf_detect(r, states, order, c)
        ordered = res.decisions[order]
        for j in range(k):
            x = np.concatenate([r, ordered[:j]])
            rls_update(states[j], x, complex(ordered[j]))
        adapt = sum(rls_update_ops(st.dim) for st in states) + channel_update_ops(n_rx, k)
    else:
        if cfg.detector == "pdf":
            res = pdf_detect(r, states, c)
        else:
            res = pdfcc_detect(
                r, states, h_hat, c, cfg.d_th, cfg.tau_max, cfg.gamma_cap,
                refine_feedback=cfg.refine_feedback,
            )
        # With the second cancellation pass the selected vector also serves
        # as the adaptation feedback; otherwise the first-pass slices do.
        fb = res.decisions if cfg.refine_feedback else res.first_pass
        for kk in range(k):
            x = np.concatenate([r, np.delete(fb, kk)])
            rls_update(states[kk], x, complex(res.decisions[kk]))
        adapt = sum(rls_update_ops(st.dim) for st in states) + channel_update_ops(n_rx, k)
    h_hat = channel_estimate_update(chan, r, res.decisions)
    return res, h_hat, adapt


def _bit_errors(decisions, true_bits, c: Constellation) -> int:
    idx = np.argmin(np.abs(decisions[:, None] - c.points[None, :]), axis=1)
    return int(np.sum(c.labels[idx] != true_bits))


def _uncoded_chunk(args):
    """Run a contiguous block of trials at one SNR point; returns summed tallies."""
    cfg, point_idx, sigma_v2, trial_lo, trial_hi = args
    errors = 0
    bits_total = 0
    gamma_sum = 0
    detect_ops = 0
    adapt_ops = 0
    detections = 0
    for trial in range(trial_lo, trial_hi):
        rng = _trial_rng(cfg.seed, point_idx, trial)
        c, bits, symbols, received, _ = _generate_uncoded_frame(cfg, sigma_v2, rng)
        chan, h_hat, order, states = _train_receiver(cfg, c, symbols, received)
        for i in range(cfg.pilots, cfg.frame_len):
            res, h_hat, adapt = _detect_and_adapt(
                cfg, c, received[i], chan, h_hat, order, states
            )
            errors += _bit_errors(res.decisions, bits[i], c)
            bits_total += cfg.n_users * c.bits_per_symbol
            gamma_sum += res.gamma
            detect_ops += res.op_count
            adapt_ops += adapt
            detections += 1
    return errors, bits_total, gamma_sum, detect_ops, adapt_ops, detections


def _chunks(n_trials: int, n_chunks: int):
    edges = np.linspace(0, n_trials, n_chunks + 1, dtype=int)
    return [(int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def _run_chunked(worker, tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, tasks))


def run_uncoded_sweep(cfg: ExperimentConfig) -> ResultRecord:
    """Monte Carlo BER sweep without channel coding."""
    record = ResultRecord(config=cfg, kind="uncoded")
    for point_idx, ebn0 in enumerate(cfg.ebn0_db):
        sigma_v2 = cfg.sigma_v2(ebn0)
        start = time.perf_counter()
        tasks = [
            (cfg, point_idx, sigma_v2, lo, hi)
            for lo, hi in _chunks(cfg.frames, max(cfg.threads, 1) * 4)
        ]
        parts = _run_chunked(_uncoded_chunk, tasks, cfg.threads)
        errors, bits_total, gamma_sum, det_ops, adapt_ops, detections = (
            sum(p[i] for p in parts) for i in range(6)
        )
        lo, hi = wilson_interval(errors, bits_total)
        record.points.append(
            SnrPoint(
                ebn0_db=ebn0,
                bit_errors=errors,
                n_bits=bits_total,
                ber=errors / bits_total,
                ber_ci_lo=lo,
                ber_ci_hi=hi,
                mean_gamma=gamma_sum / detections,
                mean_detect_ops=det_ops / detections,
                mean_adapt_ops=adapt_ops / detections,
                trials=cfg.frames,
                wall_time=time.perf_counter() - start,
            )
        )
    return record


def _mse_chunk(args):
    """MSE trace over a block of runs; returns (summed trace, per-run tails)."""
    cfg, sigma_v2, tail_window, trial_lo, trial_hi = args
    trace = np.zeros(cfg.frame_len)
    tails = []
    for trial in range(trial_lo, trial_hi):
        rng = _trial_rng(cfg.seed, 0, trial)
        c, bits, symbols, received, _ = _generate_uncoded_frame(cfg, sigma_v2, rng)
        k, n_rx, p = cfg.n_users, cfg.n_rx, cfg.pilots
        chan = init_channel_estimator(k, n_rx, cfg.delta, cfg.forgetting)
        h_hat = np.zeros((n_rx, k), dtype=complex)
        for i in range(p):
            h_hat = channel_estimate_update(chan, received[i], symbols[i])
        order = compute_order(h_hat)
        states = init_receiver(
            k, n_rx, "sdf" if cfg.detector == "sdf" else "pdf", cfg.delta, cfg.forgetting
        )
        run = np.zeros(cfg.frame_len)
        for i in range(p):
            s = symbols[i]
            acc = 0.0
            if cfg.detector == "sdf":
                for j in range(k):
                    x = np.concatenate([received[i], s[order[:j]]])
                    u = rls_update(states[j], x, complex(s[order[j]]))
                    acc += abs(u - s[order[j]]) ** 2
            else:
                fb = _stage1_decisions(states, received[i], n_rx, c)
                for kk in range(k):
                    x = np.concatenate([received[i], np.delete(fb, kk)])
                    u = rls_update(states[kk], x, complex(s[kk]))
                    acc += abs(u - s[kk]) ** 2
            run[i] = acc / k
        for i in range(p, cfg.frame_len):
            res, h_hat, _ = _detect_and_adapt(
                cfg, c, received[i], chan, h_hat, order, states
            )
            run[i] = float(np.mean(np.abs(res.soft_outputs - symbols[i]) ** 2))
        trace += run
        tails.append(float(run[-tail_window:].mean()))
    return trace, np.array(tails)


def run_mse_trace(cfg: ExperimentConfig, tail_window: int = 100) -> MseTrace:
    """Symbol-estimate MSE against symbol index, averaged over cfg.frames runs.

    Uses the first sweep point of cfg.ebn0_db; ``tail_means`` holds each run's
    average over the last ``tail_window`` symbols (steady state).
    """
    if cfg.detector == "ml":
        raise ValueError("MSE trace needs a filter-based detector")
    sigma_v2 = cfg.sigma_v2(cfg.ebn0_db[0])
    tasks = [
        (cfg, sigma_v2, tail_window, lo, hi)
        for lo, hi in _chunks(cfg.frames, max(cfg.threads, 1) * 4)
    ]
    parts = _run_chunked(_mse_chunk, tasks, cfg.threads)
    trace = sum(p[0] for p in parts) / cfg.frames
    tails = np.concatenate([p[1] for p in parts])
    return MseTrace(mse=trace, tail_means=tails, runs=cfg.frames, tail_window=tail_window)


def _coded_chunk(args):
    """Run a block of coded frames; returns per-iteration summed tallies."""
    cfg, point_idx, sigma_v2, perms, trial_lo, trial_hi = args
    c = make_constellation(cfg.modulation)
    code = ConvCode()
    interleavers = tuple(Interleaver(p) for p in perms)
    j = c.bits_per_symbol
    n_coded = code.coded_length(cfg.block_bits)
    n_data = n_coded // j
    idd_cfg = IddConfig(
        turbo_iterations=cfg.turbo_iters,
        d_th=cfg.d_th,
        tau_max=cfg.tau_max,
        detector="pdfcc" if cfg.detector == "pdfcc" else "pdf",
        gamma_cap=cfg.gamma_cap,
        forgetting=cfg.forgetting,
        delta=cfg.delta,
    )
    sums = [dict(coded_errors=0, msg_errors=0, coded_bits=0, msg_bits=0,
                 gamma=0.0, ops=0) for _ in range(cfg.turbo_iters)]
    for trial in range(trial_lo, trial_hi):
        rng = _trial_rng(cfg.seed, point_idx, trial)
        msg = rng.integers(0, 2, size=(cfg.n_users, cfg.block_bits))
        coded = np.stack([conv_encode(msg[k], code) for k in range(cfg.n_users)])
        data_bits = np.empty((n_data, cfg.n_users, j), dtype=np.int64)
        for k in range(cfg.n_users):
            data_bits[:, k, :] = interleavers[k].interleave(coded[k]).reshape(n_data, j)
        data_symbols = _symbols_from_bits(data_bits, c)
        pilot_idx = rng.integers(0, c.size, size=(cfg.pilots, cfg.n_users))
        pilots = c.points[pilot_idx]
        symbols = np.concatenate([pilots, data_symbols], axis=0)
        t = symbols.shape[0]
        if cfg.channel == "block":
            h = gen_block_fading(cfg.n_users, cfg.n_rx, 1, rng).gains[0]
            clean = symbols @ h.T
        else:
            gains = gen_jakes(cfg.n_users, cfg.n_rx, t, cfg.fdt, rng).gains
            clean = np.einsum("tnk,tk->tn", gains, symbols)
        noise = (
            rng.standard_normal((t, cfg.n_rx)) + 1j * rng.standard_normal((t, cfg.n_rx))
        ) * math.sqrt(sigma_v2 / 2.0)
        frame = CodedFrame(
            received=clean + noise,
            pilots=pilots,
            constellation=c,
            code=code,
            interleavers=interleavers,
            sigma_v2=sigma_v2,
            n_message_bits=cfg.block_bits,
            true_coded=coded,
            true_message=msg,
        )
        res = run_idd(frame, idd_cfg)
        for it, row in enumerate(res.telemetry):
            sums[it]["coded_errors"] += row["coded_errors"]
            sums[it]["coded_bits"] += row["coded_bits"]
            sums[it]["msg_errors"] += row["msg_errors"]
            sums[it]["msg_bits"] += row["msg_bits"]
            sums[it]["gamma"] += row["mean_gamma"]
            sums[it]["ops"] += row["detect_ops"]
    return sums, trial_hi - trial_lo, n_data


def run_coded_sweep(cfg: ExperimentConfig) -> ResultRecord:
    """Monte Carlo sweep of the coded turbo receiver.

    Emits one point per (SNR, turbo iteration); ``ber`` mirrors ``msg_ber``.
    """
    if not cfg.coded:
        raise ValueError("run_coded_sweep needs a config with coded=True")
    if cfg.detector not in ("pdf", "pdfcc"):
        raise ValueError("coded runs support the pdf and pdfcc detectors")
    c = make_constellation(cfg.modulation)
    code = ConvCode()
    n_coded = code.coded_length(cfg.block_bits)
    seq = np.random.SeedSequence([cfg.seed, 777])
    perms = tuple(
        np.random.default_rng(child).permutation(n_coded)
        for child in seq.spawn(cfg.n_users)
    )
    record = ResultRecord(config=cfg, kind="coded")
    for point_idx, ebn0 in enumerate(cfg.ebn0_db):
        sigma_v2 = cfg.sigma_v2(ebn0)
        start = time.perf_counter()
        tasks = [
            (cfg, point_idx, sigma_v2, perms, lo, hi)
            for lo, hi in _chunks(cfg.frames, max(cfg.threads, 1) * 4)
        ]
        parts = _run_chunked(_coded_chunk, tasks, cfg.threads)
        wall = time.perf_counter() - start
        n_data = parts[0][2]
        for it in range(cfg.turbo_iters):
            coded_errors = sum(p[0][it]["coded_errors"] for p in parts)
            coded_bits = sum(p[0][it]["coded_bits"] for p in parts)
            msg_errors = sum(p[0][it]["msg_errors"] for p in parts)
            msg_bits = sum(p[0][it]["msg_bits"] for p in parts)
            gamma = sum(p[0][it]["gamma"] for p in parts)
            ops = sum(p[0][it]["ops"] for p in parts)
            lo, hi = wilson_interval(msg_errors, msg_bits)
            record.points.append(
                SnrPoint(
                    ebn0_db=ebn0,
                    bit_errors=msg_errors,
                    n_bits=msg_bits,
                    ber=msg_errors / msg_bits,
                    ber_ci_lo=lo,
                    ber_ci_hi=hi,
                    mean_gamma=gamma / cfg.frames,
                    mean_detect_ops=ops / (cfg.frames * n_data),
                    mean_adapt_ops=0.0,
                    trials=cfg.frames,
                    wall_time=wall,
                    turbo_iter=it + 1,
                    coded_ber=coded_errors / coded_bits,
                    msg_ber=msg_errors / msg_bits,
                )
            )
    return record


def count_ops(cfg: ExperimentConfig, ebn0_db: float, frames: int = 20) -> OpsTally:
    """Instrumented complex-multiplication tally of a short uncoded run."""
    probe = replace(cfg, ebn0_db=(ebn0_db,), frames=frames, threads=1)
    sigma_v2 = probe.sigma_v2(ebn0_db)
    errors, bits_total, gamma_sum, det_ops, adapt_ops, detections = _uncoded_chunk(
        (probe, 0, sigma_v2, 0, frames)
    )
    return OpsTally(
        detect_per_symbol=det_ops / detections,
        adapt_per_symbol=adapt_ops / detections,
        mean_gamma=gamma_sum / detections,
    )


def _config_echo(cfg: ExperimentConfig) -> str:
    fields = (
        "detector n_users n_rx modulation channel fdt frames frame_len pilots "
        "forgetting delta d_th tau_max gamma_cap coded turbo_iters block_bits seed"
    ).split()
    return " ".join(f"{name}={getattr(cfg, name)}" for name in fields)


def write_csv(record: ResultRecord | MseTrace, path, config: ExperimentConfig | None = None):
    """Write results as CSV with a schema-versioned comment header."""
    own = isinstance(path, (str, bytes))
    fh = open(path, "w") if own else path
    try:
        if isinstance(record, MseTrace):
            fh.write(f"# mudlink-csv v{CSV_SCHEMA_VERSION} kind=mse\n")
            if config is not None:
                fh.write(f"# {_config_echo(config)}\n")
            fh.write("symbol_index,mse,runs\n")
            for i, val in enumerate(record.mse):
                fh.write(f"{i},{val:.8e},{record.runs}\n")
            return
        fh.write(f"# mudlink-csv v{CSV_SCHEMA_VERSION} kind={record.kind}\n")
        fh.write(f"# {_config_echo(record.config)}\n")
        base = "ebn0_db,detector,ber,ber_ci_lo,ber_ci_hi,mean_gamma,mean_ops,trials"
        if record.kind == "coded":
            fh.write(base + ",turbo_iter,coded_ber,msg_ber\n")
        else:
            fh.write(base + "\n")
        for p in record.points:
            row = (
                f"{p.ebn0_db:g},{record.config.detector},{p.ber:.8e},"
                f"{p.ber_ci_lo:.8e},{p.ber_ci_hi:.8e},{p.mean_gamma:.6g},"
                f"{p.mean_detect_ops:.6g},{p.trials}"
            )
            if record.kind == "coded":
                row += f",{p.turbo_iter},{p.coded_ber:.8e},{p.msg_ber:.8e}"
            fh.write(row + "\n")
    finally:
        if own:
            fh.close()
