"""Tests for the Monte Carlo harness: config validation, sweeps, op counting,
reproducibility, and CSV emission.

The BER oracle here is a straight-line reimplementation of the uncoded frame
loop (own seeding, own training loop, module ops called directly); production
results must agree within Monte Carlo error.
"""

import io
import math

import numpy as np
import pytest

from mudlink import (
    ExperimentConfig,
    compute_order,
    count_ops,
    init_channel_estimator,
    init_receiver,
    make_constellation,
    pdfcc_detect,
    rls_update,
    run_coded_sweep,
    run_mse_trace,
    run_uncoded_sweep,
    wilson_interval,
    write_csv,
)
from mudlink.estimation import channel_estimate_update


class TestConfigValidation:
    def test_defaults_valid(self):
        ExperimentConfig()

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(detector="zf"),
            dict(n_users=5, n_rx=4),
            dict(n_users=0),
            dict(channel="awgn"),
            dict(channel="jakes", fdt=0.7),
            dict(frames=0),
            dict(pilots=0),
            dict(pilots=500, frame_len=500),
            dict(forgetting=0.0),
            dict(forgetting=1.2),
            dict(delta=-1.0),
            dict(d_th=-0.5),
            dict(tau_max=0),
            dict(turbo_iters=0),
            dict(threads=0),
            dict(ebn0_db=()),
            dict(detector="ml", n_users=16, n_rx=16),
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            ExperimentConfig(**kwargs)

    def test_sigma_v2_doubles_at_half_rate(self):
        uncoded = ExperimentConfig(coded=False)
        coded = ExperimentConfig(coded=True, detector="pdfcc")
        assert coded.sigma_v2(6.0) == pytest.approx(2 * uncoded.sigma_v2(6.0))


class TestWilson:
    def test_zero_errors(self):
        lo, hi = wilson_interval(0, 1000)
        assert lo == 0.0
        assert 0 < hi < 0.01

    def test_contains_point_estimate(self):
        for errors, n in [(3, 100), (50, 1000), (999, 1000)]:
            lo, hi = wilson_interval(errors, n)
            assert lo <= errors / n <= hi

    def test_shrinks_with_n(self):
        _, hi_small = wilson_interval(10, 100)
        _, hi_big = wilson_interval(100, 1000)
        assert hi_big - 100 / 1000 < hi_small - 10 / 100


def fast_cfg(**kwargs):
    base = dict(
        detector="pdf",
        n_users=4,
        n_rx=4,
        ebn0_db=(8.0,),
        frames=4,
        frame_len=60,
        pilots=10,
        seed=7,
    )
    base.update(kwargs)
    return ExperimentConfig(**base)


class TestUncodedSweep:
    def test_high_snr_ml_is_error_free(self):
        record = run_uncoded_sweep(fast_cfg(detector="ml", ebn0_db=(200.0,)))
        assert record.points[0].bit_errors == 0
        assert record.points[0].ber == 0.0

    def test_pdfcc_with_infinite_threshold_matches_pdf(self):
        pdf = run_uncoded_sweep(fast_cfg(detector="pdf", frames=6))
        cc = run_uncoded_sweep(fast_cfg(detector="pdfcc", d_th=math.inf, frames=6))
        assert pdf.points[0].bit_errors == cc.points[0].bit_errors
        assert pdf.points[0].n_bits == cc.points[0].n_bits
        assert cc.points[0].mean_gamma == 1.0

    def test_bit_identical_reproducibility(self):
        a = run_uncoded_sweep(fast_cfg(detector="pdfcc", frames=5))
        b = run_uncoded_sweep(fast_cfg(detector="pdfcc", frames=5))
        assert [(p.bit_errors, p.n_bits, p.mean_gamma) for p in a.points] == [
            (p.bit_errors, p.n_bits, p.mean_gamma) for p in b.points
        ]

    def test_thread_count_does_not_change_counts(self):
        one = run_uncoded_sweep(fast_cfg(detector="pdfcc", frames=8, threads=1))
        two = run_uncoded_sweep(fast_cfg(detector="pdfcc", frames=8, threads=2))
        assert one.points[0].bit_errors == two.points[0].bit_errors
        assert one.points[0].mean_gamma == two.points[0].mean_gamma

    def test_jakes_channel_runs(self):
        record = run_uncoded_sweep(
            fast_cfg(detector="pdfcc", channel="jakes", fdt=1e-3, frames=3)
        )
        assert record.points[0].n_bits > 0

    def test_sdf_runs_and_counts(self):
        record = run_uncoded_sweep(fast_cfg(detector="sdf", frames=3))
        p = record.points[0]
        assert p.n_bits == 3 * 50 * 4 * 2
        assert p.mean_detect_ops == 4 + 5 + 6 + 7

    def test_matches_straight_line_reimplementation(self):
        # Independent single-purpose loop (own rng layout, own tallying).
        cfg = fast_cfg(
            detector="pdfcc",
            d_th=0.05,
            frames=400,
            frame_len=120,
            ebn0_db=(6.0, 9.0, 12.0),
            threads=2,
        )
        record = run_uncoded_sweep(cfg)
        c = make_constellation("qpsk")
        for point in record.points:
            sigma_v2 = cfg.sigma_v2(point.ebn0_db)
            naive_rng = np.random.default_rng(991 + int(point.ebn0_db))
            errors = 0
            total = 0
            for _ in range(cfg.frames):
                h = (
                    naive_rng.standard_normal((4, 4))
                    + 1j * naive_rng.standard_normal((4, 4))
                ) / math.sqrt(2)
                idx = naive_rng.integers(0, 4, (cfg.frame_len, 4))
                syms = c.points[idx]
                noise = math.sqrt(sigma_v2 / 2) * (
                    naive_rng.standard_normal((cfg.frame_len, 4))
                    + 1j * naive_rng.standard_normal((cfg.frame_len, 4))
                )
                rx = syms @ h.T + noise
                chan = init_channel_estimator(4, 4, 0.01, cfg.forgetting)
                for i in range(cfg.pilots):
                    h_hat = channel_estimate_update(chan, rx[i], syms[i])
                states = init_receiver(4, 4, "pdf", 0.01, cfg.forgetting)
                for i in range(cfg.pilots):
                    fwd = np.stack([st.weights[:4] for st in states])
                    u1 = fwd.conj() @ rx[i]
                    fb = c.points[np.argmin(np.abs(u1[:, None] - c.points[None, :]), axis=1)]
                    for k in range(4):
                        x = np.concatenate([rx[i], np.delete(fb, k)])
                        rls_update(states[k], x, complex(syms[i][k]))
                for i in range(cfg.pilots, cfg.frame_len):
                    res = pdfcc_detect(rx[i], states, h_hat, c, cfg.d_th, 4, 4096)
                    for k in range(4):
                        x = np.concatenate([rx[i], np.delete(res.first_pass, k)])
                        rls_update(states[k], x, complex(res.decisions[k]))
                    h_hat = channel_estimate_update(chan, rx[i], res.decisions)
                    dec_idx = np.argmin(
                        np.abs(res.decisions[:, None] - c.points[None, :]), axis=1
                    )
                    errors += int(np.sum(c.labels[dec_idx] != c.labels[idx[i]]))
                    total += 8
            naive_ber = errors / total
            sig = math.sqrt(
                point.ber * (1 - point.ber) / point.n_bits
                + naive_ber * (1 - naive_ber) / total
                + 1e-12
            )
            assert abs(point.ber - naive_ber) < 4 * sig + 2e-4, (
                f"{point.ebn0_db} dB: {point.ber} vs naive {naive_ber}"
            )


class TestMseTrace:
    def test_trace_length_equals_frame(self):
        trace = run_mse_trace(fast_cfg(detector="pdfcc", frames=3))
        assert trace.mse.shape == (60,)
        assert trace.runs == 3
        assert trace.tail_means.shape == (3,)

    def test_noiseless_training_converges_to_zero(self):
        cfg = fast_cfg(
            detector="pdf",
            ebn0_db=(200.0,),
            frames=3,
            frame_len=80,
            pilots=60,
            forgetting=1.0,
        )
        trace = run_mse_trace(cfg)
        assert trace.mse[0] > 0.1  # cold start
        assert trace.mse[59] < 1e-3  # end of training, fully adapted

    def test_ml_rejected(self):
        with pytest.raises(ValueError):
            run_mse_trace(fast_cfg(detector="ml"))


class TestCodedSweep:
    def test_zero_noise_zero_errors(self):
        cfg = ExperimentConfig(
            detector="pdfcc",
            coded=True,
            ebn0_db=(200.0,),
            frames=2,
            block_bits=64,
            pilots=8,
            turbo_iters=2,
            seed=3,
        )
        record = run_coded_sweep(cfg)
        assert all(p.msg_ber == 0.0 for p in record.points)

    def test_one_row_per_iteration(self):
        cfg = ExperimentConfig(
            detector="pdfcc",
            coded=True,
            ebn0_db=(4.0, 6.0),
            frames=2,
            block_bits=64,
            pilots=8,
            turbo_iters=3,
            seed=3,
        )
        record = run_coded_sweep(cfg)
        assert len(record.points) == 2 * 3
        assert [p.turbo_iter for p in record.points[:3]] == [1, 2, 3]

    def test_requires_coded_flag(self):
        with pytest.raises(ValueError):
            run_coded_sweep(fast_cfg())


class TestCountOps:
    def test_pdfcc_infinite_threshold_diff_is_reliability_checks(self):
        base = fast_cfg(detector="pdf", frames=2)
        cc = fast_cfg(detector="pdfcc", d_th=math.inf, frames=2)
        pdf_tally = count_ops(base, 8.0, frames=2)
        cc_tally = count_ops(cc, 8.0, frames=2)
        assert cc_tally.detect_per_symbol - pdf_tally.detect_per_symbol == 4.0
        assert cc_tally.adapt_per_symbol == pdf_tally.adapt_per_symbol

    def test_ml_detection_ops_analytic(self):
        tally = count_ops(fast_cfg(detector="ml"), 8.0, frames=1)
        assert tally.detect_per_symbol == 256 * 20
        assert tally.mean_gamma == 256

    def test_total_is_sum(self):
        tally = count_ops(fast_cfg(detector="pdf"), 8.0, frames=1)
        assert tally.total_per_symbol == tally.detect_per_symbol + tally.adapt_per_symbol


class TestCsv:
    def test_uncoded_schema(self):
        record = run_uncoded_sweep(fast_cfg(frames=2))
        buf = io.StringIO()
        write_csv(record, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0].startswith("# mudlink-csv v1 kind=uncoded")
        assert lines[2] == (
            "ebn0_db,detector,ber,ber_ci_lo,ber_ci_hi,mean_gamma,mean_ops,trials"
        )
        assert len(lines) == 4
        assert lines[3].split(",")[1] == "pdf"

    def test_coded_schema_extends_base(self):
        cfg = ExperimentConfig(
            detector="pdfcc", coded=True, ebn0_db=(6.0,), frames=1,
            block_bits=64, pilots=8, turbo_iters=2, seed=3,
        )
        buf = io.StringIO()
        write_csv(run_coded_sweep(cfg), buf)
        header = buf.getvalue().splitlines()[2]
        assert header.endswith(",turbo_iter,coded_ber,msg_ber")

    def test_mse_schema(self):
        cfg = fast_cfg(frames=2)
        buf = io.StringIO()
        write_csv(run_mse_trace(cfg), buf, config=cfg)
        lines = buf.getvalue().splitlines()
        assert lines[0].startswith("# mudlink-csv v1 kind=mse")
        assert lines[2] == "symbol_index,mse,runs"
        assert len(lines) == 3 + 60
