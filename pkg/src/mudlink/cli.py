"""Command-line harness.

``mudlink simulate`` runs a BER sweep (uncoded or coded) or an MSE trace and
writes CSV.  Flags can also be given in a flat key=value config file via
``--config``; explicit flags override file values.

Exit codes: 0 success, 2 configuration error, 3 runtime numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import sys

import numpy as np

from .harness import (
    ExperimentConfig,
    run_coded_sweep,
    run_mse_trace,
    run_uncoded_sweep,
    write_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_FLAGS = [
    # (name, type, default, help)
    ("detector", str, "pdfcc", "detector: ml | sdf | pdf | pdfcc"),
    ("users", int, 4, "number of single-antenna users K"),
    ("rx", int, 4, "number of receive antennas"),
    ("modulation", str, "qpsk", "constellation: qpsk | 16qam"),
    ("channel", str, "block", "fading model: block | jakes"),
    ("fdt", float, 1e-3, "normalized Doppler for the jakes channel"),
    ("ebn0", str, "10", "comma-separated Eb/N0 sweep in dB"),
    ("frames", int, 1000, "Monte Carlo frames per sweep point"),
    ("frame-len", int, 500, "symbol vectors per frame"),
    ("pilots", int, 10, "training vectors at the head of each frame"),
    ("lambda", float, 0.998, "RLS forgetting factor"),
    ("delta", float, 0.01, "inverse-correlation initialization constant"),
    ("dth", float, 0.05, "reliability threshold distance"),
    ("tau-max", int, 4, "per-user candidate list cap"),
    ("gamma-cap", int, 4096, "total candidate vector cap"),
    ("turbo-iters", int, 4, "turbo iterations for coded runs"),
    ("block-bits", int, 1000, "message bits per coded block"),
    ("code", str, "conv-7-5", "channel code (only conv-7-5 is built)"),
    ("seed", int, 12345, "master RNG seed"),
    ("threads", int, 1, "worker processes for Monte Carlo trials"),
    ("out", str, "-", "output CSV path ('-' for stdout)"),
    ("config", str, None, "flat key=value config file; flags override it"),
]

_BOOL_FLAGS = [
    ("coded", "run the coded (turbo) chain"),
    ("mse-trace", "emit the per-symbol MSE trace instead of a BER sweep"),
    ("refine-feedback", "re-run the cancellation stage with the selected vector"),
]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mudlink")
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="run a link-level simulation")
    for name, typ, _default, help_text in _FLAGS:
        sim.add_argument(f"--{name}", type=typ, default=None, help=help_text)
    for name, help_text in _BOOL_FLAGS:
        sim.add_argument(f"--{name}", action="store_true", default=None, help=help_text)
    return parser


def _load_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_string("[simulate]\n" + fh.read())
    return dict(parser["simulate"])


def _resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and explicit flags (highest wins)."""
    values = {name: default for name, _t, default, _h in _FLAGS}
    values.update({name: False for name, _h in _BOOL_FLAGS})
    types = {name: typ for name, typ, _d, _h in _FLAGS}
    if args.config:
        for key, raw in _load_config_file(args.config).items():
            key = key.replace("_", "-")
            if key in types:
                values[key] = types[key](raw)
            elif key in dict(_BOOL_FLAGS):
                values[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                raise ValueError(f"unknown config key {key!r}")
    for name in list(types) + [n for n, _h in _BOOL_FLAGS]:
        given = getattr(args, name.replace("-", "_"))
        if given is not None:
            values[name] = given
    return values


def _make_experiment(values: dict) -> ExperimentConfig:
    if values["code"] != "conv-7-5":
        raise ValueError(f"unsupported code {values['code']!r}")
    ebn0 = tuple(float(x) for x in str(values["ebn0"]).split(",") if x.strip())
    return ExperimentConfig(
        detector=values["detector"],
        n_users=values["users"],
        n_rx=values["rx"],
        modulation=values["modulation"],
        channel=values["channel"],
        fdt=values["fdt"],
        ebn0_db=ebn0,
        frames=values["frames"],
        frame_len=values["frame-len"],
        pilots=values["pilots"],
        forgetting=values["lambda"],
        delta=values["delta"],
        d_th=values["dth"],
        tau_max=values["tau-max"],
        gamma_cap=values["gamma-cap"],
        coded=values["coded"],
        turbo_iters=values["turbo-iters"],
        block_bits=values["block-bits"],
        seed=values["seed"],
        threads=values["threads"],
        refine_feedback=values["refine-feedback"],
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        values = _resolve(args)
        cfg = _make_experiment(values)
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if values["mse-trace"]:
            trace = run_mse_trace(cfg)
            _emit(trace, values["out"], cfg)
        elif cfg.coded:
            _emit(run_coded_sweep(cfg), values["out"])
        else:
            _emit(run_uncoded_sweep(cfg), values["out"])
    except (FloatingPointError, np.linalg.LinAlgError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _emit(record, out: str, cfg: ExperimentConfig | None = None):
    if out == "-":
        write_csv(record, sys.stdout, config=cfg)
    else:
        with open(out, "w") as fh:
            write_csv(record, fh, config=cfg)


if __name__ == "__main__":
    sys.exit(main())
