"""Command-line front end.

Sub-commands: ``simulate``, ``downconvert``, ``certify``, ``extract``,
``sweep`` and ``selftest``. Every option may also be given in a JSON file
passed with ``--config`` (keys are the option names with dashes replaced by
underscores); options on the command line take precedence.

Exit codes: 0 success, 2 invalid parameters, 3 insufficient data or seed,
4 input/output problems.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .dsp import (
    CAPTURE_RATE,
    CARRIER,
    CUTOFF,
    autocorrelation,
    downconvert,
    simulate_receiver_signal,
)
from .errors import (
    FormatError,
    InsufficientDataError,
    InvalidParameterError,
    NothingExtractableError,
    OutputError,
    QRNGError,
    SeedExhaustedError,
)
from .extractor import ExtractorSpec
from .protocol import ProtocolConfig, run_protocol
from .rawio import ingest_raw, quantize_amplitudes, symbols_from_stream, write_raw
from .report import emit_report, write_csv
from .sanity import MIN_BITS, sanity_tests
from .states import GaussianState, Partition, SampleBlock
from .sweeps import SWEEPS

log = logging.getLogger("sdiqrng")

EXIT_OK, EXIT_INVALID, EXIT_DATA, EXIT_IO = 0, 2, 3, 4


def parse_state(text: str) -> GaussianState:
    """``vacuum``, ``thermal:MU``, ``squeezed:ZETA`` or ``empirical:VAR``."""
    kind, _, value = text.partition(":")
    kind = kind.strip().lower()
    if kind == "vacuum":
        return GaussianState.vacuum()
    builders = {
        "thermal": GaussianState.thermal,
        "squeezed": GaussianState.squeezed,
        "empirical": GaussianState.empirical,
    }
    if kind not in builders or not value:
        raise InvalidParameterError(f"cannot parse state {text!r}")
    try:
        return builders[kind](float(value))
    except ValueError as exc:
        raise InvalidParameterError(f"cannot parse state {text!r}: {exc}") from exc


def _float_list(text: str) -> List[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _int_list(text: str) -> List[int]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _add_source(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("source")
    g.add_argument("--state", default="empirical:0.677",
                   help="vacuum | thermal:MU | squeezed:ZETA | empirical:VAR")
    g.add_argument("--input", type=Path, help="raw capture (.i16 with JSON sidecar)")
    g.add_argument("--vacuum-variance", type=float,
                   help="shot-noise variance of an ingested capture, in its units squared")
    g.add_argument("--source-seed", type=int, default=1)


def _add_partition(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("partition")
    g.add_argument("--bit-depth", type=int, default=5)
    g.add_argument("--p-max", type=float, help="range in vacuum units (default 10.5 sigma)")
    g.add_argument("--full-scale-sigmas", type=float, default=10.5)
    g.add_argument("--centered", action="store_true", help="bins centred on multiples of delta")


def _add_protocol(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("protocol")
    g.add_argument("-m", "--measurements", type=int, default=2**22)
    g.add_argument("--n-q", type=int, help="checks per block (default ceil(sqrt(block)))")
    g.add_argument("--estimator", choices=["bayesian", "plugin"], default="bayesian")
    g.add_argument("--block-size", type=int, help="recalibration block (default: whole run)")
    g.add_argument("--seed", type=int, default=0, help="selection seed (pseudo-random pool)")
    g.add_argument("--seed-file", type=Path, help="file of true random seed bytes")
    g.add_argument("--reinvest", action="store_true")


def _add_extractor(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("extractor")
    g.add_argument("--block-bits", type=int, default=10000, help="extractor input length n")
    g.add_argument("--bits-per-sample", type=int, help="default: bit depth")
    g.add_argument("--output-length", type=int, help="fixed l (default from h_low)")
    g.add_argument("--matrix-mode", choices=["full", "toeplitz"], default="full")
    g.add_argument("--matrix-seed", type=int, default=0)
    g.add_argument("--fixed-matrix", action="store_true", help="reuse one matrix")
    g.add_argument("--margin", type=float, default=0.0)
    g.add_argument("--bits-out", type=Path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdiqrng", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("simulate", help="write a simulated raw capture")
    p.add_argument("--config", type=Path)
    p.add_argument("--state", default="vacuum")
    p.add_argument("--noise-variance", type=float, default=0.0)
    p.add_argument("--samples", type=int, default=4 * 10**6)
    p.add_argument("--sample-rate", type=float, default=CAPTURE_RATE)
    p.add_argument("--bandwidth", type=float, help="band-limit to [0, B] Hz")
    p.add_argument("--full-scale", type=float, default=8.0, help="ADC range in vacuum units")
    p.add_argument("--adc-bits", type=int, default=16)
    p.add_argument("--source-seed", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("downconvert", help="downmix, low-pass and decimate a capture")
    p.add_argument("--config", type=Path)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--f0", type=float, default=CARRIER, help="carrier in Hz; 0 skips mixing")
    p.add_argument("--cutoff", type=float, default=CUTOFF)
    p.add_argument("--taps", type=int, default=513)
    p.add_argument("--response", choices=["sinc", "root_nyquist"], default="root_nyquist")
    p.add_argument("--factor", type=int, default=4)
    p.add_argument("--max-lag", type=int, default=50)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--acf-out", type=Path)

    for name, helptext in (("certify", "certify the entropy bound"),
                           ("extract", "certify and extract random bits")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path)
        _add_source(p)
        _add_partition(p)
        _add_protocol(p)
        if name == "extract":
            _add_extractor(p)
            p.add_argument("--no-sanity", action="store_true")
        p.add_argument("--report", type=Path, required=True)

    p = sub.add_parser("sweep", help="tabulate a parameter sweep")
    p.add_argument("--config", type=Path)
    p.add_argument("kind", choices=sorted(SWEEPS))
    p.add_argument("--deltas", default="0.001,0.01,0.05,0.1,0.2,0.3,0.4,0.5,0.6")
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--bit-depths", default="3..8")
    p.add_argument("--n-q", default="64,256,1024,2048,4096")
    p.add_argument("--subsets", type=int, default=200)
    p.add_argument("--pool-size", type=int, default=2**22)
    p.add_argument("--zetas", default="1.1,1.5,2,2.5,3,4")
    p.add_argument("--log2-m", default="7..47")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--variances", default="0.52,0.55,0.6,0.677,0.7,0.8,1.0")
    p.add_argument("--variance", type=float, default=0.677)
    p.add_argument("--estimator", choices=["bayesian", "plugin"], default="bayesian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("selftest", help="check core invariants")
    p.add_argument("--config", type=Path)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Optional[List[str]]):
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in parser.subcommands), None)
    if known.config is None or command is None:
        return parser.parse_args(argv)
    try:
        config = json.loads(Path(known.config).read_text())
    except FileNotFoundError as exc:
        raise OutputError(f"missing config file {known.config}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise InvalidParameterError("config file must hold a JSON object")
    subparser = parser.subcommands[command]
    actions = {a.dest: a for a in subparser._actions}
    unknown = set(config) - set(actions)
    if unknown:
        raise InvalidParameterError(f"unknown config keys: {', '.join(sorted(unknown))}")
    # file values become defaults, so explicit flags still win
    for dest, value in config.items():
        action = actions[dest]
        if action.type is not None and value is not None and not isinstance(value, bool):
            config[dest] = action.type(value)
        action.required = False
    subparser.set_defaults(**config)
    return parser.parse_args(argv)


def _partition(args, sigma: float) -> Partition:
    p_max = args.p_max if args.p_max is not None else args.full_scale_sigmas * sigma
    return Partition.from_bits(args.bit_depth, p_max, centered=args.centered)


def _source(args):
    """Return ``(source, partition, m)`` for certify/extract."""
    if args.input is not None:
        stream = ingest_raw(args.input)
        if args.vacuum_variance is None:
            raise InvalidParameterError("--vacuum-variance is required with --input")
        scale = math.sqrt(0.5 / args.vacuum_variance)
        sigma = float(np.std(stream.samples)) * scale
        partition = _partition(args, sigma)
        symbols = symbols_from_stream(stream, partition, args.vacuum_variance)
        block = SampleBlock(partition, symbols, np.zeros(symbols.size, np.uint8),
                            {"path": str(args.input)})
        m = min(args.measurements, len(block))
        return block, partition, m
    state = parse_state(args.state)
    partition = _partition(args, math.sqrt(state.var_p))
    return state, partition, args.measurements


def _protocol_config(args, partition: Partition, m: int, extractor=None) -> ProtocolConfig:
    seed = args.seed
    if args.seed_file is not None:
        try:
            seed = Path(args.seed_file).read_bytes()
        except OSError as exc:
            raise OutputError(f"cannot read seed file {args.seed_file}: {exc}") from exc
    return ProtocolConfig(
        m=m,
        partition=partition,
        n_q=args.n_q,
        estimator=args.estimator,
        recalibration_block=args.block_size or m,
        seed=seed,
        extractor=extractor,
        reinvest=args.reinvest,
    )


def cmd_simulate(args) -> int:
    state = parse_state(args.state)
    band = None if args.bandwidth is None else (0.0, args.bandwidth)
    stream = simulate_receiver_signal(
        args.samples,
        sample_rate=args.sample_rate,
        quantum_variance=state.var_p,
        noise_variance=args.noise_variance,
        band=band,
        seed=args.source_seed,
    )
    codes = quantize_amplitudes(stream.samples, args.full_scale, args.adc_bits)
    write_raw(args.out, codes, args.sample_rate, args.full_scale, args.adc_bits,
              extra={"state": state.describe(), "noise_variance": args.noise_variance})
    log.info("wrote %d samples to %s", codes.size, args.out)
    return EXIT_OK


def cmd_downconvert(args) -> int:
    stream = ingest_raw(args.input)
    f0 = args.f0 if args.f0 else None
    out = downconvert(stream, f0=f0, cutoff=args.cutoff, factor=args.factor,
                      taps=args.taps, response=args.response)
    meta = stream.origin
    scale = float(max(np.abs(out.samples).max(), 1e-300))
    full_scale = max(scale, float(meta["full_scale"]))
    codes = quantize_amplitudes(out.samples, full_scale, 16)
    write_raw(args.out, codes, out.sample_rate, full_scale, 16,
              extra={"stages": out.origin.get("stages", [])})
    if args.acf_out is not None:
        rho = autocorrelation(out, args.max_lag)
        write_csv(args.acf_out, ("lag", "value"), enumerate(rho))
    log.info("wrote %d samples at %.4g S/s to %s", len(out), out.sample_rate, args.out)
    return EXIT_OK


def _run(args, extract: bool) -> int:
    source, partition, m = _source(args)
    spec = None
    if extract:
        spec = ExtractorSpec(
            n=args.block_bits,
            b=args.bits_per_sample or partition.bit_depth,
            matrix_seed=args.matrix_seed,
            l=args.output_length,
            mode=args.matrix_mode,
            regenerate=not args.fixed_matrix,
            margin=args.margin,
        )
    config = _protocol_config(args, partition, m, spec)
    run = run_protocol(config, source, source_seed=args.source_seed)
    sanity = []
    if extract and not args.no_sanity and run.extracted_bits >= MIN_BITS:
        sanity = sanity_tests(run.output.packed, run.output.n_bits)
    elif extract and not args.no_sanity:
        log.warning("only %d bits extracted; sanity tests need %d", run.extracted_bits, MIN_BITS)
    emit_report(run, args.report, sanity=sanity,
                bits_path=getattr(args, "bits_out", None))
    ent = run.entropy
    if ent is not None:
        print(f"h_low={ent.h_low:.6f} h_max={ent.h_max:.6f} c={ent.overlap.c:.6g} "
              f"r_sec={run.r_sec:.6f} t_bits={run.t_bits} extracted={run.extracted_bits}")
    for s in sanity:
        print(f"{s.name}: statistic={s.statistic:.4f} threshold={s.threshold:.4f} "
              f"{'pass' if s.passed else 'FAIL'}")
    if run.partial:
        log.error("run stopped early: %s", run.error)
        return EXIT_DATA
    return EXIT_OK


def cmd_sweep(args) -> int:
    kind = args.kind
    if kind == "overlap":
        rows = SWEEPS[kind](_float_list(args.deltas), mu=args.mu)
    elif kind == "subsets":
        rows = SWEEPS[kind](_int_list(args.bit_depths), _int_list(args.n_q),
                            variance=args.variance, pool_size=args.pool_size,
                            subsets=args.subsets, estimator=args.estimator, seed=args.seed)
    elif kind == "squeezing":
        rows = SWEEPS[kind](_float_list(args.zetas))
    elif kind == "precision":
        rows = SWEEPS[kind](_int_list(args.bit_depths), variance=args.variance)
    elif kind == "rates":
        rows = SWEEPS[kind](_int_list(args.bit_depths), _int_list(args.log2_m),
                            variance=args.variance, trials=args.trials,
                            estimator=args.estimator, seed=args.seed)
    else:
        rows = SWEEPS[kind](_float_list(args.variances), estimator=args.estimator,
                            seed=args.seed)
    if not rows:
        raise InsufficientDataError("sweep produced no rows")
    header = list(rows[0])
    write_csv(args.out, header, ([r[k] for k in header] for r in rows))
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "downconvert": cmd_downconvert,
    "certify": lambda a: _run(a, extract=False),
    "extract": lambda a: _run(a, extract=True),
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except (OutputError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InsufficientDataError, SeedExhaustedError, NothingExtractableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (QRNGError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
