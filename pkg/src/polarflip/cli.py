"""Command-line entry point: ``simulate``, ``memory`` and ``codeinfo``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from polarflip import _backend
from polarflip.composite_decoders import DecoderSpec
from polarflip.errors import ConfigurationError, InvalidParametersError
from polarflip.harness import ExperimentConfig, StopRule, estimate_memory, run_sweep
from polarflip.polar_code import build_code_spec


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.decoder:
        changes["decoders"] = tuple(DecoderSpec.parse(d) for d in args.decoder)
    if args.sigma2 is not None:
        decoders = changes.get("decoders", cfg.decoders)
        changes["decoders"] = tuple(
            dataclasses.replace(d, perturb=dataclasses.replace(d.perturb, sigma2=args.sigma2)) for d in decoders
        )
    if args.ebn0:
        changes["ebn0_grid_db"] = tuple(sorted(args.ebn0))
    if args.frames is not None or args.errors is not None:
        changes["stop"] = StopRule(
            args.frames if args.frames is not None else cfg.stop.max_frames,
            args.errors if args.errors is not None else cfg.stop.target_block_errors,
        )
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.rate is not None:
        changes["rate_convention"] = args.rate
    return dataclasses.replace(cfg, **changes) if changes else cfg


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(ExperimentConfig.load(args.config), args)
    result = run_sweep(cfg, out=args.out, fmt=args.format, resume=not args.no_resume)
    if not args.out:
        if args.format == "json":
            sys.stdout.write(result.to_json())
        else:
            sys.stdout.write(result.to_csv())
    for err in result.errors:
        print(f"error: {err}", file=sys.stderr)
    return 1 if result.errors else 0


def cmd_memory(args) -> int:
    spec = build_code_spec(args.n, args.k, args.c)
    est = estimate_memory(spec, args.qch, args.qint, args.qflip, args.fmax, args.pmax, args.kind,
                          ones_count=True if args.ones_count else None)
    print(json.dumps(est.as_dict(), indent=1))
    return 0


def cmd_codeinfo(args) -> int:
    print(json.dumps(build_code_spec(args.n, args.k, args.c).to_dict(), indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarflip", description="CA-polar flip and perturbation decoders.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a BLER sweep from a JSON config")
    sim.add_argument("--config", required=True, help="JSON experiment config")
    sim.add_argument("--decoder", action="append", help="name[:Fmax[:Pmax]], repeatable; replaces the config list")
    sim.add_argument("--ebn0", type=float, nargs="+", help="Eb/N0 grid in dB")
    sim.add_argument("--frames", type=int, help="max frames per point")
    sim.add_argument("--errors", type=int, help="target block errors per point")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--workers", type=int)
    sim.add_argument("--sigma2", type=float, help="perturbation variance for all decoders")
    sim.add_argument("--rate", choices=("k", "k+c"), help="bits Eb is charged to (default from config: k)")
    sim.add_argument("--out", help="output file, rewritten after every row (default: stdout)")
    sim.add_argument("--format", choices=("csv", "json"), default="csv")
    sim.add_argument("--no-resume", action="store_true", help="recompute rows already present in --out")
    sim.set_defaults(func=cmd_simulate)

    mem = sub.add_parser("memory", help="decoder storage estimate in bits")
    mem.add_argument("--n", type=int, required=True, help="block length N")
    mem.add_argument("--k", type=int, required=True)
    mem.add_argument("--c", type=int, default=16)
    mem.add_argument("--qch", type=int, default=6)
    mem.add_argument("--qint", type=int, default=6)
    mem.add_argument("--qflip", type=int, default=8)
    mem.add_argument("--fmax", type=int, default=0)
    mem.add_argument("--pmax", type=int, default=0)
    mem.add_argument("--kind", default="dscfp", choices=("sc", "scf", "dscf", "scp", "dscp", "dscfp", "pdscf"))
    mem.add_argument("--ones-count", action="store_true", help="add the DSCP ones-count history")
    mem.set_defaults(func=cmd_memory)

    info = sub.add_parser("codeinfo", help="print the code construction as JSON")
    info.add_argument("--n", type=int, required=True, help="block length N")
    info.add_argument("--k", type=int, required=True)
    info.add_argument("--c", type=int, default=16)
    info.set_defaults(func=cmd_codeinfo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    logging.getLogger(__name__).debug("kernel backend: %s", _backend.NAME)
    try:
        return args.func(args)
    except (ConfigurationError, InvalidParametersError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
