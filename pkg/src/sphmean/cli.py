"""Command-line entry point: sphmean <command> --config <path> [options]."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import pipeline
from .io import CacheError, ConfigError, SinogramFormatError, load_config
from .rangecheck import IN_RANGE, OUT_OF_RANGE

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_OUT_OF_RANGE = 2
EXIT_INCONCLUSIVE = 3
EXIT_NUMERIC = 4

COMMANDS = ("forward", "certify", "reconstruct", "spectrum", "verify-identities", "roundtrip")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sphmean", description="Spherical mean transform on H2 and S2: simulate, certify, reconstruct.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--in", dest="input", help="sinogram CSV (certify, reconstruct)")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--tolerance", type=float, help="pass threshold for certify, identity tolerance for verify-identities")
    p.add_argument("--quiet", action="store_true", help="no summary on stdout")
    return p


def _verdict_code(verdict) -> int:
    if verdict == IN_RANGE:
        return EXIT_OK
    if verdict == OUT_OF_RANGE:
        return EXIT_OUT_OF_RANGE
    return EXIT_INCONCLUSIVE


def _run(args) -> tuple[int, str]:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    if cmd in ("certify", "reconstruct") and not args.input:
        raise ConfigError(f"{cmd} needs a sinogram: pass --in <file>")
    if cmd == "forward":
        doc = pipeline.cmd_forward(cfg, out)
        return EXIT_OK, f"wrote {out / 'sinogram.csv'}"
    if cmd == "certify":
        doc = pipeline.cmd_certify(cfg, out, args.input, args.tolerance)
        p = doc["payload"]
        return _verdict_code(p["verdict"]), f"{p['verdict']}: max normalized residual {p['max_normalized_residual']:.3g}"
    if cmd == "reconstruct":
        doc = pipeline.cmd_reconstruct(cfg, out, args.input)
        err = doc["payload"]["rel_l2_error"]
        tail = f", rel L2 error {err:.3g}" if isinstance(err, float) else ""
        return EXIT_OK, f"wrote {out / 'field.json'}{tail}"
    if cmd == "spectrum":
        doc = pipeline.cmd_spectrum(cfg, out)
        p = doc["payload"]
        return EXIT_OK, f"{len(p['entries'])} eigenpairs, Gram residual {p['gram_residual']:.3g}"
    if cmd == "verify-identities":
        doc = pipeline.cmd_identities(cfg, out, args.tolerance)
        p = doc["payload"]
        lines = [f"{k}: {v['passed']}/{v['count']} pass" for k, v in sorted(p["summary"].items())]
        return (EXIT_OK if p["all_pass"] else EXIT_NUMERIC), "\n".join(lines)
    doc = pipeline.cmd_roundtrip(cfg, out, args.tolerance)
    p = doc["payload"]
    return _verdict_code(p["verdict"]), f"{p['verdict']}, rel L2 error {p['rel_l2_error']:.3g}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            if args.quiet:
                warnings.simplefilter("ignore")
            code, summary = _run(args)
    except (ConfigError, SinogramFormatError, CacheError, FileNotFoundError, ValueError) as exc:
        print(f"sphmean: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"sphmean: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not args.quiet:
        print(summary)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
