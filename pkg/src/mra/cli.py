"""``mra <command> --manifest <path> [--seed <u64>] [--out <dir>]``.

Exit codes: 0 every verdict passed, 1 a verdict failed, 2 configuration
error, 3 runtime or numerical failure.
"""
from __future__ import annotations

import argparse
import sys

from .experiments import run_experiment
from .manifest import KINDS, FieldError, ManifestError, load_manifest

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mra", description="Non-local reaction-diffusion experiments.")
    parser.add_argument("command", choices=KINDS, help="experiment kind to run")
    parser.add_argument("--manifest", required=True, help="path to a TOML manifest")
    parser.add_argument("--seed", type=_u64, help="override ensemble.seed")
    parser.add_argument("--out", help="override output.dir")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = load_manifest(args.manifest, kind=args.command)
        if args.seed is not None:
            sections = dict(manifest.sections)
            sections["ensemble"] = {**sections.get("ensemble", {}), "seed": args.seed}
            manifest = type(manifest)(manifest.kind, sections)
        outcome = run_experiment(manifest, args.out)
    except OSError as exc:
        print(f"mra: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ManifestError as exc:
        for err in exc.errors:
            print(f"mra: manifest error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"mra: configuration error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ArithmeticError) as exc:
        print(f"mra: runtime failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for name, verdict in outcome.verdicts.items():
        status = "pass" if verdict.passed else "FAIL"
        margin = "n/a" if verdict.margin is None else f"{verdict.margin:.6g}"
        print(f"{name}: {status} (margin {margin})")
    for path in outcome.artifacts:
        print(f"wrote {path}")
    return EXIT_PASS if outcome.passed else EXIT_FAIL


__all__ = ["main", "build_parser", "FieldError"]

if __name__ == "__main__":
    sys.exit(main())
