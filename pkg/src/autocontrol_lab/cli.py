"""Command line entry point: ``run``, ``verify``, ``constants`` and ``fit``."""
from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigurationError, DegenerateInputError, EstimationError
from .orchestrator import (EXIT_FAIL, EXIT_INVALID, EXIT_OK, ConfigValidationError,
                           load_config, run)


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigValidationError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigurationError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    manifest = run(cfg)
    for ev in manifest.events:
        print("event: " + json.dumps(ev, sort_keys=True, default=str))
    print(f"status={manifest.status} output={manifest.output_dir} "
          f"wall_clock={manifest.wall_clock:.2f}s")
    return manifest.exit_code(cfg.expect_blowup)


def _cmd_verify(args) -> int:
    from .acceptance import verify

    overrides = {}
    for item in args.tol or []:
        # ID:key=value, value parsed as JSON
        try:
            cid, kv = item.split(":", 1)
            key, val = kv.split("=", 1)
            overrides.setdefault(int(cid), {})[key] = json.loads(val)
        except ValueError:
            print(f"bad --tol {item!r}; expected ID:key=value", file=sys.stderr)
            return EXIT_INVALID
    results = verify(args.suite, overrides)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    for r in failed:
        print(f"FAILED #{r.id} {r.name}: {', '.join(r.failing())}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def _cmd_constants(args) -> int:
    from .steppers import QuadratureSpec, estimate_constants

    try:
        k = estimate_constants(args.n, args.M, QuadratureSpec(seed=args.seed), C=args.C, t0=args.t0)
    except (ConfigurationError, EstimationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(json.dumps(k.to_dict(), indent=2, sort_keys=True, default=float))
    return EXIT_OK


def _cmd_fit(args) -> int:
    from .diagnostics import envelope_fit
    from .lattice import ModeField

    try:
        v = ModeField.load(args.field)
        fit = envelope_fit(v)
    except (ConfigurationError, DegenerateInputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(json.dumps(fit.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="autocontrol-lab")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="execute a YAML run config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify", help="run acceptance fixtures")
    p.add_argument("suite", choices=("acceptance", "kernel", "envelope", "testbeds", "all"))
    p.add_argument("--tol", action="append", metavar="ID:key=value",
                   help="override a criterion tolerance (repeatable)")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("constants", help="print estimated contraction constants")
    p.add_argument("n", type=int)
    p.add_argument("M", type=int)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("fit", help="fit a decay envelope to a saved field")
    p.add_argument("field")
    p.set_defaults(func=_cmd_fit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
