"""``experiment`` command line: run the deblurring experiment, validate output.

Exit codes: 0 success, 2 frontier-check violations, 1 errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .experiment import (ExperimentConfig, cost_accounting, default_output_dir, emit, endpoints,
                         load_endpoints, make_instance, run_continuation, run_sweep,
                         tube_deviation, validate_records)

log = logging.getLogger("pdcont")


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    out = args.out or cfg.output_dir or default_output_dir()
    inst = make_instance(cfg)
    sweep = run_sweep(cfg, parallel=args.parallel, instance=inst)
    cont = run_continuation(cfg, sweep[0].final, instance=inst)
    tube = tube_deviation(endpoints(sweep), cont.records())
    emit(out, cfg, inst, sweep, cont, extra={"tube": tube})
    cost = cost_accounting(cfg)
    print(f"wrote {len(sweep)} sweep runs and 1 continuation run to {out}")
    print(f"iterations: sweep {cost['sweep_iterations']}, "
          f"continuation {cost['continuation_iterations']}")
    print(f"continuation max relative deviation from sweep frontier: "
          f"{tube['max_relative_deviation']:.4g} over {tube['points']} points")
    return 0


def cmd_validate(args) -> int:
    recs = load_endpoints(args.records)
    result = validate_records(recs, args.tol)
    for key in ("monotone", "convex", "subgradient"):
        print(f"{key}: {result[key]} violation(s)")
    return 0 if result["ok"] else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="experiment", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the mu sweep and the continuation run")
    r.add_argument("--config", help="JSON experiment config (defaults if omitted)")
    r.add_argument("--out", help="output directory (else config, else $PDCONT_OUTPUT_DIR)")
    r.add_argument("--parallel", type=int, default=1, help="worker processes for the sweep")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check frontier properties of emitted records")
    v.add_argument("--records", required=True, help="directory written by `experiment run`")
    v.add_argument("--tol", type=float, default=1e-4)
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
