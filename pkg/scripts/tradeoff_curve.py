"""Trade-off curve data: fixed-mu sweep vs one continuation run.

Writes the trace CSVs, frontier records, images and a manifest to the output
directory, then prints the cost accounting and the path's deviation from the
sweep frontier. Plotting is left to any CSV consumer.

    python scripts/tradeoff_curve.py --out results/tradeoff [--config cfg.json] [--parallel 4]
"""

import argparse
import json
import time

from pdcont.experiment import (ExperimentConfig, cost_accounting, emit, endpoints, make_instance,
                               run_continuation, run_sweep, tube_deviation)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--out", default="results/tradeoff")
    ap.add_argument("--parallel", type=int, default=1)
    args = ap.parse_args()

    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    t0 = time.perf_counter()
    inst = make_instance(cfg)
    sweep = run_sweep(cfg, parallel=args.parallel, instance=inst)
    cont = run_continuation(cfg, sweep[0].final, instance=inst)
    tube = tube_deviation(endpoints(sweep), cont.records())
    emit(args.out, cfg, inst, sweep, cont, extra={"tube": tube})

    print(f"{'mu':>10} {'h(Au)':>10} {'f(u)':>10}")
    for r in endpoints(sweep):
        print(f"{r.mu:10.4g} {r.tau2:10.4f} {r.sigma:10.4f}")
    print(json.dumps(cost_accounting(cfg)))
    print(f"path deviation: max {tube['max_relative_deviation']:.4f}, "
          f"mean {tube['mean_relative_deviation']:.4f} (worst at n={tube['worst_n']})")
    print(f"elapsed {time.perf_counter() - t0:.1f}s, output in {args.out}")


if __name__ == "__main__":
    main()
