"""Value function of a two-variable toy problem, brute force vs the solver.

f(u) = 0.5 ||u - c||^2, g = ||u||_1, h = ||.||_1 composed with a 2x2 matrix.
For a few weight pairs the solver's record (g, h, f) is compared with the
grid value function at the same taus and with the grid Lagrange dual.

    python scripts/frontier_toy.py [--step 2e-3]
"""

import argparse

from pdcont.continuation import Schedule
from pdcont.linops import DenseMap
from pdcont.pareto import GridSpec, GridValueFunction, record
from pdcont.prox import L1
from pdcont.solver import ProblemSpec, make_steps, quadratic, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--step", type=float, default=2e-3)
    args = ap.parse_args()

    p = ProblemSpec(quadratic([1.5, -0.7]), L1(2), L1(2), DenseMap([[1.0, 1.0], [0.0, 1.0]]),
                    1.0, 1.0)
    grid = GridValueFunction(p, GridSpec((-0.5, -1.5), (2.0, 0.5), args.step))
    print(f"{'lam':>5} {'mu':>5} {'tau1':>8} {'tau2':>8} {'sigma':>9} {'phi_grid':>9} {'dual':>9}")
    for lam, mu in [(0.05, 0.05), (0.2, 0.3), (0.5, 0.1), (0.1, 0.6), (0.3, 0.3), (1.0, 1.0)]:
        q = p.with_weights(lam, mu)
        u = run(q, Schedule.constant(lam, mu), make_steps(q), 20000, tol=1e-12).final.u
        r = record(u, p, lam, mu, 0)
        phi = grid.phi(r.tau1 + 1e-12, r.tau2 + 1e-12)
        dual = grid.dual(lam, mu, r.tau1, r.tau2)
        print(f"{lam:5.2f} {mu:5.2f} {r.tau1:8.4f} {r.tau2:8.4f} {r.sigma:9.5f} {phi:9.5f} "
              f"{dual:9.5f}")


if __name__ == "__main__":
    main()
