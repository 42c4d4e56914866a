import math

import numpy as np
import pytest

from pdcont.continuation import Schedule
from pdcont.linops import DenseMap
from pdcont.pareto import (GridSpec, GridValueFunction, ParetoRecord, check_convex,
                           check_monotone, read_records, record, subgradient_check,
                           value_function_oracle, write_records)
from pdcont.prox import BoxIndicator, L1
from pdcont.solver import ProblemSpec, make_steps, quadratic, run

from _instances import tv_problem


def rec(t1, t2, s, lam=1.0, mu=1.0):
    return ParetoRecord(tau1=t1, tau2=t2, sigma=s, lam=lam, mu=mu)


def test_monotone_examples():
    assert check_monotone([rec(1, 1, 5), rec(2, 2, 4)]) == []
    v = check_monotone([rec(1, 1, 5), rec(2, 2, 6)])
    assert len(v) == 1 and v[0].amount == pytest.approx(1.0)
    # incomparable pair is skipped
    assert check_monotone([rec(1, 2, 5), rec(2, 1, 9)]) == []


def test_convex_slice_examples():
    assert check_convex([rec(0, 1, 1), rec(0, 2, 0.5), rec(0, 3, 0)]) == []
    v = check_convex([rec(0, 1, 1), rec(0, 2, 0.9), rec(0, 3, 0)])
    assert len(v) == 1 and v[0].amount == pytest.approx(0.4)


def test_convex_hull_general_tau():
    pts = [rec(0, 0, 0), rec(1, 0, 1), rec(0, 1, 1), rec(1, 1, 2)]
    assert check_convex(pts) == []
    v = check_convex(pts + [rec(0.5, 0.5, 3.0)])
    assert [x.indices for x in v] == [(4,)] and v[0].amount == pytest.approx(2.0)


def test_subgradient_examples():
    r = rec(1.0, 2.0, 3.0, lam=0.5, mu=0.5)
    assert subgradient_check(r, [r])
    lowered = rec(1.0, 2.0, 2.0)
    assert not subgradient_check(r, [lowered])


def test_record_infeasible_and_hand_1d():
    p = ProblemSpec(quadratic([2.0]), BoxIndicator(1, 0.0, 1.0), L1(1), DenseMap([[1.0]]), 1.0, 0.5)
    r = record(np.array([1.5]), p, 1.0, 0.5, 3)
    assert r.tau1 == math.inf and not r.feasible
    # minimiser of 0.5 (u - 2)^2 + 0.5 |u| on [0, 1] is u = 1
    r = record(np.array([1.0]), p, 1.0, 0.5, 3)
    assert (r.tau1, r.tau2, r.sigma) == (0.0, 1.0, 0.5) and r.feasible


def test_records_csv_roundtrip(tmp_path):
    recs = [rec(0.0, 1.0 / 3, 2.5, 1.0, 0.1), rec(0.0, 2.0, 1e-17, 1.0, 0.01)]
    path = tmp_path / "r.csv"
    write_records(recs, path)
    assert read_records(path) == recs


def _one_d(center):
    return ProblemSpec(quadratic([center]), L1(1), L1(1), DenseMap([[1.0]]), 1.0, 1.0)


def test_value_function_1d():
    grid = GridSpec((-3.0,), (3.0,), 1e-3)
    assert value_function_oracle(_one_d(0.0), 1.0, 1.0, grid) == pytest.approx(0.0, abs=1e-12)
    assert value_function_oracle(_one_d(2.0), 1.0, 1.0, grid) == pytest.approx(0.5, abs=2e-3)
    assert value_function_oracle(_one_d(2.0), -1.0, 1.0, grid) == math.inf


def _toy2():
    return ProblemSpec(quadratic([1.5, -0.7]), L1(2), L1(2), DenseMap([[1.0, 1.0], [0.0, 1.0]]),
                       1.0, 1.0)


def _solve(p, lam, mu):
    q = p.with_weights(lam, mu)
    return run(q, Schedule.constant(lam, mu), make_steps(q), 20000, tol=1e-12).final.u


def test_toy_frontier_matches_grid_and_duality():
    p = _toy2()
    step = 2e-3
    gv = GridValueFunction(p, GridSpec((-0.5, -1.5), (2.0, 0.5), step))
    G = 2.0 * 3.0  # generous Lipschitz bound of f on the grid box
    for lam, mu in [(0.2, 0.3), (0.5, 0.1), (0.1, 0.6)]:
        u = _solve(p, lam, mu)
        r = record(u, p, lam, mu, 0)
        phi = gv.phi(r.tau1 + 1e-12, r.tau2 + 1e-12)
        # sigma is phi(tau); the grid is coarser than the solver
        assert r.sigma <= phi + 1e-6
        assert phi <= r.sigma + G * step
        d = gv.dual(lam, mu, r.tau1, r.tau2)
        assert abs(d - r.sigma) <= G * step + 1e-6


def test_tv_sweep_records_pass_checks():
    recs = []
    for mu in np.geomspace(1.0, 0.01, 6):
        p = tv_problem(mu=float(mu))
        traj = run(p, Schedule.constant(1.0, float(mu)), make_steps(p), 20000, tol=1e-11)
        fv, gv, hv = p.terms(traj.final.u)
        recs.append(ParetoRecord(gv, hv, fv, 1.0, float(mu)))
    assert check_monotone(recs, 1e-6) == []
    assert check_convex(recs, 1e-6) == []
    for r in recs:
        assert subgradient_check(r, recs, 1e-6)
