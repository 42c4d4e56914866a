"""Acceptance criteria 1-9.

Each criterion is one test named ``test_criterion_<k>_<name>``; the conftest
prints a PASS/FAIL line per criterion after the run. Runtime limits are
asserted inside the tests.
"""

import math
import sys
import time

import numpy as np
import pytest

from pdcont.continuation import Schedule, constant, geometric
from pdcont.diagnostics import compute_report, dual_inclusion_slack
from pdcont.experiment import (ExperimentConfig, cost_accounting, emit, endpoints, make_instance,
                               run_continuation, run_sweep, tube_deviation)
from pdcont.linops import DenseMap, ZeroMap
from pdcont.pareto import (GridSpec, GridValueFunction, ParetoRecord, check_convex,
                           check_monotone, record, subgradient_check)
from pdcont.prox import BoxIndicator, GroupL21, L1, SquaredL2, Zero, prox_oracle
from pdcont.solver import (IterateState, ProblemSpec, StepSizes, TraceConfig, chambolle_pock,
                           fixed_point_residual, m_norm, make_steps, proximal_gradient, quadratic,
                           run, run_baseline, validate_steps, zero_smooth)

from _instances import random_problem, tv_problem

TUBE_TOL = 0.05
GRID_STEP = 1e-3


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False

    def check(self):
        assert self.elapsed < self.limit, f"took {self.elapsed:.1f}s (limit {self.limit}s)"


def _kinds(dim):
    c = np.linspace(0.3, -0.2, dim)
    return [Zero(dim), BoxIndicator(dim, 0.0, 1.0), L1(dim), GroupL21(dim, dim), SquaredL2(dim, c)]


def _search_radius(F, s, a):
    """A-priori bound on ||prox_{sF}(a) - a||_inf: ``s`` times a subgradient
    norm at ``a``, or the sampling margin around the box."""
    if isinstance(F, Zero):
        return 2 * GRID_STEP
    if isinstance(F, BoxIndicator):
        return 0.3
    if isinstance(F, L1):
        return s
    if isinstance(F, GroupL21):
        return s
    return s * float(np.linalg.norm(a - F.center))


def test_criterion_1_prox_correctness(record_property):
    rng = np.random.default_rng(101)
    worst_oracle = 0.0
    worst_moreau = 0.0
    with Timer(10.0) as t:
        for dim in (1, 2):
            for F in _kinds(dim):
                for _ in range(50):
                    s = float(rng.uniform(0.05, 0.3))
                    if isinstance(F, BoxIndicator):
                        a = rng.uniform(-0.3, 1.3, dim)
                    elif isinstance(F, SquaredL2):
                        a = F.center + rng.uniform(-0.8, 0.8, dim)
                    else:
                        a = rng.uniform(-1.0, 1.0, dim)
                    r = _search_radius(F, s, a) + 2 * GRID_STEP
                    ref = prox_oracle(F, s, a, r, GRID_STEP)
                    err = float(np.max(np.abs(F.prox(s, a) - ref)))
                    worst_oracle = max(worst_oracle, err)
                    assert err <= GRID_STEP, (F, s, a)
                for _ in range(100):
                    s = float(np.exp(rng.uniform(-4, 4)))
                    a = 3.0 * rng.standard_normal(dim)
                    err = float(np.max(np.abs(F.conjugate_prox(s, a)
                                              - F.conjugate_prox_moreau(s, a))))
                    worst_moreau = max(worst_moreau, err)
                    assert err <= 1e-10
    record_property("oracle_err", worst_oracle)
    record_property("moreau_err", worst_moreau)
    record_property("seconds", t.elapsed)
    t.check()


def test_criterion_2_constant_schedule_equivalence(record_property):
    with Timer(5.0) as t:
        for seed in (0, 1, 2):
            p = random_problem(seed)
            s = make_steps(p)
            traj = run(p, Schedule.constant(p.lam, p.mu), s, 100,
                       trace=TraceConfig(snapshot_every=1))
            ref = run_baseline(p, s, 100)
            assert len(traj.snapshots) == len(ref) == 101
            for a, b in zip(traj.snapshots, ref):
                assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
    record_property("seconds", t.elapsed)
    t.check()


def test_criterion_3_special_case_reductions(record_property):
    rng = np.random.default_rng(303)
    with Timer(5.0) as t:
        # A = 0: proximal gradient
        c = rng.standard_normal(6)
        p = ProblemSpec(quadratic(c), L1(6), GroupL21(4, 2), ZeroMap(6, 4), 0.5, 0.2)
        s = StepSizes(0.9, 0.4)
        sched = Schedule(geometric(2.0, 0.5, 0.9), geometric(1.0, 0.2, 0.8))
        u0 = rng.standard_normal(6)
        traj = run(p, sched, s, 200, trace=TraceConfig(snapshot_every=1),
                   start=IterateState(u0, rng.standard_normal(4)))
        ref = proximal_gradient(p.f, p.g, sched.lam, s.alpha, u0, 200)
        for snap, u in zip(traj.snapshots, ref):
            assert np.array_equal(snap.u, u)
        # f = 0: Chambolle-Pock
        A = DenseMap(rng.standard_normal((4, 6)))
        p = ProblemSpec(zero_smooth(6), BoxIndicator(6, -1.0, 1.0), GroupL21(4, 2), A, 1.0, 0.5)
        s = make_steps(p, alpha=0.7)
        sched = Schedule(constant(1.0), geometric(3.0, 0.5, 0.95))
        u0, v0 = rng.standard_normal(6), np.zeros(4)
        traj = run(p, sched, s, 200, trace=TraceConfig(snapshot_every=1),
                   start=IterateState(u0, v0))
        ref = chambolle_pock(p.g, p.h, A, sched, s.alpha, s.beta, u0, v0, 200)
        for a, b in zip(traj.snapshots, ref):
            assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
    record_property("seconds", t.elapsed)
    t.check()


def test_criterion_4_common_minimizer(record_property):
    p = tv_problem(mu=0.1)
    s = make_steps(p)
    with Timer(30.0) as t:
        base = run_baseline(p, s, 20000)[-1]
        cont = run(p, Schedule(geometric(2.0, 1.0, 0.95), geometric(1.0, 0.1, 0.95)), s, 20000,
                   tol=1e-10).final
        dual = run(p, Schedule.constant(p.lam, p.mu), s, 20000, tol=1e-10,
                   variant="dual_first").final
    objs = [p.objective(x.u) for x in (base, cont, dual)]
    res = [fixed_point_residual(x, p, s) for x in (base, cont, dual)]
    spread = (max(objs) - min(objs)) / max(abs(min(objs)), 1e-300)
    record_property("objective_spread", spread)
    record_property("max_residual", max(res))
    record_property("seconds", t.elapsed)
    assert spread <= 1e-6
    assert max(res) < 1e-8
    t.check()


def test_criterion_5_step_condition(record_property):
    rng = np.random.default_rng(505)
    L, normA = 4.0, math.sqrt(8.0)
    alpha = 1.0 / L
    bound = (1.0 / alpha - L / 2.0) / normA ** 2
    with Timer(5.0) as t:
        assert not validate_steps(alpha, bound, L, normA)
        assert validate_steps(alpha, 0.99 * bound, L, normA)
        assert not validate_steps(alpha, 1.01 * bound, L, normA)
        p = random_problem(7)
        s = make_steps(p)
        worst = math.inf
        for _ in range(1000):
            x = rng.standard_normal(p.dim + p.dual_dim)
            if not x.any():
                continue
            val = m_norm(x[:p.dim], x[p.dim:], p.mu, s, p.A)
            worst = min(worst, val)
            assert val > 0
    record_property("min_m_norm", worst)
    record_property("seconds", t.elapsed)
    t.check()


def _converged(p, lam, mu):
    q = p.with_weights(lam, mu)
    return run(q, Schedule.constant(lam, mu), make_steps(q), 20000, tol=1e-12).final.u


def test_criterion_6_frontier_validators(record_property):
    with Timer(60.0) as t:
        recs = []
        for mu in np.geomspace(1.0, 0.01, 6):
            p = tv_problem(mu=float(mu))
            fv, gv, hv = p.terms(_converged(p, 1.0, float(mu)))
            recs.append(ParetoRecord(gv, hv, fv, 1.0, float(mu)))
        assert check_monotone(recs, 1e-5) == []
        assert check_convex(recs, 1e-5) == []
        for r in recs:
            assert subgradient_check(r, recs, 1e-5)

        toy = ProblemSpec(quadratic([1.5, -0.7]), L1(2), L1(2),
                          DenseMap([[1.0, 1.0], [0.0, 1.0]]), 1.0, 1.0)
        step = 2e-3
        gv = GridValueFunction(toy, GridSpec((-0.5, -1.5), (2.0, 0.5), step))
        # grid resolution: a bound on |grad f| over the grid box times one cell diagonal
        resolution = 3.0 * step * math.sqrt(2.0)
        worst_phi = worst_dual = 0.0
        for lam, mu in [(0.2, 0.3), (0.5, 0.1), (0.1, 0.6), (0.3, 0.3)]:
            r = record(_converged(toy, lam, mu), toy, lam, mu, 0)
            phi = gv.phi(r.tau1 + 1e-12, r.tau2 + 1e-12)
            dual = gv.dual(lam, mu, r.tau1, r.tau2)
            worst_phi = max(worst_phi, abs(phi - r.sigma))
            worst_dual = max(worst_dual, abs(dual - r.sigma))
            assert abs(phi - r.sigma) <= resolution + 1e-6
            assert abs(dual - r.sigma) <= resolution + 1e-6
    record_property("phi_gap", worst_phi)
    record_property("duality_gap", worst_dual)
    record_property("seconds", t.elapsed)
    t.check()


def _tradeoff_curve(out_dir):
    cfg = ExperimentConfig()
    inst = make_instance(cfg)
    sweep = run_sweep(cfg, instance=inst)
    cont = run_continuation(cfg, sweep[0].final, instance=inst)
    tube = tube_deviation(endpoints(sweep), cont.records())
    emit(out_dir, cfg, inst, sweep, cont, extra={"tube": tube})
    return cfg, sweep, cont, tube


@pytest.fixture(scope="module")
def curve_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("curve_a")
    t0 = time.perf_counter()
    result = _tradeoff_curve(out)
    return out, result, time.perf_counter() - t0


def test_criterion_7_tradeoff_curve(curve_run, record_property):
    out, (cfg, sweep, cont, tube), elapsed = curve_run
    dev = tube["max_relative_deviation"]
    record_property("max_relative_deviation", dev)
    record_property("mean_relative_deviation", tube["mean_relative_deviation"])
    record_property("seconds", elapsed)
    print(f"continuation path max relative deviation: {dev:.4f} (tolerance {TUBE_TOL})")

    cost = cost_accounting(cfg)
    assert len(sweep) == cfg.mu_grid.count == 8
    assert cost["sweep_iterations"] == cfg.mu_grid.count * cfg.iters_per_run
    assert cost["continuation_iterations"] == 2 * cfg.iters_per_run
    assert all(t.iterations == cfg.iters_per_run for t in sweep)
    assert cont.iterations == cfg.iters_per_run
    # endpoint objective at the smallest mu agrees with the sweep
    p = cont.problem
    last = sweep[-1]
    a, b = p.objective(cont.final.u), p.objective(last.final.u)
    assert abs(a - b) <= 0.01 * abs(b)
    assert elapsed < 120.0
    assert tube["points"] > 0
    assert dev <= TUBE_TOL, f"max relative deviation {dev:.4f} exceeds {TUBE_TOL}"


def test_criterion_8_inexactness(record_property):
    with Timer(30.0) as t:
        p = tv_problem(mu=0.1)
        s = make_steps(p)
        traj = run(p, Schedule.constant(p.lam, p.mu), s, 100, trace=TraceConfig(snapshot_every=1))
        rep = compute_report(traj, p, s, traj.schedule)
        assert not rep.eps.any() and not rep.delta.any() and not rep.err_norms.any()

        sched = Schedule(geometric(3.0, 1.0, 0.9), geometric(1.0, 0.1, 0.95))
        traj = run(p, sched, s, 400, trace=TraceConfig(snapshot_every=1))
        rep = compute_report(traj, p, s, sched, n_samples=100)
        sums = rep.sums
        assert all(math.isfinite(v) for v in sums.values())
        rng = np.random.default_rng(808)
        samples = rep.dual_samples[:100]
        slacks = [dual_inclusion_slack(traj, p, s, sched, rep, int(k), samples)
                  for k in rng.choice(len(rep.n), size=5, replace=False)]
        assert min(slacks) >= 0.0
    record_property("min_slack", min(slacks))
    record_property("sum_delta", sums["sum_delta"])
    record_property("seconds", t.elapsed)
    t.check()


def test_criterion_9_determinism(curve_run, tmp_path, record_property):
    out_a = curve_run[0]
    _tradeoff_curve(tmp_path)
    names = sorted(q.name for q in out_a.glob("*.csv"))
    assert names and names == sorted(q.name for q in tmp_path.glob("*.csv"))
    for name in names:
        assert (out_a / name).read_bytes() == (tmp_path / name).read_bytes(), name
    assert (out_a / "manifest.json").read_bytes() == (tmp_path / "manifest.json").read_bytes()
    record_property("csv_files", len(names))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
