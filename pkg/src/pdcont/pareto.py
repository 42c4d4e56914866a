"""Sampled Pareto frontiers and checks of the value function's properties.

A record ``(tau1, tau2, sigma) = (g(u), h(Au), f(u))`` samples the graph of
the value function ``phi(tau) = inf { f(u) : g(u) <= tau1, h(Au) <= tau2 }``.
For minimisers of the penalised problem at weights ``(lam, mu)`` the record
lies on the frontier, and ``-(lam, mu)`` is a subgradient of ``phi`` there.
The validators below test those facts on finite samples, and
:class:`GridValueFunction` is a brute-force ``phi`` for tiny problems.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

RECORD_COLUMNS = ("n", "lambda", "mu", "tau1", "tau2", "sigma", "feasible")


@dataclass(frozen=True)
class ParetoRecord:
    tau1: float
    tau2: float
    sigma: float
    lam: float
    mu: float
    n: int = 0

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.tau1) and math.isfinite(self.tau2)


def record(u, p, lambda_n: float, mu_n: float, n: int) -> ParetoRecord:
    """Evaluate ``(g(u), h(Au), f(u))``; infinite taus mark ``u`` infeasible."""
    fv, gv, hv = p.terms(u)
    return ParetoRecord(tau1=gv, tau2=hv, sigma=fv, lam=lambda_n, mu=mu_n, n=n)


def write_records(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([r.n, repr(float(r.lam)), repr(float(r.mu)), repr(float(r.tau1)),
                        repr(float(r.tau2)), repr(float(r.sigma)), int(r.feasible)])


def read_records(path) -> list[ParetoRecord]:
    with open(path, newline="") as fh:
        return [ParetoRecord(tau1=float(row["tau1"]), tau2=float(row["tau2"]),
                             sigma=float(row["sigma"]), lam=float(row["lambda"]),
                             mu=float(row["mu"]), n=int(row["n"]))
                for row in csv.DictReader(fh)]


@dataclass(frozen=True)
class Violation:
    indices: tuple[int, ...]
    amount: float


def check_monotone(records, tol: float = 1e-5) -> list[Violation]:
    """Pairs with ``tau_i >= tau_j`` componentwise but ``sigma_i > sigma_j + tol``.

    Incomparable pairs are skipped.
    """
    out = []
    recs = list(records)
    for i, j in itertools.permutations(range(len(recs)), 2):
        a, b = recs[i], recs[j]
        if not (a.feasible and b.feasible):
            continue
        if a.tau1 >= b.tau1 and a.tau2 >= b.tau2:
            excess = a.sigma - b.sigma
            if excess > tol:
                out.append(Violation((i, j), excess))
    return out


def check_convex(records, tol: float = 1e-5) -> list[Violation]:
    """Points lying above the chord (or hull) of other sampled points.

    If every record shares ``tau1`` the check runs on the ``(tau2, sigma)``
    slice over all triples; otherwise each point is compared with the lower
    convex envelope of the others at its ``tau`` (a small linear program).
    """
    recs = [r for r in records if r.feasible]
    if len(recs) < 3:
        return []
    if len({r.tau1 for r in recs}) == 1:
        return _convex_slice(recs, tol)
    return _convex_hull(recs, tol)


def _convex_slice(recs, tol):
    out = []
    order = sorted(range(len(recs)), key=lambda k: recs[k].tau2)
    for ia, ib, ic in itertools.combinations(order, 3):
        a, b, c = recs[ia], recs[ib], recs[ic]
        if not (a.tau2 < b.tau2 < c.tau2):
            continue
        t = (b.tau2 - a.tau2) / (c.tau2 - a.tau2)
        chord = a.sigma + t * (c.sigma - a.sigma)
        if b.sigma > chord + tol:
            out.append(Violation((ia, ib, ic), b.sigma - chord))
    return out


def _convex_hull(recs, tol):
    out = []
    T = np.array([[r.tau1, r.tau2] for r in recs])
    S = np.array([r.sigma for r in recs])
    for i in range(len(recs)):
        others = [j for j in range(len(recs)) if j != i]
        A_eq = np.vstack([T[others].T, np.ones(len(others))])
        b_eq = np.array([T[i, 0], T[i, 1], 1.0])
        res = linprog(S[others], A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if res.status == 0 and S[i] > res.fun + tol:
            out.append(Violation((i,), S[i] - res.fun))
    return out


@dataclass(frozen=True)
class SubgradientResult:
    passed: bool
    worst_slack: float
    failures: tuple[int, ...]

    def __bool__(self):
        return self.passed


def subgradient_check(rec: ParetoRecord, records, tol: float = 1e-5) -> SubgradientResult:
    """Check ``sigma~ >= sigma - lam (tau1~ - tau1) - mu (tau2~ - tau2) - tol``
    for every sampled record ``~``."""
    worst = math.inf
    failures = []
    for k, other in enumerate(records):
        if not other.feasible:
            continue
        dl = other.tau1 - rec.tau1
        dm = other.tau2 - rec.tau2
        slack = other.sigma - (rec.sigma - (rec.lam * dl if dl else 0.0)
                               - (rec.mu * dm if dm else 0.0))
        worst = min(worst, slack)
        if slack < -tol:
            failures.append(k)
    return SubgradientResult(not failures, worst, tuple(failures))


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned grid ``lo + k * step`` inside ``[lo, hi]`` per coordinate."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    step: float

    def points(self) -> np.ndarray:
        axes = [np.arange(lo, hi + 0.5 * self.step, self.step) for lo, hi in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


class GridValueFunction:
    """Brute-force value function and Lagrange dual on a grid (``d <= 3``).

    The three terms are tabulated once; each query is a masked minimum.
    """

    def __init__(self, p, grid: GridSpec):
        if p.dim > 3:
            raise ValueError(f"grid oracle only supports d <= 3, got {p.dim}")
        if len(grid.lo) != p.dim:
            raise ValueError("grid dimension does not match the problem")
        self.points = grid.points()
        self.f = p.f.values(self.points)
        self.g = np.asarray(p.g.eval(self.points), dtype=float)
        self.h = np.asarray(p.h.eval(p.A.apply_rows(self.points)), dtype=float)

    def phi(self, tau1: float, tau2: float) -> float:
        mask = (self.g <= tau1) & (self.h <= tau2)
        if not mask.any():
            return math.inf
        return float(self.f[mask].min())

    def argmin(self, tau1: float, tau2: float):
        mask = (self.g <= tau1) & (self.h <= tau2)
        if not mask.any():
            return None
        idx = np.flatnonzero(mask)
        return self.points[idx[np.argmin(self.f[idx])]]

    def dual(self, lam: float, mu: float, tau1: float, tau2: float) -> float:
        """``inf_u f(u) + lam (g(u) - tau1) + mu (h(Au) - tau2)`` over the grid."""
        with np.errstate(invalid="ignore"):
            vals = self.f + lam * (self.g - tau1) + mu * (self.h - tau2)
        vals = np.where(np.isnan(vals), math.inf, vals)
        return float(vals.min())


def value_function_oracle(p, tau1: float, tau2: float, grid: GridSpec) -> float:
    """Minimum of ``f`` over grid points with ``g <= tau1`` and ``h(A.) <= tau2``;
    ``inf`` when no grid point is feasible."""
    return GridValueFunction(p, grid).phi(tau1, tau2)


def dual_function_oracle(p, lam: float, mu: float, tau1: float, tau2: float,
                         grid: GridSpec) -> float:
    return GridValueFunction(p, grid).dual(lam, mu, tau1, tau2)
