"""Primal-dual iterations for ``min_u f(u) + lam*g(u) + mu*h(A u)``.

The continuation iteration replaces the fixed weights ``(lam, mu)`` by an
a-priori schedule ``(lam_n, mu_n)`` that converges to them::

    u+ = prox_{alpha lam_n g}(u - alpha grad f(u) - alpha mu_n A^T v)
    v+ = prox_{(beta/mu_n) h*}(v + (beta/mu_n) A (2 u+ - u))

With a constant schedule it is the classical fixed-weight primal-dual
method; with ``A = 0`` it is proximal gradient, with ``f = 0`` it is
Chambolle-Pock. Convergence needs ``beta ||A||^2 < 1/alpha - L/2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .continuation import Schedule
from .linops import LinearMap
from .pareto import ParetoRecord
from .prox import ProxFunction

TRACE_COLUMNS = ("n", "lambda_n", "mu_n", "f", "g", "hAu", "objective_target", "residual")


class StepSizeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    def __init__(self, n: int, line: str):
        super().__init__(f"non-finite values in the {line} update at iteration {n}")
        self.n = n
        self.line = line


@dataclass(frozen=True)
class SmoothTerm:
    """Differentiable ``f`` with ``L``-Lipschitz gradient."""

    value: Callable
    gradient: Callable
    lipschitz: float
    # optional vectorised value over the rows of a 2-D array
    batch_value: Callable | None = None

    def __post_init__(self):
        if self.lipschitz < 0:
            raise ValueError("Lipschitz constant must be nonnegative")

    def values(self, U):
        U = np.asarray(U, dtype=float)
        if self.batch_value is not None:
            return np.asarray(self.batch_value(U), dtype=float)
        return np.array([self.value(u) for u in U])


def quadratic(center) -> SmoothTerm:
    """``f(u) = 0.5 ||u - center||^2``."""
    c = np.array(center, dtype=float)
    return SmoothTerm(
        value=lambda u: 0.5 * float(np.sum((u - c) ** 2)),
        gradient=lambda u: u - c,
        lipschitz=1.0,
        batch_value=lambda U: 0.5 * np.sum((U - c) ** 2, axis=1),
    )


def least_squares(K: LinearMap, y) -> SmoothTerm:
    """``f(u) = 0.5 ||K u - y||^2`` with ``L = norm_bound(K)^2``."""
    y = np.array(y, dtype=float)

    def value(u):
        r = K.apply(u) - y
        return 0.5 * float(r @ r)

    def gradient(u):
        return K.adjoint(K.apply(u) - y)

    return SmoothTerm(value, gradient, K.norm_bound() ** 2,
                      batch_value=lambda U: 0.5 * np.sum((K.apply_rows(U) - y) ** 2, axis=1))


def zero_smooth(dim: int) -> SmoothTerm:
    return SmoothTerm(value=lambda u: 0.0, gradient=lambda u: np.zeros(dim), lipschitz=0.0,
                      batch_value=lambda U: np.zeros(len(U)))


@dataclass(frozen=True)
class ProblemSpec:
    f: SmoothTerm
    g: ProxFunction
    h: ProxFunction
    A: LinearMap
    lam: float
    mu: float

    def __post_init__(self):
        if self.g.dim != self.A.in_dim:
            raise ValueError(f"g.dim={self.g.dim} but A maps from {self.A.in_dim}")
        if self.h.dim != self.A.out_dim:
            raise ValueError(f"h.dim={self.h.dim} but A maps to {self.A.out_dim}")
        if not (self.lam > 0 and self.mu > 0):
            raise ValueError("lam and mu must be positive")

    @property
    def dim(self) -> int:
        return self.A.in_dim

    @property
    def dual_dim(self) -> int:
        return self.A.out_dim

    def terms(self, u) -> tuple[float, float, float]:
        """``(f(u), g(u), h(A u))``."""
        return self.f.value(u), self.g.eval(u), self.h.eval(self.A.apply(u))

    def objective(self, u, lam: float | None = None, mu: float | None = None) -> float:
        lam = self.lam if lam is None else lam
        mu = self.mu if mu is None else mu
        fv, gv, hv = self.terms(u)
        return _weighted(fv, lam, gv, mu, hv)

    def with_weights(self, lam: float | None = None, mu: float | None = None) -> "ProblemSpec":
        return ProblemSpec(self.f, self.g, self.h, self.A,
                           self.lam if lam is None else lam, self.mu if mu is None else mu)


def _weighted(fv, lam, gv, mu, hv):
    # avoid 0 * inf
    total = fv
    total += lam * gv if gv != 0 else 0.0
    total += mu * hv if hv != 0 else 0.0
    return total


@dataclass(frozen=True)
class StepReport:
    ok: bool
    slack: float
    alpha: float
    beta: float
    lipschitz: float
    norm_A: float

    def __bool__(self):
        return self.ok


def validate_steps(alpha: float, beta: float, L: float, normA: float) -> StepReport:
    """Check ``alpha, beta > 0`` and ``beta * normA**2 < 1/alpha - L/2`` (strict)."""
    if alpha > 0:
        slack = 1.0 / alpha - L / 2.0 - beta * normA ** 2
    else:
        slack = -math.inf
    return StepReport(bool(alpha > 0 and beta > 0 and slack > 0), slack, alpha, beta, L, normA)


@dataclass(frozen=True)
class StepSizes:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise StepSizeError(f"step sizes must be positive, got {self.alpha}, {self.beta}")

    def check(self, p: ProblemSpec) -> StepReport:
        return validate_steps(self.alpha, self.beta, p.f.lipschitz, p.A.norm_bound())


def make_steps(p: ProblemSpec, alpha: float | None = None, beta: float | None = None,
               fraction: float = 0.9) -> StepSizes:
    """Default ``alpha = 1/L`` (1 when ``L = 0``) and ``beta`` at ``fraction`` of
    its admissible bound; explicit values are validated instead."""
    L = p.f.lipschitz
    B = p.A.norm_bound()
    if alpha is None:
        alpha = 1.0 / L if L > 0 else 1.0
    if beta is None:
        room = 1.0 / alpha - L / 2.0
        beta = fraction * room / B ** 2 if B > 0 else 1.0
    report = validate_steps(alpha, beta, L, B)
    if not report:
        raise StepSizeError(f"step condition violated: alpha={alpha}, beta={beta}, "
                            f"L={L}, ||A||<={B}, slack={report.slack}")
    return StepSizes(float(alpha), float(beta))


@dataclass(frozen=True)
class IterateState:
    u: np.ndarray
    v: np.ndarray
    n: int = 0

    @classmethod
    def zeros(cls, p: ProblemSpec) -> "IterateState":
        return cls(np.zeros(p.dim), np.zeros(p.dual_dim), 0)


def _finite(x, n, line):
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(n, line)
    return x


def pd_step(state: IterateState, p: ProblemSpec, s: StepSizes,
            lambda_n: float, mu_n: float) -> IterateState:
    """One continuation step, primal line first."""
    u, v = state.u, state.v
    grad = p.f.gradient(u)
    atv = p.A.adjoint(v)
    u_new = p.g.prox(s.alpha * lambda_n, u - s.alpha * grad - s.alpha * mu_n * atv)
    _finite(u_new, state.n, "primal")
    r = s.beta / mu_n
    v_new = p.h.conjugate_prox(r, v + r * p.A.apply(2.0 * u_new - u))
    _finite(v_new, state.n, "dual")
    return IterateState(u_new, v_new, state.n + 1)


def pd_step_dual_first(state: IterateState, p: ProblemSpec, s: StepSizes,
                       lambda_n: float, mu_n: float) -> IterateState:
    """Variant updating the dual first; the primal line extrapolates ``2 v+ - v``."""
    u, v = state.u, state.v
    r = s.beta / mu_n
    v_new = p.h.conjugate_prox(r, v + r * p.A.apply(u))
    _finite(v_new, state.n, "dual")
    grad = p.f.gradient(u)
    atv = p.A.adjoint(2.0 * v_new - v)
    u_new = p.g.prox(s.alpha * lambda_n, u - s.alpha * grad - s.alpha * mu_n * atv)
    _finite(u_new, state.n, "primal")
    return IterateState(u_new, v_new, state.n + 1)


def baseline_step(state: IterateState, p: ProblemSpec, s: StepSizes) -> IterateState:
    """Fixed-weight primal-dual step at the problem's own ``(lam, mu)``."""
    u, v = state.u, state.v
    lam, mu = p.lam, p.mu
    grad = p.f.gradient(u)
    atv = p.A.adjoint(v)
    u_new = p.g.prox(s.alpha * lam, u - s.alpha * grad - s.alpha * mu * atv)
    _finite(u_new, state.n, "primal")
    v_new = p.h.conjugate_prox(s.beta / mu, v + s.beta / mu * p.A.apply(2.0 * u_new - u))
    _finite(v_new, state.n, "dual")
    return IterateState(u_new, v_new, state.n + 1)


def fixed_point_residual(state: IterateState, p: ProblemSpec, s: StepSizes) -> float:
    """``||(u, v) - T(u, v)||_2`` with ``T`` one step at the target weights."""
    return _distance(state, pd_step(state, p, s, p.lam, p.mu))


def _distance(a: IterateState, b: IterateState) -> float:
    du = a.u - b.u
    dv = a.v - b.v
    return math.sqrt(float(du @ du) + float(dv @ dv))


def m_norm(x_u, x_v, mu_val: float, s: StepSizes, A: LinearMap) -> float:
    """Norm induced by ``M = [[I/(mu alpha), -A^T], [-A, mu I/beta]]``."""
    x_u = np.asarray(x_u, dtype=float)
    x_v = np.asarray(x_v, dtype=float)
    q = (float(x_u @ x_u) / (mu_val * s.alpha) + mu_val * float(x_v @ x_v) / s.beta
         - 2.0 * float(A.apply(x_u) @ x_v))
    if q <= 0.0:
        if not (np.any(x_u) or np.any(x_v)):
            return 0.0
        raise StepSizeError(f"M is not positive definite at these steps (form = {q})")
    return math.sqrt(q)


@dataclass(frozen=True)
class TraceConfig:
    """What :func:`run` keeps.

    ``snapshot_every = k`` stores ``(u_n, v_n)`` whenever ``n % k == 0``
    (0 disables snapshots); trace rows are written every ``record_every``
    steps; the target residual is evaluated every ``residual_every`` steps
    and reported as NaN in between.
    """

    snapshot_every: int = 0
    record_every: int = 1
    residual_every: int = 1


@dataclass
class Trajectory:
    problem: ProblemSpec
    steps: StepSizes
    schedule: Schedule
    start: IterateState
    final: IterateState | None = None
    rows: list[tuple] = field(default_factory=list)
    snapshots: list[IterateState] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return self.final.n - self.start.n if self.final is not None else 0

    def records(self) -> list[ParetoRecord]:
        return [ParetoRecord(tau1=r[4], tau2=r[5], sigma=r[3], lam=r[1], mu=r[2], n=r[0])
                for r in self.rows]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for r in self.rows:
                w.writerow([r[0]] + [repr(float(x)) for x in r[1:]])


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "n" else float(v)) for k, v in row.items()} for row in rows]


def run(p: ProblemSpec, schedule: Schedule, s: StepSizes, max_iters: int, tol: float = 0.0,
        trace: TraceConfig = TraceConfig(), start: IterateState | None = None,
        variant: str = "primal_first") -> Trajectory:
    """Iterate the continuation method for at most ``max_iters`` steps.

    Stops early once the fixed-point residual at the target weights drops
    below ``tol`` (``tol = 0`` runs all steps). Trace row ``n`` describes
    ``u_n`` and carries the ``(lam, mu)`` used to produce it.
    """
    report = s.check(p)
    if not report:
        raise StepSizeError(f"refusing to run: step condition violated (slack={report.slack})")
    if (schedule.lambda_target, schedule.mu_target) != (p.lam, p.mu):
        raise ValueError("schedule targets differ from the problem's (lam, mu)")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    step = {"primal_first": pd_step, "dual_first": pd_step_dual_first}[variant]
    state = start if start is not None else IterateState.zeros(p)
    state = IterateState(np.asarray(state.u, dtype=float), np.asarray(state.v, dtype=float),
                         state.n)
    traj = Trajectory(p, s, schedule, start=state)
    if trace.snapshot_every:
        traj.snapshots.append(state)
    k0 = state.n
    ahead = None  # T(state) at the target, kept from the last residual
    for k in range(max_iters):
        lam_k, mu_k = schedule(k0 + k)
        if ahead is not None and variant == "primal_first" and (lam_k, mu_k) == (p.lam, p.mu):
            state = ahead
        else:
            state = step(state, p, s, lam_k, mu_k)
        ahead = None
        done = k + 1 == max_iters
        res = math.nan
        if (trace.residual_every and (k + 1) % trace.residual_every == 0) or done:
            ahead = pd_step(state, p, s, p.lam, p.mu)
            res = _distance(state, ahead)
            if tol > 0 and res < tol:
                traj.converged = True
                done = True
        if trace.snapshot_every and (state.n % trace.snapshot_every == 0 or done):
            traj.snapshots.append(state)
        if trace.record_every and ((k + 1) % trace.record_every == 0 or done):
            fv, gv, hv = p.terms(state.u)
            traj.rows.append((state.n, lam_k, mu_k, fv, gv, hv,
                              _weighted(fv, p.lam, gv, p.mu, hv), res))
        if done:
            break
    traj.final = state
    return traj


def run_baseline(p: ProblemSpec, s: StepSizes, iters: int,
                 start: IterateState | None = None) -> list[IterateState]:
    """Fixed-weight method; returns every iterate including the start."""
    state = start if start is not None else IterateState.zeros(p)
    out = [state]
    for _ in range(iters):
        state = baseline_step(state, p, s)
        out.append(state)
    return out


def proximal_gradient(f: SmoothTerm, g: ProxFunction, lam_seq, alpha: float, u0,
                      iters: int) -> list[np.ndarray]:
    """``u+ = prox_{alpha lam_n g}(u - alpha grad f(u))``; returns all iterates."""
    u = np.asarray(u0, dtype=float)
    out = [u]
    for n in range(iters):
        u = g.prox(alpha * lam_seq(n), u - alpha * f.gradient(u))
        out.append(u)
    return out


def chambolle_pock(g: ProxFunction, h: ProxFunction, A: LinearMap, schedule: Schedule,
                   alpha: float, beta: float, u0, v0, iters: int) -> list[IterateState]:
    """Chambolle-Pock for ``lam g(u) + mu h(A u)`` written in the scaled dual
    variable ``v`` (so ``mu v`` is the usual dual); converges for
    ``alpha beta ||A||^2 < 1``."""
    u = np.asarray(u0, dtype=float)
    v = np.asarray(v0, dtype=float)
    out = [IterateState(u, v, 0)]
    for n in range(iters):
        lam_n, mu_n = schedule(n)
        u_new = g.prox(alpha * lam_n, u - alpha * mu_n * A.adjoint(v))
        r = beta / mu_n
        v = h.conjugate_prox(r, v + r * A.apply(2.0 * u_new - u))
        u = u_new
        out.append(IterateState(u, v, n + 1))
    return out


__all__ = [
    "SmoothTerm", "quadratic", "least_squares", "zero_smooth", "ProblemSpec",
    "StepSizes", "StepReport", "StepSizeError", "NonFiniteError", "validate_steps",
    "make_steps", "IterateState", "pd_step", "pd_step_dual_first", "baseline_step",
    "fixed_point_residual", "m_norm", "TraceConfig", "Trajectory", "run", "run_baseline",
    "proximal_gradient", "chambolle_pock", "read_trace_csv", "TRACE_COLUMNS",
]
