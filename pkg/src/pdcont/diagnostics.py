"""Inexactness accounting for a finished continuation run.

A continuation step at ``(lam_n, mu_n)`` can be read as an inexact step of
the fixed-weight method at the target ``(lam, mu)``: the primal update is an
``eps``-approximate prox with ``eps_{n+1} = alpha * M1 * |lam_n - lam|``, the
dual update a ``delta``-approximate prox of type 2 with
``delta_{n+1} = beta * M2 * |1/mu_n - 1/mu|``, and the gradient carries the
error ``e_{n+1} = (mu_n - mu) A^T v_n``. This module recomputes those
sequences from stored iterates. It never feeds back into the solver.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .prox import GroupL21, L1, Zero

SAMPLE_SEED = 7


def _consecutive(traj):
    snaps = traj.snapshots
    if len(snaps) < 2:
        raise ValueError("trajectory has no stored iterates (run with snapshot_every=1)")
    for a, b in zip(snaps, snaps[1:]):
        if b.n != a.n + 1:
            raise ValueError("diagnostics need every iterate stored (snapshot_every=1)")
    return snaps


def estimate_M1(traj, p, s, schedule) -> float:
    """``sup_n |g(u_{n+1}) - g(u^(n))|`` with ``u^(n)`` the step's primal
    point recomputed at the target ``lam`` (and scheduled ``mu_n``)."""
    snaps = _consecutive(traj)
    best = 0.0
    skipped = 0
    for cur, nxt in zip(snaps, snaps[1:]):
        _, mu_n = schedule(cur.n)
        arg = cur.u - s.alpha * p.f.gradient(cur.u) - s.alpha * mu_n * p.A.adjoint(cur.v)
        u_target = p.g.prox(s.alpha * p.lam, arg)
        a, b = p.g.eval(nxt.u), p.g.eval(u_target)
        if not (math.isfinite(a) and math.isfinite(b)):
            skipped += 1
            continue
        best = max(best, abs(a - b))
    if skipped:
        warnings.warn(f"estimate_M1: skipped {skipped} iterations with infinite g")
    return best


def sample_conjugate_domain(h, count: int = 128, seed: int = SAMPLE_SEED):
    """Deterministic low-discrepancy points in ``dom(h*)``, or ``None`` if the
    domain is unbounded."""
    if isinstance(h, Zero):
        return np.zeros((1, h.dim))
    if not h.conjugate_domain_bounded:
        return None
    m = max(0, int(math.ceil(math.log2(count))))
    pts = 2.0 * qmc.Sobol(h.dim, scramble=True, seed=seed).random_base2(m)[:count] - 1.0
    if isinstance(h, L1):
        return pts
    if isinstance(h, GroupL21):
        # radial map of each block from the cube onto the unit ball
        blocks = pts.reshape(len(pts), -1, h.group_size)
        l2 = np.sqrt(np.sum(blocks ** 2, axis=-1, keepdims=True))
        linf = np.max(np.abs(blocks), axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(l2 > 0, linf / l2, 0.0)
        return (blocks * scale).reshape(pts.shape)
    return None


@dataclass
class InexactnessReport:
    n: np.ndarray            # index n+1 of the produced iterate
    eps: np.ndarray
    delta: np.ndarray
    err_norms: np.ndarray
    M1: float
    M2: float | None
    M2_is_lower_bound: bool = True
    dual_samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def sums(self) -> dict:
        return {
            "sum_err_norm": float(np.sum(self.err_norms)),
            "sum_sqrt_eps": float(np.sum(np.sqrt(self.eps))),
            "sum_delta": float(np.sum(self.delta)),
        }

    def summary(self) -> dict:
        return {"M1": self.M1, "M2": self.M2, "M2_is_lower_bound": self.M2_is_lower_bound,
                "iterations": int(len(self.n)), **self.sums}

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("n,eps,delta,err_norm\n")
            for row in zip(self.n, self.eps, self.delta, self.err_norms):
                fh.write(f"{int(row[0])},{float(row[1])!r},{float(row[2])!r},{float(row[3])!r}\n")

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def estimate_M2(traj, p, samples) -> float:
    """Sample sup of ``|h*(v_{n+1}) - h*(v)| + ||A|| ||2u_{n+1} - u_n|| ||v - v_{n+1}||``
    over stored iterates and ``samples``; a lower bound on the true sup."""
    snaps = _consecutive(traj)
    normA = p.A.norm_bound()
    hs = np.asarray(p.h.conjugate_eval(samples), dtype=float)
    best = 0.0
    for cur, nxt in zip(snaps, snaps[1:]):
        hv = p.h.conjugate_eval(nxt.v)
        w = np.linalg.norm(2.0 * nxt.u - cur.u)
        dist = np.linalg.norm(samples - nxt.v, axis=1)
        vals = np.abs(hv - hs) + normA * w * dist
        best = max(best, float(vals.max()))
    return best


def compute_report(traj, p, s, schedule, n_samples: int = 128,
                   seed: int = SAMPLE_SEED) -> InexactnessReport:
    snaps = _consecutive(traj)
    n_idx = np.array([b.n for b in snaps[1:]])
    lam_n = np.array([schedule(a.n)[0] for a in snaps[:-1]])
    mu_n = np.array([schedule(a.n)[1] for a in snaps[:-1]])
    dlam = np.abs(lam_n - p.lam)
    dinv = np.abs(1.0 / mu_n - 1.0 / p.mu)
    err = np.array([abs(m - p.mu) * np.linalg.norm(p.A.adjoint(a.v)) if m != p.mu else 0.0
                    for m, a in zip(mu_n, snaps[:-1])])

    M1 = estimate_M1(traj, p, s, schedule) if np.any(dlam) else 0.0
    eps = s.alpha * M1 * dlam

    sampled = sample_conjugate_domain(p.h, n_samples, seed)
    if sampled is None:
        M2 = None
        delta = np.where(dinv == 0, 0.0, math.nan)
        samples = None
    else:
        samples = np.vstack([sampled] + [b.v[None, :] for b in snaps])
        M2 = estimate_M2(traj, p, samples)
        delta = s.beta * M2 * dinv
    return InexactnessReport(n_idx, eps, delta, err, M1, M2, True, samples)


def dual_inclusion_slack(traj, p, s, schedule, report: InexactnessReport, k: int,
                         samples=None) -> float:
    """Smallest slack, over sampled ``v`` in ``dom(h*)``, of the inequality

    ``(b/mu) h*(v) >= (b/mu) h*(v+) + <v + (b/mu) A(2u+ - u) - v+, v - v+> - delta``

    for the step ``k -> k+1`` (``b = beta``, target ``mu``). Nonnegative means
    ``v+`` is a type-2 ``delta``-approximate prox at the target weight.
    """
    snaps = _consecutive(traj)
    pos = k - snaps[0].n
    cur, nxt = snaps[pos], snaps[pos + 1]
    if samples is None:
        samples = report.dual_samples
    r = s.beta / p.mu
    xi = cur.v + r * p.A.apply(2.0 * nxt.u - cur.u) - nxt.v
    lhs = r * np.asarray(p.h.conjugate_eval(samples), dtype=float)
    rhs = r * p.h.conjugate_eval(nxt.v) + (samples - nxt.v) @ xi - report.delta[pos]
    return float(np.min(lhs - rhs))
