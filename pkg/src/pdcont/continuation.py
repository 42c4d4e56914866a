"""Penalty-parameter schedules and their summability certificates.

A :class:`ParamSequence` is one a-priori sequence ``p_n -> target``; a
:class:`Schedule` pairs one for ``lambda`` with one for ``mu``. Convergence
of the continuation iteration needs ``sum |p_n - target| < inf`` for both,
and every constructor here attaches that sum in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ParamSequence:
    kind: str
    start: float
    target: float
    rho: float = 0.0
    count: int = 0
    _values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __call__(self, n: int) -> float:
        if n < 0:
            raise ValueError("n must be nonnegative")
        if self.kind == "constant":
            return self.target
        if self.kind == "geometric":
            return self.target + (self.start - self.target) * self.rho ** n
        if n < self.count:
            return float(self._values[n])
        return self.target

    def values(self, horizon: int) -> np.ndarray:
        return np.array([self(n) for n in range(horizon)])

    def total_deviation(self) -> float:
        """``sum_n |p_n - target|`` over the infinite horizon."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "geometric":
            return abs(self.start - self.target) / (1.0 - self.rho)
        return float(np.sum(np.abs(self._values - self.target)))

    def tail_bound(self, horizon: int) -> float:
        """``sum_{n >= horizon} |p_n - target|``."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "geometric":
            return abs(self.start - self.target) * self.rho ** horizon / (1.0 - self.rho)
        if horizon >= self.count:
            return 0.0
        return float(np.sum(np.abs(self._values[horizon:] - self.target)))

    def sqrt_deviation_total(self) -> float:
        """``sum_n sqrt|p_n - target|``; the stronger condition, reported only."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "geometric":
            return math.sqrt(abs(self.start - self.target)) / (1.0 - math.sqrt(self.rho))
        return float(np.sum(np.sqrt(np.abs(self._values - self.target))))

    def to_json(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.target}
        if self.kind == "geometric":
            return {"kind": "geometric", "from": self.start, "to": self.target, "rho": self.rho}
        return {"kind": self.kind, "from": self.start, "to": self.target, "count": self.count}


def constant(value: float) -> ParamSequence:
    if not value > 0:
        raise ValueError(f"parameter must be positive, got {value}")
    return ParamSequence("constant", float(value), float(value))


def geometric(start: float, target: float, rho: float) -> ParamSequence:
    """``p_n = target + (start - target) * rho**n`` with ``0 < rho < 1``."""
    if not (start > 0 and target > 0):
        raise ValueError("start and target must be positive")
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1) for summability, got {rho}")
    return ParamSequence("geometric", float(start), float(target), rho=float(rho))


def log_spaced_then_constant(start: float, stop: float, count: int) -> ParamSequence:
    """``count`` log-spaced values from ``start`` to ``stop``, then ``stop`` forever."""
    if count < 2:
        raise ValueError(f"count must be at least 2, got {count}")
    if not (start > 0 and stop > 0):
        raise ValueError("start and stop must be positive")
    if start == stop:
        vals = np.full(count, float(start))
    else:
        vals = np.geomspace(start, stop, count)
        vals[0], vals[-1] = start, stop
        # rounding must not break monotonicity when start and stop are close
        acc = np.minimum.accumulate if stop < start else np.maximum.accumulate
        vals = acc(vals)
    vals.setflags(write=False)
    return ParamSequence("log_spaced_then_constant", float(start), float(stop),
                         count=int(count), _values=vals)


def sequence_from_json(spec) -> ParamSequence:
    """Build a sequence from ``{"kind": ..., "from": ..., "to": ..., ...}``.

    A bare number means a constant sequence.
    """
    if isinstance(spec, (int, float)):
        return constant(float(spec))
    kind = spec["kind"]
    if kind == "constant":
        return constant(float(spec.get("value", spec.get("to"))))
    if kind == "geometric":
        return geometric(float(spec["from"]), float(spec["to"]), float(spec["rho"]))
    if kind == "log_spaced_then_constant":
        return log_spaced_then_constant(float(spec["from"]), float(spec["to"]), int(spec["count"]))
    raise ValueError(f"unknown schedule kind {kind!r}")


@dataclass(frozen=True)
class Schedule:
    lam: ParamSequence
    mu: ParamSequence

    @classmethod
    def constant(cls, lam: float, mu: float) -> "Schedule":
        return cls(constant(lam), constant(mu))

    @property
    def lambda_target(self) -> float:
        return self.lam.target

    @property
    def mu_target(self) -> float:
        return self.mu.target

    @property
    def kind(self) -> str:
        if self.mu.kind != "constant":
            return self.mu.kind
        return self.lam.kind

    def __call__(self, n: int) -> tuple[float, float]:
        return self.lam(n), self.mu(n)

    def to_json(self) -> dict:
        return {"lambda": self.lam.to_json(), "mu": self.mu.to_json()}

    @classmethod
    def from_json(cls, spec: dict) -> "Schedule":
        return cls(sequence_from_json(spec.get("lambda", 1.0)), sequence_from_json(spec["mu"]))


@dataclass(frozen=True)
class Certificate:
    horizon: int
    lambda_partial: float
    mu_partial: float
    lambda_tail: float
    mu_tail: float
    lambda_sqrt_total: float
    summable: bool = True

    @property
    def lambda_total(self) -> float:
        return self.lambda_partial + self.lambda_tail

    @property
    def mu_total(self) -> float:
        return self.mu_partial + self.mu_tail


def certify(schedule: Schedule, horizon: int) -> Certificate:
    """Partial deviation sums over ``n < horizon`` plus analytic tails."""
    lam = schedule.lam.values(horizon)
    mu = schedule.mu.values(horizon)
    summable = all(s.kind in ("constant", "geometric", "log_spaced_then_constant")
                   for s in (schedule.lam, schedule.mu))
    return Certificate(
        horizon=horizon,
        lambda_partial=float(np.sum(np.abs(lam - schedule.lambda_target))),
        mu_partial=float(np.sum(np.abs(mu - schedule.mu_target))),
        lambda_tail=schedule.lam.tail_bound(horizon),
        mu_tail=schedule.mu.tail_bound(horizon),
        lambda_sqrt_total=schedule.lam.sqrt_deviation_total(),
        summable=summable,
    )
