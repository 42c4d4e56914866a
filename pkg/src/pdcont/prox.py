"""Convex functions with exact scaled proximal maps.

Every function here is "prox-simple": ``prox(scale, a)`` returns the unique
minimiser of ``0.5 * ||u - a||^2 + scale * F(u)`` in closed form, and
``conjugate_prox`` does the same for the Fenchel conjugate ``F*``.
Values live in the extended reals; ``math.inf`` stands for +infinity.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

INF = math.inf
NORM_ULPS = 4 * np.finfo(float).eps


class ProxFunction:
    kind = "abstract"
    #: whether dom(F*) is bounded (needed by the inexactness diagnostics)
    conjugate_domain_bounded = False

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = int(dim)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"

    def _check(self, u, what):
        u = np.asarray(u, dtype=float)
        if u.ndim == 0 or u.shape[-1] != self.dim:
            raise ValueError(f"{what}: expected last axis of length {self.dim}, got shape {u.shape}")
        return u

    def __call__(self, u):
        return self.eval(u)

    def eval(self, u):
        """Value of F at ``u``; a stack of points (last axis = dim) gives an array."""
        u = self._check(u, "eval")
        out = self._eval(u)
        return float(out) if u.ndim == 1 else out

    def conjugate_eval(self, v):
        v = self._check(v, "conjugate_eval")
        out = self._conj_eval(v)
        return float(out) if v.ndim == 1 else out

    def prox(self, scale: float, a):
        if not scale > 0:
            raise ValueError(f"scale must be positive, got {scale}")
        return self._prox(float(scale), self._check(a, "prox"))

    def conjugate_prox(self, scale: float, a):
        """``prox_{scale * F*}(a)``."""
        if not scale > 0:
            raise ValueError(f"scale must be positive, got {scale}")
        return self._conj_prox(float(scale), self._check(a, "conjugate_prox"))

    def conjugate_prox_moreau(self, scale: float, a):
        """Same as :meth:`conjugate_prox`, but through the Moreau identity
        ``prox_{sF*}(a) = a - s * prox_{F/s}(a / s)``."""
        if not scale > 0:
            raise ValueError(f"scale must be positive, got {scale}")
        a = self._check(a, "conjugate_prox")
        return a - scale * self._prox(1.0 / scale, a / scale)

    def _conj_prox(self, scale, a):
        return a - scale * self._prox(1.0 / scale, a / scale)

    def _eval(self, u):
        raise NotImplementedError

    def _conj_eval(self, v):
        raise NotImplementedError

    def _prox(self, scale, a):
        raise NotImplementedError


class Zero(ProxFunction):
    kind = "zero"
    conjugate_domain_bounded = True

    def _eval(self, u):
        return np.zeros(u.shape[:-1])

    def _conj_eval(self, v):
        # indicator of {0}
        return np.where(np.all(v == 0, axis=-1), 0.0, INF)

    def _prox(self, scale, a):
        return a.copy()

    def _conj_prox(self, scale, a):
        return np.zeros_like(a)


class BoxIndicator(ProxFunction):
    """Indicator of ``[lo, hi]^dim``; membership is strict (no slack)."""

    kind = "box_indicator"

    def __init__(self, dim: int, lo: float = 0.0, hi: float = 1.0):
        super().__init__(dim)
        if lo > hi:
            raise ValueError(f"empty box [{lo}, {hi}]")
        self.lo = float(lo)
        self.hi = float(hi)

    def _eval(self, u):
        inside = np.all((u >= self.lo) & (u <= self.hi), axis=-1)
        return np.where(inside, 0.0, INF)

    def _conj_eval(self, v):
        # support function of the box
        return np.sum(np.maximum(self.lo * v, self.hi * v), axis=-1)

    def _prox(self, scale, a):
        return np.clip(a, self.lo, self.hi)

    def _conj_prox(self, scale, a):
        # piecewise-linear support function: shift by s*hi above, s*lo below
        return np.where(a > scale * self.hi, a - scale * self.hi,
                        np.where(a < scale * self.lo, a - scale * self.lo, 0.0))


class L1(ProxFunction):
    kind = "l1"
    conjugate_domain_bounded = True

    def _eval(self, u):
        return np.sum(np.abs(u), axis=-1)

    def _conj_eval(self, v):
        return np.where(np.all(np.abs(v) <= 1.0, axis=-1), 0.0, INF)

    def _prox(self, scale, a):
        return np.sign(a) * np.maximum(np.abs(a) - scale, 0.0)

    def _conj_prox(self, scale, a):
        return np.clip(a, -1.0, 1.0)


class GroupL21(ProxFunction):
    """Sum of Euclidean norms of consecutive blocks of ``group_size``.

    With ``group_size=2`` applied to :class:`~pdcont.linops.Grad2D` output
    this is isotropic total variation.
    """

    kind = "group_l21"
    conjugate_domain_bounded = True

    def __init__(self, dim: int, group_size: int = 2):
        super().__init__(dim)
        if group_size < 1 or dim % group_size:
            raise ValueError(f"dim {dim} is not a multiple of group_size {group_size}")
        self.group_size = int(group_size)

    def _blocks(self, u):
        return u.reshape(u.shape[:-1] + (self.dim // self.group_size, self.group_size))

    def block_norms(self, u):
        return np.sqrt(np.sum(self._blocks(u) ** 2, axis=-1))

    def _eval(self, u):
        return np.sum(self.block_norms(u), axis=-1)

    def _conj_eval(self, v):
        # a computed block norm is only good to a few ulps, and projected
        # points land on the sphere
        inside = np.all(self.block_norms(v) <= 1.0 + NORM_ULPS, axis=-1)
        return np.where(inside, 0.0, INF)

    def _prox(self, scale, a):
        nrm = self.block_norms(a)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(nrm > scale, 1.0 - scale / nrm, 0.0)
        return (self._blocks(a) * factor[..., None]).reshape(a.shape)

    def _conj_prox(self, scale, a):
        # projection of each block onto the unit ball; independent of scale
        nrm = self.block_norms(a)
        factor = 1.0 / np.maximum(nrm, 1.0)
        return (self._blocks(a) * factor[..., None]).reshape(a.shape)


class SquaredL2(ProxFunction):
    """``0.5 * ||u - center||^2``."""

    kind = "squared_l2"

    def __init__(self, dim: int, center=None):
        super().__init__(dim)
        c = np.zeros(dim) if center is None else np.array(center, dtype=float)
        if c.shape != (dim,):
            raise ValueError(f"center must have shape ({dim},), got {c.shape}")
        c.setflags(write=False)
        self.center = c

    def _eval(self, u):
        return 0.5 * np.sum((u - self.center) ** 2, axis=-1)

    def _conj_eval(self, v):
        return 0.5 * np.sum(v ** 2, axis=-1) + v @ self.center

    def _prox(self, scale, a):
        return (a + scale * self.center) / (1.0 + scale)

    def _conj_prox(self, scale, a):
        return (a - scale * self.center) / (1.0 + scale)


def prox_oracle(F: ProxFunction, scale: float, a, grid_radius: float, grid_step: float,
                chunk: int = 2_000_000):
    """Brute-force prox: minimise ``0.5||u-a||^2 + scale*F(u)`` over the lattice
    ``grid_step * Z^dim`` inside ``a + [-grid_radius, grid_radius]^dim``.

    The lattice is anchored at the origin so the kinks of the functions here
    (zero, box faces at multiples of the step) are grid points. Meant for
    tests; refuses ``dim > 3``.
    """
    if F.dim > 3:
        raise ValueError(f"prox_oracle only supports dim <= 3, got {F.dim}")
    a = np.asarray(a, dtype=float)
    axes = []
    for ai in a:
        lo = math.ceil((ai - grid_radius) / grid_step - 1e-9)
        hi = math.floor((ai + grid_radius) / grid_step + 1e-9)
        axes.append(np.arange(lo, hi + 1) * grid_step)
    if any(len(ax) == 0 for ax in axes):
        raise ValueError("grid is empty; increase grid_radius")
    best_val, best = INF, None
    # iterate over the first axis to bound memory; rest are meshed
    inner = (np.array(list(itertools.product(*axes[1:]))) if F.dim > 1 else np.zeros((1, 0)))
    rows_per_chunk = max(1, chunk // len(inner))
    for start in range(0, len(axes[0]), rows_per_chunk):
        first = axes[0][start:start + rows_per_chunk]
        U = np.concatenate([np.repeat(first, len(inner))[:, None],
                            np.tile(inner, (len(first), 1))], axis=1)
        vals = 0.5 * np.sum((U - a) ** 2, axis=1) + scale * F.eval(U)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best = vals[i], U[i].copy()
    if best is None:
        raise ValueError("no grid point with finite objective")
    return best
