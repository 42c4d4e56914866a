"""Linear maps with adjoints and operator-norm bounds.

All maps act on flat 1-D vectors. Image operators flatten row-major; the
gradient lays out its output as ``(H, W, 2)`` so that the two finite
differences belonging to one pixel sit next to each other (group size 2).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

logger = logging.getLogger(__name__)

POWER_SEED = 20240611
SAFETY = 1.01
LOOSE_SAFETY = 1.05


@dataclass(frozen=True)
class NormEstimate:
    bound: float
    estimate: float
    iterations: int
    loose: bool = False


class LinearMap:
    """Base class for a linear map ``R^in_dim -> R^out_dim``."""

    kind = "abstract"

    def __init__(self, in_dim: int, out_dim: int):
        if in_dim < 1 or out_dim < 1:
            raise ValueError(f"dimensions must be positive, got {in_dim} -> {out_dim}")
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self._norm_cache: dict[tuple[float, int], NormEstimate] = {}

    def __repr__(self):
        return f"{type(self).__name__}({self.in_dim} -> {self.out_dim})"

    def apply(self, x):
        x = _check_vec(x, self.in_dim, "apply")
        return self._apply(x)

    def adjoint(self, y):
        y = _check_vec(y, self.out_dim, "adjoint")
        return self._adjoint(y)

    def apply_rows(self, X):
        """Apply to every row of a 2-D array."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ValueError(f"expected rows of length {self.in_dim}, got shape {X.shape}")
        return np.stack([self._apply(x) for x in X]) if len(X) else np.zeros((0, self.out_dim))

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError

    def norm_estimate(self, tol: float = 1e-10, max_iters: int = 5000) -> NormEstimate:
        if tol <= 0:
            raise ValueError("tol must be positive")
        key = (float(tol), int(max_iters))
        if key not in self._norm_cache:
            self._norm_cache[key] = self._norm_estimate(tol, max_iters)
        return self._norm_cache[key]

    def norm_bound(self, tol: float = 1e-10, max_iters: int = 5000) -> float:
        """Upper bound ``B >= ||A||`` on the largest singular value."""
        return self.norm_estimate(tol, max_iters).bound

    def _norm_estimate(self, tol, max_iters):
        return power_iteration(self, tol, max_iters)

    def to_dense(self):
        """Matrix of the map, built column by column (small maps only)."""
        eye = np.eye(self.in_dim)
        return np.stack([self._apply(e) for e in eye], axis=1)


def _check_vec(x, n, what):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != n:
        raise ValueError(f"{what}: expected vector of length {n}, got shape {x.shape}")
    return x


def power_iteration(A: LinearMap, tol: float = 1e-10, max_iters: int = 5000,
                    seed: int = POWER_SEED) -> NormEstimate:
    """Estimate ``||A||`` by power iteration on ``A^T A``.

    Starts from a seeded pseudo-random vector so repeated calls agree. The
    returned bound is the estimate times 1.01, or times 1.05 (and flagged
    ``loose``) when the relative change never fell below ``tol``.
    """
    x = np.random.default_rng(seed).standard_normal(A.in_dim)
    x /= np.linalg.norm(x)
    est = 0.0
    for it in range(1, max_iters + 1):
        z = A.adjoint(A.apply(x))
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return NormEstimate(0.0, 0.0, it)
        new = math.sqrt(nz)
        x = z / nz
        if est > 0 and abs(new - est) <= tol * new:
            return NormEstimate(new * SAFETY, new, it)
        est = new
    logger.warning("power iteration did not converge in %d iterations; bound is loose", max_iters)
    return NormEstimate(est * LOOSE_SAFETY, est, max_iters, loose=True)


class DenseMap(LinearMap):
    kind = "dense"

    def __init__(self, matrix):
        M = np.array(matrix, dtype=float)
        if M.ndim != 2:
            raise ValueError("dense map needs a 2-D matrix")
        M.setflags(write=False)
        self.matrix = M
        super().__init__(M.shape[1], M.shape[0])

    @classmethod
    def from_csv(cls, path):
        """Load a header-free, row-major CSV matrix."""
        M = np.loadtxt(Path(path), delimiter=",", ndmin=2)
        return cls(M)

    def _apply(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self.matrix.T @ y

    def apply_rows(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ValueError(f"expected rows of length {self.in_dim}, got shape {X.shape}")
        return X @ self.matrix.T

    def to_dense(self):
        return self.matrix.copy()


class IdentityMap(LinearMap):
    kind = "identity"

    def __init__(self, dim: int):
        super().__init__(dim, dim)

    def _apply(self, x):
        return x.copy()

    def _adjoint(self, y):
        return y.copy()

    def apply_rows(self, X):
        return np.array(X, dtype=float)

    def _norm_estimate(self, tol, max_iters):
        return NormEstimate(1.0, 1.0, 0)


class ZeroMap(LinearMap):
    kind = "zero"

    def _apply(self, x):
        return np.zeros(self.out_dim)

    def _adjoint(self, y):
        return np.zeros(self.in_dim)

    def apply_rows(self, X):
        return np.zeros((len(X), self.out_dim))

    def _norm_estimate(self, tol, max_iters):
        return NormEstimate(0.0, 0.0, 0)


class ScaledMap(LinearMap):
    """``c * A`` for a scalar ``c``."""

    kind = "composite-scaled"

    def __init__(self, c: float, base: LinearMap):
        super().__init__(base.in_dim, base.out_dim)
        self.c = float(c)
        self.base = base

    def _apply(self, x):
        return self.c * self.base.apply(x)

    def _adjoint(self, y):
        return self.c * self.base.adjoint(y)

    def apply_rows(self, X):
        return self.c * self.base.apply_rows(X)

    def _norm_estimate(self, tol, max_iters):
        inner = self.base.norm_estimate(tol, max_iters)
        c = abs(self.c)
        return NormEstimate(c * inner.bound, c * inner.estimate, inner.iterations, inner.loose)


class Conv2D(LinearMap):
    """Direct 2-D convolution of an ``H x W`` image with a small kernel.

    The kernel's centre tap is ``(kh // 2, kw // 2)``. ``boundary`` is
    ``"periodic"`` (default) or ``"zero"``; both keep the output the same size
    as the input.
    """

    kind = "conv2d"

    def __init__(self, kernel, shape, boundary: str = "periodic"):
        k = np.array(kernel, dtype=float)
        if k.ndim != 2:
            raise ValueError("kernel must be 2-D")
        H, W = (int(s) for s in shape)
        if k.shape[0] > H or k.shape[1] > W:
            raise ValueError(f"kernel {k.shape} larger than image {(H, W)}")
        if boundary not in ("periodic", "zero"):
            raise ValueError(f"unknown boundary {boundary!r}")
        k.setflags(write=False)
        self.kernel = k
        self.shape = (H, W)
        self.boundary = boundary
        super().__init__(H * W, H * W)
        self._flipped = k[::-1, ::-1].copy()
        self._origin = tuple(-1 if n % 2 == 0 else 0 for n in k.shape)
        self._mode = "wrap" if boundary == "periodic" else "constant"

    @classmethod
    def from_json(cls, spec: dict, shape, boundary: str = "periodic"):
        """Kernel given inline as ``{"data": [...row-major...], "shape": [kh, kw]}``."""
        k = np.asarray(spec["data"], dtype=float).reshape(spec["shape"])
        return cls(k, shape, boundary)

    def _apply(self, x):
        # correlate with the flipped kernel; even sizes need origin -1 to keep
        # the centre tap at (kh // 2, kw // 2)
        return ndimage.correlate(x.reshape(self.shape), self._flipped, mode=self._mode,
                                 origin=self._origin).ravel()

    def _adjoint(self, y):
        return ndimage.correlate(y.reshape(self.shape), self.kernel, mode=self._mode).ravel()

    def _norm_estimate(self, tol, max_iters):
        est = power_iteration(self, tol, max_iters)
        # Young's inequality: ||K|| <= sum |k| for either boundary rule.
        l1 = float(np.abs(self.kernel).sum())
        if est.bound > l1:
            return NormEstimate(l1, est.estimate, est.iterations, False)
        return est


class Grad2D(LinearMap):
    """Forward-difference image gradient with Neumann boundary.

    Output is ``(H, W, 2)`` flattened: component 0 is the horizontal
    difference ``x[i, j+1] - x[i, j]`` (zero in the last column), component 1
    the vertical difference ``x[i+1, j] - x[i, j]`` (zero in the last row).
    The adjoint is minus the matching discrete divergence.
    """

    kind = "grad2d"

    def __init__(self, shape):
        H, W = (int(s) for s in shape)
        self.shape = (H, W)
        super().__init__(H * W, 2 * H * W)

    def _apply(self, x):
        img = x.reshape(self.shape)
        out = np.zeros(self.shape + (2,))
        out[:, :-1, 0] = img[:, 1:] - img[:, :-1]
        out[:-1, :, 1] = img[1:, :] - img[:-1, :]
        return out.ravel()

    def _adjoint(self, y):
        g = y.reshape(self.shape + (2,))
        gx, gy = g[..., 0], g[..., 1]
        out = np.zeros(self.shape)
        out[:, :-1] -= gx[:, :-1]
        out[:, 1:] += gx[:, :-1]
        out[:-1, :] -= gy[:-1, :]
        out[1:, :] += gy[:-1, :]
        return out.ravel()

    def _norm_estimate(self, tol, max_iters):
        return NormEstimate(math.sqrt(8.0), math.sqrt(8.0), 0)
