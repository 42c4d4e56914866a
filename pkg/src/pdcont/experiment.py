"""Desk-scale total-variation deblurring experiment.

A piecewise-constant phantom is blurred by a normalised Gaussian kernel and
corrupted by Gaussian noise (numpy ``PCG64`` generator, ``standard_normal``,
so a seed reproduces the same data on every platform). The problem is

    min_u 0.5 ||K u - y||^2 + lam * ind_[0,1](u) + mu * TV(u)

The frontier is sampled twice: once by a sweep of fixed-``mu`` runs, once
by a single continuation run whose ``mu_n`` walks the same range.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .continuation import Schedule, constant, log_spaced_then_constant, sequence_from_json
from .linops import Conv2D, Grad2D
from .pareto import ParetoRecord, check_convex, check_monotone, read_records, \
    subgradient_check, write_records
from .prox import BoxIndicator, GroupL21
from .solver import IterateState, ProblemSpec, TraceConfig, Trajectory, least_squares, \
    make_steps, read_trace_csv, run

OUTPUT_ENV = "PDCONT_OUTPUT_DIR"
PRNG_NAME = "numpy.random.Generator(PCG64).standard_normal"


@dataclass
class KernelConfig:
    size: int = 5
    sigma: float = 1.0


@dataclass
class MuGrid:
    start: float = 1e2
    stop: float = 1e-2
    count: int = 8

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.start])
        vals = np.geomspace(self.start, self.stop, self.count)
        vals[0], vals[-1] = self.start, self.stop
        return vals


@dataclass
class ExperimentConfig:
    image_size: tuple[int, int] = (16, 16)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    noise_sigma: float = 0.05
    noise_seed: int = 0
    mu_grid: MuGrid = field(default_factory=MuGrid)
    # mu schedule of the continuation run; None means log-spaced over the
    # grid range with one value per iteration
    continuation: dict | None = None
    iters_per_run: int = 2000
    alpha: float | None = None
    beta: float | None = None
    lam: float = 1.0
    tol: float = 0.0
    output_dir: str | None = None

    def __post_init__(self):
        self.image_size = tuple(int(s) for s in self.image_size)
        if isinstance(self.kernel, dict):
            self.kernel = KernelConfig(**self.kernel)
        if isinstance(self.mu_grid, dict):
            g = dict(self.mu_grid)
            self.mu_grid = MuGrid(g.get("from", g.get("start")), g.get("to", g.get("stop")),
                                  int(g["count"]))
        if min(self.image_size) < 1 or self.iters_per_run < 1 or self.kernel.size < 1:
            raise ValueError("image size, kernel size and iteration count must be positive")
        if self.noise_sigma < 0 or self.kernel.sigma < 0:
            raise ValueError("noise and kernel widths must be nonnegative")
        if not (self.mu_grid.start > 0 and self.mu_grid.stop > 0 and self.mu_grid.count >= 1):
            raise ValueError("mu grid must be positive with count >= 1")

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        d = asdict(self)
        d["image_size"] = list(self.image_size)
        d["mu_grid"] = {"from": self.mu_grid.start, "to": self.mu_grid.stop,
                        "count": self.mu_grid.count}
        return d

    def continuation_sequence(self):
        if self.continuation is None:
            if self.mu_grid.start == self.mu_grid.stop:
                return constant(self.mu_grid.stop)
            return log_spaced_then_constant(self.mu_grid.start, self.mu_grid.stop,
                                            self.iters_per_run)
        return sequence_from_json(self.continuation)


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Truncated ``size x size`` Gaussian normalised to unit mass; a delta if
    ``sigma == 0``."""
    k = np.zeros((size, size))
    c = size // 2
    if sigma == 0:
        k[c, c] = 1.0
        return k
    r = np.arange(size) - c
    k = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def phantom(shape) -> np.ndarray:
    """Centred rectangle at 1.0 on a 0.0 background, with a centred disk at 0.5."""
    H, W = shape
    img = np.zeros((H, W))
    img[H // 4: H - H // 4, W // 4: W - W // 4] = 1.0
    ii, jj = np.mgrid[0:H, 0:W]
    radius = min(H, W) / 8.0
    img[(ii - (H - 1) / 2.0) ** 2 + (jj - (W - 1) / 2.0) ** 2 <= radius ** 2] = 0.5
    return img


@dataclass
class Instance:
    config: ExperimentConfig
    K: Conv2D
    A: Grad2D
    truth: np.ndarray
    blurred: np.ndarray
    noisy: np.ndarray

    def problem(self, mu: float) -> ProblemSpec:
        d = self.K.in_dim
        return ProblemSpec(least_squares(self.K, self.noisy.ravel()), BoxIndicator(d, 0.0, 1.0),
                           GroupL21(self.A.out_dim, 2), self.A, self.config.lam, mu)


def make_instance(cfg: ExperimentConfig) -> Instance:
    H, W = cfg.image_size
    kern = gaussian_kernel(cfg.kernel.size, cfg.kernel.sigma)
    K = Conv2D(kern, (H, W), boundary="periodic")  # rejects kernels larger than the image
    truth = phantom((H, W))
    blurred = K.apply(truth.ravel()).reshape(H, W)
    rng = np.random.Generator(np.random.PCG64(cfg.noise_seed))
    noisy = blurred + cfg.noise_sigma * rng.standard_normal((H, W))
    return Instance(cfg, K, Grad2D((H, W)), truth, blurred, noisy)


def _trace(cfg):
    return TraceConfig(snapshot_every=0, record_every=1, residual_every=1)


def _sweep_one(cfg_json: dict, mu: float):
    cfg = ExperimentConfig.from_json(cfg_json)
    inst = make_instance(cfg)
    p = inst.problem(mu)
    s = make_steps(p, cfg.alpha, cfg.beta)
    traj = run(p, Schedule.constant(cfg.lam, mu), s, cfg.iters_per_run, cfg.tol, _trace(cfg))
    return traj.rows, traj.final.u, traj.final.v, traj.final.n, traj.converged


def run_sweep(cfg: ExperimentConfig, parallel: int = 1,
              instance: Instance | None = None) -> list[Trajectory]:
    """One fixed-``mu`` run per grid value, largest ``mu`` first, each from
    ``(u, v) = (0, 0)``."""
    inst = instance or make_instance(cfg)
    mus = [float(m) for m in cfg.mu_grid.values()]
    if parallel > 1 and len(mus) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_sweep_one, [cfg.to_json()] * len(mus), mus))
    else:
        results = [_sweep_one(cfg.to_json(), mu) for mu in mus]
    out = []
    for mu, (rows, u, v, n, conv) in zip(mus, results):
        p = inst.problem(mu)
        traj = Trajectory(p, make_steps(p, cfg.alpha, cfg.beta), Schedule.constant(cfg.lam, mu),
                          start=IterateState.zeros(p), final=IterateState(u, v, n),
                          rows=rows, converged=conv)
        out.append(traj)
    return out


def run_continuation(cfg: ExperimentConfig, warm_start: IterateState,
                     instance: Instance | None = None, store_iterates: bool = False) -> Trajectory:
    """Single continuation run from the largest-``mu`` minimiser.

    The iteration counter restarts at 0 so the schedule starts at its first
    value.
    """
    inst = instance or make_instance(cfg)
    mu_seq = cfg.continuation_sequence()
    p = inst.problem(mu_seq.target)
    s = make_steps(p, cfg.alpha, cfg.beta)
    start = IterateState(warm_start.u.copy(), warm_start.v.copy(), 0)
    trace = TraceConfig(snapshot_every=1 if store_iterates else 0, record_every=1,
                        residual_every=1)
    return run(p, Schedule(constant(cfg.lam), mu_seq), s, cfg.iters_per_run, 0.0, trace, start)


def cost_accounting(cfg: ExperimentConfig) -> dict:
    return {
        "sweep_iterations": cfg.mu_grid.count * cfg.iters_per_run,
        "continuation_iterations": 2 * cfg.iters_per_run,
        "warm_start_iterations": cfg.iters_per_run,
    }


def tube_deviation(endpoints, path_records) -> dict:
    """Relative distance of the continuation path from the sweep frontier.

    Sweep endpoints, sorted by ``h``, are joined piecewise-linearly in the
    ``(h, f)`` plane. For every path point whose ``mu`` lies strictly inside
    the grid range, the deviation is the Euclidean distance to that polyline
    divided by the norm of the nearest polyline point.
    """
    P = np.array(sorted((r.tau2, r.sigma) for r in endpoints), dtype=float)
    a, b = P[:-1], P[1:]
    d = b - a
    dd = np.maximum(np.sum(d * d, axis=1), np.finfo(float).tiny)
    mu_lo = min(r.mu for r in endpoints)
    mu_hi = max(r.mu for r in endpoints)
    devs = []
    worst, worst_n = 0.0, None
    for r in path_records:
        if not (mu_lo < r.mu < mu_hi) or not r.feasible:
            continue
        x = np.array([r.tau2, r.sigma])
        t = np.clip(np.sum((x - a) * d, axis=1) / dd, 0.0, 1.0)
        near = a + t[:, None] * d
        dist = np.linalg.norm(near - x, axis=1)
        k = int(np.argmin(dist))
        scale = max(float(np.linalg.norm(near[k])), np.finfo(float).tiny)
        devs.append(float(dist[k]) / scale)
        if worst_n is None or devs[-1] > worst:
            worst, worst_n = devs[-1], r.n
    return {"max_relative_deviation": max(devs) if devs else math.nan,
            "mean_relative_deviation": float(np.mean(devs)) if devs else math.nan,
            "worst_n": worst_n,
            "points": len(devs)}


def write_pgm(path, img) -> None:
    """8-bit binary PGM (P5); values are clipped to [0, 1] and rounded to /255."""
    q = np.round(np.clip(np.asarray(img, dtype=float), 0.0, 1.0) * 255.0).astype(np.uint8)
    H, W = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{W} {H}\n255\n".encode("ascii"))
        fh.write(q.tobytes(order="C"))


def read_pgm(path) -> np.ndarray:
    """Read a P5 PGM written by :func:`write_pgm`; returns values in [0, 1]."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM")
    W, H, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pix = np.frombuffer(data[pos + 1:pos + 1 + W * H], dtype=np.uint8).reshape(H, W)
    return pix.astype(float) / maxval


def endpoints(trajectories) -> list[ParetoRecord]:
    return [t.records()[-1] for t in trajectories]


def emit(out_dir, cfg: ExperimentConfig, instance: Instance, sweep, continuation,
         extra: dict | None = None) -> dict:
    """Write per-run trace CSVs, the frontier records, images and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, traj in enumerate(sweep):
        name = f"sweep_{k}.csv"
        traj.to_csv(out / name)
        files.append(name)
    if continuation is not None:
        continuation.to_csv(out / "continuation.csv")
        files.append("continuation.csv")
    write_records(endpoints(sweep), out / "frontier.csv")
    files.append("frontier.csv")
    for name, img in (("phantom.pgm", instance.truth), ("blurred.pgm", instance.blurred),
                      ("noisy.pgm", instance.noisy)):
        write_pgm(out / name, img)
        files.append(name)
    manifest = {
        "config": cfg.to_json(),
        "noise_seed": cfg.noise_seed,
        "noise_prng": PRNG_NAME,
        "software": {"pdcont": __version__, "numpy": np.__version__},
        "mu_grid": [float(m) for m in cfg.mu_grid.values()],
        "cost": cost_accounting(cfg),
        "files": files,
    }
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_endpoints(records_dir) -> list[ParetoRecord]:
    """Frontier records from ``frontier.csv``, or the last row of each ``sweep_k.csv``."""
    d = Path(records_dir)
    if (d / "frontier.csv").exists():
        return read_records(d / "frontier.csv")
    files = sorted(d.glob("sweep_*.csv"), key=lambda q: int(q.stem.split("_")[1]))
    if not files:
        raise FileNotFoundError(f"no frontier.csv or sweep_*.csv in {d}")
    recs = []
    for fpath in files:
        last = read_trace_csv(fpath)[-1]
        recs.append(ParetoRecord(tau1=last["g"], tau2=last["hAu"], sigma=last["f"],
                                 lam=last["lambda_n"], mu=last["mu_n"], n=last["n"]))
    return recs


def validate_records(records, tol: float = 1e-4) -> dict:
    """Run the frontier checks; returns violation counts per check."""
    mono = check_monotone(records, tol)
    conv = check_convex(records, tol)
    sub = [k for k, r in enumerate(records) if not subgradient_check(r, records, tol)]
    return {"monotone": len(mono), "convex": len(conv), "subgradient": len(sub),
            "ok": not (mono or conv or sub)}


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "results")
