"""Monte-Carlo simulation of ``dX = f(X) dt + dL`` with tempered stable ``L``.

Increments over a step ``dt`` are drawn as a compound Poisson sum of the
jumps larger than ``eps`` plus a centred Gaussian standing in for the small
jumps (same variance). Paths are simulated in fixed-size blocks; each block
owns a generator keyed by ``(seed, block index)``, so the result does not
depend on how blocks are scheduled across workers.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .levy import TemperedStableParams, large_jump_rate, small_jump_variance_rate
from .solver import DensityField, DriftSpec, Grid1D, GridMode

__all__ = [
    "McConfig",
    "JumpSampler",
    "PathEnsemble",
    "sample_increment",
    "simulate_paths",
    "empirical_density",
    "l1_distance",
    "block_rng",
    "worker_count",
    "BLOCK_SIZE",
]

BLOCK_SIZE = 16384
THREADS_ENV = "TEMPERED_FPE_THREADS"


def worker_count() -> int:
    """Worker cap from ``TEMPERED_FPE_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0, got {raw!r}")
    return n if n > 0 else (os.cpu_count() or 1)


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(block,))))


class JumpSampler:
    """Increment sampler for one ``(params, eps)`` pair.

    Large jumps have rate ``nu(|y| > eps)`` and size law ``nu`` restricted to
    ``|y| > eps``; sizes come from the Pareto tail ``eps U^(-1/alpha)``
    thinned with acceptance ``exp(-lam (|y| - eps))``.
    """

    def __init__(self, params: TemperedStableParams, eps: float):
        if not eps > 0.0:
            raise ValueError(f"jump cutoff eps must be positive, got {eps!r}")
        self.params = params
        self.eps = float(eps)
        if params.c_alpha == 0.0:
            self.rate = 0.0
            self.small_variance = 0.0
        else:
            self.rate = large_jump_rate(params, eps)
            self.small_variance = small_jump_variance_rate(params, eps)

    def jump_sizes(self, rng: np.random.Generator, count: int) -> np.ndarray:
        alpha, lam, eps = self.params.alpha, self.params.lam, self.eps
        out = np.empty(count)
        filled = 0
        while filled < count:
            need = count - filled
            batch = max(16, int(need * 1.25) + 8)
            y = eps * rng.random(batch) ** (-1.0 / alpha)
            if lam > 0.0:
                y = y[rng.random(batch) < np.exp(-lam * (y - eps))]
            take = min(need, y.size)
            out[filled : filled + take] = y[:take]
            filled += take
        signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        return out * signs

    def increments(self, rng: np.random.Generator, dt: float, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Increments of ``L`` over ``dt`` for ``size`` paths, plus per-path jump counts."""
        counts = rng.poisson(self.rate * dt, size) if self.rate > 0.0 else np.zeros(size, dtype=np.int64)
        total = int(counts.sum())
        if total:
            sizes = self.jump_sizes(rng, total)
            owner = np.repeat(np.arange(size), counts)
            jumps = np.bincount(owner, weights=sizes, minlength=size)
        else:
            jumps = np.zeros(size)
        if self.small_variance > 0.0:
            jumps += math.sqrt(self.small_variance * dt) * rng.standard_normal(size)
        return jumps, counts


def sample_increment(params: TemperedStableParams, dt: float, eps: float, rng: np.random.Generator) -> float:
    """Single draw of ``L_{t+dt} - L_t`` (see :class:`JumpSampler` for bulk draws)."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    inc, _ = JumpSampler(params, eps).increments(rng, dt, 1)
    return float(inc[0])


@dataclass(frozen=True)
class McConfig:
    params: TemperedStableParams
    drift: DriftSpec = field(default_factory=DriftSpec.zero)
    n_paths: int = 10_000
    dt: float = 0.01
    t_final: float = 1.0
    eps: float = 0.01
    seed: int = 0
    x0: float = 0.0
    x0_std: float = 0.0
    absorb: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.t_final < 0.0:
            raise ValueError("t_final must be non-negative")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.absorb is not None and not self.absorb[0] < self.x0 < self.absorb[1]:
            raise ValueError("x0 must lie inside the absorbing interval")

    @property
    def steps(self) -> list[float]:
        n = int(math.floor(self.t_final / self.dt * (1.0 + 1e-12)))
        steps = [self.dt] * n
        last = self.t_final - n * self.dt
        if last > 1e-9 * self.dt:
            steps.append(last)
        return steps


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Terminal positions of the paths that survived (finite, not absorbed)."""

    positions: np.ndarray
    n_paths: int
    n_absorbed: int = 0
    n_nonfinite: int = 0

    @property
    def retained_fraction(self) -> float:
        return self.positions.size / self.n_paths


def _simulate_block(cfg: McConfig, sampler: JumpSampler, block: int, size: int) -> tuple[np.ndarray, int, int]:
    rng = block_rng(cfg.seed, block)
    x = np.full(size, float(cfg.x0))
    if cfg.x0_std > 0.0:
        x += cfg.x0_std * rng.standard_normal(size)
    alive = np.ones(size, dtype=bool)
    if cfg.absorb is not None:
        lo, hi = cfg.absorb
        alive &= (x > lo) & (x < hi)
    drift_free = cfg.drift.is_zero
    with np.errstate(over="ignore", invalid="ignore"):
        for dt in cfg.steps:
            inc, _ = sampler.increments(rng, dt, size)
            if drift_free:
                x += inc
            else:
                x += cfg.drift(x) * dt + inc
            if cfg.absorb is not None:
                alive &= (x > lo) & (x < hi)
    finite = np.isfinite(x)
    n_absorbed = int(np.count_nonzero(~alive & finite))
    n_nonfinite = int(np.count_nonzero(~finite))
    return x[alive & finite], n_absorbed, n_nonfinite


def simulate_paths(cfg: McConfig, workers: int | None = None) -> PathEnsemble:
    """Euler scheme ``X += f(X) dt + dL`` for every path.

    Output is bit-for-bit reproducible for a given config regardless of
    ``workers``: blocks are merged in index order.
    """
    sampler = JumpSampler(cfg.params, cfg.eps)
    sizes = [min(BLOCK_SIZE, cfg.n_paths - start) for start in range(0, cfg.n_paths, BLOCK_SIZE)]
    workers = worker_count() if workers is None else max(1, workers)

    def run(args):
        block, size = args
        return _simulate_block(cfg, sampler, block, size)

    jobs = list(enumerate(sizes))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    positions = np.concatenate([r[0] for r in results]) if results else np.empty(0)
    n_absorbed = sum(r[1] for r in results)
    n_nonfinite = sum(r[2] for r in results)
    if n_nonfinite:
        warnings.warn(f"{n_nonfinite} of {cfg.n_paths} paths became non-finite and were dropped", RuntimeWarning)
    return PathEnsemble(positions, cfg.n_paths, n_absorbed, n_nonfinite)


def empirical_density(samples, grid: Grid1D, n_total: int | None = None) -> tuple[DensityField, float]:
    """Histogram density on the cells ``[x_j - h/2, x_j + h/2)``.

    The two end cells are half cells inside ``[-L, L]`` so that the
    trapezoidal mass of the histogram equals the fraction of samples that
    landed on the grid. Mass is counted against ``n_total`` (default: the
    number of samples); everything else is returned as the escaped fraction.
    """
    if grid.mode is not GridMode.TRUNCATED_INFINITE:
        raise ValueError("empirical_density expects a truncated-infinite (physical) grid")
    samples = np.asarray(samples, dtype=float).ravel()
    n_total = samples.size if n_total is None else int(n_total)
    if n_total < 1 or n_total < samples.size:
        raise ValueError("n_total must be at least the number of samples and positive")
    h, J = grid.h, grid.J
    # Cell index round((x + L)/h) on [0, 2J]; x == L belongs to the last half cell.
    pos = (samples + grid.half_width) / h
    inside = (pos >= 0.0) & (pos <= 2 * J)
    cell = np.floor(pos[inside] + 0.5).astype(np.int64)
    counts = np.bincount(cell, minlength=2 * J + 1).astype(float)
    width = np.full(2 * J + 1, h)
    width[0] = width[-1] = 0.5 * h
    values = counts / (n_total * width)
    escaped = (n_total - int(counts.sum())) / n_total
    return DensityField(values, 0.0), escaped


def l1_distance(grid: Grid1D, P, Q) -> float:
    p = P.values if isinstance(P, DensityField) else np.asarray(P, dtype=float)
    q = Q.values if isinstance(Q, DensityField) else np.asarray(Q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("fields are not aligned")
    return float(grid.h * np.sum(np.abs(p - q)))
