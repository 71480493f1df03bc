"""Nonlocal Zakai filter for ``dX = f(X) dt + dL``, ``dY = h(X) dt + dW``.

The unnormalized conditional density is advanced by operator splitting:
one explicit Euler step of the Fokker-Planck operator, then the pointwise
multiplicative correction ``exp(h(x) dY - h(x)^2 dt / 2)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .levy import TemperedStableParams
from .montecarlo import JumpSampler, block_rng
from .solver import INSTABILITY_GROWTH, DensityField, DriftSpec, InstabilityError, SolverConfig, step_euler, total_mass

__all__ = [
    "ObservationModel",
    "ObservationPath",
    "FilterResult",
    "DegenerateMassError",
    "simulate_signal_observation",
    "zakai_correction",
    "zakai_step",
    "run_filter",
    "write_observation_csv",
    "read_observation_csv",
]

MIN_MASS = 1e-300


class DegenerateMassError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ObservationModel:
    """Observation function ``h``: ``"cos"`` or a polynomial (ascending coefficients)."""

    kind: str = "cos"
    coefficients: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("cos", "polynomial"):
            raise ValueError(f"unknown observation function {self.kind!r}")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    @classmethod
    def cosine(cls) -> "ObservationModel":
        return cls("cos")

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "ObservationModel":
        return cls("polynomial", tuple(coefficients))

    @classmethod
    def constant(cls, c: float) -> "ObservationModel":
        return cls("polynomial", (c,))

    @property
    def is_zero(self) -> bool:
        return self.kind == "polynomial" and all(c == 0.0 for c in self.coefficients)

    def __call__(self, x):
        if self.kind == "cos":
            return np.cos(x)
        if not self.coefficients:
            return np.zeros_like(np.asarray(x, dtype=float))
        return npoly.polyval(x, self.coefficients)


@dataclass(frozen=True, eq=False)
class ObservationPath:
    times: np.ndarray
    increments: np.ndarray
    truth: np.ndarray | None = None
    y0: float = 0.0

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        dy = np.asarray(self.increments, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "increments", dy)
        if self.truth is not None:
            object.__setattr__(self, "truth", np.asarray(self.truth, dtype=float))
            if self.truth.shape != t.shape:
                raise ValueError("truth must have one entry per time")
        if dy.shape[0] != t.shape[0] - 1:
            raise ValueError("need exactly one increment per time interval")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("observation times must be strictly increasing")

    @property
    def observations(self) -> np.ndarray:
        """Cumulative ``Y`` at each time."""
        return self.y0 + np.concatenate([[0.0], np.cumsum(self.increments)])

    @property
    def step(self) -> float:
        if self.times.size < 2:
            return 0.0
        return float(self.times[1] - self.times[0])


def simulate_signal_observation(
    drift: DriftSpec,
    params: TemperedStableParams,
    obs: ObservationModel,
    x0: float,
    y0: float,
    dt: float,
    t_final: float,
    seed: int,
    eps: float = 0.01,
    observation_noise: float = 1.0,
) -> ObservationPath:
    """One signal path by the Euler scheme and its noisy observation record.

    ``observation_noise`` scales the Brownian increments (1 is the model;
    0 is only useful as a test fixture).
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    n = int(math.floor(t_final / dt * (1.0 + 1e-12)))
    # Signal and observation noise come from independent streams.
    signal_rng = block_rng(seed, 0)
    noise_rng = block_rng(seed, 1)
    sampler = JumpSampler(params, eps)
    x = np.empty(n + 1)
    dy = np.empty(n)
    x[0] = x0
    jumps = np.empty(n)
    for i in range(n):
        jumps[i] = sampler.increments(signal_rng, dt, 1)[0][0]
    brownian = noise_rng.standard_normal(n) * math.sqrt(dt) * observation_noise
    for i in range(n):
        x[i + 1] = x[i] + float(drift(x[i])) * dt + jumps[i]
        dy[i] = float(obs(x[i])) * dt + brownian[i]
    times = np.arange(n + 1) * dt
    return ObservationPath(times, dy, x, y0)


def zakai_correction(values: np.ndarray, hx: np.ndarray, dy: float, dt: float) -> np.ndarray:
    """Multiply by ``exp(h dY - h^2 dt / 2)`` node by node."""
    return values * np.exp(hx * dy - 0.5 * hx * hx * dt)


def zakai_step(cfg: SolverConfig, obs: ObservationModel, P, dy: float) -> DensityField:
    """Predict with one Euler step of the FPE operator, then correct with ``dy``."""
    predicted = step_euler(cfg, P)
    if obs.is_zero:
        return predicted
    hx = obs(cfg.physical_nodes)
    values = zakai_correction(predicted.values, hx, dy, cfg.dt)
    if not np.all(np.isfinite(values)):
        raise InstabilityError("non-finite density after Zakai correction", cfg.dt, cfg.stability_bound)
    return DensityField(values, predicted.time)


@dataclass(frozen=True, eq=False)
class FilterResult:
    unnormalized: list[DensityField] = field(default_factory=list)
    posterior: list[DensityField] = field(default_factory=list)
    normalization: list[float] = field(default_factory=list)


def _physical_mass(cfg: SolverConfig, P: DensityField) -> float:
    scale = 1.0 if cfg.transform is None else cfg.transform.scale
    return scale * total_mass(cfg.grid, P)


def run_filter(
    cfg: SolverConfig,
    obs: ObservationModel,
    P0,
    path: ObservationPath,
    snapshot_times: Sequence[float] | None = None,
) -> FilterResult:
    """Run the Zakai recursion over every increment of ``path``.

    Snapshots are taken at the observation times closest to
    ``snapshot_times`` (default: the final time). The posterior at each
    snapshot is the unnormalized field divided by its mass.
    """
    P = P0 if isinstance(P0, DensityField) else DensityField(P0, 0.0)
    n = path.increments.size
    if n and not math.isclose(path.step, cfg.dt, rel_tol=1e-9):
        raise ValueError(f"observation step {path.step} differs from solver dt {cfg.dt}")
    if snapshot_times is None:
        wanted = {n}
    else:
        wanted = {int(round((t - path.times[0]) / cfg.dt)) if n else 0 for t in snapshot_times}
        if any(k < 0 or k > n for k in wanted):
            raise ValueError("snapshot time outside the observation window")

    result = FilterResult()
    mass0 = _physical_mass(cfg, P)
    peak0 = float(np.max(np.abs(P.values))) if P.values.size else 0.0

    def guard(field_: DensityField) -> float:
        # The correction rescales the field, so growth is judged on peak / mass.
        mass = _physical_mass(cfg, field_)
        peak = float(np.max(np.abs(field_.values)))
        if mass > MIN_MASS:
            if mass0 > MIN_MASS and peak / mass > INSTABILITY_GROWTH * peak0 / mass0:
                raise InstabilityError(
                    f"normalized density grew beyond {INSTABILITY_GROWTH:g} x its initial peak at t={field_.time:.6g}",
                    cfg.dt,
                    cfg.stability_bound,
                )
            return mass
        if float(np.min(field_.values)) < -1e-8 * peak:
            raise InstabilityError(f"density turned negative at t={field_.time:.6g}", cfg.dt, cfg.stability_bound)
        raise DegenerateMassError(
            f"unnormalized mass {mass:.3g} underflowed at t={field_.time:.6g}; normalize more frequently"
        )

    def record(field_: DensityField) -> None:
        mass = guard(field_)
        result.unnormalized.append(field_)
        result.posterior.append(DensityField(field_.values / mass, field_.time))
        result.normalization.append(mass)

    if n:
        P = DensityField(P.values, float(path.times[0]))
    if 0 in wanted:
        record(P)
    for k in range(n):
        P = zakai_step(cfg, obs, P, float(path.increments[k]))
        P = DensityField(P.values, float(path.times[k + 1]))
        if k + 1 in wanted:
            record(P)
        else:
            guard(P)
    return result


def write_observation_csv(path: ObservationPath, target: str | Path) -> None:
    """Columns ``t,X,Y,dY``; ``dY`` on row n is the increment over [t_{n-1}, t_n]."""
    y = path.observations
    with open(target, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        has_truth = path.truth is not None
        writer.writerow(["t", "X", "Y", "dY"] if has_truth else ["t", "Y", "dY"])
        for n, t in enumerate(path.times):
            dy = "" if n == 0 else f"{path.increments[n - 1]:.17g}"
            row = [f"{t:.17g}"]
            if has_truth:
                row.append(f"{path.truth[n]:.17g}")
            row += [f"{y[n]:.17g}", dy]
            writer.writerow(row)


def read_observation_csv(source: str | Path) -> ObservationPath:
    """Read ``t,dY`` (plus optional ``X``/``X_truth`` and ``Y``) columns.

    Either the first row carries an empty ``dY`` (the initial time) or every
    row is an increment ending at ``t``; in the latter case the start time
    is inferred from the uniform step.
    """
    with open(source, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{source}: no observation rows")
    if "t" not in rows[0] or "dY" not in rows[0]:
        raise ValueError(f"{source}: columns 't' and 'dY' are required")
    truth_key = "X_truth" if "X_truth" in rows[0] else ("X" if "X" in rows[0] else None)
    times = [float(r["t"]) for r in rows]
    dys = [r["dY"].strip() for r in rows]
    truth = [float(r[truth_key]) for r in rows] if truth_key else None
    y0 = float(rows[0]["Y"]) if rows[0].get("Y", "").strip() and dys[0] == "" else 0.0
    if dys[0] == "":
        increments = [float(v) for v in dys[1:]]
    else:
        if len(times) < 2:
            raise ValueError(f"{source}: cannot infer the initial time from a single increment")
        times = [times[0] - (times[1] - times[0])] + times
        increments = [float(v) for v in dys]
        if truth is not None:
            truth = None  # no value at the inferred initial time
    return ObservationPath(np.array(times), np.array(increments), None if truth is None else np.array(truth), y0)
