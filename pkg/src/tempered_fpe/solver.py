"""Finite-difference solver for the 1-d nonlocal Fokker-Planck equation

    dp/dt = -(f p)_x + p.v. int [p(x+y) - p(x)] nu(dy)

driven by a symmetric tempered stable jump measure ``nu``.

Two discretizations are provided. ``BOUNDED_ABSORBING`` works on the
standard domain (-1, 1) with ``p = 0`` outside; the jumps that leave the
domain are removed through the tail weights ``W1 + W2``. ``TRUNCATED_INFINITE``
works on [-L, L] and simply truncates the jump sum. In both, the jump
integral is a punched-hole trapezoidal sum corrected by a zeta-weighted
second difference, and the drift term uses global Lax-Friedrichs flux
splitting differenced upwind.

The semi-discrete operator is linear and is assembled once per
configuration as a dense matrix acting on the evolved nodes; time stepping
uses the matrix. ``rhs`` evaluates the same scheme in difference form, which
maps a constant field to exactly zero.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .levy import TemperedStableParams
from .special import riemann_zeta, tempered_tail_weight

__all__ = [
    "GridMode",
    "Grid1D",
    "DensityField",
    "DriftSpec",
    "DomainTransform",
    "SolverConfig",
    "FluxSplit",
    "FPEOperator",
    "InstabilityError",
    "INSTABILITY_GROWTH",
    "transform_to_standard",
    "flux_split",
    "build_operator",
    "rhs",
    "rhs_bounded",
    "rhs_unbounded",
    "max_stable_dt",
    "advective_dt",
    "auto_dt",
    "step_euler",
    "solve",
    "total_mass",
    "gaussian_initial",
]

INSTABILITY_GROWTH = 1e6
_CHECK_EVERY = 64


class InstabilityError(RuntimeError):
    def __init__(self, message: str, dt: float, bound: float):
        super().__init__(f"{message} (dt={dt:.6g}, stability bound={bound:.6g})")
        self.dt = dt
        self.bound = bound


class GridMode(str, enum.Enum):
    BOUNDED_ABSORBING = "bounded"
    TRUNCATED_INFINITE = "truncated"


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``x_j = j h``.

    Bounded mode: standard domain (-1, 1), ``h = 1/J``, nodes ``-2J..2J``
    (the outer half is the zero exterior). Truncated mode: ``h = L/J``,
    nodes ``-J..J``.
    """

    J: int
    mode: GridMode = GridMode.TRUNCATED_INFINITE
    half_width: float = 1.0

    def __post_init__(self) -> None:
        if int(self.J) != self.J or self.J < 2:
            raise ValueError(f"J must be an integer >= 2, got {self.J!r}")
        object.__setattr__(self, "mode", GridMode(self.mode))
        if not (self.half_width > 0.0 and math.isfinite(self.half_width)):
            raise ValueError(f"half_width must be positive, got {self.half_width!r}")
        if self.mode is GridMode.BOUNDED_ABSORBING and self.half_width != 1.0:
            raise ValueError("bounded mode works on the standard domain (-1, 1); use transform_to_standard")

    @classmethod
    def bounded(cls, J: int) -> "Grid1D":
        return cls(J, GridMode.BOUNDED_ABSORBING, 1.0)

    @classmethod
    def truncated(cls, half_width: float, J: int) -> "Grid1D":
        return cls(J, GridMode.TRUNCATED_INFINITE, float(half_width))

    @property
    def h(self) -> float:
        return self.half_width / self.J

    @property
    def index_span(self) -> int:
        """Largest |j| stored."""
        return 2 * self.J if self.mode is GridMode.BOUNDED_ABSORBING else self.J

    @property
    def n_nodes(self) -> int:
        return 2 * self.index_span + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.index_span, self.index_span + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.indices * self.h

    @property
    def evolved(self) -> slice:
        """Array slice of the nodes whose values are time-stepped."""
        n = self.index_span
        if self.mode is GridMode.BOUNDED_ABSORBING:
            return slice(n - self.J + 1, n + self.J)
        return slice(0, self.n_nodes)

    @property
    def support(self) -> slice:
        """Nodes ``|j| <= J`` that can carry (or bound) the density."""
        n = self.index_span
        return slice(n - self.J, n + self.J + 1)


@dataclass(frozen=True, eq=False)
class DensityField:
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


def _values(P) -> np.ndarray:
    return P.values if isinstance(P, DensityField) else np.asarray(P, dtype=float)


@dataclass(frozen=True)
class DriftSpec:
    """Polynomial drift ``f(x) = sum_k c_k x^k`` (ascending coefficients)."""

    coefficients: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.coefficients) or (0.0,)
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("drift coefficients must be finite")
        # Trailing zeros carry no information and would break equality/hash.
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def zero(cls) -> "DriftSpec":
        return cls((0.0,))

    @classmethod
    def bistable(cls) -> "DriftSpec":
        """``f(x) = x - x^3``, the gradient of the double-well potential."""
        return cls((0.0, 1.0, 0.0, -1.0))

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.coefficients)

    def __call__(self, x):
        return npoly.polyval(x, self.coefficients)


@dataclass(frozen=True)
class DomainTransform:
    """Affine map between the physical interval (a, b) and (-1, 1)."""

    a: float = -1.0
    b: float = 1.0

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def scale(self) -> float:
        return 0.5 * (self.b - self.a)

    def to_physical(self, x_std):
        return self.center + self.scale * np.asarray(x_std, dtype=float)

    def to_standard(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.scale


def transform_to_standard(
    a: float, b: float, params: TemperedStableParams, drift: DriftSpec
) -> tuple[TemperedStableParams, DriftSpec, DomainTransform]:
    """Rewrite the problem on (a, b) as an equivalent one on (-1, 1).

    Returns the rescaled jump parameters (``lam * s``, ``c_alpha * s^-alpha``
    with ``s = (b - a)/2``), the drift ``f(c + s x) / s`` and the transform.
    Densities are carried over pointwise: ``u(x_std) = p(x)``.
    """
    if not a < b:
        raise ValueError(f"domain requires a < b, got ({a!r}, {b!r})")
    tr = DomainTransform(float(a), float(b))
    s, c = tr.scale, tr.center
    new_params = TemperedStableParams(params.alpha, params.lam * s, params.c_alpha * s ** (-params.alpha))
    if s == 1.0 and c == 0.0:
        return new_params, drift, tr
    composed = np.zeros(1)
    for coeff in reversed(drift.coefficients):  # Horner in the polynomial ring
        composed = npoly.polyadd(npoly.polymul(composed, [c, s]), [coeff])
    new_drift = DriftSpec(tuple(np.atleast_1d(composed) / s))
    return new_params, new_drift, tr


class FluxSplit(NamedTuple):
    plus: np.ndarray
    minus: np.ndarray
    max_speed: float


def _max_speed(drift: DriftSpec, grid: Grid1D) -> float:
    if drift.is_zero:
        return 0.0
    return float(np.max(np.abs(drift(grid.nodes[grid.support]))))


def flux_split(drift: DriftSpec, grid: Grid1D, P) -> FluxSplit:
    """Global Lax-Friedrichs splitting ``(fP)^+- = (fP +- M P)/2``.

    ``M`` is the largest ``|f|`` over the nodes that can carry density.
    """
    values = _values(P)
    M = _max_speed(drift, grid)
    fP = drift(grid.nodes) * values
    return FluxSplit(0.5 * (fP + M * values), 0.5 * (fP - M * values), M)


def max_stable_dt(params: TemperedStableParams, h: float) -> float:
    """Largest drift-free explicit Euler step for which the bounded scheme
    obeys the discrete maximum principle:
    ``h^alpha / (2 c_alpha (1 + 1/alpha - zeta(alpha - 1)))``.
    """
    if not h > 0.0:
        raise ValueError(f"h must be positive, got {h!r}")
    a = params.alpha
    if params.c_alpha == 0.0:
        return math.inf
    return h**a / (2.0 * params.c_alpha * (1.0 + 1.0 / a - riemann_zeta(a - 1.0)))


def advective_dt(drift: DriftSpec, grid: Grid1D) -> float:
    """CFL limit ``h / (2 M)`` for the upwinded split fluxes."""
    M = _max_speed(drift, grid)
    return math.inf if M == 0.0 else grid.h / (2.0 * M)


def auto_dt(params: TemperedStableParams, grid: Grid1D, drift: DriftSpec, safety_factor: float = 0.9) -> float:
    if not 0.0 < safety_factor <= 1.0:
        raise ValueError(f"safety_factor must lie in (0, 1], got {safety_factor!r}")
    bound = min(max_stable_dt(params, grid.h), advective_dt(drift, grid))
    if not math.isfinite(bound):
        raise ValueError("no stability bound applies (no jumps and no drift); give dt explicitly")
    return safety_factor * bound


@dataclass(frozen=True)
class SolverConfig:
    params: TemperedStableParams
    grid: Grid1D
    drift: DriftSpec = field(default_factory=DriftSpec.zero)
    dt: float = 0.0
    t_final: float = 1.0
    safety_factor: float = 0.9
    transform: DomainTransform | None = None

    def __post_init__(self) -> None:
        if self.dt < 0.0 or not math.isfinite(self.dt):
            raise ValueError(f"dt must be non-negative, got {self.dt!r}")
        if self.t_final < 0.0:
            raise ValueError(f"t_final must be non-negative, got {self.t_final!r}")

    @classmethod
    def auto(
        cls,
        params: TemperedStableParams,
        grid: Grid1D,
        drift: DriftSpec | None = None,
        t_final: float = 1.0,
        safety_factor: float = 0.9,
        transform: DomainTransform | None = None,
    ) -> "SolverConfig":
        """Config with ``dt = safety_factor * min(max-principle bound, CFL bound)``."""
        drift = drift or DriftSpec.zero()
        dt = auto_dt(params, grid, drift, safety_factor)
        return cls(params, grid, drift, dt, t_final, safety_factor, transform)

    def with_dt(self, dt: float) -> "SolverConfig":
        return replace(self, dt=dt)

    @property
    def physical_nodes(self) -> np.ndarray:
        nodes = self.grid.nodes
        return nodes if self.transform is None else self.transform.to_physical(nodes)

    @property
    def stability_bound(self) -> float:
        """``min(max_stable_dt, advective_dt)``; ``inf`` when neither applies."""
        return min(max_stable_dt(self.params, self.grid.h), advective_dt(self.drift, self.grid))

    def stability_report(self) -> dict[str, float]:
        mp = max_stable_dt(self.params, self.grid.h)
        adv = advective_dt(self.drift, self.grid)
        bound = min(mp, adv)
        return {
            "max_principle_dt": mp,
            "advective_dt": adv,
            "dt": self.dt,
            "dt_over_bound": self.dt / bound if math.isfinite(bound) else 0.0,
        }


@dataclass(frozen=True, eq=False)
class FPEOperator:
    """Dense semi-discrete operator on the evolved nodes of ``grid``."""

    grid: Grid1D
    matrix: np.ndarray
    max_speed: float
    diffusion_coefficient: float
    killing_rate: np.ndarray | None
    jump_kernel: np.ndarray
    drift_values: np.ndarray | None  # f on every stored node plus one ghost per side

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Full-length ``dP/dt`` (zero on nodes that are not evolved).

        ``values`` may carry extra trailing dimensions (a batch of fields).
        """
        out = np.zeros_like(values, dtype=float)
        ev = self.grid.evolved
        out[ev] = self.matrix @ values[ev]
        return out

    def evaluate(self, values: np.ndarray) -> np.ndarray:
        """Same as :meth:`apply`, summed term by term over differences ``P_m - P_j``."""
        g = self.grid
        ev = g.evolved
        # Zero outside the evolved nodes (absorbing mode) and one ghost node per side.
        u = np.zeros((g.n_nodes + 2,) + np.shape(values)[1:])
        u[1:-1][ev] = np.asarray(values, dtype=float)[ev]
        rows = np.arange(g.n_nodes)[ev] + 1
        cols = np.arange(g.support.start, g.support.stop) + 1
        P = u[rows]
        du = np.einsum("jm,jm...->j...", self.jump_kernel, u[cols][None, ...] - P[:, None, ...])
        du += self.diffusion_coefficient / g.h**2 * ((u[rows + 1] - P) - (P - u[rows - 1]))
        if self.killing_rate is not None:
            du -= _expand(self.killing_rate, P) * P
        if self.drift_values is not None:
            f = _expand(self.drift_values, u)
            plus = 0.5 * (f + self.max_speed) * u
            minus = 0.5 * (f - self.max_speed) * u
            du -= (plus[rows] - plus[rows - 1] + minus[rows + 1] - minus[rows]) / g.h
        out = np.zeros(np.shape(values))
        out[ev] = du
        return out


def _expand(column: np.ndarray, like: np.ndarray) -> np.ndarray:
    return column.reshape(column.shape + (1,) * (like.ndim - 1))


def _jump_weights(params: TemperedStableParams, h: float, kmax: int) -> np.ndarray:
    """``w[k] = c_alpha h / (e^{lam |x_k|} |x_k|^{1+alpha})``, ``w[0] = 0``."""
    k = np.arange(kmax + 1, dtype=float)
    w = np.zeros(kmax + 1)
    xk = k[1:] * h
    w[1:] = params.c_alpha * h * np.exp(-params.lam * xk) * xk ** (-1.0 - params.alpha)
    return w


@functools.lru_cache(maxsize=16)
def build_operator(params: TemperedStableParams, grid: Grid1D, drift: DriftSpec) -> FPEOperator:
    J = grid.J
    h = grid.h
    bounded = grid.mode is GridMode.BOUNDED_ABSORBING

    # Jump sum over m = -J..J, endpoints halved, m = j skipped.
    rows = np.arange(-J + 1, J) if bounded else np.arange(-J, J + 1)
    cols = np.arange(-J, J + 1)
    w = _jump_weights(params, h, 2 * J)
    K = w[np.abs(cols[None, :] - rows[:, None])]
    K[:, 0] *= 0.5
    K[:, -1] *= 0.5
    row_sum = K.sum(axis=1)
    kernel = K.copy()
    kernel.setflags(write=False)
    if bounded:
        K = np.ascontiguousarray(K[:, 1:-1])  # boundary nodes carry p = 0
    A = K
    A[np.diag_indices_from(A)] -= row_sum

    # Second-difference correction for the punched hole; C_h > 0 since zeta(alpha-1) < 0.
    c_h = -params.c_alpha * riemann_zeta(params.alpha - 1.0) * h ** (2.0 - params.alpha)
    d = c_h / h**2
    n = A.shape[0]
    idx = np.arange(n)
    A[idx, idx] -= 2.0 * d
    A[idx[:-1], idx[:-1] + 1] += d
    A[idx[1:], idx[1:] - 1] += d

    killing = None
    if bounded:
        x = rows * h
        killing = params.c_alpha * np.array(
            [
                tempered_tail_weight(params.alpha, params.lam, 1.0 + xj)
                + tempered_tail_weight(params.alpha, params.lam, 1.0 - xj)
                for xj in x
            ]
        )
        A[idx, idx] -= killing

    M = _max_speed(drift, grid)
    f_rows = None
    if M > 0.0:
        # -[ D^- (fP)^+ + D^+ (fP)^- ] with (fP)^+- = (f +- M) P / 2
        f = drift(rows * h)
        f_rows = drift(np.arange(-grid.index_span - 1, grid.index_span + 2) * h)
        A[idx, idx] -= M / h
        A[idx[1:], idx[1:] - 1] += (f[:-1] + M) / (2.0 * h)
        A[idx[:-1], idx[:-1] + 1] += (M - f[1:]) / (2.0 * h)

    A.setflags(write=False)
    return FPEOperator(grid, A, M, c_h, killing, kernel, f_rows)


def _operator(cfg: SolverConfig) -> FPEOperator:
    return build_operator(cfg.params, cfg.grid, cfg.drift)


def rhs(cfg: SolverConfig, P) -> np.ndarray:
    """Semi-discrete right-hand side for whichever mode ``cfg.grid`` uses."""
    values = _values(P)
    if values.shape[0] != cfg.grid.n_nodes:
        raise ValueError(f"field has {values.shape[0]} nodes, grid has {cfg.grid.n_nodes}")
    return _operator(cfg).evaluate(values)


def rhs_bounded(cfg: SolverConfig, P) -> np.ndarray:
    if cfg.grid.mode is not GridMode.BOUNDED_ABSORBING:
        raise ValueError("rhs_bounded needs a bounded (absorbing) grid")
    return rhs(cfg, P)


def rhs_unbounded(cfg: SolverConfig, P) -> np.ndarray:
    if cfg.grid.mode is not GridMode.TRUNCATED_INFINITE:
        raise ValueError("rhs_unbounded needs a truncated-infinite grid")
    return rhs(cfg, P)


def step_euler(cfg: SolverConfig, P, dt: float | None = None) -> DensityField:
    """One explicit Euler step ``P + dt * rhs(P)``; exterior nodes stay zero."""
    dt = cfg.dt if dt is None else dt
    values = _values(P)
    t0 = P.time if isinstance(P, DensityField) else 0.0
    op = _operator(cfg)
    ev = cfg.grid.evolved
    new = np.zeros_like(values)
    new[ev] = values[ev] + dt * (op.matrix @ values[ev])
    if not np.all(np.isfinite(new)):
        raise InstabilityError("non-finite density after Euler step", dt, cfg.stability_bound)
    return DensityField(new, t0 + dt)


def solve(cfg: SolverConfig, P0, snapshot_times: Sequence[float] | None = None) -> list[DensityField]:
    """March ``P0`` to each of ``snapshot_times`` (default ``[t_final]``).

    The step before each snapshot is shortened to land on it exactly.
    """
    if snapshot_times is None:
        snapshot_times = [cfg.t_final]
    times = [float(t) for t in snapshot_times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("snapshot_times must be sorted")
    t0 = P0.time if isinstance(P0, DensityField) else 0.0
    if times and (times[0] < t0 or times[-1] > t0 + cfg.t_final * (1 + 1e-12)):
        raise ValueError("snapshot_times must lie within [t0, t0 + t_final]")

    values = np.array(_values(P0), dtype=float)
    ev = cfg.grid.evolved
    u = values[ev].copy()
    if times and times[-1] > t0 and cfg.dt <= 0.0:
        raise ValueError("dt must be positive to advance in time")
    A = _operator(cfg).matrix if (times and times[-1] > t0) else None
    bound = cfg.stability_bound
    limit = INSTABILITY_GROWTH * max(float(np.max(np.abs(u))) if u.size else 0.0, 1e-300)
    buf = np.empty_like(u)

    def check(dt: float) -> None:
        if not np.all(np.isfinite(u)):
            raise InstabilityError("non-finite density", dt, bound)
        if np.max(np.abs(u)) > limit:
            raise InstabilityError(f"density grew beyond {INSTABILITY_GROWTH:g} x its initial maximum", dt, bound)

    def advance(dt: float) -> None:
        np.dot(A, u, out=buf)
        np.multiply(buf, dt, out=buf)
        np.add(u, buf, out=u)

    out: list[DensityField] = []
    t = t0
    for target in times:
        remaining = target - t
        if remaining > 0.0:
            n_full = int(math.floor(remaining / cfg.dt * (1.0 + 1e-12)))
            for n in range(n_full):
                advance(cfg.dt)
                if (n + 1) % _CHECK_EVERY == 0:
                    check(cfg.dt)
            last = remaining - n_full * cfg.dt
            if last > 1e-9 * cfg.dt:
                advance(last)
            check(cfg.dt)
            t = target
        snap = np.zeros_like(values)
        snap[ev] = u
        out.append(DensityField(snap, t))
    return out


def total_mass(grid: Grid1D, P) -> float:
    """Trapezoidal ``h * sum'' P_j`` over the stored nodes."""
    v = _values(P)
    if v.size == 0:
        return 0.0
    return float(grid.h * (np.sum(v, axis=0) - 0.5 * (v[0] + v[-1])))


def gaussian_initial(
    grid: Grid1D,
    sharpness: float = 40.0,
    center: float = 0.0,
    transform: DomainTransform | None = None,
) -> DensityField:
    """``sqrt(a/pi) exp(-a (x - b)^2)`` sampled at the physical node positions.

    In bounded mode the density is zeroed on and outside the boundary.
    """
    x = grid.nodes if transform is None else transform.to_physical(grid.nodes)
    values = math.sqrt(sharpness / math.pi) * np.exp(-sharpness * (x - center) ** 2)
    if grid.mode is GridMode.BOUNDED_ABSORBING:
        mask = np.zeros(grid.n_nodes, dtype=bool)
        mask[grid.evolved] = True
        values = np.where(mask, values, 0.0)
    return DensityField(values, 0.0)
