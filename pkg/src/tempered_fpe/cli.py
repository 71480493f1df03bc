"""``tempered-fpe`` command line front end.

Every command writes into ``--out``: density CSVs (``x,p``), ``meta.json``
with the resolved configuration and run diagnostics, and ``path.csv`` for
the path commands.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import COMMANDS, ConfigError, ExperimentConfig, load_config, parse_config_text
from .levy import TemperedStableParams
from .montecarlo import McConfig, empirical_density, l1_distance, simulate_paths, worker_count
from .solver import (
    INSTABILITY_GROWTH,
    DensityField,
    Grid1D,
    InstabilityError,
    SolverConfig,
    auto_dt,
    gaussian_initial,
    solve,
    total_mass,
    transform_to_standard,
)
from .zakai import (
    DegenerateMassError,
    ObservationModel,
    read_observation_csv,
    run_filter,
    simulate_signal_observation,
    write_observation_csv,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INSTABILITY = 3
EXIT_DEGENERATE = 4


# -- output helpers --------------------------------------------------------


def _num(x: float) -> str:
    return f"{x:g}"


def write_density_csv(path: Path, x: np.ndarray, p: np.ndarray) -> None:
    lines = ["x,p"]
    lines += [f"{xi:.17g},{pi:.17g}" for xi, pi in zip(x.tolist(), p.tolist())]
    path.write_text("\n".join(lines) + "\n")


def _json_safe(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# -- problem assembly ------------------------------------------------------


class Problem:
    """Solver setup for one ``(alpha, lambda)`` pair of an experiment."""

    def __init__(self, cfg: ExperimentConfig, alpha: float, lam: float):
        self.physical_params = TemperedStableParams(alpha, lam, cfg.c_alpha_for(alpha))
        self.physical_drift = cfg.drift_spec()
        sharp, center = cfg.gaussian()
        self.gaussian = (sharp, center)
        if cfg.domain is not None:
            a, b = cfg.domain
            params, drift, tr = transform_to_standard(a, b, self.physical_params, self.physical_drift)
            grid = Grid1D.bounded(cfg.grid)
            self.offset, self.half_width = tr.center, tr.scale
        else:
            params, drift, tr = self.physical_params, self.physical_drift, None
            grid = Grid1D.truncated(cfg.half_width, cfg.grid)
            self.offset, self.half_width = 0.0, cfg.half_width
        dt = cfg.dt if cfg.dt is not None else auto_dt(params, grid, drift, cfg.safety_factor)
        self.solver = SolverConfig(params, grid, drift, dt, cfg.t_final, cfg.safety_factor, tr)
        self.initial = gaussian_initial(grid, sharp, center, tr)
        # Physical grid on the support |j| <= J, used for output and histograms.
        self.physical_grid = Grid1D.truncated(self.half_width, cfg.grid)
        self.h_physical = self.physical_grid.h

    @property
    def x(self) -> np.ndarray:
        return self.physical_grid.nodes + self.offset

    def physical_values(self, P: DensityField) -> np.ndarray:
        return P.values[self.solver.grid.support]

    def mass(self, P: DensityField) -> float:
        return total_mass(self.physical_grid, self.physical_values(P))

    def diagnostics(self) -> dict[str, Any]:
        s = self.solver
        return {
            "alpha": s.params.alpha,
            "lambda": self.physical_params.lam,
            "c_alpha": self.physical_params.c_alpha,
            "mode": s.grid.mode.value,
            "h": self.h_physical,
            "h_solver": s.grid.h,
            "stability": s.stability_report(),
            "instability_threshold": INSTABILITY_GROWTH,
        }

    def mc_config(self, cfg: ExperimentConfig, t_final: float) -> McConfig:
        sharp, center = self.gaussian
        eps = cfg.epsilon if cfg.epsilon is not None else 0.5 * self.h_physical
        absorb = tuple(cfg.domain) if cfg.domain is not None else None
        return McConfig(
            params=self.physical_params,
            drift=self.physical_drift,
            n_paths=cfg.paths,
            dt=cfg.mc_dt,
            t_final=t_final,
            eps=eps,
            seed=cfg.seed,
            x0=center,
            x0_std=math.sqrt(1.0 / (2.0 * sharp)),
            absorb=absorb,
        )


# -- commands --------------------------------------------------------------


def run_fpe(cfg: ExperimentConfig, out: Path) -> dict[str, Any]:
    runs = []
    for alpha in cfg.alpha:
        for lam in cfg.lam:
            prob = Problem(cfg, alpha, lam)
            snaps = solve(prob.solver, prob.initial, cfg.snapshot_times())
            info = prob.diagnostics()
            info["mass"] = []
            info["files"] = []
            for snap in snaps:
                name = f"density_a{_num(alpha)}_l{_num(lam)}_t{_num(snap.time)}.csv"
                write_density_csv(out / name, prob.x, prob.physical_values(snap))
                info["mass"].append({"t": snap.time, "mass": prob.mass(snap)})
                info["files"].append(name)
            runs.append(info)
    return {"runs": runs}


def _mc_at(cfg: ExperimentConfig, prob: Problem, t: float):
    mc = prob.mc_config(cfg, t)
    ens = simulate_paths(mc)
    field, escaped = empirical_density(ens.positions - prob.offset, prob.physical_grid, ens.n_paths)
    info = {
        "t": t,
        "epsilon": mc.eps,
        "mc_dt": mc.dt,
        "n_paths": ens.n_paths,
        "n_absorbed": ens.n_absorbed,
        "n_nonfinite": ens.n_nonfinite,
        "escaped_fraction": escaped,
        "mass": total_mass(prob.physical_grid, field),
    }
    return field, info


def run_mc(cfg: ExperimentConfig, out: Path) -> dict[str, Any]:
    prob = Problem(cfg, cfg.alpha[0], cfg.lam[0])
    snaps = []
    for t in cfg.snapshot_times():
        field, info = _mc_at(cfg, prob, t)
        name = f"density_mc_t{_num(t)}.csv"
        write_density_csv(out / name, prob.x, field.values)
        info["file"] = name
        snaps.append(info)
    return {"c_alpha": prob.physical_params.c_alpha, "seed": cfg.seed, "snapshots": snaps}


def run_compare(cfg: ExperimentConfig, out: Path) -> dict[str, Any]:
    prob = Problem(cfg, cfg.alpha[0], cfg.lam[0])
    fd_snaps = solve(prob.solver, prob.initial, cfg.snapshot_times())
    info = prob.diagnostics()
    info["snapshots"] = []
    for snap in fd_snaps:
        fd = prob.physical_values(snap)
        mc_field, mc_info = _mc_at(cfg, prob, snap.time)
        fd_name = f"density_fd_t{_num(snap.time)}.csv"
        mc_name = f"density_mc_t{_num(snap.time)}.csv"
        write_density_csv(out / fd_name, prob.x, fd)
        write_density_csv(out / mc_name, prob.x, mc_field.values)
        dist = l1_distance(prob.physical_grid, fd, mc_field)
        mc_info.update({"fd_mass": prob.mass(snap), "l1_distance": dist, "files": [fd_name, mc_name]})
        info["snapshots"].append(mc_info)
        print(f"t={_num(snap.time)} L1(FD, MC)={dist:.6g}")
    return info


def _observation_model(cfg: ExperimentConfig) -> ObservationModel:
    coeffs = cfg.observation_coefficients()
    return ObservationModel.cosine() if coeffs is None else ObservationModel.polynomial(coeffs)


def run_signal(cfg: ExperimentConfig, out: Path) -> dict[str, Any]:
    alpha, lam = cfg.alpha[0], cfg.lam[0]
    params = TemperedStableParams(alpha, lam, cfg.c_alpha_for(alpha))
    dt = cfg.dt if cfg.dt is not None else cfg.mc_dt
    eps = cfg.epsilon if cfg.epsilon is not None else 0.01
    path = simulate_signal_observation(
        cfg.drift_spec(), params, _observation_model(cfg), cfg.x0, cfg.y0, dt, cfg.t_final, cfg.seed, eps
    )
    write_observation_csv(path, out / "path.csv")
    return {"c_alpha": params.c_alpha, "dt": dt, "epsilon": eps, "n_steps": int(path.increments.size)}


def run_zakai(cfg: ExperimentConfig, out: Path) -> dict[str, Any]:
    prob = Problem(cfg, cfg.alpha[0], cfg.lam[0])
    if cfg.dt is None:
        # One observation per solver step; round the step down so it divides t_final.
        steps = math.ceil(cfg.t_final / prob.solver.dt * (1.0 - 1e-12))
        prob.solver = prob.solver.with_dt(cfg.t_final / steps)
    obs = _observation_model(cfg)
    dt = prob.solver.dt
    if cfg.observations is not None:
        path = read_observation_csv(cfg.observations)
        if not math.isclose(path.step, dt, rel_tol=1e-9):
            raise ConfigError([f"observation step {path.step:g} must equal the solver dt {dt:g}; set dt accordingly"])
        source = cfg.observations
    else:
        eps = cfg.epsilon if cfg.epsilon is not None else 0.5 * prob.h_physical
        path = simulate_signal_observation(
            prob.physical_drift, prob.physical_params, obs, cfg.x0, cfg.y0, dt, cfg.t_final, cfg.seed, eps
        )
        source = "simulated"
    write_observation_csv(path, out / "path.csv")
    result = run_filter(prob.solver, obs, prob.initial, path, cfg.snapshot_times())
    info = prob.diagnostics()
    info["observations"] = source
    info["snapshots"] = []
    for un, post, norm in zip(result.unnormalized, result.posterior, result.normalization):
        names = [f"density_unnormalized_t{_num(un.time)}.csv", f"density_posterior_t{_num(un.time)}.csv"]
        write_density_csv(out / names[0], prob.x, prob.physical_values(un))
        write_density_csv(out / names[1], prob.x, prob.physical_values(post))
        info["snapshots"].append(
            {"t": un.time, "normalization": norm, "posterior_mass": prob.mass(post), "files": names}
        )
    return info


RUNNERS = {"fpe": run_fpe, "mc": run_mc, "compare": run_compare, "zakai": run_zakai, "signal": run_signal}


def execute(cfg: ExperimentConfig) -> dict[str, Any]:
    """Validate, run and write ``meta.json``; returns the meta dictionary."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    with threadpool_limits(limits=worker_count()):
        details = RUNNERS[cfg.command](cfg, out)
    meta = {
        "version": __version__,
        "command": cfg.command,
        "config": cfg.to_dict(),
        "c_alpha": {_num(a): cfg.c_alpha_for(a) for a in cfg.alpha},
        "results": details,
        "wall_clock_seconds": time.perf_counter() - start,
    }
    (out / "meta.json").write_text(json.dumps(_json_safe(meta), indent=2, sort_keys=True) + "\n")
    return meta


# -- argument parsing ------------------------------------------------------


def recipe_names() -> list[str]:
    root = resources.files("tempered_fpe") / "recipes"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def recipe_text(name: str) -> str:
    path = resources.files("tempered_fpe") / "recipes" / f"{name}.cfg"
    if not path.is_file():
        raise ConfigError([f"unknown recipe {name!r}; available: {', '.join(recipe_names())}"])
    return path.read_text()


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--alpha", help="stability index (comma list sweeps for fpe)")
    p.add_argument("--lambda", dest="lam", help="tempering rate (comma list sweeps for fpe)")
    p.add_argument("--c-alpha", dest="c_alpha", help="jump measure normalization (default: symmetric stable)")
    p.add_argument("--drift", help="'zero', 'bistable' or ascending coefficients c0,c1,...")
    p.add_argument("--domain", nargs=2, metavar=("A", "B"), help="absorbing interval (a, b)")
    p.add_argument("--half-width", dest="half_width", help="truncated whole-line domain [-L, L]")
    p.add_argument("--grid", help="J, grid half-span")
    p.add_argument("--dt", help="time step (default: safety_factor x stability bound)")
    p.add_argument("--safety-factor", dest="safety_factor")
    p.add_argument("--t-final", dest="t_final")
    p.add_argument("--snapshots", help="comma-separated output times")
    p.add_argument("--initial", help="gaussian(a, b)")
    p.add_argument("--seed")
    p.add_argument("--paths")
    p.add_argument("--epsilon", help="small-jump cutoff for Monte Carlo (default h/2)")
    p.add_argument("--mc-dt", dest="mc_dt")
    p.add_argument("--x0")
    p.add_argument("--y0")
    p.add_argument("--observation", help="'cos' or 'poly:c0,c1,...'")
    p.add_argument("--observations", help="CSV with columns t,dY to filter instead of simulating")
    p.add_argument("--out", help="output directory")


_FLAG_KEYS = (
    "alpha", "lam", "c_alpha", "drift", "domain", "half_width", "grid", "dt", "safety_factor", "t_final",
    "snapshots", "initial", "seed", "paths", "epsilon", "mc_dt", "x0", "y0", "observation", "observations", "out",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tempered-fpe",
        description="Nonlocal Fokker-Planck solver for SDEs with tempered stable noise.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="action", required=True)
    for name in COMMANDS:
        _add_experiment_flags(sub.add_parser(name, help=f"run the {name} pipeline"))
    run = sub.add_parser("run", help="run the command named in a config file")
    run.add_argument("config_file")
    _add_experiment_flags(run)
    rec = sub.add_parser("recipe", help="run a bundled figure recipe")
    rec.add_argument("name")
    _add_experiment_flags(rec)
    sub.add_parser("recipes", help="list bundled recipes")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.action == "recipe":
        parse_config_text(recipe_text(args.name), cfg)
    elif args.action == "run":
        load_config(args.config_file, cfg)
    if getattr(args, "config", None):
        load_config(args.config, cfg)
    if args.action in COMMANDS:
        cfg.command = args.action
    problems: list[str] = []
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg.set(key, value if not isinstance(value, list) else " ".join(value), problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.action == "recipes":
        for name in recipe_names():
            print(name)
        return EXIT_OK
    try:
        cfg = resolve_config(args)
        execute(cfg)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"InstabilityError: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except DegenerateMassError as exc:
        print(f"DegenerateMassError: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"wrote {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
