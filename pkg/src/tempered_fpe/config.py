"""Experiment configuration: flat ``key = value`` files plus flag overrides.

Grammar: one ``key = value`` per line, keys in any order, ``#`` starts a
comment, blank lines are ignored. Dashes and underscores in keys are
interchangeable. List values are comma separated.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .levy import default_c_alpha
from .solver import DriftSpec

__all__ = ["ConfigError", "ExperimentConfig", "parse_config_text", "load_config", "COMMANDS"]

COMMANDS = ("fpe", "mc", "compare", "zakai", "signal")
_GAUSSIAN = re.compile(r"^gaussian\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)$")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in re.split(r"[,\s]+", text.strip()) if tok]


@dataclass
class ExperimentConfig:
    command: str = "fpe"
    alpha: list[float] = field(default_factory=lambda: [1.5])
    lam: list[float] = field(default_factory=lambda: [0.01])
    c_alpha: float | None = None
    drift: str = "zero"
    domain: tuple[float, float] | None = None
    half_width: float | None = None
    grid: int = 400
    dt: float | None = None
    safety_factor: float = 0.9
    t_final: float = 1.0
    snapshots: list[float] | None = None
    initial: str = "gaussian(40, 0)"
    seed: int = 0
    paths: int = 10_000
    epsilon: float | None = None
    mc_dt: float = 0.01
    x0: float = 0.0
    y0: float = 0.0
    observation: str = "cos"
    observations: str | None = None
    out: str = "out"

    # -- parsing -----------------------------------------------------------
    _KEYS = {
        "command": "command",
        "alpha": "alpha",
        "lambda": "lam",
        "lam": "lam",
        "c_alpha": "c_alpha",
        "drift": "drift",
        "domain": "domain",
        "half_width": "half_width",
        "grid": "grid",
        "j": "grid",
        "dt": "dt",
        "safety_factor": "safety_factor",
        "t_final": "t_final",
        "snapshots": "snapshots",
        "initial": "initial",
        "seed": "seed",
        "paths": "paths",
        "n_paths": "paths",
        "epsilon": "epsilon",
        "mc_dt": "mc_dt",
        "x0": "x0",
        "y0": "y0",
        "observation": "observation",
        "observations": "observations",
        "out": "out",
    }

    @classmethod
    def canonical_key(cls, key: str) -> str | None:
        return cls._KEYS.get(key.strip().lower().replace("-", "_"))

    def set(self, key: str, raw: Any, problems: list[str]) -> None:
        name = self.canonical_key(key)
        if name is None:
            problems.append(f"unknown key {key!r}")
            return
        try:
            setattr(self, name, self._convert(name, raw))
        except (TypeError, ValueError) as exc:
            problems.append(f"{key}: cannot parse {raw!r} ({exc})")

    @staticmethod
    def _convert(name: str, raw: Any) -> Any:
        if raw is None:
            return None
        text = raw if isinstance(raw, str) else None
        if name in ("alpha", "lam"):
            return _floats(text) if text is not None else [float(v) for v in raw]
        if name == "snapshots":
            return _floats(text) if text is not None else [float(v) for v in raw]
        if name == "domain":
            vals = _floats(text) if text is not None else [float(v) for v in raw]
            if len(vals) != 2:
                raise ValueError("domain needs two numbers a b")
            return (vals[0], vals[1])
        if name in ("grid", "paths"):
            val = float(raw)
            if val != int(val):
                raise ValueError("expected an integer")
            return int(val)
        if name == "seed":
            return int(str(raw).strip(), 0)
        if name in ("c_alpha", "half_width", "dt", "safety_factor", "t_final", "epsilon", "mc_dt", "x0", "y0"):
            if isinstance(raw, str) and raw.strip().lower() in ("", "auto", "none"):
                return None
            return float(raw)
        return str(raw).strip()

    # -- validation --------------------------------------------------------
    def validate(self) -> None:
        p: list[str] = []
        if self.command not in COMMANDS:
            p.append(f"command must be one of {', '.join(COMMANDS)}, got {self.command!r}")
        for a in self.alpha:
            if not (0.0 < a < 2.0) or a == 1.0:
                p.append(f"alpha must lie in (0,1)∪(1,2), got {a!r}")
        if not self.alpha:
            p.append("alpha: at least one value required")
        for lam in self.lam:
            if not lam > 0.0:
                p.append(f"lambda must be positive, got {lam!r}")
        if not self.lam:
            p.append("lambda: at least one value required")
        if self.c_alpha is not None and not self.c_alpha > 0.0:
            p.append(f"c_alpha must be positive, got {self.c_alpha!r}")
        try:
            self.drift_spec()
        except ValueError as exc:
            p.append(f"drift: {exc}")
        if self.domain is not None and self.half_width is not None:
            p.append("give either domain or half_width, not both")
        if self.domain is None and self.half_width is None and self.command != "signal":
            p.append("one of domain (bounded, absorbing) or half_width (truncated) is required")
        if self.domain is not None and not self.domain[0] < self.domain[1]:
            p.append(f"domain requires a < b, got {self.domain!r}")
        if self.half_width is not None and not self.half_width > 0.0:
            p.append(f"half_width must be positive, got {self.half_width!r}")
        if self.grid < 2:
            p.append(f"grid J must be >= 2, got {self.grid!r}")
        if self.dt is not None and not self.dt > 0.0:
            p.append(f"dt must be positive, got {self.dt!r}")
        if not 0.0 < self.safety_factor <= 1.0:
            p.append(f"safety_factor must lie in (0, 1], got {self.safety_factor!r}")
        if not self.t_final > 0.0:
            p.append(f"t_final must be positive, got {self.t_final!r}")
        for t in self.snapshot_times():
            if not 0.0 <= t <= self.t_final * (1 + 1e-12):
                p.append(f"snapshot {t!r} outside [0, t_final]")
        if self.snapshots and sorted(self.snapshots) != list(self.snapshots):
            p.append("snapshots must be sorted")
        try:
            self.gaussian()
        except ValueError as exc:
            p.append(f"initial: {exc}")
        if self.command in ("mc", "compare", "zakai", "signal"):
            if self.paths < 1:
                p.append(f"paths must be >= 1, got {self.paths!r}")
            if self.epsilon is not None and not 0.0 < self.epsilon < 1.0:
                p.append(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
            if not self.mc_dt > 0.0:
                p.append(f"mc_dt must be positive, got {self.mc_dt!r}")
            if not 0 <= self.seed < 2**64:
                p.append("seed must be a 64-bit unsigned integer")
        if self.command in ("mc", "compare", "zakai", "signal") and (len(self.alpha) > 1 or len(self.lam) > 1):
            p.append(f"{self.command} takes a single alpha and lambda")
        if self.command in ("zakai", "signal"):
            try:
                self.observation_coefficients()
            except ValueError as exc:
                p.append(f"observation: {exc}")
        if self.observations is not None and not Path(self.observations).is_file():
            p.append(f"observations file not found: {self.observations}")
        if p:
            raise ConfigError(p)

    # -- derived -----------------------------------------------------------
    def drift_spec(self) -> DriftSpec:
        name = self.drift.strip().lower()
        if name == "zero":
            return DriftSpec.zero()
        if name == "bistable":
            return DriftSpec.bistable()
        try:
            return DriftSpec(tuple(_floats(self.drift)))
        except ValueError:
            raise ValueError(f"expected 'zero', 'bistable' or coefficients, got {self.drift!r}") from None

    def gaussian(self) -> tuple[float, float]:
        m = _GAUSSIAN.match(self.initial.strip())
        if not m:
            raise ValueError(f"expected gaussian(a, b), got {self.initial!r}")
        a, b = float(m.group(1)), float(m.group(2))
        if not a > 0.0:
            raise ValueError("gaussian sharpness a must be positive")
        return a, b

    def observation_coefficients(self) -> tuple[float, ...] | None:
        """``None`` for cosine, otherwise the polynomial coefficients."""
        text = self.observation.strip().lower()
        if text in ("cos", "cosine"):
            return None
        if text.startswith("poly:"):
            return tuple(_floats(text[5:]))
        raise ValueError(f"expected 'cos' or 'poly:c0,c1,...', got {self.observation!r}")

    def snapshot_times(self) -> list[float]:
        return list(self.snapshots) if self.snapshots else [self.t_final]

    def c_alpha_for(self, alpha: float) -> float:
        return self.c_alpha if self.c_alpha is not None else default_c_alpha(alpha)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        if d["domain"] is not None:
            d["domain"] = list(d["domain"])
        return d


def parse_config_text(text: str, cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = cfg or ExperimentConfig()
    problems: list[str] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = line.split("=", 1)
        cfg.set(key, value.strip(), problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path: str | Path, cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from None
    return parse_config_text(text, cfg)

