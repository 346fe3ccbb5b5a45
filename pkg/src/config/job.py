"""Job configuration files for the command-line front-end.

A job file is a JSON object naming one command, the model (inline or a path
to a model file) and the command's parameters. Unknown fields are rejected.
"""
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.config import Config
from src.config.settings import Settings
from src.core.errors import ParseError, ValidationError
from src.core.models import InitLaw, ModelSpec

COMMANDS = ("audit", "roots", "phase-diagram", "critical", "critical-curve", "sigma-r", "multiwell-check", "simulate")
FORMATS = ("csv", "json", "both")

_TOP_LEVEL = {
    "command", "model", "output", "format", "threads", "regime", "sigma", "sigma_grid", "theta_grid",
    "bracket", "grid_points", "n_max", "multiwell", "simulation",
}
_SIMULATION = {"n", "dt", "t_burn", "t_sample", "seed", "init", "antithetic"}
_GRID = {"start", "stop", "count", "spacing"}


@dataclass(frozen=True)
class SimulationParams:
    n: int = 4000
    dt: float = 1e-3
    t_burn: float = 10.0
    t_sample: float = 10.0
    seed: int = 0
    init: InitLaw = InitLaw("point", (1.0,))
    antithetic: bool = False

    @property
    def burn_steps(self) -> int:
        return int(round(self.t_burn / self.dt))

    @property
    def sample_steps(self) -> int:
        return int(round(self.t_sample / self.dt))


@dataclass(frozen=True)
class MultiwellParams:
    x1: float
    x2: float


@dataclass(frozen=True)
class JobConfig:
    command: str
    model: ModelSpec
    output: Optional[str] = None
    format: str = "both"
    threads: int = 1
    regime: str = "generic"
    sigma: Optional[float] = None
    sigma_grid: Tuple[float, ...] = ()
    theta_grid: Tuple[float, ...] = ()
    bracket: Tuple[float, float] = (0.5, 2.0)
    grid_points: int = 400
    n_max: int = 12
    multiwell: Optional[MultiwellParams] = None
    simulation: SimulationParams = field(default_factory=SimulationParams)
    source: str = ""

    def with_overrides(self, **overrides: Any) -> "JobConfig":
        """Apply command-line overrides (None values are ignored) and re-validate."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        cfg = replace(self, **changes)
        _validate(cfg)
        return cfg

    def to_dict(self) -> Dict[str, Any]:
        """Fully resolved configuration, including the numerical defaults in force.

        `threads` is left out: results do not depend on it.
        """
        data: Dict[str, Any] = {
            "command": self.command,
            "model": self.model.to_dict(),
            "output": self.output,
            "format": self.format,
            "regime": self.regime,
            "sigma": self.sigma,
            "sigma_grid": list(self.sigma_grid),
            "theta_grid": list(self.theta_grid),
            "bracket": list(self.bracket),
            "grid_points": self.grid_points,
            "n_max": self.n_max,
            "multiwell": asdict(self.multiwell) if self.multiwell else None,
            "simulation": dict(asdict(self.simulation), init=self.simulation.init.to_dict()),
            "numerics": {
                "gl_order": Config.GL_ORDER,
                "quad_rtol": Config.QUAD_RTOL,
                "sigma_floor": Config.SIGMA_FLOOR,
                "sigma_tol": Config.SIGMA_TOL,
                "count_tol": Config.COUNT_TOL,
                "root_dedup": Config.ROOT_DEDUP,
                "root_ftol": Config.ROOT_FTOL,
                "batches": Config.BATCHES,
            },
        }
        return data


def _number(value: Any, name: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(name, "must be a finite number")
    if positive and value <= 0:
        raise ValidationError(name, "must be positive")
    return float(value)


def _integer(value: Any, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(name, "must be an integer")
    if value < minimum:
        raise ValidationError(name, f"must be at least {minimum}")
    return value


def _strict(data: Any, allowed: set, name: str) -> Dict[str, Any]:
    if not isinstance(data, dict):
        raise ValidationError(name, "expected an object")
    unknown = sorted(set(data) - allowed)
    if unknown:
        prefix = f"{name}." if name else ""
        raise ValidationError(f"{prefix}{unknown[0]}", "unknown field")
    return data


def parse_grid(data: Any, name: str, positive: bool = True) -> Tuple[float, ...]:
    """A grid given as an explicit list or as {start, stop, count[, spacing]}."""
    if isinstance(data, dict):
        spec = _strict(data, _GRID, name)
        for key in ("start", "stop", "count"):
            if key not in spec:
                raise ValidationError(f"{name}.{key}", "required field missing")
        start = _number(spec["start"], name)
        stop = _number(spec["stop"], name)
        count = _integer(spec["count"], f"{name}.count", 1)
        spacing = spec.get("spacing", "linear")
        if spacing == "log":
            if start <= 0 or stop <= 0:
                raise ValidationError(name, "log spacing needs positive end points")
            values = np.geomspace(start, stop, count)
        elif spacing == "linear":
            values = np.linspace(start, stop, count)
        else:
            raise ValidationError(f"{name}.spacing", "expected 'linear' or 'log'")
        values = [float(v) for v in values]
    elif isinstance(data, list):
        values = [_number(v, name) for v in data]
    else:
        raise ValidationError(name, "expected a list or {start, stop, count}")

    if positive and any(v <= 0 for v in values):
        raise ValidationError(name, "values must be positive")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValidationError(name, "values must be strictly increasing")
    return tuple(values)


def _bracket(data: Any) -> Tuple[float, float]:
    if not isinstance(data, list) or len(data) != 2:
        raise ValidationError("bracket", "expected [low, high]")
    lo, hi = (_number(v, "bracket", positive=True) for v in data)
    return lo, hi


def _init_law(data: Any) -> InitLaw:
    spec = _strict(data, {"kind", "params"}, "simulation.init")
    if not isinstance(spec.get("params", []), list):
        raise ValidationError("simulation.init.params", "expected a list")
    try:
        return InitLaw(str(spec.get("kind", "point")), tuple(_number(p, "simulation.init.params")
                                                            for p in spec.get("params", [1.0])))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError("simulation.init", str(exc)) from exc


def _simulation(data: Any) -> SimulationParams:
    spec = _strict(data, _SIMULATION, "simulation")
    defaults = SimulationParams()
    params = SimulationParams(
        n=_integer(spec.get("n", defaults.n), "simulation.n", 2),
        dt=_number(spec.get("dt", defaults.dt), "simulation.dt", positive=True),
        t_burn=_number(spec.get("t_burn", defaults.t_burn), "simulation.t_burn", positive=True),
        t_sample=_number(spec.get("t_sample", defaults.t_sample), "simulation.t_sample", positive=True),
        seed=_integer(spec.get("seed", defaults.seed), "simulation.seed", -(1 << 63)),
        init=_init_law(spec["init"]) if "init" in spec else defaults.init,
        antithetic=bool(spec.get("antithetic", defaults.antithetic)),
    )
    if params.sample_steps < Config.BATCHES:
        raise ValidationError("simulation.t_sample", f"needs at least {Config.BATCHES} steps of size dt")
    return params


def _load_model(data: Any, base_dir: str) -> ModelSpec:
    if isinstance(data, str):
        path = data if os.path.isabs(data) else os.path.join(base_dir, data)
        if not os.path.exists(path):
            raise ValidationError("model", f"model file not found: {path}")
        data = _read_json(path)
    return ModelSpec.from_dict(data, "model")


def _read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno, exc.colno) from exc


def _validate(cfg: JobConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ValidationError("command", f"expected one of {', '.join(COMMANDS)}")
    if cfg.format not in FORMATS:
        raise ValidationError("format", f"expected one of {', '.join(FORMATS)}")
    if cfg.threads < 1:
        raise ValidationError("threads", "must be at least 1")
    if cfg.sigma is not None and not cfg.sigma > 0:
        raise ValidationError("sigma", "must be positive")
    needs = {
        "roots": ("sigma", cfg.sigma is not None),
        "simulate": ("sigma", cfg.sigma is not None),
        "phase-diagram": ("sigma_grid", bool(cfg.sigma_grid)),
        "critical-curve": ("theta_grid", bool(cfg.theta_grid)),
    }
    if cfg.command in needs:
        name, present = needs[cfg.command]
        if not present:
            raise ValidationError(name, f"required by command {cfg.command!r}")


def parse_config(path: str, settings: Optional[Settings] = None,
                 overrides: Optional[Dict[str, Any]] = None) -> JobConfig:
    """Read and validate a job file; every default is filled in.

    `settings` supplies the output format and thread count when the file
    leaves them out; non-None `overrides` (command-line flags) win over both.
    """
    settings = settings or Settings()
    from src.audit import REGIMES

    if not os.path.exists(path):
        raise ValidationError("config", f"file not found: {path}")
    data = _strict(_read_json(path), _TOP_LEVEL, "")
    for key in ("command", "model"):
        if key not in data:
            raise ValidationError(key, "required field missing")

    regime = data.get("regime", "generic")
    if regime not in REGIMES:
        raise ValidationError("regime", f"expected one of {', '.join(REGIMES)}")
    multiwell = None
    if "multiwell" in data:
        spec = _strict(data["multiwell"], {"x1", "x2"}, "multiwell")
        if "x1" not in spec or "x2" not in spec:
            raise ValidationError("multiwell", "x1 and x2 are required")
        multiwell = MultiwellParams(_number(spec["x1"], "multiwell.x1", True), _number(spec["x2"], "multiwell.x2", True))
        if not multiwell.x1 < multiwell.x2:
            raise ValidationError("multiwell", "x1 must be below x2")

    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ValidationError("output", "expected a path prefix")

    cfg = JobConfig(
        command=str(data["command"]),
        model=_load_model(data["model"], os.path.dirname(os.path.abspath(path))),
        output=output,
        format=str(data.get("format", settings.output_format)),
        threads=_integer(data.get("threads", settings.threads), "threads", 1),
        regime=regime,
        sigma=_number(data["sigma"], "sigma", positive=True) if "sigma" in data else None,
        sigma_grid=parse_grid(data["sigma_grid"], "sigma_grid") if "sigma_grid" in data else (),
        theta_grid=parse_grid(data["theta_grid"], "theta_grid") if "theta_grid" in data else (),
        bracket=_bracket(data["bracket"]) if "bracket" in data else (0.5, 2.0),
        grid_points=_integer(data.get("grid_points", Config.ROOT_GRID_POINTS), "grid_points", 400),
        n_max=_integer(data.get("n_max", Config.SERIES_N_MAX), "n_max", 1),
        multiwell=multiwell,
        simulation=_simulation(data["simulation"]) if "simulation" in data else SimulationParams(),
        source=os.path.abspath(path),
    )
    return cfg.with_overrides(**(overrides or {}))
