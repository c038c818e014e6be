"""Experiment configuration files.

A configuration is a JSON object with one ``task`` and the blocks that
task needs::

    {
      "task": "schedule",
      "parameterization": {"model": "short_range", "n": 30, "opt_count": "all"},
      "arrival_time": "N",
      "rng_seed": 7,
      "optimizer": {"population": 64, "shrink": 0.99},
      "schedule": {"runs": 5}
    }

Arrival times (and ``grid.t_max``) are numbers or the forms ``"N"``,
``"c*N"``, ``"T"`` and ``"c*T"``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .chain import ChainSpec, Model
from .errors import ValidationError
from .pivot import HypercubeSchedule, Parameterization, PivotConfig

TASKS = ("build", "evolve", "spectrum", "optimize", "schedule", "sweep", "snapshots")
STOCHASTIC = {"optimize", "schedule", "sweep", "snapshots"}

TOP_KEYS = {"task", "chain", "parameterization", "arrival_time", "rng_seed", "optimizer",
            "schedule", "grid", "spectrum", "sweep", "snapshots", "out"}
GRID_KEYS = {"t_max", "points", "observables", "scaled_time", "initial_site"}
SPECTRUM_KEYS = {"gap_tol", "weight_floor"}
SWEEP_KEYS = {"models", "lengths", "opt_counts", "fill_value"}
SNAPSHOT_KEYS = {"thresholds"}

_EXPR = re.compile(r"^\s*(?:([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*\*\s*)?([NT])\s*$")


class ConfigError(ValidationError):
    """Invalid configuration; ``line`` points into the source text when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = source or "config"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}")


def eval_time(expr, n: int, arrival_time: float | None = None) -> float:
    """Evaluate a number or a ``c*N`` / ``c*T`` expression."""
    if isinstance(expr, bool):
        raise ValidationError(f"invalid time {expr!r}")
    if isinstance(expr, (int, float)):
        value = float(expr)
    elif isinstance(expr, str):
        m = _EXPR.match(expr)
        if m is None:
            try:
                value = float(expr)
            except ValueError:
                raise ValidationError(
                    f"invalid time expression {expr!r}; use a number, 'N', 'c*N', 'T' or 'c*T'") from None
        else:
            coeff = float(m.group(1)) if m.group(1) else 1.0
            if m.group(2) == "N":
                value = coeff * n
            else:
                if arrival_time is None:
                    raise ValidationError("'T' is only allowed once an arrival time is defined")
                value = coeff * arrival_time
    else:
        raise ValidationError(f"invalid time {expr!r}")
    if not value > 0:
        raise ValidationError(f"time must be positive, got {value}")
    return value


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _check_keys(block: dict, allowed: set, what: str):
    if not isinstance(block, dict):
        raise ValidationError(f"{what} must be an object")
    unknown = set(block) - allowed
    if unknown:
        raise ValidationError(f"unknown {what} keys: {sorted(unknown)}")


@dataclass
class GridSpec:
    t_max: Any = "2*T"
    points: int = 2001
    observables: list[str] = field(default_factory=lambda: ["population", "fidelity", "ipr"])
    scaled_time: str | None = None
    initial_site: int = 1

    def __post_init__(self):
        if isinstance(self.points, bool) or not isinstance(self.points, int) or self.points < 1:
            raise ValidationError("grid.points must be a positive integer")
        if self.scaled_time not in (None, "T", "N"):
            raise ValidationError("grid.scaled_time must be 'T', 'N' or null")


@dataclass
class SweepSpec:
    models: list[Model]
    lengths: list[int]
    opt_counts: list
    fill_value: float = 1.0


@dataclass
class ExperimentConfig:
    task: str
    chain: ChainSpec | None = None
    parameterization: Parameterization | None = None
    arrival_time: Any = None
    rng_seed: int | None = None
    optimizer: PivotConfig = field(default_factory=PivotConfig)
    schedule: dict | None = None
    grid: GridSpec | None = None
    spectrum: dict = field(default_factory=dict)
    sweep: SweepSpec | None = None
    thresholds: list[float] = field(default_factory=list)
    out: str | None = None

    @property
    def n(self) -> int:
        if self.chain is not None:
            return self.chain.n
        return self.parameterization.n

    def resolved_arrival_time(self, n: int | None = None) -> float:
        if self.arrival_time is None:
            raise ValidationError("arrival_time is required for this task")
        return eval_time(self.arrival_time, self.n if n is None else n)

    def schedule_for(self, ctx: Parameterization) -> HypercubeSchedule | None:
        if self.schedule is None:
            return None
        runs = self.schedule.get("runs", 5)
        if "initial_side" in self.schedule or "increment" in self.schedule:
            return HypercubeSchedule.from_dict({"runs": runs, **self.schedule})
        return HypercubeSchedule.default_for(ctx, runs)


def parse_config(text: str, source: str | None = None, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises ConfigError with the offending line number when it can be
    located.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno, source) from None
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object", 1, source)

    current = "task"

    def fail(exc: Exception):
        raise ConfigError(f"{current}: {exc}", _line_of(text, current), source) from None

    try:
        unknown = set(raw) - TOP_KEYS
        if unknown:
            current = sorted(unknown)[0]
            raise ValidationError(f"unknown key(s) {sorted(unknown)}")
        task = raw.get("task")
        if task not in TASKS:
            raise ValidationError(f"task must be one of {TASKS}, got {task!r}")
        cfg = ExperimentConfig(task=task, out=raw.get("out"))

        current = "rng_seed"
        seed = raw.get("rng_seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
            raise ValidationError("rng_seed must be a non-negative integer")
        cfg.rng_seed = seed

        current = "chain"
        if "chain" in raw:
            c = raw["chain"]
            if isinstance(c, str):
                path = Path(c) if base_dir is None else base_dir / c
                try:
                    c = json.loads(path.read_text())
                except OSError as exc:
                    raise ValidationError(f"cannot read chain file {path}: {exc.strerror}") from None
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"chain file {path} is not valid JSON: {exc.msg}") from None
            if not isinstance(c, dict):
                raise ValidationError("chain must be an object or a path to a chain JSON file")
            cfg.chain = ChainSpec.from_dict(c)

        current = "parameterization"
        if "parameterization" in raw:
            p = raw["parameterization"]
            _check_keys(p, {"model", "n", "opt_count", "fill_value", "global_j", "anisotropy"},
                        "parameterization")
            cfg.parameterization = Parameterization.from_dict(p)

        current = "optimizer"
        if "optimizer" in raw:
            _check_keys(raw["optimizer"], set(PivotConfig.__dataclass_fields__) - {"rng_seed"},
                        "optimizer")
            cfg.optimizer = PivotConfig.from_dict(raw["optimizer"])

        current = "schedule"
        if "schedule" in raw:
            s = raw["schedule"]
            _check_keys(s, {"initial_side", "increment", "runs"}, "schedule")
            if ("initial_side" in s) != ("increment" in s):
                raise ValidationError("give both initial_side and increment, or neither")
            if "initial_side" in s:
                HypercubeSchedule.from_dict(s)
            elif s.get("runs", 5) < 1:
                raise ValidationError("runs must be >= 1")
            cfg.schedule = dict(s)
        elif task == "schedule":
            cfg.schedule = {"runs": 5}

        current = "grid"
        if "grid" in raw:
            _check_keys(raw["grid"], GRID_KEYS, "grid")
            cfg.grid = GridSpec(**raw["grid"])

        current = "spectrum"
        if "spectrum" in raw:
            _check_keys(raw["spectrum"], SPECTRUM_KEYS, "spectrum")
            cfg.spectrum = dict(raw["spectrum"])

        current = "sweep"
        if "sweep" in raw:
            cfg.sweep = _parse_sweep(raw["sweep"])

        current = "snapshots"
        if "snapshots" in raw:
            _check_keys(raw["snapshots"], SNAPSHOT_KEYS, "snapshots")
            cfg.thresholds = [float(t) for t in raw["snapshots"].get("thresholds", [])]

        current = "arrival_time"
        cfg.arrival_time = raw.get("arrival_time")
        if cfg.arrival_time is not None and task != "sweep":
            if cfg.chain is not None or cfg.parameterization is not None:
                cfg.resolved_arrival_time()

        current = "task"
        _check_task_blocks(cfg)
    except ConfigError:
        raise
    except ValidationError as exc:
        fail(exc)
    except (TypeError, ValueError) as exc:
        fail(ValidationError(str(exc)))
    return cfg


def _parse_sweep(block) -> SweepSpec:
    _check_keys(block, SWEEP_KEYS, "sweep")
    models = [Model(m) for m in block.get("models", [m.value for m in Model])]
    lengths = block.get("lengths")
    if isinstance(lengths, dict):
        _check_keys(lengths, {"start", "stop", "step"}, "sweep.lengths")
        lengths = list(range(lengths["start"], lengths["stop"] + 1, lengths.get("step", 1)))
    if not lengths or any(isinstance(n, bool) or not isinstance(n, int) or n < 2 for n in lengths):
        raise ValidationError("sweep.lengths must list integers >= 2")
    counts = block.get("opt_counts", [1, 2, 3, "all"])
    for c in counts:
        if not (c == "all" or (isinstance(c, int) and not isinstance(c, bool) and c >= 1)):
            raise ValidationError(f"invalid opt_count {c!r}")
    return SweepSpec(models, list(lengths), list(counts), float(block.get("fill_value", 1.0)))


def _check_task_blocks(cfg: ExperimentConfig):
    t = cfg.task
    if t in ("build", "evolve", "spectrum") and cfg.chain is None:
        raise ValidationError(f"task {t!r} needs a chain block")
    if t in ("optimize", "schedule", "snapshots") and cfg.parameterization is None:
        raise ValidationError(f"task {t!r} needs a parameterization block")
    if t == "evolve" and cfg.grid is None:
        raise ValidationError("task 'evolve' needs a grid block")
    if t == "sweep" and cfg.sweep is None:
        raise ValidationError("task 'sweep' needs a sweep block")
    if t == "snapshots" and not cfg.thresholds:
        raise ValidationError("task 'snapshots' needs snapshots.thresholds")
    if t in ("spectrum", "optimize", "schedule", "sweep", "snapshots") and cfg.arrival_time is None:
        raise ValidationError(f"task {t!r} needs arrival_time")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", None, str(path)) from None
    return parse_config(text, source=str(path), base_dir=path.parent)
