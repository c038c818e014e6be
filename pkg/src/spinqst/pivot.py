"""Pivot global optimization of coupling (or gap) distributions.

A population of ``K`` probes is drawn uniformly inside a box.  Every
iteration keeps the ``K/2`` probes with the largest transferred population
``P(T)`` untouched and replaces the rest by Gaussian relocations around
survivors chosen uniformly at random.  The relocation scale shrinks
geometrically.  Because survivors are never re-evaluated or dropped, the
best cost is non-decreasing.

The hypercube schedule repeats the search in boxes of growing side, each
run seeded with the previous best probe.
"""

from __future__ import annotations

import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .chain import (D_MIN, DEFAULT_ANISOTROPY, ChainSpec, Model, build_hamiltonian,
                    long_range_matrices, short_range_matrices)
from .dynamics import decompose, transferred_population
from .errors import ValidationError

log = logging.getLogger(__name__)

ALL = "all"


@dataclass(frozen=True)
class Parameterization:
    """Map from ``m`` free values to a centro-symmetric chain.

    Free entry ``k`` (0-based) sets bonds ``k`` and ``N-2-k``, so the
    optimized values are the ones closest to the chain ends.  The remaining
    bonds are held at ``fill_value``.  ``opt_count`` is an integer or
    ``"all"``.
    """

    model: Model
    n: int
    opt_count: int | str = ALL
    fill_value: float = 1.0
    global_j: float = 1.0
    anisotropy: tuple[float, float, float] = DEFAULT_ANISOTROPY

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "anisotropy", tuple(float(a) for a in self.anisotropy))
        if self.n < 2:
            raise ValidationError(f"chain length must be >= 2, got {self.n}")
        if isinstance(self.opt_count, str):
            if self.opt_count.lower() != ALL:
                raise ValidationError(f"opt_count must be an integer or 'all', got {self.opt_count!r}")
            object.__setattr__(self, "opt_count", ALL)
        elif not 1 <= self.opt_count <= self.max_count:
            raise ValidationError(
                f"opt_count must be in 1..{self.max_count} for N={self.n}, got {self.opt_count}")
        low = D_MIN if self.model is Model.LONG_RANGE else 0.0
        if not self.fill_value > low:
            raise ValidationError(f"fill_value must exceed {low}, got {self.fill_value}")

    @property
    def max_count(self) -> int:
        return math.ceil((self.n - 1) / 2)

    @property
    def free_count(self) -> int:
        return self.max_count if self.opt_count == ALL else int(self.opt_count)

    @property
    def label(self) -> str:
        return ALL if self.opt_count == ALL else str(self.opt_count)

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Free values ``(..., m)`` to physical values ``(..., N-1)``."""
        x = np.asarray(x, dtype=float)
        m = self.free_count
        if x.shape[-1] != m:
            raise ValidationError(f"expected {m} free values, got {x.shape[-1]}")
        full = np.full(x.shape[:-1] + (self.n - 1,), float(self.fill_value))
        for k in range(m):
            full[..., self.n - 2 - k] = x[..., k]
            full[..., k] = x[..., k]
        return full

    def lift(self, x: np.ndarray, other: "Parameterization") -> np.ndarray:
        """Embed a free vector of ``other`` (fewer free values) into this one."""
        x = np.asarray(x, dtype=float)
        out = np.full(self.free_count, float(self.fill_value))
        k = min(len(x), self.free_count)
        out[:k] = x[:k]
        if other.fill_value != self.fill_value:
            raise ValidationError("cannot lift between parameterizations with different fill values")
        return out

    def to_spec(self, x: np.ndarray) -> ChainSpec:
        values = tuple(self.expand(x))
        if self.model is Model.SHORT_RANGE:
            return ChainSpec(self.model, self.n, couplings=values, centro_symmetric=True)
        return ChainSpec(self.model, self.n, gaps=values, global_j=self.global_j,
                         anisotropy=self.anisotropy, centro_symmetric=True)

    def matrices(self, x: np.ndarray) -> np.ndarray:
        full = self.expand(x)
        if self.model is Model.SHORT_RANGE:
            return short_range_matrices(full)
        return long_range_matrices(full, self.global_j, self.anisotropy)

    def default_box(self) -> tuple[float, float]:
        if self.model is Model.SHORT_RANGE:
            return 0.01, float(self.n)
        return D_MIN, 3.0

    def to_dict(self) -> dict:
        return {"model": self.model.value, "n": self.n, "opt_count": self.opt_count,
                "fill_value": self.fill_value, "global_j": self.global_j,
                "anisotropy": list(self.anisotropy)}

    @classmethod
    def from_dict(cls, d: dict) -> "Parameterization":
        allowed = {"model", "n", "opt_count", "fill_value", "global_j", "anisotropy"}
        unknown = set(d) - allowed
        if unknown:
            raise ValidationError(f"unknown parameterization keys: {sorted(unknown)}")
        try:
            return cls(**{**d, "anisotropy": tuple(d.get("anisotropy", DEFAULT_ANISOTROPY))})
        except TypeError as exc:
            raise ValidationError(str(exc)) from None


@dataclass(frozen=True)
class PivotConfig:
    """Optimizer settings.

    ``box_low`` / ``box_high`` default to the parameterization's box.
    ``perturbation_scale`` is the initial relocation standard deviation as
    a fraction of the box width; it is multiplied by ``shrink`` every
    iteration.  A run stops once the best cost reaches
    ``1 - target_epsilon``, when it improved by less than ``stall_tol``
    over the last ``stall_window`` iterations, or at ``max_iterations``.
    """

    population: int = 64
    box_low: float | Sequence[float] | None = None
    box_high: float | Sequence[float] | None = None
    perturbation_scale: float = 0.1
    shrink: float = 0.95
    max_iterations: int = 2000
    stall_window: int = 200
    stall_tol: float = 1e-8
    target_epsilon: float = 1e-6
    rng_seed: int = 0

    def __post_init__(self):
        if self.population < 4 or self.population % 2:
            raise ValidationError(f"population must be an even integer >= 4, got {self.population}")
        if not 0 < self.shrink < 1:
            raise ValidationError(f"shrink must lie in (0, 1), got {self.shrink}")
        if not self.perturbation_scale > 0:
            raise ValidationError("perturbation_scale must be positive")
        if self.max_iterations < 0 or self.stall_window < 1:
            raise ValidationError("max_iterations must be >= 0 and stall_window >= 1")
        if not 0 < self.target_epsilon < 1:
            raise ValidationError("target_epsilon must lie in (0, 1)")
        for name in ("box_low", "box_high"):
            v = getattr(self, name)
            if v is not None and not np.isscalar(v):
                object.__setattr__(self, name, tuple(float(a) for a in v))

    def box(self, ctx: Parameterization) -> tuple[np.ndarray, np.ndarray]:
        lo_default, hi_default = ctx.default_box()
        m = ctx.free_count
        low = np.broadcast_to(np.asarray(lo_default if self.box_low is None else self.box_low,
                                         dtype=float), (m,)).copy()
        high = np.broadcast_to(np.asarray(hi_default if self.box_high is None else self.box_high,
                                          dtype=float), (m,)).copy()
        if np.any(low >= high):
            raise ValidationError(f"box_low must be below box_high (got {low} / {high})")
        if ctx.model is Model.LONG_RANGE and np.any(low < D_MIN):
            raise ValidationError(f"box_low must be >= d_min = {D_MIN} for gaps")
        if np.any(low <= 0):
            raise ValidationError("box_low must be positive")
        return low, high

    def to_dict(self) -> dict:
        d = asdict(self)
        for name in ("box_low", "box_high"):
            if isinstance(d[name], tuple):
                d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PivotConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown optimizer keys: {sorted(unknown)}")
        return cls(**d)


class CostFunction:
    """Batched ``P(T)`` over free vectors; failures score ``-inf``.

    With ``threads > 1`` the batch is split into contiguous chunks that are
    evaluated concurrently and re-joined in order, so results do not
    depend on the thread count.
    """

    def __init__(self, ctx: Parameterization, arrival_time: float, threads: int = 1):
        if not arrival_time > 0:
            raise ValidationError(f"arrival time must be positive, got {arrival_time}")
        self.ctx = ctx
        self.arrival_time = float(arrival_time)
        self.threads = max(1, int(threads))
        self.evaluations = 0

    def _chunk(self, X: np.ndarray) -> np.ndarray:
        out = np.full(len(X), -np.inf)
        floor = D_MIN if self.ctx.model is Model.LONG_RANGE else 0.0
        ok = np.all(np.isfinite(X), axis=1) & np.all(X >= floor, axis=1)
        if self.ctx.model is Model.SHORT_RANGE:
            ok &= np.all(X > 0, axis=1)
        if not ok.any():
            return out
        h = self.ctx.matrices(X[ok])
        try:
            E, V = np.linalg.eigh(h)
        except np.linalg.LinAlgError:
            return self._one_by_one(X, ok, out)
        amp = np.einsum("ki,ki,ki->k", V[:, 0, :], V[:, -1, :], np.exp(-1j * E * self.arrival_time))
        p = np.abs(amp) ** 2
        out[ok] = np.where(np.isfinite(p), p, -np.inf)
        return out

    def _one_by_one(self, X, ok, out):
        for k in np.flatnonzero(ok):
            out[k] = cost(X[k], self.ctx, self.arrival_time)
        return out

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self.evaluations += len(X)
        if self.threads == 1 or len(X) < 2 * self.threads:
            return self._chunk(X)
        parts = np.array_split(X, self.threads)
        with ThreadPoolExecutor(self.threads) as pool:
            return np.concatenate(list(pool.map(self._chunk, parts)))


def cost(params: np.ndarray, ctx: Parameterization, arrival_time: float) -> float:
    """``P(T)`` of the chain described by ``params``; ``-inf`` if the chain is invalid."""
    try:
        spec = ctx.to_spec(params)
        sd = decompose(build_hamiltonian(spec))
    except (ValidationError, ArithmeticError):
        return -math.inf
    return transferred_population(sd, arrival_time)


def pivot_step(probes: np.ndarray, costs: np.ndarray, sigma, rng: np.random.Generator,
               low, high) -> tuple[np.ndarray, np.ndarray]:
    """Keep the better half, relocate the rest around random survivors.

    Returns the new population (survivors first, in descending cost order)
    and the costs of the survivors.  Ties keep the lower index first.
    """
    costs = np.where(np.isnan(costs), -np.inf, costs)
    k = len(probes)
    keep = k // 2
    order = np.argsort(-costs, kind="stable")[:keep]
    survivors = probes[order]
    pivots = rng.integers(0, keep, size=k - keep)
    noise = rng.standard_normal((k - keep, probes.shape[1]))
    fresh = np.clip(survivors[pivots] + sigma * noise, low, high)
    return np.vstack([survivors, fresh]), costs[order]


@dataclass
class Snapshot:
    threshold: float
    cost: float
    params: np.ndarray
    iteration: int

    def to_dict(self, ctx: Parameterization) -> dict:
        return {"threshold": self.threshold, "P": self.cost, "iteration": self.iteration,
                "chain": ctx.to_spec(self.params).to_dict()}


@dataclass
class OptimizerRun:
    """Outcome of one pivot search."""

    ctx: Parameterization
    arrival_time: float
    best_params: np.ndarray
    best_cost: float
    trace: list[tuple[int, float, int]]
    evaluations: int
    termination: str
    snapshots: dict[float, Snapshot | None] = field(default_factory=dict)

    @property
    def best_spec(self) -> ChainSpec:
        return self.ctx.to_spec(self.best_params)

    def trace_csv(self) -> str:
        return trace_to_csv(self.trace)


def trace_to_csv(trace) -> str:
    out = io.StringIO()
    out.write("iteration,best_cost,evaluations\n")
    for it, best, ev in trace:
        out.write(f"{it},{best:.17g},{ev}\n")
    return out.getvalue()


def run_pivot(ctx: Parameterization, arrival_time: float, config: PivotConfig,
              initial: Sequence[np.ndarray] = (), thresholds: Sequence[float] = (),
              rng: np.random.Generator | None = None, threads: int = 1,
              iteration_offset: int = 0, evaluation_offset: int = 0) -> OptimizerRun:
    """Run the pivot method until the target, a stall, or the iteration cap.

    ``initial`` probes replace the first members of the random starting
    population (clipped into the box).  ``thresholds`` request snapshots of
    the first best probe whose cost reaches each value.
    """
    rng = np.random.default_rng(config.rng_seed) if rng is None else rng
    f = CostFunction(ctx, arrival_time, threads)
    low, high = config.box(ctx)
    K, m = config.population, ctx.free_count
    initial = list(initial)
    if len(initial) > K:
        raise ValidationError("more seed probes than population members")
    thresholds = sorted(float(t) for t in thresholds)

    X = rng.uniform(low, high, size=(K, m))
    for i, x in enumerate(initial):
        X[i] = np.clip(np.asarray(x, dtype=float), low, high)
    c = f(X)
    sigma = config.perturbation_scale * (high - low)
    snaps: dict[float, Snapshot | None] = {t: None for t in thresholds}

    def record(it):
        b = int(np.argmax(c))
        for t in thresholds:
            if snaps[t] is None and c[b] >= t:
                snaps[t] = Snapshot(t, float(c[b]), X[b].copy(), it)
        return float(c[b])

    best = record(iteration_offset)
    trace = [(iteration_offset, best, evaluation_offset + f.evaluations)]
    termination = "max_iterations"
    for it in range(1, config.max_iterations + 1):
        if best >= 1 - config.target_epsilon:
            termination = "target"
            break
        X, kept = pivot_step(X, c, sigma, rng, low, high)
        c = np.concatenate([kept, f(X[len(kept):])])
        sigma = sigma * config.shrink
        best = record(iteration_offset + it)
        trace.append((iteration_offset + it, best, evaluation_offset + f.evaluations))
        if it >= config.stall_window and best - trace[-1 - config.stall_window][1] < config.stall_tol:
            termination = "stall"
            break
    else:
        if best >= 1 - config.target_epsilon:
            termination = "target"

    b = int(np.argmax(c))
    log.debug("pivot run finished: P=%.10f after %d evaluations (%s)", c[b], f.evaluations, termination)
    return OptimizerRun(ctx, float(arrival_time), X[b].copy(), float(c[b]), trace,
                        f.evaluations, termination, snaps)


@dataclass
class ScheduleRecord:
    run: int
    side: float
    result: OptimizerRun

    @property
    def best_cost(self) -> float:
        return self.result.best_cost


@dataclass
class HypercubeSchedule:
    """Growing-box schedule: run ``k`` (1-based) uses upper bound
    ``initial_side + (k - 1) * increment`` for every free value."""

    initial_side: float
    increment: float
    runs: int = 5
    records: list[ScheduleRecord] = field(default_factory=list)

    def __post_init__(self):
        if not self.increment > 0:
            raise ValidationError(f"increment must be positive, got {self.increment}")
        if self.runs < 1:
            raise ValidationError(f"runs must be >= 1, got {self.runs}")
        if not self.initial_side > 0:
            raise ValidationError("initial_side must be positive")

    @property
    def sides(self) -> list[float]:
        return [self.initial_side + k * self.increment for k in range(self.runs)]

    @property
    def best(self) -> OptimizerRun:
        return self.records[-1].result

    @property
    def trace(self) -> list[tuple[int, float, int]]:
        out = []
        for rec in self.records:
            out.extend(rec.result.trace)
        return out

    @property
    def snapshots(self) -> dict[float, Snapshot | None]:
        merged: dict[float, Snapshot | None] = {}
        for rec in self.records:
            for t, s in rec.result.snapshots.items():
                if merged.get(t) is None:
                    merged[t] = s
        return merged

    @classmethod
    def default_for(cls, ctx: Parameterization, runs: int = 5) -> "HypercubeSchedule":
        """Sides from a third of the default upper bound up to the full bound."""
        high = ctx.default_box()[1]
        return cls(initial_side=high / 3, increment=(high - high / 3) / max(runs - 1, 1), runs=runs)

    def to_dict(self) -> dict:
        return {"initial_side": self.initial_side, "increment": self.increment, "runs": self.runs}

    def records_dict(self) -> list[dict]:
        return [{"run": r.run, "side": r.side, "best_P": r.best_cost,
                 "evaluations": r.result.evaluations, "termination": r.result.termination,
                 "chain": r.result.best_spec.to_dict()} for r in self.records]

    @classmethod
    def from_dict(cls, d: dict) -> "HypercubeSchedule":
        unknown = set(d) - {"initial_side", "increment", "runs"}
        if unknown:
            raise ValidationError(f"unknown schedule keys: {sorted(unknown)}")
        return cls(**d)


def run_schedule(ctx: Parameterization, arrival_time: float, config: PivotConfig,
                 schedule: HypercubeSchedule, initial: Sequence[np.ndarray] = (),
                 thresholds: Sequence[float] = (), threads: int = 1) -> HypercubeSchedule:
    """Run the pivot method once per side length, carrying the best probe forward.

    One random stream seeded by ``config.rng_seed`` feeds all runs.  The
    ``initial`` probes join every run's starting population.
    """
    rng = np.random.default_rng(config.rng_seed)
    low = config.box(ctx)[0]
    done = replace(schedule, records=[])
    seeds = list(initial)
    it0 = ev0 = 0
    for k, side in enumerate(schedule.sides, 1):
        if np.any(low >= side):
            raise ValidationError(f"schedule side {side} does not exceed box_low")
        cfg = replace(config, box_high=side)
        res = run_pivot(ctx, arrival_time, cfg, initial=seeds, thresholds=thresholds, rng=rng,
                        threads=threads, iteration_offset=it0, evaluation_offset=ev0)
        done.records.append(ScheduleRecord(k, float(side), res))
        log.info("schedule run %d/%d side=%.4g P=%.10f", k, schedule.runs, side, res.best_cost)
        seeds = list(initial) + [res.best_params]
        it0 = res.trace[-1][0] + 1
        ev0 = res.trace[-1][2]
    return done


def suboptimal_snapshots(ctx: Parameterization, arrival_time: float, config: PivotConfig,
                         thresholds: Sequence[float],
                         schedule: HypercubeSchedule | None = None,
                         threads: int = 1) -> list[tuple[float, ChainSpec | None, float | None]]:
    """First best chains whose ``P(T)`` crosses each threshold.

    Returns ``(threshold, chain, P)`` per threshold, with ``None`` entries
    for thresholds that were never reached.
    """
    thresholds = [float(t) for t in thresholds]
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValidationError("thresholds must be strictly ascending")
    if any(not 0 <= t < 1 for t in thresholds):
        raise ValidationError("thresholds must lie in [0, 1)")
    if schedule is None:
        snaps = run_pivot(ctx, arrival_time, config, thresholds=thresholds, threads=threads).snapshots
    else:
        snaps = run_schedule(ctx, arrival_time, config, schedule, thresholds=thresholds,
                             threads=threads).snapshots
    out = []
    for t in thresholds:
        s = snaps.get(t)
        out.append((t, None, None) if s is None else (t, ctx.to_spec(s.params), s.cost))
    return out


def optimize_counts(model: Model | str, n: int, arrival_time: float, counts: Sequence,
                    config: PivotConfig, schedule_runs: int | None = 5,
                    threads: int = 1, fill_value: float = 1.0) -> dict[str, OptimizerRun]:
    """Optimize with an increasing number of free values.

    Counts are processed in ascending order and each search is seeded with
    the previous optimum embedded at the fill value, so the achieved
    ``P(T)`` is non-decreasing in the count.  ``schedule_runs=None`` uses
    a single pivot run in the default box.
    """
    ctxs = sorted((Parameterization(model, n, c, fill_value) for c in counts),
                  key=lambda p: p.free_count)
    results: dict[str, OptimizerRun] = {}
    prev_ctx, prev_best = None, None
    for ctx in ctxs:
        seeds = [] if prev_best is None else [ctx.lift(prev_best, prev_ctx)]
        if schedule_runs is None:
            run = run_pivot(ctx, arrival_time, config, initial=seeds, threads=threads)
        else:
            sched = run_schedule(ctx, arrival_time, config,
                                 HypercubeSchedule.default_for(ctx, schedule_runs),
                                 initial=seeds, threads=threads)
            run = sched.best
        results[ctx.label] = run
        prev_ctx, prev_best = ctx, run.best_params
    return results


def config_json(config: PivotConfig, schedule: HypercubeSchedule | None = None) -> str:
    d = {"optimizer": config.to_dict()}
    if schedule is not None:
        d["schedule"] = schedule.to_dict()
    return json.dumps(d, indent=2)
