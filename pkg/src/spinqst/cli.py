"""Command-line entry point: ``qst <verb> --config cfg.json --out dir``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
The log level is read from the ``QST_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, dynamics
from .chain import Model, build_hamiltonian
from .config import STOCHASTIC, TASKS, ConfigError, ExperimentConfig, eval_time, load_config
from .errors import NumericalError, ValidationError
from .pivot import (Parameterization, optimize_counts, run_pivot, run_schedule,
                    suboptimal_snapshots, trace_to_csv)

log = logging.getLogger("spinqst")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _g(v) -> str:
    return format(float(v), ".17g")


def cmd_build(cfg: ExperimentConfig, out: Path, threads: int):
    h = build_hamiltonian(cfg.chain)
    _write(out / "chain.json", cfg.chain.to_json() + "\n")
    buf = io.StringIO()
    for row in h.matrix:
        buf.write(",".join(_g(v) for v in row) + "\n")
    _write(out / "hamiltonian.csv", buf.getvalue())


def cmd_evolve(cfg: ExperimentConfig, out: Path, threads: int):
    n = cfg.chain.n
    T = cfg.resolved_arrival_time() if cfg.arrival_time is not None else None
    g = cfg.grid
    t_max = eval_time(g.t_max, n, T)
    grid = np.linspace(0.0, t_max, g.points)
    sd = dynamics.decompose(build_hamiltonian(cfg.chain))
    series = dynamics.sample_series(sd, grid, g.observables, g.initial_site)
    if g.scaled_time == "T":
        if T is None:
            raise ValidationError("scaled_time 'T' needs arrival_time")
        series.columns = {"t_over_T": grid / T, **series.columns}
    elif g.scaled_time == "N":
        series.columns = {"t_over_N": grid / n, **series.columns}
    _write(out / "series.csv", series.to_csv())


def cmd_spectrum(cfg: ExperimentConfig, out: Path, threads: int):
    T = cfg.resolved_arrival_time()
    sd = dynamics.decompose(build_hamiltonian(cfg.chain))
    ladder = analysis.gap_ladder(sd, T)
    profile = analysis.localization_profile(sd)
    report = analysis.order_report(ladder, profile, cfg.spectrum.get("gap_tol", analysis.DEFAULT_GAP_TOL),
                                   cfg.spectrum.get("weight_floor"))
    _write(out / "ladder.csv", ladder.to_csv())
    _write(out / "profile.csv", profile.to_csv())
    _write(out / "energies.csv", "i,energy\n" + "".join(
        f"{i},{_g(e)}\n" for i, e in enumerate(sd.energies, 1)))
    d = report.to_dict()
    d["arrival_time"] = T
    d["P_T"] = dynamics.transferred_population(sd, T)
    _write(out / "report.json", _dump(d))


def _summary(cfg: ExperimentConfig, ctx: Parameterization, T: float, run) -> dict:
    return {
        "parameterization": ctx.to_dict(),
        "arrival_time": T,
        "best_P": run.best_cost,
        "best_params": [float(v) for v in run.best_params],
        "evaluations": run.evaluations,
        "termination": run.termination,
        "optimizer": cfg.optimizer.to_dict(),
    }


def cmd_optimize(cfg: ExperimentConfig, out: Path, threads: int):
    ctx = cfg.parameterization
    T = cfg.resolved_arrival_time()
    run = run_pivot(ctx, T, cfg.optimizer, threads=threads)
    _write(out / "best_chain.json", run.best_spec.to_json() + "\n")
    _write(out / "trace.csv", run.trace_csv())
    _write(out / "result.json", _dump(_summary(cfg, ctx, T, run)))
    log.info("optimize: P(T)=%.10f (%s)", run.best_cost, run.termination)


def cmd_schedule(cfg: ExperimentConfig, out: Path, threads: int):
    ctx = cfg.parameterization
    T = cfg.resolved_arrival_time()
    sched = run_schedule(ctx, T, cfg.optimizer, cfg.schedule_for(ctx), threads=threads)
    best = sched.best
    _write(out / "best_chain.json", best.best_spec.to_json() + "\n")
    _write(out / "trace.csv", trace_to_csv(sched.trace))
    _write(out / "runs.csv", "run,side,best_P,evaluations,termination\n" + "".join(
        f"{r.run},{_g(r.side)},{_g(r.best_cost)},{r.result.evaluations},{r.result.termination}\n"
        for r in sched.records))
    summary = _summary(cfg, ctx, T, best)
    summary["schedule"] = sched.to_dict()
    summary["runs"] = sched.records_dict()
    _write(out / "result.json", _dump(summary))
    log.info("schedule: P(T)=%.10f", best.best_cost)


def cmd_sweep(cfg: ExperimentConfig, out: Path, threads: int):
    sw = cfg.sweep
    runs = None if cfg.schedule is None else cfg.schedule.get("runs", 5)
    rows = ["model,N,m,T,best_P,seed,status\n"]
    for model in sw.models:
        for n in sw.lengths:
            T = eval_time(cfg.arrival_time, n)
            counts = [c for c in sw.opt_counts
                      if c == "all" or c <= Parameterization(model, n).max_count]
            try:
                res = optimize_counts(model, n, T, counts, cfg.optimizer, schedule_runs=runs,
                                      threads=threads, fill_value=sw.fill_value)
            except (ValidationError, ArithmeticError, np.linalg.LinAlgError) as exc:
                log.warning("sweep row %s N=%d failed: %s", model.value, n, exc)
                msg = str(exc).replace(",", ";").replace("\n", " ")
                for c in counts:
                    rows.append(f"{model.value},{n},{c},{_g(T)},,{cfg.optimizer.rng_seed},error: {msg}\n")
                continue
            chains = out / "chains"
            chains.mkdir(exist_ok=True)
            for c in counts:
                r = res[str(c)]
                _write(chains / f"{model.value}_N{n}_m{c}.json", r.best_spec.to_json() + "\n")
                rows.append(f"{model.value},{n},{c},{_g(T)},{_g(r.best_cost)},{cfg.optimizer.rng_seed},ok\n")
    _write(out / "sweep.csv", "".join(rows))


def cmd_snapshots(cfg: ExperimentConfig, out: Path, threads: int):
    ctx = cfg.parameterization
    T = cfg.resolved_arrival_time()
    schedule = cfg.schedule_for(ctx)
    snaps = suboptimal_snapshots(ctx, T, cfg.optimizer, cfg.thresholds, schedule, threads=threads)
    rows = ["k,threshold,reached,P\n"]
    entries = []
    for k, (t, spec, p) in enumerate(snaps, 1):
        rows.append(f"{k},{_g(t)},{int(spec is not None)},{'' if p is None else _g(p)}\n")
        entries.append({"threshold": t, "reached": spec is not None, "P": p,
                        "chain": None if spec is None else spec.to_dict()})
        if spec is not None:
            _write(out / f"snapshot_{k}.json", spec.to_json() + "\n")
    _write(out / "snapshots.csv", "".join(rows))
    _write(out / "snapshots.json", _dump({"arrival_time": T, "snapshots": entries}))


COMMANDS = {
    "build": cmd_build,
    "evolve": cmd_evolve,
    "spectrum": cmd_spectrum,
    "optimize": cmd_optimize,
    "schedule": cmd_schedule,
    "sweep": cmd_sweep,
    "snapshots": cmd_snapshots,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qst", description=__doc__.splitlines()[0])
    p.add_argument("verb", choices=TASKS)
    p.add_argument("--config", required=True, help="experiment configuration (JSON)")
    p.add_argument("--out", help="output directory (default: config 'out' or '.')")
    p.add_argument("--seed", type=int, help="RNG seed, overrides rng_seed in the config")
    p.add_argument("--threads", type=int, default=1, help="concurrent cost evaluations")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("QST_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.task != args.verb:
            raise ConfigError(f"config task {cfg.task!r} does not match verb {args.verb!r}",
                              None, args.config)
        seed = args.seed if args.seed is not None else cfg.rng_seed
        if seed is not None and seed < 0:
            raise ConfigError("seed must be non-negative", None, args.config)
        if args.verb in STOCHASTIC and seed is None:
            raise ConfigError("stochastic tasks need rng_seed (or --seed)", None, args.config)
        if seed is not None:
            cfg.rng_seed = seed
            cfg.optimizer = replace(cfg.optimizer, rng_seed=seed)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1", None, args.config)
        out = Path(args.out or cfg.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.verb](cfg, out, args.threads)
    except (ConfigError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
