"""Batch experiment front-end.

Subcommands: exact, llt, events, theorem, simulate, scan.  Each run
writes one CSV (floats at 17 significant digits, no timestamps, so
re-runs with the same seed are byte-identical) plus a JSON manifest
holding the resolved configuration, seed, rounding rule and governor
settings.  Configuration files are flat `key = value` lines mirroring
the flags; flags override the file; unknown keys fail the run.

Exit codes: 0 success, 2 configuration error, 3 infeasible schedule,
4 numeric invariant breach.
"""

import argparse
import json
import sys
import time

import numpy as np

from . import __version__, _kernels, analysis, canonical, dynamics, ensemble
from .analysis import InfeasibleScheduleError, ScheduleRangeError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERIC = 4

MANIFEST_SCHEMA_VERSION = 1
DEFAULT_GRID = tuple(2**e for e in range(10, 21))
DEFAULT_LADDERS = {
    "2.5": (64, 128, 256, 512, 1024),
    "2": (128, 512, 2048, 8192),
    "1.5": (8, 16, 32, 64, 128),
    "1": (4, 5, 6),
}


class ConfigError(ValueError):
    pass


def seed_streams(master_seed: int, job_index: int, stream_index: int):
    """Deterministic, pairwise-independent Generator streams.

    Streams are Philox counter-based generators keyed through
    SeedSequence(master_seed, spawn_key=(job_index, stream_index)); the
    same triple always reproduces the same draws, distinct triples give
    statistically independent streams.
    """
    if not 0 <= master_seed < 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {master_seed}")
    ss = np.random.SeedSequence(master_seed, spawn_key=(job_index, stream_index))
    return np.random.Generator(np.random.Philox(ss))


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_manifest(path: str, subcommand: str, config: dict, outputs, jobs, wall_clock: float) -> None:
    doc = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool": "zrplab",
        "version": __version__,
        "backend": _kernels.BACKEND,
        "subcommand": subcommand,
        "config": config,
        "seed": config.get("seed"),
        "rounding_rule": analysis.ROUNDING_RULE,
        "governor": {
            "budget_cells": config.get("budget_cells", analysis.BUDGET_CELLS),
            "table_cells": config.get("table_cells", analysis.TABLE_CELLS),
        },
        "wall_clock_s": wall_clock,
        "jobs": jobs,
        "outputs": list(outputs),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


_SPEC = {
    "exact": {
        "alpha": float,
        "n": int,
        "l": int,
        "seed": int,
        "out": str,
        "config": str,
    },
    "llt": {
        "alpha": float,
        "ladder": str,
        "margin": float,
        "delta": float,
        "seed": int,
        "budget_cells": int,
        "table_cells": int,
        "out": str,
        "config": str,
    },
    "events": {
        "alpha": float,
        "ladder": str,
        "margin": float,
        "delta": float,
        "seed": int,
        "budget_cells": int,
        "table_cells": int,
        "out": str,
        "config": str,
    },
    "theorem": {
        "alpha": float,
        "ladder": str,
        "margin": float,
        "delta": float,
        "dim": int,
        "samples": int,
        "seed": int,
        "budget_cells": int,
        "table_cells": int,
        "window": bool,
        "out": str,
        "config": str,
    },
    "simulate": {
        "alpha": float,
        "n": int,
        "l": int,
        "events": int,
        "time": float,
        "mode": str,
        "start": str,
        "seed": int,
        "out": str,
        "config": str,
    },
    "scan": {
        "quantity": str,
        "alphas": str,
        "grid": str,
        "seed": int,
        "out": str,
        "config": str,
    },
}

_DEFAULTS = {
    "margin": 2.0,
    "delta": 1.5,
    "seed": 0,
    "dim": 1,
    "samples": 100000,
    "window": True,
    "mode": "time",
    "start": "balanced",
    "budget_cells": analysis.BUDGET_CELLS,
    "table_cells": analysis.TABLE_CELLS,
    "quantity": "all",
    "alphas": "1,1.25,1.5,2,2.5,3,3.5",
    "grid": ",".join(str(n) for n in DEFAULT_GRID),
}


def _parse_config_file(path: str, schema: dict) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in schema:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _coerce(key, value, schema[key])
    return out


def _coerce(key: str, value: str, typ):
    try:
        if typ is bool:
            lowered = value.strip().lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(value)
        return typ(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from exc


def _resolve(subcommand: str, args: argparse.Namespace) -> dict:
    schema = _SPEC[subcommand]
    resolved = {}
    if getattr(args, "config", None):
        resolved.update(_parse_config_file(args.config, schema))
    for key in schema:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
    for key, default in _DEFAULTS.items():
        if key in schema:
            resolved.setdefault(key, default)
    resolved.setdefault("out", f"{subcommand}.csv")
    return resolved


def _parse_ladder(cfg: dict) -> list[int]:
    if "ladder" not in cfg or cfg["ladder"] in (None, ""):
        key = format(cfg["alpha"], "g")
        if key in DEFAULT_LADDERS:
            return list(DEFAULT_LADDERS[key])
        raise ConfigError(f"no default ladder for alpha={cfg['alpha']}; pass --ladder")
    try:
        rungs = [int(tok) for tok in str(cfg["ladder"]).split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad ladder {cfg['ladder']!r}") from exc
    if not rungs or any(b <= a for a, b in zip(rungs, rungs[1:])):
        raise ConfigError("ladder must be a strictly increasing list of L values")
    return rungs


def _schedules(cfg: dict):
    for job, L in enumerate(_parse_ladder(cfg)):
        yield job, analysis.build_schedule(
            cfg["alpha"],
            L,
            margin=cfg["margin"],
            delta=cfg["delta"],
            budget_cells=cfg["budget_cells"],
            table_cells=cfg["table_cells"],
        )


def _run_exact(cfg: dict):
    alpha, n, l, seed = cfg["alpha"], cfg["n"], cfg["l"], cfg["seed"]
    if n is None or l is None:
        raise ConfigError("exact needs --n and --l")
    from .logconv import canonical_partition_log

    z_log = canonical_partition_log(alpha, n, l)
    rho = ensemble.rho_c_truncated(alpha, n)
    marginal = canonical.exact_marginal_table(alpha, n, l) if l >= 2 else None
    print(f"Z_{{{n},{l}}} = {np.exp(z_log):.12g} (log {z_log:.12g})")
    print(f"rho_c,{n} = {rho:.12g}")
    if marginal is not None:
        head = ", ".join(f"{p:.6g}" for p in marginal[: min(10, n + 1)])
        print(f"marginal eta_1: ({head}{', ...' if n + 1 > 10 else ''})")
    rows = []
    if marginal is not None:
        for k, p in enumerate(marginal):
            rows.append((alpha, l, n, seed, k, p))
    header = ("alpha", "L", "N", "seed", "k", "marginal")
    jobs = [{"alpha": alpha, "L": l, "N": n, "status": "ok"}]
    return header, rows, jobs


def _run_llt(cfg: dict):
    header = ("alpha", "L", "N", "seed", "rho_L", "k_L", "B_L", "C_L", "rho_cN", "idx", "ratio")
    rows, jobs = [], []
    for _, sched in _schedules(cfg):
        rep = analysis.llt_ratio(cfg["alpha"], sched.N, sched.L)
        rows.append(
            (cfg["alpha"], sched.L, sched.N, cfg["seed"], sched.rho_L, sched.k_L,
             sched.B_L, sched.C_L, rep.rho_cN, rep.idx, rep.ratio)
        )
        jobs.append({"alpha": cfg["alpha"], "L": sched.L, "N": sched.N, "status": "ok"})
    return header, rows, jobs


def _run_events(cfg: dict):
    header = ("alpha", "L", "N", "seed", "B_L", "E0", "E1", "E2", "total",
              "ratio0", "ratio1", "ratio2")
    rows, jobs = [], []
    for _, sched in _schedules(cfg):
        rep = analysis.event_decomposition(cfg["alpha"], sched.N, sched.L, sched.B_L)
        if rep.series_rel_err > 1e-9:
            raise ScheduleRangeError(
                f"decomposition completeness check failed at L={sched.L}: "
                f"relative error {rep.series_rel_err:.3e}"
            )
        rows.append(
            (cfg["alpha"], sched.L, sched.N, cfg["seed"], sched.B_L,
             rep.e0, rep.e1, rep.e2, rep.total, rep.ratio0, rep.ratio1, rep.ratio2)
        )
        jobs.append({"alpha": cfg["alpha"], "L": sched.L, "N": sched.N, "status": "ok"})
    return header, rows, jobs


def _run_theorem(cfg: dict):
    header = ("alpha", "L", "N", "seed", "d", "samples", "tv", "se",
              "tail_cutoff", "C_L", "window_prob")
    rows, jobs = [], []
    for job, sched in _schedules(cfg):
        rng = seed_streams(cfg["seed"], job, 0)
        tables = canonical.build_suffix_tables(cfg["alpha"], sched.N, sched.L)
        rep = analysis.background_tv_estimate(
            cfg["alpha"], sched.N, sched.L, cfg["dim"], cfg["samples"], rng, tables=tables
        )
        window = np.nan
        if cfg["window"]:
            prof = analysis.condensate_profile(cfg["alpha"], sched.N, sched.L, C_L=sched.C_L)
            window = prof.window_prob
        rows.append(
            (cfg["alpha"], sched.L, sched.N, cfg["seed"], cfg["dim"], cfg["samples"],
             rep.tv, rep.se, rep.tail_cutoff, sched.C_L, window)
        )
        jobs.append({"alpha": cfg["alpha"], "L": sched.L, "N": sched.N, "status": "ok"})
    return header, rows, jobs


def _run_simulate(cfg: dict):
    alpha, n, l = cfg["alpha"], cfg["n"], cfg["l"]
    if n is None or l is None:
        raise ConfigError("simulate needs --n and --l")
    horizon_events = cfg.get("events")
    horizon_time = cfg.get("time")
    if horizon_events is None and horizon_time is None:
        raise ConfigError("simulate needs --events or --time")
    if cfg["start"] not in ("balanced", "condensed"):
        raise ConfigError("start must be balanced or condensed")
    if cfg["mode"] not in ("time", "events"):
        raise ConfigError("mode must be time or events")
    init = dynamics.balanced_config(n, l) if cfg["start"] == "balanced" else dynamics.condensed_config(n, l)
    rng = seed_streams(cfg["seed"], 0, 0)
    stats = dynamics.simulate(
        init,
        alpha,
        rng,
        max_events=horizon_events,
        max_time=horizon_time,
        time_weighted=cfg["mode"] == "time",
    )
    header = ("alpha", "L", "N", "seed", "mode", "start", "n_events", "elapsed_time",
              "max_share_mean", "dir_left", "dir_right", "max_rate_drift", "absorbed")
    rows = [
        (alpha, l, n, cfg["seed"], cfg["mode"], cfg["start"], stats.n_events,
         stats.elapsed_time, stats.max_share_mean, int(stats.dir_counts[0]),
         int(stats.dir_counts[1]), stats.max_rate_drift, stats.absorbed)
    ]
    jobs = [{"alpha": alpha, "L": l, "N": n, "status": "absorbed" if stats.absorbed else "ok"}]
    return header, rows, jobs


def _run_scan(cfg: dict):
    quantities = ("rho_cN", "Z_N", "second_moment") if cfg["quantity"] == "all" else (cfg["quantity"],)
    alphas = [float(tok) for tok in str(cfg["alphas"]).split(",") if tok.strip()]
    grid = [int(tok) for tok in str(cfg["grid"]).split(",") if tok.strip()]
    header = ("alpha", "L", "N", "seed", "quantity", "value", "predictor", "ratio")
    rows, jobs = [], []
    for quantity in quantities:
        for alpha in alphas:
            for row in analysis.order_check(quantity, alpha, grid):
                rows.append((alpha, 0, row.N, cfg["seed"], quantity, row.value, row.predictor, row.ratio))
            jobs.append({"alpha": alpha, "quantity": quantity, "status": "ok"})
    return header, rows, jobs


_RUNNERS = {
    "exact": _run_exact,
    "llt": _run_llt,
    "events": _run_events,
    "theorem": _run_theorem,
    "simulate": _run_simulate,
    "scan": _run_scan,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zrplab", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in _SPEC.items():
        p = sub.add_parser(name)
        for key, typ in schema.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None)
            else:
                p.add_argument(flag, dest=key, type=typ, default=None)
    return parser


def run(argv=None) -> int:
    """Parse arguments, execute the mapped analysis, write CSV + manifest."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    t0 = time.time()
    try:
        cfg = _resolve(args.subcommand, args)
        if "alpha" in _SPEC[args.subcommand] and cfg.get("alpha") is None:
            raise ConfigError(f"{args.subcommand} needs --alpha")
        header, rows, jobs = _RUNNERS[args.subcommand](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleScheduleError as exc:
        print(f"infeasible schedule: {exc} (required N={exc.required_n})", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ScheduleRangeError, AssertionError, RuntimeError) as exc:
        print(f"numeric invariant breach: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = cfg["out"]
    write_csv(out, header, rows)
    write_manifest(out + ".manifest.json", args.subcommand, cfg, [out], jobs, time.time() - t0)
    print(f"wrote {out} ({len(rows)} rows) and {out}.manifest.json")
    return EXIT_OK


def main() -> None:
    raise SystemExit(run())
