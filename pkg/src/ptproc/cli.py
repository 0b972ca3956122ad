"""Command-line experiment runner.

``ptproc <kind> --config <path> [--seed N] [--replicates N] [--out DIR]``
writes ``results.csv`` and ``manifest.json`` into the output directory.
``ptproc list-batteries`` prints the acceptance catalog as JSON.

Exit codes: 0 success, 1 tolerance breach, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__, bdm, interact, skellam, timechange
from .batteries import BY_NAME, CATALOG, run_battery
from .config import KINDS, ConfigError, ExperimentConfig, load_config
from .oracle import build_death_migration_generator, build_pure_migration_generator
from .rng import run_blocks, worker_count

EXIT_OK, EXIT_BREACH, EXIT_CONFIG = 0, 1, 2

COLUMNS = {
    "endpoints2": ("m", "n", "count"),
    "endpoints1": ("k", "count"),
    "pmf2": ("t", "m", "n", "probability"),
    "pmf1": ("t", "k", "probability"),
    "moments": ("t", "mean1", "mean2", "sigma", "sigma1", "sigma2", "engine"),
    "validate": ("check", "value", "threshold", "passed"),
    "timechange2": ("alpha", "m", "n", "count", "probability"),
    "timechange1": ("alpha", "k", "count", "probability"),
}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _tally(endpoints: np.ndarray):
    if endpoints.ndim == 1:
        c = Counter(endpoints.tolist())
        return "endpoints1", [(k, c[k]) for k in sorted(c)]
    c = Counter(map(tuple, endpoints.tolist()))
    return "endpoints2", [(m, n, c[(m, n)]) for m, n in sorted(c)]


def _endpoint_sampler(cfg: ExperimentConfig):
    p, h = cfg.process, cfg.horizon
    if isinstance(p, interact.InteractingSkellamSpec):
        return lambda rng, n: interact.sample_endpoints(p, h, n, rng, method=cfg.method)
    if isinstance(p, bdm.BdmSpec):
        return lambda rng, n: bdm.sample_endpoints(p, h, n, rng)
    if isinstance(p, bdm.PureMigrationSpec):
        b = p.as_bdm()
        return lambda rng, n: bdm.sample_endpoints(b, h, n, rng)[:, 0]
    return lambda rng, n: skellam.sample_skellam_endpoints(p, h, n, rng)


def run_simulate(cfg: ExperimentConfig):
    samples = run_blocks(_endpoint_sampler(cfg), cfg.replicates, cfg.seed)
    layout, rows = _tally(samples)
    return layout, rows, {}


def _interacting_window(cfg, t):
    if cfg.window is not None:
        (mlo, mhi), (nlo, nhi) = cfg.window
        return np.arange(mlo, mhi + 1), np.arange(nlo, nhi + 1)
    a, b = interact.marginal_rates(cfg.process)
    return skellam.skellam_support(a, t), skellam.skellam_support(b, t)


def run_pmf(cfg: ExperimentConfig):
    p = cfg.process
    rows = []
    if isinstance(p, skellam.NhSkellamSpec):
        for t in cfg.times:
            ks = skellam.skellam_support(p, t)
            rows += [(t, k, q) for k, q in zip(ks, skellam.skellam_pmf(p, t, ks))]
        return "pmf1", rows, {}
    if isinstance(p, bdm.PureMigrationSpec):
        ks = np.arange(p.total + 1)
        for t in cfg.times:
            rows += [(t, k, q) for k, q in zip(ks, bdm.pure_migration_pmf(p, t, ks))]
        return "pmf1", rows, {}
    if isinstance(p, bdm.BdmSpec):
        if not p.is_death_migration:
            raise ConfigError("closed-form pmf is shipped for death-migration specs only")
        for t in cfg.times:
            tab = bdm.death_migration_table(p, t)
            rows += [(t, m, n, tab[m, n]) for m in range(tab.shape[0]) for n in range(tab.shape[1] - m)]
        return "pmf2", rows, {}
    for t in cfg.times:
        ms, ns = _interacting_window(cfg, t)
        tab = interact.joint_pmf_table(p, t, ms, ns)
        rows += [(t, m, n, tab[i, j]) for i, m in enumerate(ms) for j, n in enumerate(ns)]
    return "pmf2", rows, {}


def run_moments(cfg: ExperimentConfig):
    p = cfg.process
    rows = []
    if isinstance(p, bdm.PureMigrationSpec):
        p = p.as_bdm()
    if isinstance(p, bdm.BdmSpec):
        notes = {}
        for t in cfg.times:
            st = bdm.moments_ode(p, t)
            rows.append((t, st.mean1, st.mean2, st.sigma, st.sigma1, st.sigma2, "ode"))
            m1, m2 = bdm.mean_vector(p, t)
            try:
                sig = bdm.second_moments_reduced(p, t)
            except ValueError as exc:  # not reduced, or at a resonance
                sig = (None, None, None)
                notes["closed_second_moments"] = str(exc)
            rows.append((t, m1, m2, *sig, "closed"))
        return "moments", rows, notes
    if isinstance(p, interact.InteractingSkellamSpec):
        a, b = interact.marginal_rates(p)
        n1, n2 = p.initial
        for t in cfg.times:
            ua, da = a.rate_up.cumulative(t), a.rate_down.cumulative(t)
            ub, db = b.rate_up.cumulative(t), b.rate_down.cumulative(t)
            m1, m2 = n1 + ua - da, n2 + ub - db
            cov = interact.covariance(p, t, t)
            # factorial moments so the columns mean the same thing for every process
            rows.append((t, m1, m2, cov + m1 * m2, ua + da + m1 * m1 - m1, ub + db + m2 * m2 - m2, "closed"))
        return "moments", rows, {}
    raise ConfigError("moments are shipped for bdm, pure_migration and interacting_skellam processes")


def run_validate(cfg: ExperimentConfig):
    replicates = cfg.replicates if cfg.replicates > 1 else None
    res = run_battery(cfg.battery, seed=cfg.seed, replicates=replicates)
    rows = [(c.name, c.value, c.threshold, c.passed) for c in res.checks]
    rows.append(("runtime_within_limit", None, res.time_limit, res.seconds < res.time_limit))
    extra = {"battery": cfg.battery, "passed": res.passed, "summary": res.summary(),
             "battery_seconds": res.seconds}
    return "validate", rows, extra


def _fractional_probs(cfg: ExperimentConfig):
    """Exact law of the time-changed chain when one is shipped, else ``None``."""
    p, c = cfg.process, cfg.clock
    if not c.is_pure_stable:
        return None
    if isinstance(p, bdm.PureMigrationSpec):
        d = timechange.fractional_distribution(build_pure_migration_generator(p), c.alpha, cfg.horizon, (p.n1,))
        return {s[0]: q for s, q in zip(d.states, d.pmf)}
    if isinstance(p, bdm.BdmSpec) and p.is_death_migration:
        d = timechange.fractional_distribution(build_death_migration_generator(p), c.alpha, cfg.horizon,
                                               tuple(p.initial))
        return dict(zip(d.states, d.pmf))
    return None


def run_timechange(cfg: ExperimentConfig):
    def fn(rng, n):
        return timechange.time_changed_sample(cfg.process, cfg.clock, cfg.horizon, rng, size=n)

    samples = run_blocks(fn, cfg.replicates, cfg.seed)
    layout, rows = _tally(samples)
    probs = _fractional_probs(cfg) or {}
    alpha = cfg.clock.alpha if cfg.clock.family == "stable" else None
    if layout == "endpoints1":
        keys = sorted(set(probs) | {r[0] for r in rows})
        counts = {r[0]: r[1] for r in rows}
        out = [(alpha, k, counts.get(k, 0), probs.get(k)) for k in keys]
        return "timechange1", out, {}
    keys = sorted(set(probs) | {(r[0], r[1]) for r in rows})
    counts = {(r[0], r[1]): r[2] for r in rows}
    out = [(alpha, m, n, counts.get((m, n), 0), probs.get((m, n))) for m, n in keys]
    return "timechange2", out, {}


RUNNERS = {
    "simulate": run_simulate,
    "pmf": run_pmf,
    "moments": run_moments,
    "validate": run_validate,
    "timechange": run_timechange,
}


def run(cfg: ExperimentConfig, out_dir: Path) -> int:
    """Run one experiment and write its artifacts; returns the exit status."""
    start = time.perf_counter()
    layout, rows, extra = RUNNERS[cfg.kind](cfg)
    wall = time.perf_counter() - start
    status = EXIT_OK
    if cfg.kind == "validate" and not extra["passed"]:
        status = EXIT_BREACH
    out_dir.mkdir(parents=True, exist_ok=True)
    columns = COLUMNS[layout]
    (out_dir / "results.csv").write_text(to_csv(columns, rows))
    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "block_seeding": "Philox(SeedSequence(seed, spawn_key=(block,))), 8192 replicates per block",
        "replicates": cfg.replicates,
        "workers": worker_count(),
        "version": __version__,
        "columns": list(columns),
        "wall_seconds": wall,
        "exit_status": status,
        **extra,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    return status


def catalog() -> list[dict]:
    return [{"name": b.name, "criterion": b.criterion, "description": b.description,
             "time_limit_seconds": b.time_limit, "template": b.template()} for b in CATALOG]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptproc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--replicates", type=int, help="override the replicate count")
        p.add_argument("--out", help="output directory (default: the config's output field)")
    sub.add_parser("list-batteries", help="print the acceptance battery catalog as JSON")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "list-batteries":
        print(json.dumps(catalog(), indent=2))
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError(f"config kind {cfg.kind!r} does not match command {args.command!r}")
        if args.seed is not None:
            cfg.seed = args.seed
        if args.replicates is not None:
            cfg.replicates = args.replicates
        cfg.validate()
        status = run(cfg, Path(args.out or cfg.output))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.kind == "validate":
        print(BY_NAME[cfg.battery].name, "PASS" if status == EXIT_OK else "FAIL")
    return status


if __name__ == "__main__":
    sys.exit(main())
