"""Command-line front end.

    exitwalk run CONFIG [--output-dir DIR] [--threads N] [--seed S] [--budget B]
    exitwalk describe SPEC [--p P]

``run`` exits 0 when every enabled suite passes, 1 when a suite fails and 2
on an invalid configuration.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__, report
from .config import ConfigError, ExperimentConfig, parse_text
from .distributions import DistributionError, describe, distribution_from_dict
from .harness import (CapPolicy, run_exit_suite, run_functionals_suite, run_gaussian_bounds,
                      run_lemma_implication_checks, run_pruitt_suite, run_scaling_experiment,
                      run_type_witness_convergence, SuiteResult)
from .rng import derive_seed
from .space import SpaceSpec

log = logging.getLogger("exitwalk")


def _cap(cfg: ExperimentConfig) -> CapPolicy:
    c = cfg["cap"]
    if c["policy"] == "fixed":
        return CapPolicy(fixed=int(c["value"]))
    return CapPolicy(factor=float(c.get("factor", 200.0)))


def _merge(results: list[SuiteResult], name: str) -> SuiteResult:
    out = SuiteResult(name)
    for r in results:
        out.checks += r.checks
        out.tables.update(r.tables)
        out.plots.update(r.plots)
        out.notes += r.notes
    return out


def run_suite(name: str, cfg: ExperimentConfig, threads: int | None = None) -> SuiteResult:
    """Run one suite of ``cfg``; each suite draws from its own derived seed."""
    seed = derive_seed(cfg.seed, name)
    p = cfg.p
    dists = cfg.distributions()
    r_grid = cfg.r_values()
    n_grid = cfg.n_values()
    paths = cfg["paths"]
    z = cfg["z"]
    n_mc = cfg["mc_samples"]
    cap = _cap(cfg)
    if name == "functionals":
        return run_functionals_suite(dists, p, r_grid, seed, cfg["hd_pairs"], n_mc,
                                     cfg["moment_samples"], cfg["h_limit_tol"], z)
    if name == "exit":
        return run_exit_suite(dists, p, r_grid, n_grid, paths, seed, cap, threads, n_mc,
                              cfg.get("sn_paths"), cfg.get("truncation_paths"), z)
    if name == "pruitt":
        return run_pruitt_suite(dists, p, r_grid, paths, seed, cfg["band"], cap, threads, n_mc, z)
    if name == "scaling":
        sc = cfg["scaling"]
        ps = sc.get("p", p)
        ps = ps if isinstance(ps, list) else [ps]
        parts = []
        for q in ps:
            rep = run_scaling_experiment(float(q), sc["d_list"], int(sc.get("k", 1)), r_grid, paths,
                                         seed, cfg["budget"], sc.get("control_k"),
                                         sc.get("slope_tol"), cap, threads)
            parts.append(rep.to_suite())
        out = _merge(parts, "scaling")
        for part in parts:
            out.constants.update(part.constants)
        return out
    if name == "gaussian":
        parts = []
        for i, dist in enumerate(dists):
            if not dist.symmetric or dist.degenerate or p < 2:
                res = SuiteResult("gaussian", notes=[f"{dist.variant}[d={dist.d}]: skipped "
                                                     "(needs a symmetric non-degenerate law, p >= 2)"])
                parts.append(res)
                continue
            parts.append(run_gaussian_bounds(dist, SpaceSpec(dist.d, p), r_grid, paths,
                                             derive_seed(seed, i), cfg["budget"], cap, threads,
                                             n_mc, z))
        out = _merge(parts, "gaussian")
        out.tables["gaussian"] = [row for part in parts for row in part.tables.get("gaussian", [])]
        out.plots = {f"gaussian_{i}": pl for i, part in enumerate(parts)
                     for pl in part.plots.values()}
        out.constants = {f"{i}": part.constants for i, part in enumerate(parts) if part.constants}
        return out
    if name == "witness":
        w = cfg["witness"]
        grid = n_grid or [1, 10, 100, 1000]
        return run_type_witness_convergence(w["vectors"], p, grid, paths, seed,
                                            w.get("gauss_samples", 10 ** 6), w.get("tol", 0.1),
                                            cfg["moment_samples"], threads, z)
    if name == "lemmas":
        parts = [run_lemma_implication_checks(dist, SpaceSpec(dist.d, p), r_grid, n_grid, paths,
                                              derive_seed(seed, i), cap, threads, n_mc, z)
                 for i, dist in enumerate(dists)]
        out = _merge(parts, "lemmas")
        out.tables["lemmas"] = [dict(row, dist=f"{d.variant}[d={d.d}]")
                                for d, part in zip(dists, parts)
                                for row in part.tables.get("lemmas", [])]
        for d, part in zip(dists, parts):
            for c in part.checks:
                c.bound_id = f"{c.bound_id}:{d.variant}[d={d.d}]"
        out.constants = {f"{d.variant}[d={d.d}]": part.constants for d, part in zip(dists, parts)}
        return out
    raise ConfigError(f"config.suite: unknown suite {name!r}")


def run_config(cfg: ExperimentConfig, output_dir, threads: int | None = None) -> dict:
    """Run every enabled suite and write its artifacts; returns the summary."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    head = report.provenance(__version__, h, cfg.seed)
    summary = {"schema_version": report.SUMMARY_SCHEMA_VERSION, "tool_version": __version__,
               "config_hash": h, "seed": cfg.seed, "suite": cfg.suite, "suites": {}}
    report.write(out / "config.yaml", "\n".join(head) + "\n" + cfg.dumps("yaml", canonical=True))
    for name in cfg.suites:
        log.info("running suite %s", name)
        res = run_suite(name, cfg, threads)
        files = []
        for table, rows in res.tables.items():
            fname = f"{name}_{table}.csv" if not table.startswith(name) else f"{table}.csv"
            report.write(out / fname, report.csv_text(rows, head))
            files.append(fname)
        for pname, plot in res.plots.items():
            fname = f"{pname}.dat"
            report.write(out / fname, report.plot_text(plot, head))
            files.append(fname)
        s = res.summary()
        s["files"] = sorted(files)
        summary["suites"][name] = s
        log.info("suite %s: %s", name, "pass" if res.passed else "FAIL")
    summary["passed"] = all(s["passed"] for s in summary["suites"].values())
    report.write(out / "summary.json", report.summary_text(summary))
    return summary


def _margin_report(summary: dict) -> str:
    lines = []
    for name, s in summary["suites"].items():
        for c in s["checks"]:
            if not c["passed"]:
                lines.append(f"FAIL {name}/{c['id']}: {c['failures']} of {c['points']} points; "
                             f"worst {c['worst_label']} margin {c['worst_margin']:.6g} "
                             f"(se {c['worst_se']:.3g}, z={c['z']:g})")
    return "\n".join(lines)


def _cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.load(args.config)
        cfg = cfg.with_overrides(seed=args.seed, budget=args.budget)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.output_dir or cfg.get("output_dir") or "exitwalk-out"
    threads = args.threads or cfg.get("threads")
    summary = run_config(cfg, out, threads)
    for name, s in summary["suites"].items():
        print(f"{name}: {'PASS' if s['passed'] else 'FAIL'}")
    if not summary["passed"]:
        print(_margin_report(summary), file=sys.stderr)
        return 1
    return 0


def _cmd_describe(args) -> int:
    try:
        text = Path(args.spec).read_text() if os.path.exists(args.spec) else args.spec
        data = parse_text(text, args.spec)
        if "distribution" in data and isinstance(data["distribution"], dict):
            data = data["distribution"]
        dist = distribution_from_dict(data)
    except (ConfigError, DistributionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(describe(dist, args.p))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="exitwalk", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"exitwalk {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the suites of an experiment config")
    r.add_argument("config", help="YAML or JSON experiment file")
    r.add_argument("--output-dir", help="directory for CSV, plot data and summary.json")
    r.add_argument("--threads", type=int, help="worker threads (default: $EXITWALK_THREADS or CPU count)")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--budget", type=float, help="override the constant budget")
    r.set_defaults(func=_cmd_run)
    d = sub.add_parser("describe", help="summarize a distribution spec (file or inline YAML/JSON)")
    d.add_argument("spec")
    d.add_argument("--p", type=float, default=2.0, help="norm exponent for moment reporting")
    d.set_defaults(func=_cmd_describe)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
