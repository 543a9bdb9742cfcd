"""Command-line front end: ``combot {run,evaluate,export-mesh,plot}``.

Exit codes: 0 success, 2 configuration error, 3 invalid structure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, default_config, load_config, parse_config
from .evolve import evolve
from .export import (ExportError, baseline_record, convergence_csv, dumps_json, evaluate_record, export_mesh,
                     read_json, structure_record)
from .plots import plot_reports

EXIT_OK, EXIT_CONFIG, EXIT_INVALID, EXIT_IO = 0, 2, 3, 4

REPORT_FIELDS = ("GA", "MA", "d_out", "d_out_ext", "L_rel_tot", "n_overlap", "fitness")


class InvalidStructure(Exception):
    pass


def resolve_config(args) -> RunConfig:
    case = getattr(args, "case", None)
    path = getattr(args, "config", None)
    cfg = load_config(path, case) if path else default_config(case or 1)
    return cfg.with_overrides(seed=getattr(args, "seed", None), objective=getattr(args, "objective", None),
                              workers=getattr(args, "workers", None), output_dir=getattr(args, "out", None))


def first_generation(best_genomes, genome) -> int:
    for g, b in enumerate(best_genomes):
        if np.array_equal(b, genome):
            return g
    return len(best_genomes) - 1


def run_seed(cfg: RunConfig, seed: int, seed_dir: Path, log=print) -> dict:
    """One EA run; writes every artifact for the seed into ``seed_dir``."""
    problem = cfg.build_problem()
    weights = cfg.weights_for_mode()
    snapshot = cfg.with_overrides(seed=seed)
    t0 = time.perf_counter()
    result = evolve(problem, weights, cfg.constraints, cfg.ea_for_seed(seed))
    runtime = time.perf_counter() - t0
    layout, best = result.layout, result.best_evaluation
    cand = layout.decode(result.best_genome)
    provenance = {
        "config_hash": cfg.config_hash(),
        "seed": seed,
        "generation": first_generation(result.trace.best_genomes, result.best_genome),
        "objective_mode": cfg.objective_mode,
        "version": __version__,
        "genome": "".join(map(str, result.best_genome.tolist())),
    }
    record = structure_record(problem, cand, best, weights, cfg.constraints, provenance)

    seed_dir.mkdir(parents=True, exist_ok=True)
    (seed_dir / "config.json").write_text(snapshot.dumps())
    (seed_dir / "structure.json").write_text(dumps_json(record))
    tr = result.trace
    (seed_dir / "convergence.csv").write_text(convergence_csv(tr.best, tr.mean, tr.valid_fraction))
    population = [dict(ev.to_dict(), genome="".join(map(str, g.tolist())))
                  for g, ev in zip(result.population, result.evaluations)]
    (seed_dir / "population.json").write_text(dumps_json({"seed": seed, "candidates": population}))
    metrics = {
        "seed": seed,
        "case": cfg.case,
        "objective_mode": cfg.objective_mode,
        "config_hash": cfg.config_hash(),
        "version": __version__,
        "best": best.to_dict(),
        "fitness_by_mode": record["fitness_by_mode"],
        "n_elements": int(len(cand.elements)),
        "n_evaluations": tr.n_evaluations,
        "generations": len(tr.best),
        "runtime_s": runtime,
    }
    (seed_dir / "metrics.json").write_text(dumps_json(metrics))
    if len(cand.elements):
        export_mesh(record, seed_dir / "mesh.stl")
    plot_reports(seed_dir)
    log(f"seed {seed}: valid={best.valid} GA={best.GA:.4g} MA={best.MA:.4g} L={best.L_rel_tot:.1f} mm "
        f"n_overlap={best.n_overlap} fitness={best.fitness:.4g} ({runtime:.1f} s) -> {seed_dir}")
    return metrics


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    if args.generations is not None or args.population_size is not None:
        d = cfg.to_dict()
        if args.generations is not None:
            d["ea"]["generations"] = args.generations
        if args.population_size is not None:
            d["ea"]["population_size"] = args.population_size
        cfg = parse_config(d)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.dumps())
    for seed in cfg.seeds:
        run_seed(cfg, seed, out / f"seed_{seed}")
    return EXIT_OK


def _report(label, ev) -> str:
    if not ev.valid:
        return f"{label}: invalid ({ev.reason})"
    parts = [f"{k}={getattr(ev, k):.6g}" if k != "n_overlap" else f"{k}={ev.n_overlap}" for k in REPORT_FIELDS]
    return f"{label}: " + " ".join(parts)


def cmd_evaluate(args) -> int:
    record = baseline_record() if args.structure == "baseline" else read_json(args.structure)
    cfg = resolve_config(args)
    ga_only, ga_ma = evaluate_record(record, cfg.weights_for_mode(), cfg.constraints)
    print(_report("ga", ga_only))
    print(_report("ga-ma", ga_ma))
    if args.json:
        print(json.dumps({"ga": ga_only.to_dict(), "ga-ma": ga_ma.to_dict()}, default=float))
    if not ga_only.valid:
        raise InvalidStructure(ga_only.reason)
    return EXIT_OK


def cmd_export_mesh(args) -> int:
    record = baseline_record() if args.structure == "baseline" else read_json(args.structure)
    out = Path(args.output or (Path(getattr(args, "out", None) or ".") / "mesh.stl"))
    out.parent.mkdir(parents=True, exist_ok=True)
    data = export_mesh(record, out, tuple(args.thickness) if args.thickness else None)
    print(f"wrote {(len(data) - 84) // 50} triangles to {out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    for p in plot_reports(args.run_dir):
        print(p)
    return EXIT_OK


def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=default, help="run a single seed instead of the config's list")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--objective", choices=("ga", "ga-ma"), default=default, help="objective mode")
    parser.add_argument("--case", type=int, choices=(1, 2, 3), default=default, help="canonical case defaults")
    parser.add_argument("--workers", type=int, default=default, help="evaluation processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="combot", description="Evolutionary synthesis of compliant robot legs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run the genetic algorithm for each seed")
    p.add_argument("--generations", type=int, help="override ea.generations")
    p.add_argument("--population-size", type=int, help="override ea.population_size")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", parents=[common], help="analyse one structure file")
    p.add_argument("structure", help="structure JSON, or 'baseline' for the two-beam reference leg")
    p.add_argument("--json", action="store_true", help="also print both evaluations as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-mesh", parents=[common], help="write a binary STL of a structure")
    p.add_argument("structure", help="structure JSON, or 'baseline'")
    p.add_argument("-o", "--output", help="STL path (default: <out>/mesh.stl)")
    p.add_argument("--thickness", type=float, nargs=2, metavar=("WIDTH", "HEIGHT"),
                   help="beam cross-section in mm (default: from the structure file)")
    p.set_defaults(func=cmd_export_mesh)

    p = sub.add_parser("plot", parents=[common], help="regenerate SVG plots for a run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidStructure, ExportError) as exc:
        print(f"invalid structure: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
