"""A short evolutionary run on the first leg case, compared with random search.

Uses the shipped configuration with fewer generations so it finishes in a few
seconds. The full-length run is ``combot run --config configs/case1.json``.
"""

from dataclasses import replace
from pathlib import Path

from combot.config import load_config
from combot.evolve import evolve, random_search

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "case1.json")
problem, weights = cfg.build_problem(), cfg.weights_for_mode()
ea = replace(cfg.ea_for_seed(0), generations=40)

res = evolve(problem, weights, cfg.constraints, ea)
for gen in range(0, len(res.trace.best), 10):
    print(f"gen {gen:3d}  best {res.trace.best[gen]:8.4f}  valid {res.trace.valid_fraction[gen]:.2f}")
ev = res.best_evaluation
print(f"best: GA={ev.GA:.3f} MA={ev.MA:.4f} L={ev.L_rel_tot:.1f} mm crossings={ev.n_overlap} "
      f"elements={int(res.best_genome[:res.layout.n_elements].sum())}")

_, rs = random_search(problem, weights, cfg.constraints, budget=res.trace.n_evaluations, seed=0)
print(f"random search with the same {res.trace.n_evaluations} evaluations: fitness {rs.fitness:.4f} "
      f"vs EA {ev.fitness:.4f}")
