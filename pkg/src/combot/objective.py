"""Weighted-sum fitness for compliant leg candidates.

GA-only mode maximises

    GA - w1 * d_out_ext - w2 * |L_tot - L_des| - w3 * n_overlap

and GA-and-MA mode additionally subtracts ``w4 / MA``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import fem
from .geometry import count_crossings, element_lengths, total_length
from .problem import ProblemSpec

INVALID_FITNESS = -1.0e6
MODES = ("ga", "ga-ma")

REASONS = ("disconnected-input", "disconnected-output", "no-support-path", "singular",
           "stroke-too-small", "degenerate")


@dataclass(frozen=True)
class Weights:
    """Penalty weights; lengths in mm.

    The defaults are the mid-range published values converted from per-metre
    to per-millimetre (w1: 50/m, w2: 4/m).
    """

    w1: float = 0.05
    w2: float = 0.004
    w3: float = 1.0
    w4: float = 0.3
    objective_mode: str = "ga"

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3, self.w4) < 0:
            raise ValueError("weights must be non-negative")
        if self.objective_mode not in MODES:
            raise ValueError(f"objective_mode must be one of {MODES}")


@dataclass(frozen=True)
class Constraints:
    L_des_tot: float = 175.0
    d_out_des: float = 1.0

    def __post_init__(self):
        if not (self.L_des_tot > 0 and self.d_out_des > 0):
            raise ValueError("constraints must be positive")


@dataclass
class Candidate:
    positions: np.ndarray  # (n_nodes, 3) realized positions, ground-structure order
    elements: np.ndarray  # (m, 2) active elements as 0-based node indices
    element_ids: np.ndarray | None = None  # ground-structure element ids, if known
    mask: np.ndarray | None = None  # presence flags over all ground-structure elements


@dataclass
class Evaluation:
    valid: bool
    reason: str = ""
    GA: float = math.nan
    MA: float = math.nan
    d_out: float = math.nan
    d_out_ext: float = math.nan
    L_rel_tot: float = math.nan
    n_overlap: int = 0
    fitness: float = INVALID_FITNESS
    F_in: float = math.nan
    F_out: float = math.nan
    input_work: float = math.nan
    spring_work: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Evaluation":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def eq1(ev: Evaluation, weights: Weights, constraints: Constraints) -> float:
    return (ev.GA - weights.w1 * ev.d_out_ext - weights.w2 * abs(ev.L_rel_tot - constraints.L_des_tot)
            - weights.w3 * ev.n_overlap)


def eq2(ev: Evaluation, weights: Weights, constraints: Constraints) -> float:
    return eq1(ev, weights, constraints) - weights.w4 / ev.MA


def _measure(candidate: Candidate, problem: ProblemSpec) -> Evaluation:
    """FEM and geometry terms; fitness left unset."""
    ev = Evaluation(valid=False)
    el = candidate.elements
    ev.L_rel_tot = total_length(el, candidate.positions)
    if candidate.mask is not None and len(candidate.mask) == problem.structure.n_elements:
        ev.n_overlap = problem.crossing_screen.count(candidate.mask, candidate.positions)
    else:
        ev.n_overlap = count_crossings(el, candidate.positions, problem.cross_tol)
    if len(el) == 0:
        ev.reason = "disconnected-input"
        return ev
    if np.any(element_lengths(el, candidate.positions) < fem.LENGTH_MIN):
        ev.reason = "degenerate"
        return ev
    try:
        model = problem.frame_model(candidate.positions, el)
        res = fem.analyze(model, problem.d_in, problem.loads(), problem.spring)
    except fem.FemError as exc:
        ev.reason = exc.reason
        return ev
    ev.GA = fem.compute_ga(res.ga_result, problem.d_in, problem.output_direction)
    ev.d_out = ev.GA * problem.d_in
    ev.d_out_ext = float(np.linalg.norm(res.ext_result.output_translation))
    ma = res.ma
    ev.MA, ev.F_in, ev.F_out = ma.ma, ma.f_in, ma.f_out
    ev.input_work, ev.spring_work = ma.input_work, ma.spring_work
    ev.valid = True
    return ev


def check_validity(candidate: Candidate, problem: ProblemSpec, constraints: Constraints = Constraints()):
    """Return ``(True, "")`` or ``(False, reason_code)``."""
    ev = _measure(candidate, problem)
    if ev.valid and ev.d_out < constraints.d_out_des:
        return False, "stroke-too-small"
    return ev.valid, ev.reason


def _finish(ev: Evaluation, weights: Weights, constraints: Constraints, mode: str,
            floor: float) -> Evaluation:
    if ev.valid and ev.d_out < constraints.d_out_des:
        ev.valid, ev.reason = False, "stroke-too-small"
    if ev.valid and mode == "ga-ma" and not ev.MA > 0:
        # a non-positive MA makes w4/MA meaningless; treat as undefined
        ev.valid, ev.reason = False, "singular"
    if not ev.valid:
        ev.fitness = floor
        return ev
    ev.fitness = eq1(ev, weights, constraints) if mode == "ga" else eq2(ev, weights, constraints)
    if not math.isfinite(ev.fitness):
        ev.valid, ev.reason, ev.fitness = False, "singular", floor
    return ev


def evaluate_ga_only(candidate: Candidate, problem: ProblemSpec, weights: Weights = Weights(),
                     constraints: Constraints = Constraints(), floor: float = INVALID_FITNESS) -> Evaluation:
    return _finish(_measure(candidate, problem), weights, constraints, "ga", floor)


def evaluate_ga_ma(candidate: Candidate, problem: ProblemSpec, weights: Weights = Weights(),
                   constraints: Constraints = Constraints(), floor: float = INVALID_FITNESS) -> Evaluation:
    return _finish(_measure(candidate, problem), weights, constraints, "ga-ma", floor)


def evaluate(candidate: Candidate, problem: ProblemSpec, weights: Weights = Weights(),
             constraints: Constraints = Constraints(), floor: float = INVALID_FITNESS) -> Evaluation:
    """Dispatch on ``weights.objective_mode``."""
    return _finish(_measure(candidate, problem), weights, constraints, weights.objective_mode, floor)
