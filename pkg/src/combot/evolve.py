"""Bitstring genetic algorithm over element-presence bits and node offsets.

A genome is a flat ``uint8`` array of 0/1 values: one presence bit per ground
structure element followed by the packed offset codes of every wandering
node axis. All random draws come from one sequential ``numpy`` generator, so a
run is reproducible for a given seed regardless of how many worker processes
evaluate fitness.
"""

from __future__ import annotations

import math
import multiprocessing
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .objective import INVALID_FITNESS, Candidate, Constraints, Evaluation, Weights, evaluate
from .problem import ProblemSpec

EPS_SHIFT = 1e-6


@dataclass(frozen=True)
class EaConfig:
    population_size: int = 200
    generations: int = 1000
    crossover_probability: float = 0.95
    mutation_probability: float = 0.09
    mutation_mode: str = "per_bit"  # or "per_genome": one bit flipped with that probability
    elite_count: int = 2
    rng_seed: int = 0
    max_retry: int = 20
    init_on_probability: float = 0.5
    workers: int = 1

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        for name in ("crossover_probability", "mutation_probability", "init_on_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must be smaller than population_size")
        if self.mutation_mode not in ("per_bit", "per_genome"):
            raise ValueError("mutation_mode must be 'per_bit' or 'per_genome'")
        if self.max_retry < 0 or self.workers < 1:
            raise ValueError("max_retry must be >= 0 and workers >= 1")


class GenomeLayout:
    """Maps between bitstrings and (active elements, offset codes).

    Each wandering axis with ``n`` lattice levels gets ``ceil(log2(n))`` bits;
    the raw value ``r`` is spread evenly over the levels, so every bit pattern
    decodes to an in-range offset.
    """

    def __init__(self, problem: ProblemSpec):
        self.problem = problem
        gs = problem.structure
        self.n_elements = gs.n_elements
        self.connectivity = gs.connectivity()
        self.element_ids = np.array([e.id for e in gs.elements])
        fields = []  # (node index, axis, max_code, n_bits)
        for i, node in enumerate(gs.nodes):
            for axis, mc in enumerate(node.max_code):
                if mc > 0:
                    fields.append((i, axis, int(mc), int(math.ceil(math.log2(2 * mc + 1)))))
        self.fields = fields
        self.n_offset_bits = sum(f[3] for f in fields)
        self.length = self.n_elements + self.n_offset_bits
        self._weights = [1 << np.arange(f[3] - 1, -1, -1) for f in fields]
        self._bit_field = np.concatenate([np.full(f[3], k) for k, f in enumerate(fields)]).astype(int) \
            if fields else np.zeros(0, dtype=int)
        self._bit_weight = np.concatenate(self._weights).astype(float) if fields else np.zeros(0)
        self._field_node = np.array([f[0] for f in fields], dtype=int)
        self._field_axis = np.array([f[1] for f in fields], dtype=int)
        self._field_mc = np.array([f[2] for f in fields], dtype=float)
        self._field_den = np.array([(1 << f[3]) - 1 for f in fields], dtype=float)
        self._base = gs.base_positions()
        self._step = np.array([n.wander_step for n in gs.nodes])

    @staticmethod
    def _level(raw: int, max_code: int, n_bits: int) -> int:
        return int(math.floor(raw * (2 * max_code) / ((1 << n_bits) - 1) + 0.5)) - max_code

    def _raw_for(self, level: int, max_code: int, n_bits: int) -> int:
        for raw in range(1 << n_bits):
            if self._level(raw, max_code, n_bits) == level:
                return raw
        raise ValueError(f"level {level} not representable")

    def offset_codes(self, genome: np.ndarray) -> np.ndarray:
        codes = np.zeros((self.problem.structure.n_nodes, 3), dtype=int)
        if self.fields:
            bits = genome[self.n_elements:].astype(float)
            raw = np.bincount(self._bit_field, weights=bits * self._bit_weight, minlength=len(self.fields))
            level = np.floor(raw * (2 * self._field_mc) / self._field_den + 0.5) - self._field_mc
            codes[self._field_node, self._field_axis] = level.astype(int)
        return codes

    def decode(self, genome: np.ndarray) -> Candidate:
        genome = np.asarray(genome)
        if genome.shape != (self.length,):
            raise ValueError(f"genome length {genome.shape} != {self.length}")
        mask = genome[:self.n_elements].astype(bool)
        # codes are in range by construction, so skip the checked decode_positions path
        positions = self._base + self._step[:, None] * self.offset_codes(genome)
        return Candidate(positions, self.connectivity[mask], self.element_ids[mask], mask)

    def encode(self, active_ids: Sequence[int], codes: np.ndarray | None = None) -> np.ndarray:
        g = np.zeros(self.length, dtype=np.uint8)
        pos_of = {eid: k for k, eid in enumerate(self.element_ids)}
        for eid in active_ids:
            g[pos_of[eid]] = 1
        pos = self.n_elements
        for i, axis, mc, nb in self.fields:
            level = 0 if codes is None else int(codes[i, axis])
            raw = self._raw_for(level, mc, nb)
            g[pos:pos + nb] = [(raw >> (nb - 1 - b)) & 1 for b in range(nb)]
            pos += nb
        return g

    def random(self, rng: np.random.Generator, on_probability: float = 0.5) -> np.ndarray:
        g = np.empty(self.length, dtype=np.uint8)
        g[:self.n_elements] = rng.random(self.n_elements) < on_probability
        pos = self.n_elements
        for i, axis, mc, nb in self.fields:
            raw = self._raw_for(int(rng.integers(-mc, mc + 1)), mc, nb)
            g[pos:pos + nb] = [(raw >> (nb - 1 - b)) & 1 for b in range(nb)]
            pos += nb
        return g


# ---------------------------------------------------------------------------
# operators


def selection_fitness(evals: Sequence[Evaluation]) -> np.ndarray:
    """Fitness used for ranking: invalid individuals sit one below the worst valid one."""
    f = np.array([e.fitness for e in evals], dtype=float)
    valid = np.array([e.valid for e in evals], dtype=bool)
    floor = f[valid].min() - 1.0 if valid.any() else 0.0
    f[~valid] = floor
    return f


def proportional_select(weights, rng: np.random.Generator, size: int | None = None):
    """Draw indices with probability proportional to non-negative ``weights``."""
    cdf = np.cumsum(np.asarray(weights, dtype=float))
    u = rng.random(1 if size is None else size) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    return int(idx[0]) if size is None else idx


def roulette_select(fitness, rng: np.random.Generator, size: int | None = None):
    """Fitness-proportional draw on ``fitness - min + EPS_SHIFT``; returns indices."""
    f = np.asarray(fitness, dtype=float)
    return proportional_select(f - f.min() + EPS_SHIFT, rng, size)


def one_point_crossover(a: np.ndarray, b: np.ndarray, rng: np.random.Generator,
                        probability: float = 1.0, cut: int | None = None):
    if len(a) != len(b):
        raise ValueError("parents differ in length")
    if rng.random() >= probability or len(a) < 2:
        return a.copy(), b.copy()
    k = int(rng.integers(1, len(a))) if cut is None else cut
    return np.concatenate([a[:k], b[k:]]), np.concatenate([b[:k], a[k:]])


def bitflip_mutate(genome: np.ndarray, rate: float, rng: np.random.Generator,
                   mode: str = "per_bit") -> np.ndarray:
    g = genome.copy()
    if mode == "per_bit":
        g[rng.random(len(g)) < rate] ^= 1
    elif rng.random() < rate:
        g[rng.integers(len(g))] ^= 1
    return g


# ---------------------------------------------------------------------------
# evaluation with optional worker pool

_WORKER = None


def _init_worker(problem, weights, constraints):
    global _WORKER
    _WORKER = Evaluator(problem, weights, constraints, workers=1)


def _eval_in_worker(genome_bytes: bytes) -> Evaluation:
    return _WORKER.evaluate_one(np.frombuffer(genome_bytes, dtype=np.uint8))


class Evaluator:
    """Caching genome -> Evaluation map; parallel over candidates when workers > 1."""

    def __init__(self, problem: ProblemSpec, weights: Weights = Weights(),
                 constraints: Constraints = Constraints(), workers: int = 1):
        self.problem, self.weights, self.constraints = problem, weights, constraints
        self.layout = GenomeLayout(problem)
        self.workers = workers
        self.cache: dict[bytes, Evaluation] = {}
        self.n_evaluations = 0
        self._pool = None

    def evaluate_one(self, genome: np.ndarray) -> Evaluation:
        return evaluate(self.layout.decode(genome), self.problem, self.weights, self.constraints)

    def __call__(self, genomes: Sequence[np.ndarray]) -> list[Evaluation]:
        self.n_evaluations += len(genomes)
        keys = [np.asarray(g, dtype=np.uint8).tobytes() for g in genomes]
        todo = list(dict.fromkeys(k for k in keys if k not in self.cache))
        if todo:
            if self.workers > 1 and len(todo) > 1:
                if self._pool is None:
                    self._pool = multiprocessing.get_context("spawn").Pool(
                        self.workers, _init_worker, (self.problem, self.weights, self.constraints))
                results = self._pool.map(_eval_in_worker, todo, chunksize=max(1, len(todo) // (4 * self.workers)))
            else:
                results = [self.evaluate_one(np.frombuffer(k, dtype=np.uint8)) for k in todo]
            self.cache.update(zip(todo, results))
        return [self.cache[k] for k in keys]

    def close(self):
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None


# ---------------------------------------------------------------------------
# main loop


@dataclass
class RunTrace:
    best: list[float] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    valid_fraction: list[float] = field(default_factory=list)
    best_genomes: list[np.ndarray] = field(default_factory=list)
    wall_clock: list[float] = field(default_factory=list)
    n_evaluations: int = 0

    def record(self, pop, evals, sel, t0):
        k = int(np.argmax(sel))
        valid = [e.fitness for e in evals if e.valid]
        self.best.append(float(evals[k].fitness))
        self.mean.append(float(np.mean(valid)) if valid else math.nan)
        self.valid_fraction.append(len(valid) / len(evals))
        self.best_genomes.append(pop[k].copy())
        self.wall_clock.append(time.perf_counter() - t0)


@dataclass
class EvolveResult:
    trace: RunTrace
    best_genome: np.ndarray
    best_evaluation: Evaluation
    population: list[np.ndarray]
    evaluations: list[Evaluation]
    layout: GenomeLayout


def _fill(slots: int, make: Callable[[], np.ndarray], evaluator: Evaluator, max_retry: int):
    """Produce ``slots`` genomes, regenerating invalid ones up to ``max_retry`` times.

    Regeneration happens in rounds over all still-invalid slots (in slot
    order), so the RNG stream does not depend on evaluation parallelism.
    """
    genomes = [make() for _ in range(slots)]
    evals = evaluator(genomes)
    pending = [s for s in range(slots) if not evals[s].valid]
    for _ in range(max_retry):
        if not pending:
            break
        for s in pending:
            genomes[s] = make()
        for s, ev in zip(pending, evaluator([genomes[s] for s in pending])):
            evals[s] = ev
        pending = [s for s in pending if not evals[s].valid]
    return genomes, evals


def random_population(problem: ProblemSpec, config: EaConfig, rng: np.random.Generator,
                      evaluator: Evaluator | None = None):
    """Random genomes, resampled up to ``max_retry`` times while invalid."""
    evaluator = evaluator or Evaluator(problem)
    layout = evaluator.layout
    return _fill(config.population_size, lambda: layout.random(rng, config.init_on_probability),
                 evaluator, config.max_retry)


def evolve(problem: ProblemSpec, weights: Weights = Weights(), constraints: Constraints = Constraints(),
           config: EaConfig = EaConfig(), callback: Callable | None = None,
           evaluator: Evaluator | None = None) -> EvolveResult:
    """Generational GA with elitism.

    ``callback(generation, genomes, evaluations)`` is invoked after every
    generation, including the initial one (generation 0). The trace has
    ``config.generations`` entries.
    """
    rng = np.random.default_rng(config.rng_seed)
    own = evaluator is None
    evaluator = evaluator or Evaluator(problem, weights, constraints, workers=config.workers)
    layout = evaluator.layout
    trace = RunTrace()
    t0 = time.perf_counter()
    try:
        pop, evals = random_population(problem, config, rng, evaluator)
        sel = selection_fitness(evals)
        trace.record(pop, evals, sel, t0)
        if callback:
            callback(0, pop, evals)
        for gen in range(1, config.generations):
            order = np.argsort(-sel, kind="stable")
            elites = [pop[i] for i in order[:config.elite_count]]
            elite_evals = [evals[i] for i in order[:config.elite_count]]
            def make_child(pop=pop, sel=sel):
                i, j = roulette_select(sel, rng, size=2)
                child, _ = one_point_crossover(pop[i], pop[j], rng, config.crossover_probability)
                return bitflip_mutate(child, config.mutation_probability, rng, config.mutation_mode)

            children, child_evals = _fill(config.population_size - config.elite_count, make_child,
                                          evaluator, config.max_retry)
            pop = elites + children
            evals = elite_evals + child_evals
            sel = selection_fitness(evals)
            trace.record(pop, evals, sel, t0)
            if callback:
                callback(gen, pop, evals)
    finally:
        trace.n_evaluations = evaluator.n_evaluations
        if own:
            evaluator.close()
    k = int(np.argmax(sel))
    return EvolveResult(trace, pop[k].copy(), evals[k], pop, evals, layout)


def random_search(problem: ProblemSpec, weights: Weights, constraints: Constraints, budget: int,
                  seed: int = 0, on_probability: float = 0.5, batch: int = 1000) -> tuple[np.ndarray, Evaluation]:
    """Best of ``budget`` independent random genomes (baseline for the GA)."""
    rng = np.random.default_rng(seed)
    evaluator = Evaluator(problem, weights, constraints)
    best_g, best_e = None, None
    done = 0
    while done < budget:
        n = min(batch, budget - done)
        genomes = [evaluator.layout.random(rng, on_probability) for _ in range(n)]
        for g, e in zip(genomes, evaluator(genomes)):
            if best_e is None or (e.valid, e.fitness) > (best_e.valid, best_e.fitness):
                best_g, best_e = g, e
        evaluator.cache.clear()
        done += n
    return best_g, best_e
