"""Run configuration: a JSON document with keys named after the design-parameter table.

A config is resolved against the defaults of its ``case`` (1, 2 or 3), so a
file only needs the keys it changes. ``to_dict`` always writes the fully
resolved, canonical form; parsing that output gives back an equal config.

Example::

    {
      "case": 1,
      "objective_mode": "ga",
      "seeds": [0, 1, 2],
      "problem": {"d_in": 5.0, "E": 800.0},
      "ea": {"population_size": 100, "generations": 100}
    }
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .evolve import EaConfig
from .fem import CrossSection, Material
from .objective import MODES, Constraints, Weights
from .problem import CASES, MATERIAL_PRESETS, ProblemSpec, make_problem

FORMAT_VERSION = 1


class ConfigError(ValueError):
    """Schema or value problem in a run configuration."""


PROBLEM_KEYS = (
    "domain_size", "node_grid", "connectivity_degree", "input_node", "end_effector_node", "support_nodes",
    "input_direction", "output_direction", "d_in", "external_loads", "material_preset", "E", "poisson_ratio",
    "element_dims", "k_spring", "wander_range", "wander_step", "anchors_wander", "cross_tol",
)
EA_KEYS = tuple(f.name for f in fields(EaConfig) if f.name not in ("rng_seed", "workers"))
WEIGHT_KEYS = ("w1", "w2", "w3", "w4")
CONSTRAINT_KEYS = ("L_des_tot", "d_out_des")
TOP_KEYS = ("case", "objective_mode", "seeds", "workers", "output_dir", "problem", "weights", "constraints", "ea")


def case_problem_defaults(case: int) -> dict:
    c = CASES[case]
    return {
        "domain_size": list(c["size"]),
        "node_grid": [3, 3, 2],
        "connectivity_degree": 1,
        "input_node": 13,
        "end_effector_node": c["output_node"],
        "support_nodes": [1, 4, 7, 10, 16],
        "input_direction": list(c["input_direction"]),
        "output_direction": list(c["output_direction"]),
        "d_in": 5.0,
        "external_loads": list(c["external_load"]),
        "material_preset": "design",
        "E": MATERIAL_PRESETS["design"]["young_modulus"],
        "poisson_ratio": Material().poisson_ratio,
        "element_dims": [1.0, 1.0],
        "k_spring": 0.1,
        "wander_range": [2.0, 2.0, 2.0],
        "wander_step": 1.0,
        "anchors_wander": False,
        "cross_tol": 0.5,
    }


@dataclass
class RunConfig:
    case: int = 1
    objective_mode: str = "ga"
    seeds: list[int] = field(default_factory=lambda: [0])
    workers: int = 1
    output_dir: str = "runs"
    problem: dict = field(default_factory=lambda: case_problem_defaults(1))
    weights: Weights = field(default_factory=Weights)
    constraints: Constraints = field(default_factory=Constraints)
    ea: EaConfig = field(default_factory=EaConfig)

    def to_dict(self) -> dict:
        w = asdict(self.weights)
        w.pop("objective_mode")
        ea = {k: getattr(self.ea, k) for k in EA_KEYS}
        return {
            "format_version": FORMAT_VERSION,
            "case": self.case,
            "objective_mode": self.objective_mode,
            "seeds": list(self.seeds),
            "workers": self.workers,
            "output_dir": self.output_dir,
            "problem": copy.deepcopy(self.problem),
            "weights": w,
            "constraints": asdict(self.constraints),
            "ea": ea,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def with_overrides(self, *, seed=None, objective=None, workers=None, output_dir=None) -> "RunConfig":
        d = self.to_dict()
        if seed is not None:
            d["seeds"] = [int(seed)]
        if objective is not None:
            d["objective_mode"] = objective
        if workers is not None:
            d["workers"] = int(workers)
        if output_dir is not None:
            d["output_dir"] = str(output_dir)
        return parse_config(d)

    def config_hash(self) -> str:
        """Digest of everything that affects results (not seeds, workers or paths)."""
        d = self.to_dict()
        for k in ("seeds", "workers", "output_dir"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def weights_for_mode(self) -> Weights:
        return Weights(**{k: getattr(self.weights, k) for k in WEIGHT_KEYS}, objective_mode=self.objective_mode)

    def ea_for_seed(self, seed: int) -> EaConfig:
        return EaConfig(**{k: getattr(self.ea, k) for k in EA_KEYS}, rng_seed=int(seed), workers=self.workers)

    def build_problem(self) -> ProblemSpec:
        return problem_from_dict(self.problem, name=f"case{self.case}")


def _vec(value, n, key):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"problem.{key}: expected a list of {n} numbers, got {value!r}")
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"problem.{key}: expected numbers, got {value!r}") from None


def _normalize_problem(p: dict) -> dict:
    out = dict(p)
    for key, n in (("domain_size", 3), ("input_direction", 3), ("output_direction", 3),
                   ("external_loads", 3), ("element_dims", 2), ("wander_range", 3)):
        out[key] = _vec(out[key], n, key)
    for key in ("node_grid", "support_nodes"):
        if not isinstance(out[key], (list, tuple)):
            raise ConfigError(f"problem.{key}: expected a list of integers")
        try:
            out[key] = [int(v) for v in out[key]]
        except (TypeError, ValueError):
            raise ConfigError(f"problem.{key}: expected integers, got {out[key]!r}") from None
    for key in ("connectivity_degree", "input_node", "end_effector_node"):
        if isinstance(out[key], bool) or not isinstance(out[key], int):
            raise ConfigError(f"problem.{key}: expected an integer, got {out[key]!r}")
    for key in ("d_in", "E", "poisson_ratio", "k_spring", "wander_step", "cross_tol"):
        try:
            out[key] = float(out[key])
        except (TypeError, ValueError):
            raise ConfigError(f"problem.{key}: expected a number, got {out[key]!r}") from None
    if not isinstance(out["anchors_wander"], bool):
        raise ConfigError("problem.anchors_wander: expected true or false")
    preset = out["material_preset"]
    if preset is not None and preset not in MATERIAL_PRESETS:
        raise ConfigError(f"problem.material_preset: unknown preset {preset!r}; "
                          f"choose from {sorted(MATERIAL_PRESETS)} or null")
    return out


def problem_from_dict(p: dict, name: str = "custom") -> ProblemSpec:
    try:
        return make_problem(
            domain_size=p["domain_size"], node_grid=p["node_grid"], connectivity_degree=p["connectivity_degree"],
            input_node=p["input_node"], output_node=p["end_effector_node"], supports=p["support_nodes"],
            input_direction=p["input_direction"], output_direction=p["output_direction"],
            wander_range=p["wander_range"], wander_step=p["wander_step"], anchors_wander=p["anchors_wander"],
            d_in=p["d_in"], external_load=tuple(p["external_loads"]),
            material=Material(p["E"], p["poisson_ratio"]), section=CrossSection(*p["element_dims"]),
            spring_stiffness=p["k_spring"], cross_tol=p["cross_tol"], name=name,
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"problem: {exc}") from exc


def _section(d: dict, name: str, keys) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{name}: expected an object")
    unknown = set(d) - set(keys)
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {sorted(unknown)}")
    return d


def parse_config(data: dict, case: int | None = None) -> RunConfig:
    """Validate ``data`` and resolve it against case defaults.

    ``case`` (when given) takes precedence over the ``case`` key in ``data``.
    """
    data = _section(dict(data), "config", TOP_KEYS + ("format_version",))
    version = data.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigError(f"format_version: unsupported version {version!r}")
    case = case if case is not None else data.get("case", 1)
    if case not in CASES:
        raise ConfigError(f"case: expected one of {sorted(CASES)}, got {case!r}")

    problem = case_problem_defaults(case)
    problem.update(_section(data.get("problem", {}), "problem", PROBLEM_KEYS))
    user_problem = data.get("problem", {})
    if "material_preset" in user_problem and "E" not in user_problem and user_problem["material_preset"]:
        preset = user_problem["material_preset"]
        if preset in MATERIAL_PRESETS:
            problem["E"] = MATERIAL_PRESETS[preset]["young_modulus"]
    elif "E" in user_problem and "material_preset" not in user_problem:
        problem["material_preset"] = None
    problem = _normalize_problem(problem)

    mode = data.get("objective_mode", "ga")
    if mode not in MODES:
        raise ConfigError(f"objective_mode: expected one of {list(MODES)}, got {mode!r}")
    seeds = data.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ConfigError("seeds: expected a non-empty list of non-negative integers")
    workers = data.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers: expected a positive integer")
    output_dir = data.get("output_dir", "runs")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir: expected a path string")

    try:
        weights = Weights(**_section(data.get("weights", {}), "weights", WEIGHT_KEYS))
        constraints = Constraints(**_section(data.get("constraints", {}), "constraints", CONSTRAINT_KEYS))
        ea = EaConfig(**_section(data.get("ea", {}), "ea", EA_KEYS))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(case, mode, list(seeds), workers, output_dir, problem, weights, constraints, ea)
    cfg.build_problem()  # surfaces node-id and port errors at parse time
    return cfg


def load_config(path, case: int | None = None) -> RunConfig:
    text = Path(path).read_text()  # OSError propagates to the caller
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(data, case)


def default_config(case: int = 1) -> RunConfig:
    return parse_config({"case": case})
