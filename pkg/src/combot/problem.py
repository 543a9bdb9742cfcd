"""Synthesis problem definitions: the three leg cases and the baseline fixture."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .fem import CrossSection, FrameModel, Material, SpringAttachment, unit
from .geometry import CROSS_TOL, CrossingScreen, DesignDomain, GroundStructure, build_ground_structure

# Filament presets (moduli in MPa). Print settings are kept for reference only.
MATERIAL_PRESETS = {
    "design": {"young_modulus": 800.0, "note": "modulus used during synthesis"},
    "ultimaker_abs": {"young_modulus": 2070.0, "note": "0.06 mm layers, 225 C nozzle, 80 C plate, 50 mm/s"},
    "ultimaker_pp": {"young_modulus": 305.0, "note": "0.08 mm layers, 205 C nozzle, 85 C plate, 25 mm/s"},
    "basf_pp": {"young_modulus": 512.0, "note": "470-554 MPa; 0.08 mm layers, 230 C nozzle, 75 C plate"},
}


@dataclass
class ProblemSpec:
    """Everything needed to turn a genome into an analysed structure.

    Node references (``input_node``, ``output_node``, ``supports``,
    ``fixed_nodes``) use 1-based node ids.
    """

    structure: GroundStructure
    input_node: int
    input_direction: tuple[float, float, float]
    output_node: int
    output_direction: tuple[float, float, float]
    supports: tuple[int, ...]
    d_in: float = 5.0
    external_load: tuple[float, float, float] = (1.0, 1.0, 1.0)
    material: Material = field(default_factory=Material)
    section: CrossSection = field(default_factory=CrossSection)
    spring_stiffness: float = 0.1
    cross_tol: float = CROSS_TOL
    name: str = "custom"

    def __post_init__(self):
        ids = {n.id for n in self.structure.nodes}
        for nid in (self.input_node, self.output_node, *self.supports):
            if nid not in ids:
                raise ValueError(f"node id {nid} does not exist on the grid")
        if not self.supports:
            raise ValueError("at least one support node is required")
        if self.input_node == self.output_node:
            raise ValueError("input and end-effector nodes must differ")
        if self.input_node in self.supports or self.output_node in self.supports:
            raise ValueError("port nodes cannot be supports")
        if not self.d_in > 0:
            raise ValueError("d_in must be positive")
        self.input_direction = tuple(unit(self.input_direction))
        self.output_direction = tuple(unit(self.output_direction))
        self.supports = tuple(int(s) for s in self.supports)

    @property
    def anchors(self) -> tuple[int, ...]:
        return (self.input_node, self.output_node, *self.supports)

    @functools.cached_property
    def crossing_screen(self) -> CrossingScreen:
        return CrossingScreen(self.structure, self.cross_tol)

    @property
    def spring(self) -> SpringAttachment:
        return SpringAttachment(self.spring_stiffness, self.output_direction)

    def index(self, node_id: int) -> int:
        return self.structure.node_index()[node_id]

    def frame_model(self, positions: np.ndarray, elements: np.ndarray) -> FrameModel:
        idx = self.structure.node_index()
        return FrameModel(
            positions=positions,
            elements=elements,
            supports=[idx[s] for s in self.supports],
            input_node=idx[self.input_node],
            input_direction=self.input_direction,
            output_node=idx[self.output_node],
            output_direction=self.output_direction,
            material=self.material,
            section=self.section,
        )

    def loads(self):
        return [(self.index(self.output_node), self.external_load)]


def _diag(*c):
    return tuple(unit(c))


# Per-case port layouts. Input and end-effector ids and the domain sizes come
# from the design-parameter table; the direction vectors for cases 2 and 3 are
# this package's reading of the case sketches.
CASES = {
    1: dict(size=(50.0, 30.0, 20.0), output_node=9, input_direction=(0.0, 1.0, 0.0),
            output_direction=_diag(0.0, -1.0, -1.0), external_load=(1.0, 1.0, 1.0)),
    2: dict(size=(50.0, 30.0, 20.0), output_node=9, input_direction=(0.0, -1.0, 0.0),
            output_direction=_diag(0.0, 1.0, -1.0), external_load=(1.0, -1.0, 1.0)),
    3: dict(size=(50.0, 50.0, 30.0), output_node=3, input_direction=(0.0, 1.0, 0.0),
            output_direction=_diag(0.0, -1.0, -1.0), external_load=(1.0, 1.0, 1.0)),
}


def make_problem(*, domain_size, node_grid=(3, 3, 2), connectivity_degree: int = 1, input_node: int = 13,
                 output_node: int, supports=(1, 4, 7, 10, 16), input_direction, output_direction,
                 wander_range=(2.0, 2.0, 2.0), wander_step: float = 1.0, anchors_wander: bool = False,
                 **kwargs) -> ProblemSpec:
    """Ground structure on a regular grid plus ports; ``kwargs`` go to ProblemSpec."""
    domain = DesignDomain(domain_size, node_grid, connectivity_degree)
    gs = build_ground_structure(domain)
    fixed = () if anchors_wander else (input_node, output_node, *supports)
    gs = gs.with_wandering(wander_range, wander_step, fixed)
    return ProblemSpec(structure=gs, input_node=input_node, input_direction=input_direction,
                       output_node=output_node, output_direction=output_direction,
                       supports=tuple(supports), **kwargs)


def make_case(case: int, **overrides) -> ProblemSpec:
    """One of the three canonical problems (3x3x2 grid, degree 1, 89 elements).

    Keyword overrides replace the case defaults (see ``make_problem``).
    """
    if case not in CASES:
        raise ValueError(f"unknown case {case}; expected one of {sorted(CASES)}")
    params = dict(CASES[case])
    params["domain_size"] = params.pop("size")
    params.update(overrides)
    params.setdefault("name", f"case{case}")
    return make_problem(**params)


def baseline_fixture() -> tuple[FrameModel, float, SpringAttachment]:
    """Two-beam reference leg: a straight beam carries the input to the end-effector.

    The input node drives the end-effector axially along +Y through a 15 mm
    beam; the end-effector hangs from the support on a slender 50 mm beam that
    bends out of the way. Returns the model, d_in and the output spring.
    """
    positions = np.array([[0.0, 0.0, 0.0],     # input
                          [0.0, 15.0, 0.0],    # end-effector
                          [50.0, 15.0, 0.0]])  # support
    model = FrameModel(positions, [[0, 1], [1, 2]], supports=[2], input_node=0,
                       input_direction=(0, 1, 0), output_node=1, output_direction=(0, 1, 0))
    return model, 5.0, SpringAttachment(0.1, (0.0, 1.0, 0.0))


def lever_fixture() -> tuple[FrameModel, float]:
    """Triangulated 2:1 lever pinned near the origin, driven along +Z.

    The lever is a stiff truss; the pivot node is held in translation by three
    axial stubs whose bending offers little resistance to rotation, so the
    structure behaves like a rigid lever with output arm twice the input arm.
    """
    positions = np.array([
        [0.0, 0.0, 0.0],     # 0 pivot
        [20.0, 0.0, 0.0],    # 1 input
        [40.0, 0.0, 0.0],    # 2 end-effector
        [10.0, 0.0, 10.0],   # 3 upper chord
        [30.0, 0.0, 10.0],   # 4 upper chord
        [0.0, 0.0, -20.0],   # 5 support below
        [-20.0, 0.0, 0.0],   # 6 support behind
        [0.0, -20.0, 0.0],   # 7 support beside
    ])
    elements = [[0, 1], [1, 2], [0, 3], [3, 1], [1, 4], [4, 2], [3, 4], [0, 5], [0, 6], [0, 7]]
    model = FrameModel(positions, elements, supports=[5, 6, 7], input_node=1,
                       input_direction=(0, 0, 1), output_node=2, output_direction=(0, 0, 1))
    return model, 1.0
