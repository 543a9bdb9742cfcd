"""Linear static analysis of spatial Euler-Bernoulli beam frames.

Six DOFs per node in the order ux, uy, uz, rx, ry, rz. Lengths are in mm,
forces in N and moduli in MPa (N/mm^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

LENGTH_MIN = 1e-3
FORCE_MIN = 1e-9


class FemError(ValueError):
    """Base class for analysis failures that mark a candidate invalid."""

    reason = "singular"


class DegenerateElementError(FemError):
    reason = "degenerate"


class InvalidStructureError(FemError):
    def __init__(self, message: str, reason: str = "no-support-path"):
        super().__init__(message)
        self.reason = reason


class SingularSystemError(FemError):
    reason = "singular"


class UndefinedMAError(FemError):
    reason = "singular"


@dataclass(frozen=True)
class Material:
    young_modulus: float = 800.0
    poisson_ratio: float = 0.35

    def __post_init__(self):
        if not self.young_modulus > 0:
            raise ValueError("young_modulus must be positive")
        if not 0 <= self.poisson_ratio < 0.5:
            raise ValueError("poisson_ratio must lie in [0, 0.5)")

    @property
    def shear_modulus(self) -> float:
        return self.young_modulus / (2.0 * (1.0 + self.poisson_ratio))


def torsion_constant(width: float, height: float, n_terms: int = 50) -> float:
    """Saint-Venant torsion constant of a solid rectangle (series solution).

    For a square a x a this gives 0.1406 a^4.
    """
    a, b = max(width, height), min(width, height)
    n = np.arange(1, 2 * n_terms, 2, dtype=float)
    series = np.sum(np.tanh(n * math.pi * a / (2 * b)) / n**5)
    return a * b**3 / 3.0 * (1.0 - 192.0 / math.pi**5 * (b / a) * series)


@dataclass(frozen=True)
class CrossSection:
    width: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("cross-section dimensions must be positive")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def iy(self) -> float:
        # bending about the local y axis (deflection along local z, which carries `height`)
        return self.width * self.height**3 / 12.0

    @property
    def iz(self) -> float:
        return self.height * self.width**3 / 12.0

    @property
    def j(self) -> float:
        return torsion_constant(self.width, self.height)


@dataclass(frozen=True)
class SpringAttachment:
    stiffness: float = 0.1
    direction: tuple[float, float, float] = (0.0, -1.0, 0.0)

    def __post_init__(self):
        if not self.stiffness > 0:
            raise ValueError("spring stiffness must be positive")
        object.__setattr__(self, "direction", tuple(unit(self.direction)))


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not n > 0:
        raise ValueError("direction vector must be non-zero")
    return v / n


@dataclass
class FrameModel:
    """A frame ready for analysis.

    ``positions`` holds every node of the ground structure; ``elements`` is an
    (m, 2) array of 0-based indices into it. Port and support nodes are also
    0-based indices. Nodes without an incident element are pruned at assembly.
    """

    positions: np.ndarray
    elements: np.ndarray
    supports: Sequence[int]
    input_node: int
    input_direction: Sequence[float]
    output_node: int
    output_direction: Sequence[float]
    material: Material = field(default_factory=Material)
    section: CrossSection = field(default_factory=CrossSection)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.elements = np.asarray(self.elements, dtype=int).reshape(-1, 2)
        self.supports = tuple(int(s) for s in self.supports)
        self.input_direction = unit(self.input_direction)
        self.output_direction = unit(self.output_direction)
        if not self.supports:
            raise InvalidStructureError("model has no supports")
        if self.input_node == self.output_node:
            raise InvalidStructureError("input and end-effector must be distinct nodes")


@dataclass
class SolveResult:
    displacements: np.ndarray  # (n_retained, 6)
    nodes: np.ndarray  # ground-structure index of each retained node
    reaction: float  # force along the input direction at the input DOF
    output_translation: np.ndarray

    def translation(self, node: int) -> np.ndarray:
        k = np.searchsorted(self.nodes, node)
        if k >= len(self.nodes) or self.nodes[k] != node:
            raise KeyError(node)
        return self.displacements[k, :3]


# ---------------------------------------------------------------------------
# element matrices


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1],
                     a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2],
                     a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]], axis=1)


def local_axes(vec: np.ndarray) -> np.ndarray:
    """Rotation matrices (m, 3, 3) whose rows are the local x, y, z axes.

    Local x runs along the element; local y is horizontal (normal to global Z)
    unless the element is vertical, in which case global X seeds it.
    """
    vec = np.asarray(vec, dtype=float).reshape(-1, 3)
    length = np.sqrt((vec * vec).sum(axis=1))
    ex = vec / length[:, None]
    ref = np.zeros_like(ex)
    vertical = np.abs(ex[:, 2]) > 1.0 - 1e-9
    ref[~vertical, 2] = 1.0
    ref[vertical, 0] = 1.0
    ey = _cross(ref, ex)
    ey /= np.sqrt((ey * ey).sum(axis=1))[:, None]
    ez = _cross(ex, ey)
    return np.stack([ex, ey, ez], axis=1)


def local_stiffness(length, material: Material, section: CrossSection) -> np.ndarray:
    """Local 12x12 Euler-Bernoulli frame stiffness for each length, shape (m, 12, 12)."""
    L = np.atleast_1d(np.asarray(length, dtype=float))
    E, G = material.young_modulus, material.shear_modulus
    k = np.zeros((len(L), 12, 12))
    ea = E * section.area / L
    gj = G * section.j / L
    k[:, 0, 0] = k[:, 6, 6] = ea
    k[:, 0, 6] = k[:, 6, 0] = -ea
    k[:, 3, 3] = k[:, 9, 9] = gj
    k[:, 3, 9] = k[:, 9, 3] = -gj
    # bending in the local x-y plane: uy, rz
    eiz = E * section.iz
    a, b, c, d = 12 * eiz / L**3, 6 * eiz / L**2, 4 * eiz / L, 2 * eiz / L
    for (i, j), v in {(1, 1): a, (1, 5): b, (1, 7): -a, (1, 11): b, (5, 5): c, (5, 7): -b,
                      (5, 11): d, (7, 7): a, (7, 11): -b, (11, 11): c}.items():
        k[:, i, j] = k[:, j, i] = v
    # bending in the local x-z plane: uz, ry
    eiy = E * section.iy
    a, b, c, d = 12 * eiy / L**3, 6 * eiy / L**2, 4 * eiy / L, 2 * eiy / L
    for (i, j), v in {(2, 2): a, (2, 4): -b, (2, 8): -a, (2, 10): -b, (4, 4): c, (4, 8): b,
                      (4, 10): d, (8, 8): a, (8, 10): b, (10, 10): c}.items():
        k[:, i, j] = k[:, j, i] = v
    return k


# Each 3x3 block of the local matrix only uses these (row, col) slots.
_PATTERNS = ((0, 0), (1, 1), (2, 2), (1, 2), (2, 1))


def element_stiffness_batch(pa: np.ndarray, pb: np.ndarray, material: Material,
                            section: CrossSection) -> np.ndarray:
    vec = np.asarray(pb, dtype=float).reshape(-1, 3) - np.asarray(pa, dtype=float).reshape(-1, 3)
    length = np.sqrt((vec * vec).sum(axis=1))
    if np.any(length < LENGTH_MIN):
        raise DegenerateElementError(f"element shorter than {LENGTH_MIN} mm")
    R = local_axes(vec)
    kl = local_stiffness(length, material, section).reshape(-1, 4, 3, 4, 3)
    # R^T B R = sum_kl B_kl e_k e_l^T for every 3x3 block B
    coef = np.stack([kl[:, :, k, :, l] for k, l in _PATTERNS], axis=-1).reshape(-1, 16, 5)
    outer = np.stack([R[:, k, :, None] * R[:, l, None, :] for k, l in _PATTERNS], axis=1).reshape(-1, 5, 9)
    kg = np.matmul(coef, outer).reshape(-1, 4, 4, 3, 3)
    return kg.transpose(0, 1, 3, 2, 4).reshape(-1, 12, 12)


def element_stiffness(pa, pb, material: Material, section: CrossSection) -> np.ndarray:
    """Global-frame 12x12 stiffness of one beam from ``pa`` to ``pb``."""
    return element_stiffness_batch(pa, pb, material, section)[0]


# ---------------------------------------------------------------------------
# assembly


@dataclass
class Assembly:
    K: np.ndarray
    nodes: np.ndarray  # retained ground-structure node indices (sorted)
    local: dict[int, int]  # ground-structure index -> retained index
    constrained: np.ndarray  # support DOFs (retained numbering)

    @property
    def ndof(self) -> int:
        return self.K.shape[0]

    def dof(self, node: int, comp: int = 0) -> int:
        return 6 * self.local[node] + comp


def components(n: int, edges: np.ndarray) -> np.ndarray:
    """Connected-component label per node (union-find)."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return np.array([find(i) for i in range(n)])


def check_connectivity(model: FrameModel) -> tuple[np.ndarray, np.ndarray]:
    """Prune unused nodes and verify the supported, connected layout.

    Returns the retained node indices and the elements renumbered onto them.
    Raises InvalidStructureError with a reason code otherwise.
    """
    el = model.elements
    nodes = np.unique(el)
    if model.input_node not in nodes:
        raise InvalidStructureError("input node has no incident element", "disconnected-input")
    if model.output_node not in nodes:
        raise InvalidStructureError("end-effector node has no incident element", "disconnected-output")
    local_el = np.searchsorted(nodes, el)
    label = components(len(nodes), local_el)
    li, lo = np.searchsorted(nodes, [model.input_node, model.output_node])
    if label[li] != label[lo]:
        raise InvalidStructureError("end-effector is not connected to the input", "disconnected-output")
    supported = {label[k] for k in np.searchsorted(nodes, [s for s in model.supports if s in nodes])}
    if label[li] not in supported:
        raise InvalidStructureError("input component has no support", "no-support-path")
    if set(label.tolist()) - supported:
        raise InvalidStructureError("floating substructure without support", "no-support-path")
    return nodes, local_el


def assemble(model: FrameModel) -> Assembly:
    nodes, local_el = check_connectivity(model)
    pos = model.positions[nodes]
    ke = element_stiffness_batch(pos[local_el[:, 0]], pos[local_el[:, 1]], model.material, model.section)
    ndof = 6 * len(nodes)
    dofs = (6 * local_el[:, :, None] + np.arange(6)).reshape(-1, 12)
    flat = (dofs[:, :, None] * ndof + dofs[:, None, :]).ravel()
    K = np.bincount(flat, weights=ke.ravel(), minlength=ndof * ndof).reshape(ndof, ndof)
    local = {int(g): i for i, g in enumerate(nodes)}
    sup = [local[s] for s in model.supports if s in local]
    constrained = (6 * np.array(sup)[:, None] + np.arange(6)).ravel()
    return Assembly(K, nodes, local, constrained)


# ---------------------------------------------------------------------------
# solves


def _input_basis(direction) -> np.ndarray:
    """Orthonormal 3x3 matrix whose first row is ``direction``."""
    n = unit(direction)
    helper = np.eye(3)[np.argmin(np.abs(n))]
    b = np.cross(n, helper)
    b /= np.linalg.norm(b)
    return np.stack([n, b, np.cross(n, b)])


class _Analysis:
    """Factorized input-locked system shared by all load cases of one model.

    The input node's translations are rotated so that the first one runs along
    the input direction; that DOF is prescribed (or locked), supports are
    clamped and everything else is free.
    """

    def __init__(self, model: FrameModel, asm: Assembly, spring: SpringAttachment | None = None):
        self.model, self.asm = model, asm
        K = asm.K.copy()
        if spring is not None:
            s = np.asarray(spring.direction)
            o = asm.dof(model.output_node)
            K[o:o + 3, o:o + 3] += spring.stiffness * np.outer(s, s)
        i0 = asm.dof(model.input_node)
        Q = _input_basis(model.input_direction)
        K[:, i0:i0 + 3] = K[:, i0:i0 + 3] @ Q.T
        K[i0:i0 + 3, :] = Q @ K[i0:i0 + 3, :]
        self.Q, self.i0 = Q, i0
        fixed = np.zeros(asm.ndof, dtype=bool)
        fixed[asm.constrained] = True
        if fixed[i0]:
            raise InvalidStructureError("input node is a support", "disconnected-input")
        fixed[i0] = True
        self.free = np.nonzero(~fixed)[0]
        self.K = K
        try:
            self.factor = scipy.linalg.cho_factor(K[np.ix_(self.free, self.free)], check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError("free-free block is not positive definite") from exc
        if not np.all(np.isfinite(self.factor[0])):
            raise SingularSystemError("factorization produced non-finite values")

    def _full(self, q_free: np.ndarray, q_in: float) -> np.ndarray:
        q = np.zeros(self.asm.ndof)
        q[self.free] = q_free
        q[self.i0] = q_in
        u = q.copy()
        u[self.i0:self.i0 + 3] = self.Q.T @ q[self.i0:self.i0 + 3]
        return u

    def _result(self, q_free: np.ndarray, q_in: float, f_in_dof: float) -> SolveResult:
        u = self._full(q_free, q_in).reshape(-1, 6)
        if not np.all(np.isfinite(u)):
            raise SingularSystemError("non-finite displacements")
        out = u[self.asm.local[self.model.output_node], :3].copy()
        return SolveResult(u, self.asm.nodes, float(f_in_dof), out)

    def prescribed(self, d_in: float) -> SolveResult:
        rhs = -self.K[self.free, self.i0] * d_in
        q_free = scipy.linalg.cho_solve(self.factor, rhs, check_finite=False)
        reaction = self.K[self.i0, self.free] @ q_free + self.K[self.i0, self.i0] * d_in
        return self._result(q_free, d_in, reaction)

    def loaded(self, forces: np.ndarray) -> SolveResult:
        """``forces`` is a global (ndof,) nodal load vector in the original basis."""
        f = forces.copy()
        f[self.i0:self.i0 + 3] = self.Q @ f[self.i0:self.i0 + 3]
        q_free = scipy.linalg.cho_solve(self.factor, f[self.free], check_finite=False)
        reaction = self.K[self.i0, self.free] @ q_free - f[self.i0]
        return self._result(q_free, 0.0, reaction)


def _load_vector(asm: Assembly, loads) -> np.ndarray:
    f = np.zeros(asm.ndof)
    for node, force in loads:
        if node not in asm.local:
            raise InvalidStructureError(f"load applied to pruned node {node}", "disconnected-output")
        f[asm.dof(node):asm.dof(node) + 3] += np.asarray(force, dtype=float)
    return f


def solve_prescribed_displacement(model: FrameModel, d_in: float,
                                  spring: SpringAttachment | None = None) -> SolveResult:
    """Impose ``d_in`` along the input direction; return field and input reaction."""
    if not d_in > 0:
        raise ValueError("d_in must be positive")
    return _Analysis(model, assemble(model), spring).prescribed(d_in)


def solve_external_load(model: FrameModel, loads) -> SolveResult:
    """Nodal forces with supports clamped and the input DOF locked."""
    asm = assemble(model)
    return _Analysis(model, asm).loaded(_load_vector(asm, loads))


def compute_ga(result: SolveResult, d_in: float, direction) -> float:
    return float(result.output_translation @ unit(direction)) / d_in


@dataclass
class MAResult:
    ma: float
    f_in: float
    f_out: float
    d_spring: float
    input_work: float
    spring_work: float
    result: SolveResult


def compute_ma(model: FrameModel, d_in: float, spring: SpringAttachment) -> MAResult:
    """Mechanical advantage with a grounded spring at the end-effector."""
    res = solve_prescribed_displacement(model, d_in, spring)
    return _ma_from(res, d_in, spring)


def _ma_from(res: SolveResult, d_in: float, spring: SpringAttachment) -> MAResult:
    d_s = float(res.output_translation @ np.asarray(spring.direction))
    f_out = spring.stiffness * d_s
    f_in = res.reaction
    if abs(f_in) < FORCE_MIN:
        raise UndefinedMAError("input force is numerically zero")
    return MAResult(f_out / f_in, f_in, f_out, d_s, 0.5 * f_in * d_in, 0.5 * spring.stiffness * d_s**2, res)


@dataclass
class FullAnalysis:
    ga_result: SolveResult
    ext_result: SolveResult | None
    ma: MAResult | None


def analyze(model: FrameModel, d_in: float, loads=(), spring: SpringAttachment | None = None) -> FullAnalysis:
    """Prescribed-displacement, external-load and spring cases from one factorization.

    The spring case reuses the spring-free factorization through a rank-one
    (Sherman-Morrison) update instead of refactorizing.
    """
    asm = assemble(model)
    base = _Analysis(model, asm)
    free, i0 = base.free, base.i0
    rhs = [-base.K[free, i0] * d_in]
    f_ext = None
    if loads:
        f_ext = _load_vector(asm, loads)
        f_ext[i0:i0 + 3] = base.Q @ f_ext[i0:i0 + 3]
        rhs.append(f_ext[free])
    v = None
    if spring is not None:
        # spring DOFs sit on the end-effector, never on the (rotated) input node
        vfull = np.zeros(asm.ndof)
        o = asm.dof(model.output_node)
        vfull[o:o + 3] = spring.direction
        v = vfull[free]
        rhs.append(v)
    sol = scipy.linalg.cho_solve(base.factor, np.column_stack(rhs), check_finite=False)
    x0 = sol[:, 0]
    k_row = base.K[i0, free]
    ga_res = base._result(x0, d_in, k_row @ x0 + base.K[i0, i0] * d_in)
    ext = None
    if f_ext is not None:
        xe = sol[:, 1]
        ext = base._result(xe, 0.0, k_row @ xe - f_ext[i0])
    ma = None
    if v is not None:
        y = sol[:, -1]
        k = spring.stiffness
        xs = x0 - (k * (v @ x0) / (1.0 + k * (v @ y))) * y
        ma = _ma_from(base._result(xs, d_in, k_row @ xs + base.K[i0, i0] * d_in), d_in, spring)
    return FullAnalysis(ga_res, ext, ma)
