"""Ground structure construction, node wandering and crossing detection.

Node ids are 1-based and run x-fastest, then y, then z, so on the 3x3x2 grid
node 13 sits at grid index (0, 1, 1) and node 9 at (2, 2, 0).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

TOL_ONLINE = 1e-6
CROSS_TOL = 0.5
CROSS_EPS = 1e-3


class GeometryError(ValueError):
    """Raised for invalid domains, structures or offset codes."""


class DecodeError(GeometryError):
    pass


Vec3 = np.ndarray


@dataclass(frozen=True)
class DesignDomain:
    size: tuple[float, float, float]
    grid: tuple[int, int, int]
    connectivity_degree: int = 1

    def __post_init__(self):
        size = tuple(float(s) for s in self.size)
        grid = tuple(int(n) for n in self.grid)
        if len(size) != 3 or len(grid) != 3:
            raise GeometryError("size and grid need three components")
        if any(not np.isfinite(s) or s <= 0 for s in size):
            raise GeometryError(f"domain size must be positive, got {size}")
        if any(n < 1 for n in grid) or int(np.prod(grid)) < 2:
            raise GeometryError(f"grid {grid} has fewer than 2 nodes")
        if self.connectivity_degree < 1:
            raise GeometryError("connectivity_degree must be a positive integer")
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "grid", grid)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.grid))

    def spacing(self) -> np.ndarray:
        return np.array([s / (n - 1) if n > 1 else 0.0 for s, n in zip(self.size, self.grid)])


@dataclass(frozen=True)
class NodeSpec:
    id: int
    base_position: tuple[float, float, float]
    wander_range: tuple[float, float, float] = (0.0, 0.0, 0.0)
    wander_step: float = 1.0

    def __post_init__(self):
        if self.wander_step <= 0:
            raise GeometryError(f"node {self.id}: wander_step must be > 0")
        if any(r < 0 for r in self.wander_range):
            raise GeometryError(f"node {self.id}: negative wander range")

    @property
    def max_code(self) -> np.ndarray:
        """Largest admissible |code| per axis; the lattice has 2*max_code+1 levels."""
        return np.floor(np.asarray(self.wander_range) / self.wander_step + 1e-9).astype(int)


@dataclass(frozen=True)
class Element:
    id: int
    node_a: int
    node_b: int

    def __post_init__(self):
        if self.node_a == self.node_b:
            raise GeometryError(f"element {self.id} connects node {self.node_a} to itself")


@dataclass
class GroundStructure:
    domain: DesignDomain
    nodes: list[NodeSpec]
    elements: list[Element] = field(default_factory=list)

    def __post_init__(self):
        ids = {n.id for n in self.nodes}
        seen = set()
        for e in self.elements:
            if e.node_a not in ids or e.node_b not in ids:
                raise GeometryError(f"element {e.id} references a missing node")
            key = frozenset((e.node_a, e.node_b))
            if key in seen:
                raise GeometryError(f"duplicate element between nodes {sorted(key)}")
            seen.add(key)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def node_index(self) -> dict[int, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    def base_positions(self) -> np.ndarray:
        return np.array([n.base_position for n in self.nodes], dtype=float).reshape(-1, 3)

    def connectivity(self) -> np.ndarray:
        """(n_elements, 2) array of 0-based node indices."""
        idx = self.node_index()
        return np.array([(idx[e.node_a], idx[e.node_b]) for e in self.elements], dtype=int).reshape(-1, 2)

    def with_wandering(self, wander_range, wander_step: float, fixed: Iterable[int] = ()) -> "GroundStructure":
        """Copy with every node not in `fixed` given the same wandering lattice."""
        fixed = set(fixed)
        nodes = [
            replace(n, wander_range=(0.0, 0.0, 0.0) if n.id in fixed else tuple(map(float, wander_range)),
                    wander_step=float(wander_step))
            for n in self.nodes
        ]
        return GroundStructure(self.domain, nodes, list(self.elements))


def grid_index(domain: DesignDomain, node_id: int) -> tuple[int, int, int]:
    nx, ny, _ = domain.grid
    k = node_id - 1
    return k % nx, (k // nx) % ny, k // (nx * ny)


def node_id_at(domain: DesignDomain, i: int, j: int, k: int) -> int:
    nx, ny, _ = domain.grid
    return 1 + i + nx * (j + ny * k)


def build_ground_structure(domain: DesignDomain) -> GroundStructure:
    """Regular node grid over the cuboid, linked within the connectivity degree.

    Two nodes are linked when their grid indices differ by at most
    ``connectivity_degree`` along every axis. Overlaying elements are filtered
    out before returning.
    """
    spacing = domain.spacing()
    nodes = []
    for nid in range(1, domain.n_nodes + 1):
        ijk = np.array(grid_index(domain, nid))
        nodes.append(NodeSpec(nid, tuple(float(c) for c in ijk * spacing)))
    deg = domain.connectivity_degree
    elements = []
    for a, b in itertools.combinations(range(1, domain.n_nodes + 1), 2):
        da = np.abs(np.subtract(grid_index(domain, a), grid_index(domain, b)))
        if da.max() <= deg:
            elements.append(Element(len(elements) + 1, a, b))
    return filter_overlays(GroundStructure(domain, nodes, elements))


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    ab = b - a
    t = float(np.dot(p - a, ab) / np.dot(ab, ab))
    closest = a + np.clip(t, 0.0, 1.0) * ab
    return float(np.linalg.norm(p - closest)), t


def filter_overlays(structure: GroundStructure, tol: float = TOL_ONLINE) -> GroundStructure:
    """Drop elements whose open segment passes through a third node."""
    pos = structure.base_positions()
    idx = structure.node_index()
    kept = []
    for e in structure.elements:
        ia, ib = idx[e.node_a], idx[e.node_b]
        a, b = pos[ia], pos[ib]
        overlays = False
        for k in range(len(pos)):
            if k == ia or k == ib:
                continue
            d, t = _point_segment_distance(pos[k], a, b)
            if d <= tol and 0.0 < t < 1.0:
                overlays = True
                break
        if not overlays:
            kept.append(e)
    elements = [Element(i + 1, e.node_a, e.node_b) for i, e in enumerate(kept)]
    return GroundStructure(structure.domain, list(structure.nodes), elements)


def decode_positions(structure: GroundStructure, offsets) -> np.ndarray:
    """Realized node positions for integer offset codes, shape (n_nodes, 3).

    ``offsets`` is an (n_nodes, 3) integer array, or a mapping node id -> code
    (missing nodes get zero). Nodes without a wander range only accept zero.
    """
    n = structure.n_nodes
    codes = np.zeros((n, 3), dtype=int)
    if isinstance(offsets, dict):
        idx = structure.node_index()
        for nid, c in offsets.items():
            if nid not in idx:
                raise DecodeError(f"unknown node id {nid}")
            codes[idx[nid]] = c
    elif offsets is not None:
        codes = np.asarray(offsets)
        if codes.shape != (n, 3):
            raise DecodeError(f"expected offsets of shape {(n, 3)}, got {codes.shape}")
        if not np.all(np.equal(np.mod(codes, 1), 0)):
            raise DecodeError("offset codes must be integers")
        codes = codes.astype(int)
    pos = structure.base_positions()
    for i, node in enumerate(structure.nodes):
        if np.any(np.abs(codes[i]) > node.max_code):
            raise DecodeError(f"offset code {codes[i].tolist()} out of range for node {node.id}")
        pos[i] = pos[i] + node.wander_step * codes[i]
    return pos


def total_length(elements: np.ndarray, positions: np.ndarray) -> float:
    """Sum of element lengths; ``elements`` is an (m, 2) array of node indices."""
    elements = np.asarray(elements, dtype=int).reshape(-1, 2)
    if len(elements) == 0:
        return 0.0
    d = positions[elements[:, 1]] - positions[elements[:, 0]]
    return float(np.sqrt((d * d).sum(axis=1)).sum())


def crossing_pairs(elements: np.ndarray, positions: np.ndarray, cross_tol: float = CROSS_TOL,
                   eps: float = CROSS_EPS) -> np.ndarray:
    """Index pairs (i, j), i < j, of elements that cross each other.

    Two elements cross when their centerlines come closer than ``cross_tol``
    at parameters inside ``(eps, 1 - eps)`` on both segments. Elements sharing
    a node never cross.
    """
    elements = np.asarray(elements, dtype=int).reshape(-1, 2)
    m = len(elements)
    if m < 2:
        return np.empty((0, 2), dtype=int)
    ii, jj = np.triu_indices(m, k=1)
    ea, eb = elements[ii], elements[jj]
    disjoint = ((ea[:, 0] != eb[:, 0]) & (ea[:, 0] != eb[:, 1])
                & (ea[:, 1] != eb[:, 0]) & (ea[:, 1] != eb[:, 1]))
    ii, jj, ea, eb = ii[disjoint], jj[disjoint], ea[disjoint], eb[disjoint]
    p1 = positions[ea[:, 0]]
    d1 = positions[ea[:, 1]] - p1
    p2 = positions[eb[:, 0]]
    d2 = positions[eb[:, 1]] - p2
    r = p1 - p2
    a = np.einsum("ij,ij->i", d1, d1)
    b = np.einsum("ij,ij->i", d1, d2)
    c = np.einsum("ij,ij->i", d2, d2)
    d = np.einsum("ij,ij->i", d1, r)
    e = np.einsum("ij,ij->i", d2, r)
    denom = a * c - b * b
    parallel = denom <= 1e-12 * a * c
    safe = np.where(parallel, 1.0, denom)
    s = np.where(parallel, 0.0, (b * e - c * d) / safe)
    t = np.where(parallel, 0.0, (a * e - b * d) / safe)
    if np.any(parallel):
        # Parallel pairs: take the midpoint of the overlap of segment 2 projected onto segment 1.
        k = np.nonzero(parallel)[0]
        s0 = -d[k] / a[k]
        s1 = (b[k] - d[k]) / a[k]
        lo = np.maximum(np.minimum(s0, s1), 0.0)
        hi = np.minimum(np.maximum(s0, s1), 1.0)
        smid = np.where(hi >= lo, 0.5 * (lo + hi), -1.0)
        s[k] = smid
        t[k] = (b[k] * smid + e[k]) / c[k]
    gap = p1 + s[:, None] * d1 - (p2 + t[:, None] * d2)
    dist = np.sqrt((gap * gap).sum(axis=1))
    hit = (dist < cross_tol) & (s > eps) & (s < 1 - eps) & (t > eps) & (t < 1 - eps)
    return np.stack([ii[hit], jj[hit]], axis=1)


def count_crossings(elements: np.ndarray, positions: np.ndarray, cross_tol: float = CROSS_TOL,
                    eps: float = CROSS_EPS) -> int:
    return int(len(crossing_pairs(elements, positions, cross_tol, eps)))


def element_lengths(elements: Sequence[Sequence[int]], positions: np.ndarray) -> np.ndarray:
    elements = np.asarray(elements, dtype=int).reshape(-1, 2)
    d = positions[elements[:, 1]] - positions[elements[:, 0]]
    return np.sqrt((d * d).sum(axis=1))


def _segment_distance_bound(p1, q1, p2, q2, samples: int = 64) -> float:
    """Lower bound on the distance between two segments (dense sampling minus slack)."""
    s = np.linspace(0.0, 1.0, samples)
    a = p1 + s[:, None] * (q1 - p1)
    b = p2 + s[:, None] * (q2 - p2)
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)).min()
    slack = 0.5 * (np.linalg.norm(q1 - p1) + np.linalg.norm(q2 - p2)) / (samples - 1)
    return max(0.0, float(d) - slack)


class CrossingScreen:
    """Element pairs of a ground structure that could ever cross.

    Moving every endpoint by at most ``delta`` changes the distance between two
    segments by at most ``delta_a + delta_b``, so pairs whose base distance
    exceeds ``cross_tol`` plus the largest wandering displacement of either
    element can be skipped for every genome.
    """

    def __init__(self, structure: GroundStructure, cross_tol: float = CROSS_TOL, eps: float = CROSS_EPS):
        self.cross_tol, self.eps = cross_tol, eps
        conn = structure.connectivity()
        pos = structure.base_positions()
        reach = np.array([np.linalg.norm(np.asarray(n.max_code) * n.wander_step) for n in structure.nodes])
        pairs = []
        for i, j in zip(*np.triu_indices(len(conn), k=1)):
            a, b = conn[i], conn[j]
            if len({a[0], a[1], b[0], b[1]}) < 4:
                continue
            slack = reach[a].max() + reach[b].max()
            if _segment_distance_bound(pos[a[0]], pos[a[1]], pos[b[0]], pos[b[1]]) < cross_tol + slack:
                pairs.append((i, j))
        self.pairs = np.array(pairs, dtype=int).reshape(-1, 2)
        self.connectivity = conn

    def count(self, mask: np.ndarray, positions: np.ndarray) -> int:
        """Crossings among the elements selected by boolean ``mask``."""
        live = self.pairs[mask[self.pairs[:, 0]] & mask[self.pairs[:, 1]]]
        if len(live) == 0:
            return 0
        # two-element sub-problems share no nodes, so crossing_pairs on each stacked pair works
        el = self.connectivity
        n = len(live)
        local = np.arange(4 * n).reshape(n, 4)
        pts = np.concatenate([positions[el[live[:, 0]]], positions[el[live[:, 1]]]], axis=1).reshape(-1, 3)
        return _count_stacked(pts, local, self.cross_tol, self.eps)


def _count_stacked(pts: np.ndarray, local: np.ndarray, cross_tol: float, eps: float) -> int:
    p1, q1, p2, q2 = (pts[local[:, k]] for k in range(4))
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a = (d1 * d1).sum(1)
    b = (d1 * d2).sum(1)
    c = (d2 * d2).sum(1)
    d = (d1 * r).sum(1)
    e = (d2 * r).sum(1)
    denom = a * c - b * b
    parallel = denom <= 1e-12 * a * c
    if np.any(parallel):
        # rare; defer to the general routine for exact parallel handling
        total = 0
        for k in range(len(local)):
            seg = np.array([p1[k], q1[k], p2[k], q2[k]])
            total += count_crossings(np.array([[0, 1], [2, 3]]), seg, cross_tol, eps)
        return total
    s = (b * e - c * d) / denom
    t = (a * e - b * d) / denom
    gap = r + s[:, None] * d1 - t[:, None] * d2
    dist2 = (gap * gap).sum(1)
    hit = (dist2 < cross_tol**2) & (s > eps) & (s < 1 - eps) & (t > eps) & (t < 1 - eps)
    return int(hit.sum())
