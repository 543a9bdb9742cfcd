"""Structure files, metrics, convergence tables and binary STL meshes."""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from pathlib import Path

import numpy as np

from . import __version__, fem
from .geometry import DesignDomain, Element, GroundStructure, NodeSpec, element_lengths
from .objective import (INVALID_FITNESS, Candidate, Constraints, Evaluation, Weights, eq1, eq2,
                        evaluate_ga_ma, evaluate_ga_only)
from .problem import ProblemSpec

STRUCTURE_FORMAT = "combot.structure"


class ExportError(ValueError):
    pass


def _clean(value):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps_json(data) -> str:
    return json.dumps(_clean(data), indent=2, sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# structures


def both_modes(ev: Evaluation, weights: Weights, constraints: Constraints) -> dict:
    """Fitness of one evaluation under each objective mode (None when invalid)."""
    if not ev.valid:
        return {"ga": None, "ga-ma": None}
    ga_ma = eq2(ev, weights, constraints) if ev.MA > 0 else None
    return {"ga": eq1(ev, weights, constraints), "ga-ma": ga_ma}


def structure_record(problem: ProblemSpec, candidate: Candidate, evaluation: Evaluation,
                     weights: Weights, constraints: Constraints, provenance: dict | None = None) -> dict:
    """Self-contained description of one realized structure.

    Nodes carry their realized positions; elements reference node ids and
    keep their ground-structure ids. Ports, loads and section data are
    included so the file can be re-analysed without the originating config.
    """
    gs = problem.structure
    ids = [n.id for n in gs.nodes]
    el = np.asarray(candidate.elements, dtype=int).reshape(-1, 2)
    used = sorted(set(el.ravel().tolist()) | {problem.index(i) for i in problem.anchors})
    lengths = element_lengths(el, candidate.positions) if len(el) else np.zeros(0)
    element_ids = (candidate.element_ids if candidate.element_ids is not None
                   else np.arange(1, len(el) + 1))
    return {
        "format": STRUCTURE_FORMAT,
        "version": __version__,
        "nodes": [{"id": ids[i], "position": candidate.positions[i].tolist()} for i in used],
        "elements": [{"id": int(eid), "nodes": [ids[a], ids[b]], "length": float(L)}
                     for eid, (a, b), L in zip(element_ids, el, lengths)],
        "ports": {
            "input_node": problem.input_node,
            "input_direction": list(problem.input_direction),
            "end_effector_node": problem.output_node,
            "output_direction": list(problem.output_direction),
            "support_nodes": list(problem.supports),
        },
        "analysis": {
            "d_in": problem.d_in,
            "external_loads": list(problem.external_load),
            "E": problem.material.young_modulus,
            "poisson_ratio": problem.material.poisson_ratio,
            "element_dims": [problem.section.width, problem.section.height],
            "k_spring": problem.spring_stiffness,
            "cross_tol": problem.cross_tol,
        },
        "evaluation": evaluation.to_dict(),
        "fitness_by_mode": both_modes(evaluation, weights, constraints),
        "provenance": provenance or {},
    }


def structure_problem(record: dict) -> tuple[ProblemSpec, Candidate]:
    """Rebuild an analysable (problem, candidate) pair from a structure record."""
    if record.get("format") != STRUCTURE_FORMAT:
        raise ExportError(f"not a structure file (format={record.get('format')!r})")
    try:
        nodes = [NodeSpec(int(n["id"]), tuple(float(c) for c in n["position"])) for n in record["nodes"]]
        elements = [Element(int(e["id"]), int(e["nodes"][0]), int(e["nodes"][1])) for e in record["elements"]]
        pos = np.array([n.base_position for n in nodes], dtype=float).reshape(-1, 3)
        extent = np.maximum(np.ptp(pos, axis=0), 1.0) if len(pos) else np.ones(3)
        # the domain box only documents the extent; analysis never reads it
        gs = GroundStructure(DesignDomain(tuple(extent), (2, 1, 1)), nodes, elements)
        ports, an = record["ports"], record["analysis"]
        problem = ProblemSpec(
            structure=gs, input_node=int(ports["input_node"]), input_direction=tuple(ports["input_direction"]),
            output_node=int(ports["end_effector_node"]), output_direction=tuple(ports["output_direction"]),
            supports=tuple(int(s) for s in ports["support_nodes"]), d_in=float(an["d_in"]),
            external_load=tuple(float(f) for f in an["external_loads"]),
            material=fem.Material(float(an["E"]), float(an["poisson_ratio"])),
            section=fem.CrossSection(*map(float, an["element_dims"])),
            spring_stiffness=float(an["k_spring"]), cross_tol=float(an.get("cross_tol", 0.5)), name="structure",
        )
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ExportError(f"malformed structure file: {exc}") from exc
    cand = Candidate(pos, gs.connectivity(), np.array([e.id for e in elements], dtype=int),
                     np.ones(len(elements), dtype=bool))
    return problem, cand


def evaluate_record(record: dict, weights: Weights = Weights(), constraints: Constraints = Constraints()):
    """Re-analyse a structure record; returns (GA-only evaluation, GA-MA evaluation)."""
    problem, cand = structure_problem(record)
    return (evaluate_ga_only(cand, problem, weights, constraints),
            evaluate_ga_ma(cand, problem, weights, constraints))


def baseline_record() -> dict:
    """The two-beam reference leg as a structure record."""
    from .problem import baseline_fixture

    model, d_in, spring = baseline_fixture()
    nodes = [NodeSpec(i + 1, tuple(p)) for i, p in enumerate(model.positions.tolist())]
    elements = [Element(k + 1, int(a) + 1, int(b) + 1) for k, (a, b) in enumerate(model.elements)]
    gs = GroundStructure(DesignDomain((50.0, 15.0, 1.0), (2, 1, 1)), nodes, elements)
    problem = ProblemSpec(structure=gs, input_node=1, input_direction=(0, 1, 0), output_node=2,
                          output_direction=tuple(spring.direction), supports=(3,), d_in=d_in,
                          spring_stiffness=spring.stiffness, name="baseline")
    cand = Candidate(model.positions, model.elements, np.array([1, 2]), np.ones(2, dtype=bool))
    ev = evaluate_ga_only(cand, problem)
    return structure_record(problem, cand, ev, Weights(), Constraints(), {"source": "baseline fixture"})


def write_text(path, text: str) -> None:
    Path(path).write_text(text)


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ExportError(f"{path}: not valid JSON ({exc})") from exc


# ---------------------------------------------------------------------------
# tables


CONVERGENCE_HEADER = ("generation", "best", "mean", "valid_fraction")


def convergence_csv(best, mean, valid_fraction) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CONVERGENCE_HEADER)
    for g, (b, m, v) in enumerate(zip(best, mean, valid_fraction)):
        w.writerow([g, repr(float(b)), "" if not math.isfinite(m) else repr(float(m)), repr(float(v))])
    return buf.getvalue()


def read_convergence(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != CONVERGENCE_HEADER:
        raise ExportError(f"{path}: missing or malformed convergence table")
    return {k: np.array([float(r[k]) if r[k] != "" else math.nan for r in rows]) for k in CONVERGENCE_HEADER}


# ---------------------------------------------------------------------------
# meshes


# Box faces as corner-index quads; corner k has bits (end, +y, +z).
_QUADS = ((0, 1, 5, 4), (2, 6, 7, 3),  # -y, +y
          (0, 4, 6, 2), (1, 3, 7, 5),  # -z, +z
          (0, 2, 3, 1), (4, 5, 7, 6))  # start cap, end cap


def prism_vertices(pa, pb, width: float, height: float) -> np.ndarray:
    """Eight corners of a beam prism: width along the local y axis, height along local z."""
    pa, pb = np.asarray(pa, float), np.asarray(pb, float)
    if np.linalg.norm(pb - pa) < fem.LENGTH_MIN:
        raise ExportError("cannot mesh a degenerate element")
    axes = fem.local_axes((pb - pa)[None, :])[0]
    ey, ez = axes[1], axes[2]
    corners = []
    for end in (pa, pb):
        for sy in (-0.5, 0.5):
            for sz in (-0.5, 0.5):
                corners.append(end + sy * width * ey + sz * height * ez)
    return np.array(corners)  # index = 4 * end + 2 * (y > 0) + (z > 0)


def prism_triangles(pa, pb, width: float, height: float) -> np.ndarray:
    """(12, 3, 3) triangles with counter-clockwise winding seen from outside."""
    v = prism_vertices(pa, pb, width, height)
    centre = v.mean(axis=0)
    tris = []
    for q in _QUADS:
        for t in ((q[0], q[1], q[2]), (q[0], q[2], q[3])):
            tri = v[list(t)]
            n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
            if n @ (tri.mean(axis=0) - centre) < 0:
                tri = tri[[0, 2, 1]]
            tris.append(tri)
    return np.array(tris)


def mesh_triangles(positions: np.ndarray, elements: np.ndarray, width: float, height: float) -> np.ndarray:
    el = np.asarray(elements, dtype=int).reshape(-1, 2)
    if len(el) == 0:
        return np.zeros((0, 3, 3))
    return np.concatenate([prism_triangles(positions[a], positions[b], width, height) for a, b in el])


_STL_DTYPE = np.dtype([("normal", "<f4", (3,)), ("vertices", "<f4", (3, 3)), ("attr", "<u2")])


def stl_bytes(triangles: np.ndarray, header: str = "combot beam mesh") -> bytes:
    tris = np.asarray(triangles, dtype=float).reshape(-1, 3, 3)
    n = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)
    rec = np.zeros(len(tris), dtype=_STL_DTYPE)
    rec["normal"] = n
    rec["vertices"] = tris
    head = header.encode("ascii", "replace")[:80].ljust(80, b"\0")
    return head + struct.pack("<I", len(tris)) + rec.tobytes()


def read_stl(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    """Parse binary STL bytes into (normals (n, 3), triangles (n, 3, 3))."""
    if len(data) < 84:
        raise ExportError("STL data too short")
    (count,) = struct.unpack_from("<I", data, 80)
    if len(data) != 84 + count * _STL_DTYPE.itemsize:
        raise ExportError("STL size does not match its triangle count")
    rec = np.frombuffer(data, dtype=_STL_DTYPE, count=count, offset=84)
    return rec["normal"].astype(float), rec["vertices"].astype(float)


def export_mesh(record: dict, path=None, thickness: tuple[float, float] | None = None) -> bytes:
    """Binary STL for a structure record; writes to ``path`` when given."""
    problem, cand = structure_problem(record)
    w, h = thickness if thickness is not None else (problem.section.width, problem.section.height)
    data = stl_bytes(mesh_triangles(cand.positions, cand.elements, w, h))
    if path is not None:
        Path(path).write_bytes(data)
    return data

