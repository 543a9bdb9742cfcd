"""Small dependency-free SVG charts for run reports."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from . import fem
from .export import ExportError, read_convergence, read_json, structure_problem

WIDTH, HEIGHT = 480, 320
MARGIN = 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c")


class Figure:
    """An SVG canvas holding one or more panels side by side."""

    def __init__(self, title: str, n_panels: int = 1):
        self.width = WIDTH * n_panels
        self.svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(self.width),
                              height=str(HEIGHT), viewBox=f"0 0 {self.width} {HEIGHT}")
        ET.SubElement(self.svg, "title").text = title
        ET.SubElement(self.svg, "rect", x="0", y="0", width=str(self.width), height=str(HEIGHT), fill="white")

    def panel(self, k: int, title: str, xlabel: str, ylabel: str, xlim, ylim) -> "Chart":
        return Chart(self.svg, k * WIDTH, title, xlabel, ylabel, xlim, ylim)

    def save(self, path):
        ET.indent(self.svg)
        Path(path).write_bytes(ET.tostring(self.svg, encoding="utf-8", xml_declaration=True) + b"\n")


class Chart:
    """One x/y panel with linear axes, drawn into a parent SVG element."""

    def __init__(self, svg, x_offset: float, title: str, xlabel: str, ylabel: str, xlim, ylim):
        self.svg, self.ox = svg, x_offset
        self.xlim = self._pad(xlim)
        self.ylim = self._pad(ylim)
        self.group = ET.SubElement(svg, "g", {"class": "panel", "data-title": title})
        self._text(self.ox + WIDTH / 2, 20, title, size=14)
        self._text(self.ox + WIDTH / 2, HEIGHT - 10, xlabel)
        self._text(self.ox + 14, HEIGHT / 2, ylabel, rotate=True)
        x0, y0 = self.px(self.xlim[0], self.ylim[0])
        x1, y1 = self.px(self.xlim[1], self.ylim[1])
        ET.SubElement(self.group, "rect", x=f"{x0:.2f}", y=f"{y1:.2f}", width=f"{x1 - x0:.2f}",
                      height=f"{y0 - y1:.2f}", fill="none", stroke="#444")
        for v in np.linspace(*self.xlim, 5):
            x, _ = self.px(v, self.ylim[0])
            self._text(x, y0 + 14, f"{v:.3g}", size=9)
        for v in np.linspace(*self.ylim, 5):
            _, y = self.px(self.xlim[0], v)
            self._text(x0 - 4, y + 3, f"{v:.3g}", size=9, anchor="end")

    @staticmethod
    def _pad(lim):
        lo, hi = (float(v) for v in lim)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            lo, hi = 0.0, 1.0
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        return lo, hi

    def px(self, x, y):
        fx = (x - self.xlim[0]) / (self.xlim[1] - self.xlim[0])
        fy = (y - self.ylim[0]) / (self.ylim[1] - self.ylim[0])
        return self.ox + MARGIN + fx * (WIDTH - 1.5 * MARGIN), HEIGHT - MARGIN - fy * (HEIGHT - 1.7 * MARGIN)

    def _text(self, x, y, s, size=11, anchor="middle", rotate=False):
        attrs = {"x": f"{x:.2f}", "y": f"{y:.2f}", "font-size": str(size), "text-anchor": anchor,
                 "font-family": "sans-serif"}
        if rotate:
            attrs["transform"] = f"rotate(-90 {x:.2f} {y:.2f})"
        ET.SubElement(self.group, "text", attrs).text = s

    def line(self, xs, ys, color, label, **data):
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in (self.px(x, y) for x, y in zip(xs, ys))
                       if math.isfinite(a) and math.isfinite(b))
        attrs = {"points": pts, "fill": "none", "stroke": color, "stroke-width": "1.5", "class": "series",
                 "data-label": label}
        attrs.update({f"data-{k}": repr(float(v)) for k, v in data.items()})
        ET.SubElement(self.group, "polyline", attrs)

    def points(self, xs, ys, color):
        for x, y in zip(xs, ys):
            cx, cy = self.px(x, y)
            ET.SubElement(self.group, "circle", {"cx": f"{cx:.2f}", "cy": f"{cy:.2f}", "r": "3", "fill": color,
                                                 "class": "point", "data-x": repr(float(x)),
                                                 "data-y": repr(float(y))})

    def legend(self, labels):
        for k, label in enumerate(labels):
            y = 40 + 14 * k
            x = self.ox + WIDTH - 170
            ET.SubElement(self.group, "line", x1=f"{x}", y1=f"{y}", x2=f"{x + 20}", y2=f"{y}",
                          stroke=COLORS[k % len(COLORS)], **{"stroke-width": "2"})
            self._text(x + 25, y + 4, label, size=10, anchor="start")


def _finite_lim(*arrays):
    vals = np.concatenate([np.asarray(a, float).ravel() for a in arrays])
    vals = vals[np.isfinite(vals)]
    return (vals.min(), vals.max()) if len(vals) else (0.0, 1.0)


def convergence_plot(conv: dict, path) -> None:
    g = conv["generation"]
    fig = Figure("Convergence")
    ch = fig.panel(0, "Convergence", "generation", "fitness", _finite_lim(g),
                   _finite_lim(conv["best"], conv["mean"]))
    ch.line(g, conv["best"], COLORS[0], "best")
    ch.line(g, conv["mean"], COLORS[1], "mean (valid)")
    ch.legend(["best", "mean (valid)"])
    fig.save(path)


def response_sweep(record: dict, n: int = 6):
    """Solve the best structure at ``n`` input strokes from 0 to d_in.

    Returns (d_in values, d_out values, F_in values, F_out values) from
    independent solves, so the straight lines are a check on linearity.
    """
    problem, cand = structure_problem(record)
    model = problem.frame_model(cand.positions, cand.elements)
    strokes = np.linspace(0.0, problem.d_in, n)
    d_out, f_in, f_out = [0.0], [0.0], [0.0]
    for d in strokes[1:]:
        ma = fem.compute_ma(model, d, problem.spring)
        plain = fem.solve_prescribed_displacement(model, d)
        d_out.append(float(plain.output_translation @ np.asarray(problem.output_direction)))
        f_in.append(ma.f_in)
        f_out.append(ma.f_out)
    return strokes, np.array(d_out), np.array(f_in), np.array(f_out)


def _slope(x, y):
    return float(np.dot(x, y) / np.dot(x, x)) if np.dot(x, x) > 0 else math.nan


def response_plot(record: dict, path) -> dict:
    """Two panels: d_out against d_in (slope GA) and F_out against F_in (slope MA)."""
    d, d_out, f_in, f_out = response_sweep(record)
    ga, ma = _slope(d, d_out), _slope(f_in, f_out)
    fig = Figure("Linear response", 2)
    left = fig.panel(0, "Geometric advantage", "d_in [mm]", "d_out [mm]", _finite_lim(d), _finite_lim(d_out))
    left.line(d, d_out, COLORS[0], "d_out vs d_in", slope=ga)
    left.legend([f"GA = {ga:.4g}"])
    right = fig.panel(1, "Mechanical advantage", "F_in [N]", "F_out [N]", _finite_lim(f_in), _finite_lim(f_out))
    right.line(f_in, f_out, COLORS[1], "F_out vs F_in", slope=ma)
    right.legend([f"MA = {ma:.4g}"])
    fig.save(path)
    return {"GA": ga, "MA": ma}


def scatter_plot(population: list[dict], path) -> int:
    """GA against MA for distinct valid final-generation candidates; returns the point count."""
    seen, ga, ma = set(), [], []
    for p in population:
        if not p.get("valid") or p.get("genome") in seen:
            continue
        if p.get("GA") is None or p.get("MA") is None:
            continue
        seen.add(p.get("genome"))
        ga.append(p["GA"])
        ma.append(p["MA"])
    fig = Figure("Final population")
    fig.panel(0, "Final population", "GA", "MA", _finite_lim(ga), _finite_lim(ma)).points(ga, ma, COLORS[0])
    fig.save(path)
    return len(ga)


def plot_reports(run_dir) -> list[Path]:
    """Write convergence, response and scatter SVGs into ``run_dir/plots``."""
    run_dir = Path(run_dir)
    needed = ["convergence.csv", "structure.json", "population.json"]
    missing = [n for n in needed if not (run_dir / n).is_file()]
    if missing:
        raise ExportError(f"{run_dir}: missing run file(s) {', '.join(missing)}")
    out = run_dir / "plots"
    out.mkdir(exist_ok=True)
    paths = [out / "convergence.svg", out / "response.svg", out / "scatter.svg"]
    convergence_plot(read_convergence(run_dir / "convergence.csv"), paths[0])
    record = read_json(run_dir / "structure.json")
    if record["evaluation"].get("valid"):
        response_plot(record, paths[1])
    else:
        fig = Figure("Linear response", 2)
        fig.panel(0, "No valid structure", "d_in [mm]", "d_out [mm]", (0, 1), (0, 1))
        fig.save(paths[1])
    scatter_plot(read_json(run_dir / "population.json")["candidates"], paths[2])
    return paths
