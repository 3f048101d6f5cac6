"""Parameter sweeps over ``(gamma, alpha)`` grids.

Every valid cell is run from several seeds; the cell's dimension is the
majority vote of the per-seed classifications. Analytic boundaries are
attached as polylines so a plot of the grid can be read against them.
"""
from __future__ import annotations

import logging
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .diagnostics import classify_dimension
from .io import write_json, read_json, write_columns
from .minimize import MinimizerSettings, Termination, init_configuration, minimize
from .potentials import PotentialSpec, validate

logger = logging.getLogger(__name__)

__all__ = [
    "fattening_curve_2d",
    "SweepCell",
    "PhaseDiagram",
    "run_sweep",
    "run_cell_seed",
    "emit_diagram",
    "read_diagram",
    "SHELL_CURVE_NOTE",
]

SHELL_CURVE_NOTE = ("3D spherical-shell instability curve omitted: "
                    "no closed form is available")
CONVERGED = {Termination.GRAD_TOL.value, Termination.ENERGY_PLATEAU.value}


def fattening_curve_2d(gamma: float) -> float:
    """``alpha = gamma / (gamma - 1)``.

    Below this curve a two-dimensional ring minimizer thickens into an
    annulus.
    """
    if not gamma > 1:
        raise ValueError(f"fattening curve needs gamma > 1, got {gamma}")
    return gamma / (gamma - 1.0)


class _RunTimeout(Exception):
    pass


@dataclass
class SweepCell:
    gamma: float
    alpha: float
    valid: bool = True
    seeds_used: list = field(default_factory=list)
    runs: list = field(default_factory=list)  # one summary dict per seed
    majority_dim: int | None = None
    agreement: float = 0.0
    anomalous: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "alpha": self.alpha, "valid": self.valid,
                "seeds_used": list(self.seeds_used), "runs": list(self.runs),
                "majority_dim": self.majority_dim, "agreement": self.agreement,
                "anomalous": self.anomalous, "note": self.note}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepCell":
        return cls(**d)


@dataclass
class PhaseDiagram:
    ambient_dim: int
    n_particles: int
    variant: str = "powerlaw"
    p: float | None = None
    cells: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)  # name -> [[gamma, alpha], ...]
    notes: list = field(default_factory=list)

    def cell(self, gamma: float, alpha: float) -> SweepCell:
        for c in self.cells:
            if math.isclose(c.gamma, gamma) and math.isclose(c.alpha, alpha):
                return c
        raise KeyError((gamma, alpha))

    def to_dict(self) -> dict:
        return {"ambient_dim": self.ambient_dim, "n_particles": self.n_particles,
                "variant": self.variant, "p": self.p,
                "cells": [c.to_dict() for c in self.cells],
                "curves": {k: [list(map(float, pt)) for pt in v] for k, v in self.curves.items()},
                "notes": list(self.notes)}

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseDiagram":
        d = dict(d)
        d["cells"] = [SweepCell.from_dict(c) for c in d["cells"]]
        return cls(**d)


def _cell_spec(template: PotentialSpec, alpha: float, gamma: float) -> PotentialSpec:
    if template.variant == "tanh":
        raise ValueError("sweeps run over (gamma, alpha); the tanh well has neither")
    return replace(template, alpha=float(alpha), gamma=float(gamma))


def run_cell_seed(spec: PotentialSpec, ambient_dim: int, n_particles: int, seed: int,
                  settings: MinimizerSettings, radius: float = 1.0,
                  run_timeout: float | None = None) -> dict:
    """One ``init -> minimize -> classify`` run, summarized as a plain dict.

    Failures come back as ``{"seed": .., "error": ..}`` rather than raising.
    """
    out = {"seed": int(seed), "error": None}
    t0 = time.perf_counter()

    def guard(it, X, E):
        if run_timeout is not None and time.perf_counter() - t0 > run_timeout:
            raise _RunTimeout(f"run exceeded {run_timeout:g} s")

    try:
        config = init_configuration(n_particles, ambient_dim, radius, seed)
        final, report = minimize(config, spec, settings, callback=guard)
        dim = classify_dimension(final, spec)
    except _RunTimeout as exc:
        out["error"] = f"interrupted: {exc}"
        return out
    except Exception as exc:  # recorded per run, the sweep carries on
        out["error"] = f"{type(exc).__name__}: {exc}"
        return out
    run = report.to_dict()
    run.pop("energy_trace")
    run.pop("wall_seconds")  # keeps reruns byte-identical
    summary = dim.to_dict()
    summary.pop("radial_histogram")
    out["run"] = run
    out["dimension"] = summary
    return out


def _aggregate(cell: SweepCell) -> None:
    dims = [r["dimension"]["classified_dim"] for r in cell.runs
            if r.get("error") is None and r["dimension"]["classified_dim"] is not None]
    if not dims:
        cell.majority_dim, cell.agreement = None, 0.0
        cell.note = cell.note or "no successful runs"
        return
    counts = Counter(dims)
    top = max(counts.values())
    # ties go to the value seen first in seed order
    cell.majority_dim = next(d for d in dims if counts[d] == top)
    cell.agreement = top / len(dims)
    if cell.alpha > 2:
        bad = [r["seed"] for r in cell.runs if r.get("error") is None
               and r["run"]["termination"] in CONVERGED
               and r["dimension"]["classified_dim"] not in (0, None)]
        if bad:
            cell.anomalous = True
            cell.note = (f"alpha > 2 predicts point support, but converged seeds {bad} "
                         f"classified positive-dimensional")


def _curves(gammas, ambient_dim):
    g = np.asarray(gammas, dtype=float)
    if g.size == 0:
        return {}
    lo, hi = float(g.min()), float(g.max())
    if hi == lo:
        hi = lo + 1.0
    xs = np.linspace(lo, hi, 200)
    curves = {
        "mild_repulsion_alpha_2": np.column_stack([xs, np.full_like(xs, 2.0)]),
        "alpha_eq_gamma": np.column_stack([xs, xs]),
    }
    if ambient_dim == 2:
        fx = xs[xs > 1.0 + 1e-9]
        if fx.size:
            curves["fattening"] = np.column_stack([fx, fx / (fx - 1.0)])
    return {k: v.tolist() for k, v in curves.items()}


def run_sweep(gammas, alphas, ambient_dim: int, n_particles: int, seeds=(0, 1, 2),
              settings: MinimizerSettings | None = None,
              template: PotentialSpec | None = None, radius: float = 1.0,
              workers: int = 1, run_timeout: float | None = None,
              progress=None) -> PhaseDiagram:
    """Minimize and classify every valid ``(gamma, alpha)`` cell for every seed.

    Cells with ``alpha >= gamma`` (or otherwise invalid parameters) are kept
    in the grid, marked invalid and not run. ``template`` fixes the family
    and its other parameters (default: plain power law). With
    ``workers > 1`` the ``(cell, seed)`` runs go to a process pool; results
    are reduced by key, so the diagram does not depend on completion order.
    ``progress(cell)`` is called after each cell is aggregated.
    """
    settings = settings or MinimizerSettings()
    template = template or PotentialSpec.powerlaw(0.5, 5.0)
    seeds = [int(s) for s in seeds]
    diagram = PhaseDiagram(ambient_dim, int(n_particles), template.variant,
                           template.p if template.variant == "cosine" else None)
    diagram.curves = _curves(gammas, ambient_dim)
    if ambient_dim == 3:
        diagram.notes.append(SHELL_CURVE_NOTE)

    jobs = []
    for g in gammas:
        for a in alphas:
            cell = SweepCell(float(g), float(a))
            diagram.cells.append(cell)
            if a >= g:
                cell.valid = False
                cell.note = "alpha >= gamma: no confinement"
                continue
            spec = _cell_spec(template, a, g)
            problems = validate(spec, ambient_dim)
            if problems:
                cell.valid = False
                cell.note = "; ".join(problems)
                continue
            cell.seeds_used = list(seeds)
            jobs.append((cell, spec))

    def finish(cell, results):
        cell.runs = [results[s] for s in seeds]
        _aggregate(cell)
        if progress is not None:
            progress(cell)

    if workers <= 1:
        interrupted = False
        for cell, spec in jobs:
            if interrupted:
                cell.runs = [{"seed": s, "error": "not run: sweep interrupted"} for s in seeds]
                _aggregate(cell)
                continue
            results = {}
            for s in seeds:
                try:
                    results[s] = run_cell_seed(spec, ambient_dim, n_particles, s, settings,
                                               radius, run_timeout)
                except KeyboardInterrupt:
                    results[s] = {"seed": s, "error": "interrupted"}
                    interrupted = True
                if interrupted:
                    for rest in seeds:
                        results.setdefault(rest, {"seed": rest, "error": "not run: sweep interrupted"})
                    break
            finish(cell, results)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {(id(cell), s): pool.submit(run_cell_seed, spec, ambient_dim, n_particles, s,
                                               settings, radius, run_timeout)
                    for cell, spec in jobs for s in seeds}
            for cell, _ in jobs:
                results = {}
                for s in seeds:
                    try:
                        results[s] = futs[(id(cell), s)].result()
                    except Exception as exc:
                        results[s] = {"seed": s, "error": f"{type(exc).__name__}: {exc}"}
                finish(cell, results)
    return diagram


def _grid_text(diagram: PhaseDiagram) -> str:
    gammas = sorted({c.gamma for c in diagram.cells})
    alphas = sorted({c.alpha for c in diagram.cells}, reverse=True)
    lookup = {(c.gamma, c.alpha): c for c in diagram.cells}
    width = max([8] + [len(f"{g:g}") + 2 for g in gammas])
    lines = [f"# majority dimension, N={diagram.ambient_dim}, n={diagram.n_particles}; "
             "rows alpha, columns gamma; '-' invalid, 'F' no successful run, '*' anomalous",
             "alpha\\gamma".ljust(12) + "".join(f"{g:g}".rjust(width) for g in gammas)]
    for a in alphas:
        row = f"{a:g}".ljust(12)
        for g in gammas:
            c = lookup.get((g, a))
            if c is None or not c.valid:
                tok = "-"
            elif c.majority_dim is None:
                tok = "F"
            else:
                tok = str(c.majority_dim) + ("*" if c.anomalous else "")
            row += tok.rjust(width)
        lines.append(row)
    return "\n".join(lines) + "\n"


def emit_diagram(diagram: PhaseDiagram, path) -> Path:
    """Write ``diagram.json``, ``diagram.txt`` and one ``curve_<name>.dat`` per curve.

    ``path`` is the output directory; the JSON path is returned.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    jpath = write_json(diagram.to_dict(), out / "diagram.json")
    (out / "diagram.txt").write_text(_grid_text(diagram))
    for name, pts in diagram.curves.items():
        arr = np.asarray(pts, dtype=float).reshape(-1, 2)
        write_columns(out / f"curve_{name}.dat", [arr[:, 0], arr[:, 1]], header="gamma alpha")
    return jpath


def read_diagram(path) -> PhaseDiagram:
    """Load a diagram from ``diagram.json`` or the directory holding it."""
    p = Path(path)
    if p.is_dir():
        p = p / "diagram.json"
    return PhaseDiagram.from_dict(read_json(p))
