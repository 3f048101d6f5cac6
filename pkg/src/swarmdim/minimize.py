"""Energy-descent solvers for the particle gradient flow.

The default scheme is explicit Euler with a backtracking step: a step is kept
only if it strictly lowers the discrete energy, after which the step grows;
otherwise it is discarded and the step shrinks. ``RK4`` replaces the Euler
update by a classical Runge-Kutta step under the same acceptance rule.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path

import numpy as np

from .energy import ParticleConfiguration, SingularPair, _accumulate_raw, accumulate
from .potentials import PotentialSpec, validate, InvalidPotential

logger = logging.getLogger(__name__)

__all__ = [
    "Scheme",
    "Termination",
    "MinimizerSettings",
    "RunReport",
    "StepResult",
    "StepUnderflow",
    "NumericalFailure",
    "init_configuration",
    "step_adaptive_euler",
    "step_rk4",
    "minimize",
]

PLATEAU_WINDOW = 50
TRACE_POINTS = 1000
ROUNDOFF_FACTOR = 4.0


class Scheme(str, Enum):
    ADAPTIVE_EULER = "AdaptiveEuler"
    RK4 = "RK4"


class Termination(str, Enum):
    GRAD_TOL = "GradTol"
    ENERGY_PLATEAU = "EnergyPlateau"
    MAX_ITERS = "MaxIters"
    STEP_UNDERFLOW = "StepUnderflow"


class StepUnderflow(ArithmeticError):
    pass


class NumericalFailure(ArithmeticError):
    pass


@dataclass
class MinimizerSettings:
    scheme: Scheme = Scheme.ADAPTIVE_EULER
    dt_init: float = 1e-2
    grow: float = 1.2
    shrink: float = 0.5
    dt_min: float = 1e-12
    max_iters: int = 200_000
    grad_tol: float = 1e-8
    energy_tol: float = 1e-13
    snapshot_every: int = 0
    snapshot_dir: str | None = None

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        self.max_iters = int(self.max_iters)
        self.snapshot_every = int(self.snapshot_every)
        if not 0 < self.dt_min < self.dt_init:
            raise ValueError("need 0 < dt_min < dt_init")
        if not 0 < self.shrink < 1 < self.grow:
            raise ValueError("need 0 < shrink < 1 < grow")
        if self.grad_tol <= 0 or self.energy_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class RunReport:
    iterations: int
    accepted_steps: int
    rejected_steps: int
    final_energy: float
    final_grad_norm: float
    termination: Termination
    wall_seconds: float
    energy_trace: list = field(default_factory=list)  # (iteration, energy) pairs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["termination"] = self.termination.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        d = dict(d)
        d["termination"] = Termination(d["termination"])
        d["energy_trace"] = [tuple(t) for t in d.get("energy_trace", [])]
        return cls(**d)


@dataclass
class StepResult:
    config: ParticleConfiguration
    energy: float
    dt: float
    accepted: bool


def init_configuration(n: int, ambient_dim: int, radius: float = 1.0, seed: int = 0,
                       masses=None) -> ParticleConfiguration:
    """``n`` i.i.d. uniform points in the ball of ``radius`` about the origin.

    Uses numpy's PCG64 generator, so the same seed always gives the same
    configuration.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    dirs = rng.standard_normal((n, ambient_dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.random(n) ** (1.0 / ambient_dim)
    recipe = f"uniform-ball(n={n}, dim={ambient_dim}, radius={radius!r}, rng=PCG64)"
    return ParticleConfiguration(dirs * radii[:, None], masses, seed=seed, recipe=recipe)


def _eval(X, m, spec):
    """Energy and forces, with singular or overflowing states mapped to +inf."""
    try:
        acc = _accumulate_raw(X, m, spec)
    except SingularPair:
        return math.inf, None
    if not math.isfinite(acc.energy) or not np.all(np.isfinite(acc.forces)):
        return math.inf, None
    return acc.energy, acc.forces


def _rk4_positions(X, m, spec, dt, F0=None):
    def rhs(Y):
        acc = _accumulate_raw(Y, m, spec)
        return acc.forces
    k1 = rhs(X) if F0 is None else F0
    k2 = rhs(X + 0.5 * dt * k1)
    k3 = rhs(X + 0.5 * dt * k2)
    k4 = rhs(X + dt * k3)
    return X + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(config: ParticleConfiguration, spec: PotentialSpec, dt: float) -> ParticleConfiguration:
    """One classical RK4 step of the gradient flow, no acceptance test."""
    try:
        X = _rk4_positions(config.positions, config.masses, spec, dt)
    except SingularPair as exc:
        raise NumericalFailure(str(exc)) from exc
    if not np.all(np.isfinite(X)):
        raise NumericalFailure("RK4 step produced a non-finite state")
    return config.with_positions(X)


def step_adaptive_euler(config: ParticleConfiguration, spec: PotentialSpec, dt: float,
                        settings: MinimizerSettings | None = None) -> StepResult:
    """Try ``X + dt F``; keep it only if the energy strictly decreases."""
    s = settings or MinimizerSettings()
    if dt < s.dt_min:
        raise StepUnderflow(f"dt={dt:g} below dt_min={s.dt_min:g}")
    acc = accumulate(config, spec)
    if not math.isfinite(acc.energy):
        raise ValueError("step requires a finite starting energy")
    cand = config.positions + dt * acc.forces
    e_new, _ = _eval(cand, config.masses, spec)
    if e_new < acc.energy:
        return StepResult(config.with_positions(cand), e_new, dt * s.grow, True)
    return StepResult(config, acc.energy, dt * s.shrink, False)


def _roundoff(E, n):
    return ROUNDOFF_FACTOR * np.finfo(float).eps * n * max(abs(E), 1e-300)


def _subsample(trace, k=TRACE_POINTS):
    if len(trace) <= k:
        return list(trace)
    idx = np.unique(np.linspace(0, len(trace) - 1, k).round().astype(int))
    return [trace[i] for i in idx]


def _snapshot(settings, X, config, accepted):
    from .io import write_configuration
    out = Path(settings.snapshot_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_configuration(config.with_positions(X), out / f"snapshot_{accepted:08d}.csv")


def minimize(config: ParticleConfiguration, spec: PotentialSpec,
             settings: MinimizerSettings | None = None,
             callback=None) -> tuple[ParticleConfiguration, RunReport]:
    """Descend the discrete energy from ``config`` until a stopping rule fires.

    Stopping rules, checked every iteration: the largest force falls below
    ``grad_tol``; the relative energy decrease over the last 50 iterations
    falls below ``energy_tol``, or a rejected step's predicted decrease is
    below the round-off of ``E``; the step falls below ``dt_min``; or
    ``max_iters`` is reached. The returned energy never exceeds the start.
    ``callback(iteration, positions, energy)`` runs after each accepted step.
    """
    s = settings or MinimizerSettings()
    problems = validate(spec, config.dim)
    if problems:
        raise InvalidPotential("; ".join(problems))
    t0 = time.perf_counter()
    m = config.masses
    X = config.positions.copy()
    acc = _accumulate_raw(X, m, spec)  # SingularPair propagates from the start state
    E, F = acc.energy, acc.forces
    if not math.isfinite(E):
        raise ValueError("initial energy is not finite")

    dt = s.dt_init
    accepted = rejected = 0
    trace = [(0, E)]
    window = [E]
    termination = Termination.MAX_ITERS
    it = 0
    while it < s.max_iters:
        gnorm = float(np.sqrt((F * F).sum(axis=1)).max()) if len(F) else 0.0
        if gnorm < s.grad_tol:
            termination = Termination.GRAD_TOL
            break
        it += 1
        if s.scheme is Scheme.RK4:
            try:
                cand = _rk4_positions(X, m, spec, dt, F)
            except SingularPair:
                cand = None
            if cand is None or not np.all(np.isfinite(cand)):
                e_new, f_new = math.inf, None
            else:
                e_new, f_new = _eval(cand, m, spec)
        else:
            cand = X + dt * F
            e_new, f_new = _eval(cand, m, spec)

        if e_new < E:
            X, E, F = cand, e_new, f_new
            accepted += 1
            dt *= s.grow
            trace.append((it, E))
            if callback is not None:
                callback(it, X, E)
            if s.snapshot_every and s.snapshot_dir and accepted % s.snapshot_every == 0:
                _snapshot(s, X, config, accepted)
        else:
            rejected += 1
            # first-order decrease dt * sum m|F|^2 below the summation round-off
            # of E means no step size can be resolved: a plateau, not a failure
            if dt * float(m @ (F * F).sum(axis=1)) < _roundoff(E, len(m)):
                termination = Termination.ENERGY_PLATEAU
                break
            dt *= s.shrink
            if dt < s.dt_min:
                termination = Termination.STEP_UNDERFLOW
                break

        window.append(E)
        if len(window) > PLATEAU_WINDOW + 1:
            window.pop(0)
            drop = window[0] - E
            if drop <= s.energy_tol * max(abs(E), 1e-300):
                termination = Termination.ENERGY_PLATEAU
                break

    gnorm = float(np.sqrt((F * F).sum(axis=1)).max())
    report = RunReport(
        iterations=it,
        accepted_steps=accepted,
        rejected_steps=rejected,
        final_energy=float(E),
        final_grad_norm=gnorm,
        termination=termination,
        wall_seconds=time.perf_counter() - t0,
        energy_trace=_subsample(trace),
    )
    logger.info("minimize: %s after %d iterations (E=%.12g, |F|max=%.3g)",
                termination.value, it, E, gnorm)
    return config.with_positions(X), report
