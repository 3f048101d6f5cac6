"""Particle configurations, the discrete interaction energy and its forces.

The energy of weighted particles ``X_i`` with masses ``m_i`` is

    E = 1/2 * sum_{i != j} m_i m_j W(X_i - X_j)

and the force on particle ``i`` is the velocity of the particle gradient flow,
``F_i = -sum_{j != i} m_j grad W(X_i - X_j)``. Note ``m_i F_i = -dE/dX_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .potentials import (PotentialSpec, validate, InvalidPotential, w_scalar, w_and_dw_over_r2,
                         FAST_FLAGS)

__all__ = [
    "ParticleConfiguration",
    "PairAccumulator",
    "SingularPair",
    "accumulate",
    "total_energy",
    "forces",
    "generated_potential",
    "pair_distance_stats",
    "diameter",
]

COINCIDENCE_RTOL = 1e-14


class SingularPair(ArithmeticError):
    """Two particles coincide where the potential is infinite."""

    def __init__(self, i: int, j: int):
        super().__init__(f"particles {i} and {j} coincide and w(0) = +inf")
        self.pair = (i, j)


@dataclass
class ParticleConfiguration:
    """``n`` weighted points in ``R^N``.

    Masses default to ``1/n`` and must sum to one.
    """

    positions: np.ndarray
    masses: np.ndarray | None = None
    seed: int | None = None
    recipe: str = ""

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[0] < 1:
            raise ValueError("positions must be an (n, N) array with n >= 1")
        if pos.shape[1] not in (1, 2, 3):
            raise ValueError(f"ambient dimension must be 1, 2 or 3, got {pos.shape[1]}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        n = pos.shape[0]
        if self.masses is None:
            m = np.full(n, 1.0 / n)
        else:
            m = np.array(self.masses, dtype=np.float64).ravel()
            if m.shape[0] != n:
                raise ValueError("one mass per particle required")
            if np.any(m <= 0):
                raise ValueError("masses must be positive")
            if abs(m.sum() - 1.0) > 1e-12:
                raise ValueError(f"masses must sum to 1 (sum={m.sum()!r})")
        self.positions = pos
        self.masses = m

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def with_positions(self, positions) -> "ParticleConfiguration":
        return ParticleConfiguration(positions, self.masses.copy(), self.seed, self.recipe)

    def centroid(self) -> np.ndarray:
        return self.masses @ self.positions


@dataclass
class PairAccumulator:
    energy: float
    forces: np.ndarray
    min_pair_distance: float
    singular_pair_count: int

    def net_force(self, masses) -> np.ndarray:
        """``sum_i m_i F_i``; zero up to round-off by translation invariance."""
        return masses @ self.forces


@njit(cache=True, fastmath=FAST_FLAGS)
def _accumulate(X, m, kind, params, w0, thresh, want_forces):
    n, dim = X.shape
    F = np.zeros((n, dim))
    energy = 0.0
    thresh2 = thresh * thresh
    d2min = math.inf
    n_sing = 0
    si = -1
    sj = -1
    d = np.empty(dim)
    for i in range(n - 1):
        e_i = 0.0
        for j in range(i + 1, n):
            r2 = 0.0
            for k in range(dim):
                d[k] = X[i, k] - X[j, k]
                r2 += d[k] * d[k]
            if r2 < d2min:
                d2min = r2
            if r2 <= thresh2:
                n_sing += 1
                if math.isinf(w0):
                    if si < 0:
                        si = i
                        sj = j
                else:
                    e_i += m[j] * w0
                continue
            w, g = w_and_dw_over_r2(kind, params, r2)
            e_i += m[j] * w
            if want_forces:
                for k in range(dim):
                    f = g * d[k]
                    F[i, k] -= m[j] * f
                    F[j, k] += m[i] * f
        energy += m[i] * e_i
    return energy, F, math.sqrt(d2min), n_sing, si, sj


def _bbox_diag(X):
    return float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))


def accumulate(config: ParticleConfiguration, spec: PotentialSpec,
               want_forces: bool = True) -> PairAccumulator:
    """Energy and forces in one O(n^2) pass over the pairs ``i < j``.

    Pairs are summed in a canonical (lexicographic) particle order, so a
    relabelled configuration gives bitwise the same energy and forces.
    Pairs closer than ``1e-14`` times the configuration extent are treated as
    coincident. They contribute ``w(0)`` to the energy and no force when
    ``w(0)`` is finite, and raise :class:`SingularPair` otherwise.
    """
    problems = validate(spec, config.dim)
    if problems:
        raise InvalidPotential("; ".join(problems))
    return _accumulate_raw(config.positions, config.masses, spec, want_forces)


def _canonical_order(X, m):
    # lexicographic in (coordinates, mass): relabelled inputs sum in the same order
    keys = [m] + [X[:, k] for k in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def _accumulate_raw(X, m, spec, want_forces=True):
    kind, params = spec.kernel_args()
    w0 = w_scalar(kind, params, 0.0)
    thresh = COINCIDENCE_RTOL * _bbox_diag(X)
    order = _canonical_order(X, m)
    energy, Fs, dmin, n_sing, si, sj = _accumulate(
        np.ascontiguousarray(X[order]), np.ascontiguousarray(m[order]), kind, params, w0,
        thresh, want_forces)
    if si >= 0:
        i, j = sorted((int(order[si]), int(order[sj])))
        raise SingularPair(i, j)
    F = np.empty_like(Fs)
    F[order] = Fs
    return PairAccumulator(float(energy), F, float(dmin), int(n_sing))


def total_energy(config: ParticleConfiguration, spec: PotentialSpec) -> float:
    """Discrete interaction energy ``1/2 sum_{i!=j} m_i m_j W(X_i - X_j)``."""
    return accumulate(config, spec, want_forces=False).energy


def forces(config: ParticleConfiguration, spec: PotentialSpec) -> np.ndarray:
    """Right-hand side of the particle gradient flow, one row per particle."""
    return accumulate(config, spec).forces


@njit(cache=True)
def _generated(X, m, kind, params, Q, self_idx):
    nq = Q.shape[0]
    n, dim = X.shape
    out = np.zeros(nq)
    for q in range(nq):
        acc = 0.0
        for j in range(n):
            if j == self_idx[q]:
                continue
            r2 = 0.0
            for k in range(dim):
                t = Q[q, k] - X[j, k]
                r2 += t * t
            acc += m[j] * w_scalar(kind, params, math.sqrt(r2))
        out[q] = acc
    return out


def generated_potential(config: ParticleConfiguration, spec: PotentialSpec,
                        query_points, self_indices=None) -> np.ndarray:
    """``V(x) = sum_j m_j W(x - X_j)`` at each query point.

    ``self_indices[q] = j`` drops particle ``j`` from the sum for query ``q``
    (use -1 for none). Without exclusion a query sitting on a particle of a
    singular potential gets ``+inf``.
    """
    Q = np.atleast_2d(np.asarray(query_points, dtype=np.float64))
    if Q.shape[1] != config.dim:
        raise ValueError("query points must live in the configuration's space")
    if self_indices is None:
        idx = np.full(Q.shape[0], -1, dtype=np.int64)
    else:
        idx = np.asarray(self_indices, dtype=np.int64)
    kind, params = spec.kernel_args()
    return _generated(config.positions, config.masses, kind, params,
                      np.ascontiguousarray(Q), idx)


def _pdist(X):
    from scipy.spatial.distance import pdist
    return pdist(X)


def diameter(config: ParticleConfiguration) -> float:
    if config.n < 2:
        return 0.0
    return float(_pdist(config.positions).max())


def pair_distance_stats(config: ParticleConfiguration) -> dict:
    """Order statistics of the ``n(n-1)/2`` pairwise distances."""
    if config.n < 2:
        raise ValueError("pair distance statistics need at least two particles")
    d = np.sort(_pdist(config.positions))
    return {"min": float(d[0]), "max": float(d[-1]),
            "median": float(np.median(d)), "all_pairs_sorted": d}
