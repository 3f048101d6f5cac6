"""Diagnostics for converged configurations.

Two families of checks live here. Dimension diagnostics estimate how many
dimensions the particle support occupies: a correlation-dimension slope, a
single-linkage cluster decomposition that detects point-supported states, a
local principal-component count and a radial histogram. Optimality
diagnostics evaluate the first-order conditions of a local minimizer: the
generated potential ``V = W * mu`` is constant on each connected piece of the
support, equals ``2E`` there, is not lower off the support, and the Laplacian
of ``W * mu`` is non-negative on the support.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .energy import ParticleConfiguration, SingularPair, COINCIDENCE_RTOL, generated_potential, total_energy
from .potentials import (PotentialSpec, classify_repulsion, validate, InvalidPotential,
                         w_scalar, w_prime_scalar, w_second_scalar)

logger = logging.getLogger(__name__)

__all__ = [
    "Cluster",
    "CorrelationFit",
    "DimensionReport",
    "EulerLagrangeReport",
    "correlation_integral",
    "estimate_correlation_dimension",
    "cluster_decomposition",
    "local_dimensions",
    "classify_dimension",
    "radial_histogram",
    "riesz_energy",
    "euler_lagrange_check",
    "support_link_distance",
]

CLUSTER_LINK_FRACTION = 0.01
HIST_BINS = 40
MIN_CLASSIFY_N = 10
LOCAL_TAU = 0.1


# ---------------------------------------------------------------- dimension


def correlation_integral(config: ParticleConfiguration, radii) -> np.ndarray:
    """Fraction of unordered pairs closer than each radius.

    ``C(r) = 2 / (n (n-1)) * #{i < j : |X_i - X_j| < r}``.
    """
    if config.n < 2:
        raise ValueError("correlation integral needs at least two particles")
    r = np.asarray(radii, dtype=np.float64)
    d = np.sort(pdist(config.positions))
    return np.searchsorted(d, r, side="left") / d.size


@dataclass
class CorrelationFit:
    corr_dim: float
    fit_range: tuple
    fit_r2: float


def _nn_distances(X):
    d, _ = cKDTree(X).query(X, 2)
    return d[:, 1]


def estimate_correlation_dimension(config: ParticleConfiguration, fit_range=None,
                                   n_radii: int = 16) -> CorrelationFit:
    """Slope of ``log C(r)`` against ``log r``.

    The default fit window is ``[r_lo, 3 r_lo]`` with ``r_lo`` the larger of
    twice the median nearest-neighbour spacing and ``1e-3`` of the diameter:
    just above the particle spacing, where the count measures the local
    dimension of the support rather than its global shape. Pass
    ``fit_range=(r_lo, r_hi)`` to fit elsewhere, e.g. between pair-distance
    quantiles.

    The slope is an estimator, not a certificate. It is clipped to
    ``[0, N + 0.5]``. All points coincident gives ``(0, ..., 1)``.
    """
    X = config.positions
    n = config.n
    if n < 2:
        raise ValueError("need at least two particles")
    if n < 50:
        warnings.warn(f"correlation dimension from only {n} points is unreliable", stacklevel=2)
    d = np.sort(pdist(X))
    diam = d[-1]
    if diam == 0.0:
        return CorrelationFit(0.0, (0.0, 0.0), 1.0)
    if fit_range is None:
        h = float(np.median(_nn_distances(X)))
        r_lo = max(2.0 * h, 1e-3 * diam)
        r_hi = min(3.0 * r_lo, diam)
    else:
        r_lo, r_hi = map(float, fit_range)
    if not 0 < r_lo < r_hi:
        raise ValueError(f"bad fit range ({r_lo}, {r_hi})")
    radii = np.geomspace(r_lo, r_hi, n_radii)
    C = np.searchsorted(d, radii, side="left") / d.size
    ok = C > 0
    if ok.sum() < 2:
        return CorrelationFit(0.0, (r_lo, r_hi), 1.0)
    x, y = np.log(radii[ok]), np.log(C[ok])
    slope, icept = np.polyfit(x, y, 1)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float(((y - (slope * x + icept)) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    slope = min(max(float(slope), 0.0), config.dim + 0.5)
    return CorrelationFit(slope, (r_lo, r_hi), r2)


@dataclass
class Cluster:
    indices: np.ndarray
    diameter: float
    centroid: np.ndarray

    @property
    def size(self) -> int:
        return len(self.indices)


def _labels(X, link):
    n = len(X)
    pairs = cKDTree(X).query_pairs(link, output_type="ndarray")
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, lab = connected_components(g, directed=False)
    # relabel by first occurrence so numbering does not depend on the graph code
    _, first = np.unique(lab, return_index=True)
    order = np.argsort(np.argsort(first))
    return order[lab]


def cluster_decomposition(config: ParticleConfiguration, link_distance: float) -> list[Cluster]:
    """Single-linkage components: particles closer than ``link_distance`` are joined.

    Clusters are ordered by their smallest particle index.
    """
    if link_distance <= 0:
        raise ValueError("link_distance must be positive")
    X, m = config.positions, config.masses
    lab = _labels(X, link_distance)
    out = []
    for k in range(lab.max() + 1):
        idx = np.flatnonzero(lab == k)
        diam = float(pdist(X[idx]).max()) if len(idx) > 1 else 0.0
        cen = (m[idx] @ X[idx]) / m[idx].sum()
        out.append(Cluster(idx, diam, cen))
    return out


def local_dimensions(config: ParticleConfiguration, k: int | None = None,
                     tau: float = LOCAL_TAU) -> np.ndarray:
    """Per-particle dimension from the covariance of the ``k`` nearest neighbours.

    Counts covariance eigenvalues at least ``tau`` times the largest. The
    default ``k = 4N`` spans the first shell or two of a particle lattice.
    """
    X = config.positions
    n, N = X.shape
    k = min(k or 4 * N, n - 1)
    if k < 1:
        return np.zeros(n, dtype=int)
    _, idx = cKDTree(X).query(X, k + 1)
    nb = X[idx[:, 1:]] - X[:, None, :]
    cov = np.einsum("nki,nkj->nij", nb, nb) / k
    ev = np.linalg.eigvalsh(cov)[:, ::-1]
    dims = (ev >= tau * ev[:, :1]).sum(axis=1)
    diam = float(pdist(X).max())
    dims[np.sqrt(np.maximum(ev[:, 0], 0.0)) < 1e-3 * diam] = 0
    return dims


def radial_histogram(config: ParticleConfiguration, bins: int = HIST_BINS) -> np.ndarray:
    """Counts of ``|X_i - centroid|`` in equal bins over ``[0, max]``.

    Returns rows ``(bin_center, count)``. When every particle sits at the
    centroid the single row ``(0, n)`` is returned.
    """
    r = np.linalg.norm(config.positions - config.centroid(), axis=1)
    rmax = float(r.max())
    if rmax == 0.0:
        return np.array([[0.0, float(config.n)]])
    counts, edges = np.histogram(r, bins=bins, range=(0.0, rmax))
    return np.column_stack([0.5 * (edges[:-1] + edges[1:]), counts.astype(float)])


@dataclass
class DimensionReport:
    """Dimension estimates for one configuration.

    ``classified_dim`` is ``None`` when ``refused`` is set (fewer than ten
    particles). ``corr_dim`` is reported alongside but does not decide the
    class; ``local_dim_shares[d]`` is the fraction of particles whose
    neighbourhood looks ``d``-dimensional.
    """

    n: int
    ambient_dim: int
    corr_dim: float
    fit_range: tuple
    fit_r2: float
    cluster_count: int
    max_cluster_diameter: float
    classified_dim: int | None
    radial_histogram: np.ndarray
    beta_lower_bound: float | None = None
    local_dim_shares: list = field(default_factory=list)
    refused: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "ambient_dim": self.ambient_dim,
            "corr_dim": self.corr_dim,
            "fit_range": list(self.fit_range),
            "fit_r2": self.fit_r2,
            "cluster_count": self.cluster_count,
            "max_cluster_diameter": self.max_cluster_diameter,
            "classified_dim": self.classified_dim,
            "radial_histogram": np.asarray(self.radial_histogram).tolist(),
            "beta_lower_bound": self.beta_lower_bound,
            "local_dim_shares": list(self.local_dim_shares),
            "refused": self.refused,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DimensionReport":
        d = dict(d)
        d["fit_range"] = tuple(d["fit_range"])
        d["radial_histogram"] = np.asarray(d["radial_histogram"], dtype=float)
        return cls(**d)


def classify_dimension(config: ParticleConfiguration, spec: PotentialSpec | None = None,
                       bins: int = HIST_BINS) -> DimensionReport:
    """Integer dimension of the particle support.

    1. Cluster at link ``0.01 * diameter``. If every cluster is smaller than
       that and there are at most ``n / 4`` of them, the support is a finite
       set of points: dimension 0. (A coarse lattice also splits into
       singletons, hence the count guard.)
    2. Otherwise each particle gets a local dimension from its neighbour
       covariance (see :func:`local_dimensions`). A ``d``-dimensional part is
       resolved when at least one neighbourhood's worth of particles
       (``4N + 1``) reads ``d``. The support dimension is the largest
       resolved ``d``, clipped to ``[1, N]``: a union is as high-dimensional
       as its highest-dimensional part, however little mass that part has.
    """
    n, N = config.n, config.dim
    beta = None
    if spec is not None:
        beta = classify_repulsion(spec, N).predicted_dim_lower_bound
    hist = radial_histogram(config, bins)
    if n < MIN_CLASSIFY_N:
        return DimensionReport(n, N, math.nan, (math.nan, math.nan), math.nan, 0, math.nan,
                               None, hist, beta, [], True,
                               f"classification refused: n={n} < {MIN_CLASSIFY_N}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = estimate_correlation_dimension(config)
    diam = float(pdist(config.positions).max())
    if diam == 0.0:
        return DimensionReport(n, N, fit.corr_dim, fit.fit_range, fit.fit_r2, 1, 0.0, 0, hist,
                               beta, [1.0] + [0.0] * N, False, "all particles coincide")
    clusters = cluster_decomposition(config, CLUSTER_LINK_FRACTION * diam)
    max_cd = max(c.diameter for c in clusters)
    dims = local_dimensions(config)
    shares = (np.bincount(dims, minlength=N + 1) / n).tolist()
    if max_cd < CLUSTER_LINK_FRACTION * diam and len(clusters) <= n / 4:
        cls_dim = 0
        note = f"{len(clusters)} point clusters"
    else:
        counts = np.bincount(dims, minlength=N + 1)
        need = min(4 * N + 1, n)
        resolved = [d for d in range(N + 1) if counts[d] >= need]
        cls_dim = int(min(max(max(resolved, default=int(np.argmax(counts))), 1), N))
        note = "local dimension shares " + ", ".join(f"{d}:{s:.3f}" for d, s in enumerate(shares))
    return DimensionReport(n, N, fit.corr_dim, fit.fit_range, fit.fit_r2, len(clusters), max_cd,
                           cls_dim, hist, beta, shares, False, note)


# ---------------------------------------------------------------- Riesz


def riesz_energy(config: ParticleConfiguration, s: float) -> float:
    """``sum_{i != j} m_i m_j |X_i - X_j|^(-s)``; ``+inf`` if two particles coincide."""
    X, m = config.positions, config.masses
    n = config.n
    if n < 2:
        return 0.0
    i, j = np.triu_indices(n, 1)
    d = np.linalg.norm(X[i] - X[j], axis=1)
    if s > 0 and np.any(d == 0.0):
        return math.inf
    return float(2.0 * np.sum(m[i] * m[j] * d ** (-s)))


# ---------------------------------------------------------------- Euler-Lagrange


@njit(cache=True)
def _laplacian_sums(X, m, kind, params, thresh):
    n, dim = X.shape
    lap = np.zeros(n)
    mag = np.zeros(n)
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            r2 = 0.0
            for k in range(dim):
                t = X[i, k] - X[j, k]
                r2 += t * t
            r = math.sqrt(r2)
            if r <= thresh:
                continue
            L = w_second_scalar(kind, params, r) + (dim - 1) * w_prime_scalar(kind, params, r) / r
            lap[i] += m[j] * L
            mag[i] += m[j] * abs(L)
    return lap, mag


@njit(cache=True)
def _relocation_gain(X, m, V, kind, params, Q):
    # min_i of the per-unit-mass energy change from moving particle i to q
    nq = Q.shape[0]
    n, dim = X.shape
    out = np.empty(nq)
    full = np.empty(nq)
    t = np.empty(n)
    for q in range(nq):
        acc = 0.0
        for j in range(n):
            r2 = 0.0
            for k in range(dim):
                d = Q[q, k] - X[j, k]
                r2 += d * d
            t[j] = w_scalar(kind, params, math.sqrt(r2))
            acc += m[j] * t[j]
        best = math.inf
        for i in range(n):
            g = acc - m[i] * t[i] - V[i]
            if g < best:
                best = g
        out[q] = best
        full[q] = acc
    return out, full


def support_link_distance(config: ParticleConfiguration) -> float:
    """Link distance that joins neighbours on a particle lattice.

    The larger of ``0.01 * diameter`` and twice the 90th percentile of the
    nearest-neighbour distances.
    """
    if config.n < 2:
        return 0.0
    nn = _nn_distances(config.positions)
    diam = float(pdist(config.positions).max())
    return max(CLUSTER_LINK_FRACTION * diam, 2.0 * float(np.quantile(nn, 0.9)))


@dataclass
class EulerLagrangeReport:
    """First-order optimality residuals.

    ``v_values[i]`` is ``V`` at particle ``i`` without its own term.
    Off-support samples are points of the 1.5x bounding ball farther than
    the link distance from every particle. A sample ``x`` is a violation when
    moving some particle ``i`` to ``x`` lowers the energy by more than ``tol``
    per unit mass, i.e. ``V(x) - m_i W(x - X_i) < V_i - tol``.
    ``naive_off_support_violations`` counts ``V(x) < min_i V_i - tol``
    instead; it ignores that ``V_i`` omits particle ``i``'s own term and is
    kept for comparison.
    """

    v_values: np.ndarray
    component_labels: np.ndarray
    per_component_stddev: np.ndarray
    per_component_mean: np.ndarray
    two_E: float
    link_distance: float
    tol: float
    off_support_samples: int
    off_support_violations: int
    naive_off_support_violations: int
    worst_relocation_gain: float
    laplacian_min: float
    laplacian_scale: float

    @property
    def max_relative_stddev(self) -> float:
        if len(self.per_component_stddev) == 0:
            return 0.0
        return float(self.per_component_stddev.max() / abs(self.two_E)) if self.two_E else math.inf

    @property
    def violation_fraction(self) -> float:
        if self.off_support_samples == 0:
            return 0.0
        return self.off_support_violations / self.off_support_samples

    def to_dict(self) -> dict:
        return {
            "v_values": self.v_values.tolist(),
            "component_labels": self.component_labels.tolist(),
            "per_component_stddev": self.per_component_stddev.tolist(),
            "per_component_mean": self.per_component_mean.tolist(),
            "two_E": self.two_E,
            "link_distance": self.link_distance,
            "tol": self.tol,
            "off_support_samples": self.off_support_samples,
            "off_support_violations": self.off_support_violations,
            "naive_off_support_violations": self.naive_off_support_violations,
            "worst_relocation_gain": self.worst_relocation_gain,
            "laplacian_min": self.laplacian_min,
            "laplacian_scale": self.laplacian_scale,
            "max_relative_stddev": self.max_relative_stddev,
            "violation_fraction": self.violation_fraction,
        }


def euler_lagrange_check(config: ParticleConfiguration, spec: PotentialSpec,
                         n_off_samples: int = 2000, seed: int = 0,
                         tol: float | None = None,
                         link_distance: float | None = None) -> EulerLagrangeReport:
    """Evaluate the first-order conditions of a local minimizer.

    ``tol`` defaults to ``1e-6 * |2E|``. Particles are grouped into
    components by single linkage at ``link_distance`` (default
    :func:`support_link_distance`). ``laplacian_min`` is the smallest
    ``sum_{j != i} m_j Lap W(X_i - X_j)`` over particles, with exactly
    coincident pairs skipped; ``laplacian_scale`` is the mean over particles
    of ``sum_j m_j |Lap W(X_i - X_j)|``.

    Raises :class:`~swarmdim.energy.SingularPair` for coincident particles
    under a potential that is infinite at the origin.
    """
    problems = validate(spec, config.dim)
    if problems:
        raise InvalidPotential("; ".join(problems))
    X, m, n = config.positions, config.masses, config.n
    E = total_energy(config, spec)
    two_E = 2.0 * E
    if tol is None:
        tol = 1e-6 * abs(two_E)
    V = generated_potential(config, spec, X, np.arange(n))
    if n < 2:
        labels = np.zeros(n, dtype=int)
        link = 0.0
    else:
        link = support_link_distance(config) if link_distance is None else float(link_distance)
        labels = _labels(X, link) if link > 0 else np.arange(n)
    k = labels.max() + 1
    std = np.array([V[labels == c].std() for c in range(k)])
    mean = np.array([V[labels == c].mean() for c in range(k)])

    kind, params = spec.kernel_args()
    ext = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))
    lap, mag = _laplacian_sums(np.ascontiguousarray(X), m, kind, params, COINCIDENCE_RTOL * ext)

    n_kept = n_bad = n_naive = 0
    worst = math.inf
    if n_off_samples > 0 and n >= 2:
        rng = np.random.Generator(np.random.PCG64(seed))
        cen = config.centroid()
        R = 1.5 * float(np.linalg.norm(X - cen, axis=1).max())
        u = rng.standard_normal((n_off_samples, config.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        Q = cen + u * (R * rng.random(n_off_samples) ** (1.0 / config.dim))[:, None]
        dq, _ = cKDTree(X).query(Q)
        Q = np.ascontiguousarray(Q[dq > link])
        n_kept = len(Q)
        if n_kept:
            gain, full = _relocation_gain(np.ascontiguousarray(X), m, V, kind, params, Q)
            n_bad = int((gain < -tol).sum())
            n_naive = int((full < V.min() - tol).sum())
            worst = float(gain.min())
    return EulerLagrangeReport(
        v_values=V, component_labels=labels, per_component_stddev=std, per_component_mean=mean,
        two_E=two_E, link_distance=link, tol=float(tol), off_support_samples=n_kept,
        off_support_violations=n_bad, naive_off_support_violations=n_naive,
        worst_relocation_gain=worst,
        laplacian_min=float(lap.min()) if n else 0.0,
        laplacian_scale=float(mag.mean()) if n else 0.0,
    )
