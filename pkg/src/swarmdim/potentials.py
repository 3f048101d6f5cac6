"""Radial repulsive-attractive interaction potentials.

Three families are built in:

* ``powerlaw``: ``w(r) = -a r**alpha / alpha + g r**gamma / gamma`` where an
  exponent equal to zero stands for ``log r``;
* ``cosine``: the power law with ``alpha``, ``gamma`` plus ``3/(2p) cos(p r)``;
* ``tanh``: ``-w'(r) = tanh((1 - r) a) + b`` with ``w(0) = 0``.

Scalar kernels are compiled with numba so the pair loops in
:mod:`swarmdim.energy` can call them directly. The ``kind``/``params`` pair
returned by :meth:`PotentialSpec.kernel_args` is the compiled representation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from enum import Enum

import numpy as np
from numba import njit

__all__ = [
    "PotentialSpec",
    "RepulsionClass",
    "RepulsionKind",
    "InvalidPotential",
    "SingularPairSignal",
    "eval_w",
    "eval_w_prime",
    "eval_w_second",
    "eval_gradient",
    "eval_laplacian",
    "approx_laplacian_at",
    "approx_laplacian_closed_form",
    "classify_repulsion",
    "validate",
]

KIND_POWERLAW = 0
KIND_COSINE = 1
KIND_TANH = 2

_KINDS = {"powerlaw": KIND_POWERLAW, "cosine": KIND_COSINE, "tanh": KIND_TANH}


class InvalidPotential(ValueError):
    """Raised when a potential violates its validity constraints."""


class SingularPairSignal(ArithmeticError):
    """Raised when a derivative is requested at the origin."""


@dataclass(frozen=True)
class PotentialSpec:
    """Description of a radial potential ``W(x) = w(|x|)``.

    Use the ``powerlaw``, ``cosine`` and ``tanh`` constructors rather than
    filling fields by hand; unused fields stay ``None``.
    """

    variant: str
    alpha: float | None = None
    gamma: float | None = None
    coeff_a: float = 1.0
    coeff_g: float = 1.0
    p: float | None = None
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        if self.variant not in _KINDS:
            raise InvalidPotential(f"unknown potential variant {self.variant!r}")

    @classmethod
    def powerlaw(cls, alpha, gamma, coeff_a=1.0, coeff_g=1.0):
        return cls("powerlaw", alpha=float(alpha), gamma=float(gamma),
                   coeff_a=float(coeff_a), coeff_g=float(coeff_g))

    @classmethod
    def cosine(cls, alpha, gamma, p):
        return cls("cosine", alpha=float(alpha), gamma=float(gamma), p=float(p))

    @classmethod
    def tanh(cls, a=5.0, b=0.5):
        return cls("tanh", a=float(a), b=float(b))

    @property
    def kind(self) -> int:
        return _KINDS[self.variant]

    def kernel_args(self) -> tuple[int, np.ndarray]:
        if self.kind == KIND_TANH:
            params = [self.a, self.b, 0.0, 0.0, 0.0]
        elif self.kind == KIND_COSINE:
            params = [self.alpha, self.gamma, 1.0, 1.0, self.p]
        else:
            params = [self.alpha, self.gamma, self.coeff_a, self.coeff_g, 0.0]
        return self.kind, np.asarray(params, dtype=np.float64)

    def singular_at_origin(self) -> bool:
        """True when ``w(0) = +inf``."""
        return self.kind != KIND_TANH and self.alpha <= 0.0

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        return cls(**d)


# -- compiled scalar kernels -------------------------------------------------
#
# fast-math without the no-inf/no-nan assumptions: w(0) = inf must stay inf
FAST_FLAGS = {"nsz", "arcp", "contract", "afn", "reassoc"}

# params layout: powerlaw/cosine -> (alpha, gamma, coeff_a, coeff_g, p)
#                tanh            -> (a, b, 0, 0, 0)


@njit(cache=True)
def _power_term(r, e, c):
    if e == 0.0:
        return c * math.log(r)
    return c * r ** e / e


@njit(cache=True)
def _logcosh(x):
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


@njit(cache=True)
def w_scalar(kind, params, r):
    if kind == KIND_TANH:
        a = params[0]
        b = params[1]
        return -(_logcosh(a) - _logcosh(a * (1.0 - r))) / a - b * r
    alpha = params[0]
    if r == 0.0:
        if alpha <= 0.0:
            return math.inf
        if kind == KIND_COSINE:
            return 1.5 / params[4]
        return 0.0
    val = -_power_term(r, alpha, params[2]) + _power_term(r, params[1], params[3])
    if kind == KIND_COSINE:
        p = params[4]
        val += 1.5 / p * math.cos(p * r)
    return val


@njit(cache=True)
def w_prime_scalar(kind, params, r):
    if kind == KIND_TANH:
        return -math.tanh((1.0 - r) * params[0]) - params[1]
    val = -params[2] * r ** (params[0] - 1.0) + params[3] * r ** (params[1] - 1.0)
    if kind == KIND_COSINE:
        val -= 1.5 * math.sin(params[4] * r)
    return val


@njit(cache=True)
def w_second_scalar(kind, params, r):
    if kind == KIND_TANH:
        a = params[0]
        s = 1.0 / math.cosh((1.0 - r) * a)
        return a * s * s
    alpha = params[0]
    gamma = params[1]
    val = (-params[2] * (alpha - 1.0) * r ** (alpha - 2.0)
           + params[3] * (gamma - 1.0) * r ** (gamma - 2.0))
    if kind == KIND_COSINE:
        p = params[4]
        val -= 1.5 * p * math.cos(p * r)
    return val


@njit(cache=True, fastmath=FAST_FLAGS)
def w_and_dw_over_r2(kind, params, r2):
    """``(w(r), w'(r)/r)`` from the squared distance ``r2 > 0``."""
    if kind == KIND_TANH:
        a = params[0]
        b = params[1]
        r = math.sqrt(r2)
        u = a * (1.0 - r)
        # logcosh(a) - logcosh(u) = |a| - |u| + log1p(e^-2|a|) - log1p(e^-2|u|)
        au = abs(u)
        e2 = math.exp(-2.0 * au)
        lc = a - au + math.log1p(math.exp(-2.0 * a)) - math.log1p(e2)
        th = (1.0 - e2) / (1.0 + e2)
        if u < 0.0:
            th = -th
        return -lc / a - b * r, (-th - b) / r
    alpha = params[0]
    gamma = params[1]
    ca = params[2]
    cg = params[3]
    # both power terms from a single log(r2)
    half_log = 0.5 * math.log(r2)
    ra = math.exp(alpha * half_log)
    rg = math.exp(gamma * half_log)
    if alpha == 0.0:
        w = -ca * half_log
    else:
        w = -ca * ra / alpha
    if gamma == 0.0:
        w += cg * half_log
    else:
        w += cg * rg / gamma
    g = (-ca * ra + cg * rg) / r2
    if kind == KIND_COSINE:
        p = params[4]
        r = math.sqrt(r2)
        w += 1.5 / p * math.cos(p * r)
        g -= 1.5 * math.sin(p * r) / r
    return w, g


@njit(cache=True)
def _w_array(kind, params, r):
    out = np.empty(r.shape[0])
    for k in range(r.shape[0]):
        out[k] = w_scalar(kind, params, r[k])
    return out


@njit(cache=True)
def _w_prime_array(kind, params, r):
    out = np.empty(r.shape[0])
    for k in range(r.shape[0]):
        out[k] = w_prime_scalar(kind, params, r[k])
    return out


@njit(cache=True)
def _w_second_array(kind, params, r):
    out = np.empty(r.shape[0])
    for k in range(r.shape[0]):
        out[k] = w_second_scalar(kind, params, r[k])
    return out


def _apply(fn, spec, r):
    kind, params = spec.kernel_args()
    arr = np.asarray(r, dtype=np.float64)
    out = fn(kind, params, np.ascontiguousarray(arr.ravel())).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def _check(spec, ambient_dim=None):
    problems = validate(spec, ambient_dim)
    if problems:
        raise InvalidPotential("; ".join(problems))


# -- public evaluation API ---------------------------------------------------


def eval_w(spec: PotentialSpec, r):
    """Radial profile ``w(r)``; ``+inf`` at ``r = 0`` for singular power laws."""
    _check(spec)
    if np.any(np.asarray(r) < 0):
        raise ValueError("radius must be non-negative")
    return _apply(_w_array, spec, r)


def eval_w_prime(spec: PotentialSpec, r):
    """Radial derivative ``w'(r)`` for ``r > 0``."""
    _check(spec)
    if np.any(np.asarray(r) <= 0):
        raise SingularPairSignal("w' is only defined for r > 0")
    return _apply(_w_prime_array, spec, r)


def eval_w_second(spec: PotentialSpec, r):
    _check(spec)
    if np.any(np.asarray(r) <= 0):
        raise SingularPairSignal("w'' is only defined for r > 0")
    return _apply(_w_second_array, spec, r)


def eval_gradient(spec: PotentialSpec, x) -> np.ndarray:
    """``grad W(x) = w'(|x|) x / |x|``.

    Raises :class:`SingularPairSignal` at the origin; callers decide what a
    coincident pair means.
    """
    x = np.asarray(x, dtype=np.float64)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise SingularPairSignal("gradient requested at the origin")
    return eval_w_prime(spec, r) / r * x


def eval_laplacian(spec: PotentialSpec, x) -> float:
    """Pointwise Laplacian ``w'' + (N-1) w'/r`` away from the origin."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    n_dim = x.shape[-1]
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise SingularPairSignal("Laplacian requested at the origin")
    return eval_w_second(spec, r) + (n_dim - 1) * eval_w_prime(spec, r) / r


# -- ball averages -----------------------------------------------------------


def _ball_rule(n_dim: int, quad_order: int | None):
    """Nodes and weights (summing to 1) for the uniform average over B(0, 1)."""
    if n_dim == 1:
        q = quad_order or 32
        t, wt = np.polynomial.legendre.leggauss(q)
        r = 0.5 * (t + 1.0)
        nodes = np.concatenate([r, -r])[:, None]
        weights = np.concatenate([wt, wt]) / (2.0 * wt.sum())
        return nodes, weights

    q = quad_order or (32 if n_dim == 2 else 16)
    t, wt = np.polynomial.legendre.leggauss(q)
    r = 0.5 * (t + 1.0)
    radial_w = 0.5 * wt * r ** (n_dim - 1) * n_dim  # n r^(N-1) dr is the radial law

    if n_dim == 2:
        n_ang = 2 * q
        theta = 2.0 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        ang_w = np.full(n_ang, 1.0 / n_ang)
    elif n_dim == 3:
        n_pol = max(2, (5 * q) // 8)
        n_az = n_pol + 1
        ct, cw = np.polynomial.legendre.leggauss(n_pol)
        phi = 2.0 * np.pi * np.arange(n_az) / n_az
        st = np.sqrt(1.0 - ct ** 2)
        dirs = np.stack([
            np.outer(st, np.cos(phi)).ravel(),
            np.outer(st, np.sin(phi)).ravel(),
            np.repeat(ct, n_az),
        ], axis=1)
        ang_w = np.repeat(cw / 2.0, n_az) / n_az
    else:
        raise ValueError("ball quadrature is implemented for N in {1, 2, 3}")

    nodes = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n_dim)
    weights = np.outer(radial_w, ang_w).ravel()
    return nodes, weights


def approx_laplacian_at(spec: PotentialSpec, x, eps: float,
                        quad_order: int | None = None) -> float:
    """Ball-average Laplacian ``2(N+2)/eps**2 * (avg_{B(x,eps)} W - W(x))``.

    The average is a product rule: Gauss-Legendre in the radius times a
    uniform circle rule (2D) or a Gauss product sphere rule (3D). Returns
    ``-inf`` when ``W(x) = +inf``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    n_dim = x.shape[0]
    _check(spec, n_dim)
    w_x = eval_w(spec, float(np.linalg.norm(x)))
    if math.isinf(w_x):
        return -math.inf
    nodes, weights = _ball_rule(n_dim, quad_order)
    pts = x[None, :] + eps * nodes
    vals = eval_w(spec, np.linalg.norm(pts, axis=1))
    avg = float(np.dot(weights, vals))
    return 2.0 * (n_dim + 2) / eps ** 2 * (avg - w_x)


def approx_laplacian_closed_form(alpha: float, n_dim: int, eps: float) -> float:
    """Exact ``-Delta^eps h_alpha(0)`` for ``h_alpha = -|x|**alpha / alpha``."""
    if alpha <= 0:
        return math.inf
    return 2.0 * (n_dim + 2) * n_dim / (n_dim + alpha) * eps ** (alpha - 2.0) / alpha


# -- classification ----------------------------------------------------------


class RepulsionKind(str, Enum):
    STRONG = "StronglyRepulsive"
    MILD = "MildlyRepulsive"
    BORDERLINE = "Borderline"
    INVALID = "Invalid"


@dataclass(frozen=True)
class RepulsionClass:
    kind: RepulsionKind
    beta: float | None
    predicted_dim_lower_bound: float
    note: str = ""

    def describe(self) -> str:
        if self.kind is RepulsionKind.STRONG:
            return (f"strongly repulsive, beta={self.beta:g}, "
                    f"support dimension >= {self.predicted_dim_lower_bound:g}")
        if self.kind is RepulsionKind.MILD:
            return "mildly repulsive, predicted dim 0"
        if self.kind is RepulsionKind.BORDERLINE:
            return "borderline (alpha = 2), no prediction"
        return f"invalid: {self.note}"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "beta": self.beta,
                "predicted_dim_lower_bound": self.predicted_dim_lower_bound,
                "note": self.note}


def _origin_exponent(spec: PotentialSpec) -> float:
    if spec.kind == KIND_TANH:
        # w'(0) = -tanh(a) - b < 0: a linear cusp, same origin behaviour as alpha = 1
        return 1.0
    return spec.alpha


def classify_repulsion(spec: PotentialSpec, ambient_dim: int) -> RepulsionClass:
    """Repulsion strength at the origin, decided from the origin exponent.

    The cosine perturbation is smooth, so it is classified by ``alpha`` alone.
    """
    _check(spec)
    n = ambient_dim
    alpha = _origin_exponent(spec)
    note = "linear cusp at the origin (alpha-equivalent 1)" if spec.kind == KIND_TANH else ""
    if alpha <= -n:
        return RepulsionClass(RepulsionKind.INVALID, None, 0.0,
                              f"alpha={alpha:g} <= -N: not locally integrable")
    if alpha <= 2 - n:
        return RepulsionClass(RepulsionKind.INVALID, None, 0.0,
                              f"beta=2-alpha={2 - alpha:g} >= N={n}")
    if alpha < 2:
        beta = 2.0 - alpha
        return RepulsionClass(RepulsionKind.STRONG, beta,
                              float(min(max(beta, 0.0), n)), note)
    if alpha == 2:
        return RepulsionClass(RepulsionKind.BORDERLINE, None, 0.0,
                              "Laplacian bounded at the origin, no dimension bound")
    return RepulsionClass(RepulsionKind.MILD, None, 0.0,
                          "no k-dimensional component for k >= 1; predicted dim 0")


def validate(spec: PotentialSpec, ambient_dim: int | None = None) -> list[str]:
    """List of violated validity constraints; empty when the spec is usable."""
    out = []
    if spec.kind == KIND_TANH:
        if spec.a is None or not spec.a > 0:
            out.append("tanh steepness a > 0 violated")
        if spec.b is None or not spec.b > 0:
            out.append("tanh offset b > 0 violated")
        return out

    if spec.alpha is None or spec.gamma is None:
        return ["alpha and gamma are required"]
    if not (math.isfinite(spec.alpha) and math.isfinite(spec.gamma)):
        out.append("alpha and gamma must be finite")
    if not spec.alpha < spec.gamma:
        out.append(f"alpha<gamma violated (confinement): alpha={spec.alpha:g}, gamma={spec.gamma:g}")
    if not spec.coeff_a > 0:
        out.append("coeff_a > 0 violated")
    if not spec.coeff_g > 0:
        out.append("coeff_g > 0 violated")
    if spec.kind == KIND_COSINE and (spec.p is None or not spec.p > 0):
        out.append("cosine frequency p > 0 violated")
    if ambient_dim is not None and spec.alpha <= -ambient_dim:
        out.append(f"local integrability violated: alpha={spec.alpha:g} <= -N={-ambient_dim}")
    return out
