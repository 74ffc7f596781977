"""Hockey-stick (E_gamma) divergences.

Closed forms for Gaussian and Laplace pairs, the Gaussian privacy profile
``theta_gamma``, the exact discrete divergence and a kink-aware quadrature
routine that evaluates ``int [p(y) - gamma q(y)]_+ dy`` directly and serves as
an oracle for the closed forms.

``E_1`` is the total variation distance. For every ``gamma >= 1`` the value
lies in ``[0, 1]``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Tuple, Union

import numpy as np
from scipy import integrate, optimize, special

from egamma_dp.errors import DomainError, InputError

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclasses.dataclass(frozen=True)
class Gamma:
    """The hockey-stick parameter ``gamma >= 1``.

    The logarithm is stored alongside the value so that ``gamma = e^eps`` stays
    usable for epsilons whose exponential overflows a double.

    Attributes:
        value: gamma itself (may be ``inf`` for very large epsilon).
        log: ``log(gamma)``, i.e. the matching epsilon.
    """
    value: float
    log: float = dataclasses.field(default=float("nan"), compare=False)

    def __post_init__(self):
        value = float(self.value)
        if math.isnan(value) or value < 1.0:
            raise DomainError(f"gamma must be >= 1, got {self.value!r}")
        object.__setattr__(self, "value", value)
        if math.isnan(self.log):
            object.__setattr__(self, "log", math.log(value))

    @classmethod
    def from_epsilon(cls, epsilon: float) -> "Gamma":
        eps = float(epsilon)
        if math.isnan(eps) or eps < 0.0:
            raise DomainError(f"epsilon must be >= 0, got {epsilon!r}")
        value = math.exp(eps) if eps < 709.0 else math.inf
        return cls(value, eps)

    @property
    def epsilon(self) -> float:
        return self.log


GammaLike = Union[Gamma, float, int]


def as_gamma(gamma: GammaLike) -> Gamma:
    """Coerces a plain number to :class:`Gamma`."""
    if isinstance(gamma, Gamma):
        return gamma
    return Gamma(gamma)


def _clip01(x: float) -> float:
    return min(1.0, max(0.0, float(x)))


def q_function(t: float) -> float:
    """Standard Gaussian upper tail ``P(N(0, 1) >= t)``.

    Evaluated as ``erfc(t / sqrt(2)) / 2`` so that large arguments keep full
    relative precision instead of cancelling in ``1 - Phi(t)``.
    """
    t = float(t)
    if not math.isfinite(t):
        raise DomainError(f"q_function needs a finite argument, got {t!r}")
    return 0.5 * math.erfc(t / _SQRT2)


def _log_q(t: float) -> float:
    # log_ndtr(-t) == log Q(t), accurate deep into the tail
    return float(special.log_ndtr(-t))


def theta_gamma(gamma: GammaLike, r: float) -> float:
    """E_gamma between unit-variance Gaussians whose means are ``r`` apart.

    ``Q(log(gamma)/r - r/2) - gamma * Q(log(gamma)/r + r/2)``, with the
    continuous limit ``theta_gamma(0) = 0``.
    """
    g = as_gamma(gamma)
    r = float(r)
    if math.isnan(r) or r < 0.0:
        raise DomainError(f"theta_gamma needs r >= 0, got {r!r}")
    if r == 0.0:
        return 0.0
    if math.isinf(r):
        return 1.0
    a = g.log / r
    if math.isinf(a):
        # gamma > 1 with a subnormal shift: both tails vanish.
        return 0.0
    upper = q_function(a - 0.5 * r)
    lower_log = g.log + _log_q(a + 0.5 * r)
    lower = math.exp(lower_log) if lower_log > -745.0 else 0.0
    return _clip01(upper - lower)


def egamma_gaussian(m1, m2, sigma: float, gamma: GammaLike) -> float:
    """E_gamma(N(m1, sigma^2 I) || N(m2, sigma^2 I)) for scalar or vector means."""
    a = np.atleast_1d(np.asarray(m1, dtype=float))
    b = np.atleast_1d(np.asarray(m2, dtype=float))
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError(f"mean dimension mismatch: {a.shape} vs {b.shape}")
    sigma = float(sigma)
    if not sigma > 0.0:
        raise DomainError(f"sigma must be > 0, got {sigma!r}")
    gamma = as_gamma(gamma)
    distance = float(np.linalg.norm(b - a))
    if distance == 0.0:
        return 0.0
    return theta_gamma(gamma, distance / sigma)


def egamma_laplace(m1: float, m2: float, v: float, gamma: GammaLike) -> float:
    """E_gamma between Laplace laws with locations ``m1, m2`` and scale ``v``.

    Here ``v`` is the scale parameter (variance ``2 v^2``). The value is
    ``[1 - exp((v log(gamma) - |m1 - m2|) / (2 v))]_+`` and is exactly zero
    whenever ``|m1 - m2| <= v log(gamma)``.
    """
    v = float(v)
    if not v > 0.0:
        raise DomainError(f"Laplace scale v must be > 0, got {v!r}")
    g = as_gamma(gamma)
    gap = abs(float(m1) - float(m2))
    if gap <= v * g.log:
        return 0.0
    return _clip01(-math.expm1((v * g.log - gap) / (2.0 * v)))


@dataclasses.dataclass(frozen=True)
class DiscreteDistribution:
    """A probability vector whose entries sum to one within 1e-12."""
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise InputError("weights must be a non-empty 1-d vector")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise InputError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InputError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size


def _weights(p) -> np.ndarray:
    if isinstance(p, DiscreteDistribution):
        return p.weights
    w = np.asarray(p, dtype=float)
    if w.ndim != 1:
        raise DomainError("discrete distributions must be 1-d vectors")
    return w


def egamma_rows(p: np.ndarray, q: np.ndarray, gamma: GammaLike) -> np.ndarray:
    """Batched ``sum_k [p_k - gamma q_k]_+`` along the last axis.

    Shapes broadcast like numpy arrays, so ``p[:, None, :]`` against
    ``q[None, :, :]`` yields all pairwise divergences.
    """
    g = as_gamma(gamma)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if math.isinf(g.value):
        scaled = np.where(q > 0, np.inf, 0.0)
    else:
        scaled = g.value * q
    return np.clip(np.maximum(p - scaled, 0.0).sum(axis=-1), 0.0, 1.0)


def egamma_discrete(p, q, gamma: GammaLike) -> float:
    """Exact E_gamma between two distributions on the same finite alphabet."""
    a = _weights(p)
    b = _weights(q)
    if a.shape != b.shape:
        raise DomainError(f"length mismatch: {a.size} vs {b.size}")
    return float(egamma_rows(a, b, gamma))


# ----------------------------------------------------------------------------
# Quadrature oracle
# ----------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ScalarDensity:
    """A probability density on (a subset of) the real line.

    Attributes:
        pdf: vectorised density; evaluated only inside ``[lower, upper]``.
        lower, upper: support bounds, possibly infinite.
        center: a point of high density, used to anchor tail truncation.
        scale: a typical width, used as the initial truncation step.
        breakpoints: points where ``pdf`` itself is not smooth (e.g. the Laplace
            mode); they are always used as quadrature partition points.
    """
    pdf: Callable[[np.ndarray], np.ndarray]
    lower: float = -math.inf
    upper: float = math.inf
    center: float = 0.0
    scale: float = 1.0
    breakpoints: Tuple[float, ...] = ()

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        inside = (y >= self.lower) & (y <= self.upper)
        out = np.zeros_like(y)
        if np.any(inside):
            out[inside] = self.pdf(y[inside])
        return out

    @classmethod
    def gaussian(cls, mean: float, sigma: float) -> "ScalarDensity":
        if not sigma > 0:
            raise DomainError(f"sigma must be > 0, got {sigma!r}")
        mean, sigma = float(mean), float(sigma)
        return cls(
            pdf=lambda y: np.exp(-0.5 * ((y - mean) / sigma) ** 2) / (sigma * _SQRT2PI),
            center=mean, scale=sigma)

    @classmethod
    def laplace(cls, loc: float, v: float) -> "ScalarDensity":
        if not v > 0:
            raise DomainError(f"Laplace scale must be > 0, got {v!r}")
        loc, v = float(loc), float(v)
        return cls(
            pdf=lambda y: np.exp(-np.abs(y - loc) / v) / (2.0 * v),
            center=loc, scale=v, breakpoints=(loc,))


@dataclasses.dataclass(frozen=True)
class QuadratureInfo:
    """Diagnostics returned by ``egamma_quadrature(..., full_output=True)``."""
    abserr: float
    lower: float
    upper: float
    kinks: Tuple[float, ...]
    segments: int


_TAIL_RATIO = 1e-16
_SCAN_POINTS = 4097


def _peak(d: ScalarDensity) -> float:
    probes = np.array([d.center, *d.breakpoints], dtype=float)
    probes = probes[(probes >= d.lower) & (probes <= d.upper)]
    return float(np.max(d(probes))) if probes.size else 0.0


def _truncate(d: ScalarDensity) -> Tuple[float, float]:
    """Finite bounds outside which ``d`` is below 1e-16 of its peak."""
    floor = _TAIL_RATIO * _peak(d)
    bounds = []
    for side, limit in ((-1.0, d.lower), (1.0, d.upper)):
        if math.isfinite(limit):
            bounds.append(limit)
            continue
        step = d.scale
        x = d.center + side * step
        for _ in range(200):
            if float(d(np.array([x]))[0]) <= floor:
                break
            step *= 2.0
            x = d.center + side * step
        else:
            raise InputError("density tail does not decay; cannot truncate support")
        bounds.append(x)
    return bounds[0], bounds[1]


def _normalisation(d: ScalarDensity, lo: float, hi: float) -> float:
    pts = sorted({lo, hi, *[b for b in (d.center, *d.breakpoints) if lo < b < hi]})
    total = 0.0
    for u, w in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(lambda y: float(d(np.array([y]))[0]), u, w,
                                epsabs=1e-12, epsrel=1e-12, limit=200)
        total += val
    return total


def egamma_quadrature(p: ScalarDensity, q: ScalarDensity, gamma: GammaLike,
                                            full_output: bool = False):
    """Direct numerical evaluation of ``int [p(y) - gamma q(y)]_+ dy``.

    The sign changes of ``p - gamma q`` are bracketed on a dense scan and
    refined by Brent's method to 1e-12, after which the positive part is
    integrated piecewise with adaptive Gauss-Kronrod quadrature, so no segment
    contains a kink of the integrand.

    Args:
        p, q: the two densities.
        gamma: hockey-stick parameter.
        full_output: also return a :class:`QuadratureInfo`.

    Returns:
        The divergence, or ``(value, info)`` when ``full_output`` is set.

    Raises:
        InputError: if either density integrates to 1 +- more than 1e-6.
    """
    g = as_gamma(gamma)
    p_lo, p_hi = _truncate(p)
    q_lo, q_hi = _truncate(q)
    lo, hi = min(p_lo, q_lo), max(p_hi, q_hi)
    for name, d, (u, w) in (("p", p, (p_lo, p_hi)), ("q", q, (q_lo, q_hi))):
        mass = _normalisation(d, u, w)
        if abs(mass - 1.0) > 1e-6:
            raise InputError(f"density {name} integrates to {mass:.9g}, not 1")

    if math.isinf(g.value):
        gv = None
    else:
        gv = g.value

    def h(y):
        y = np.asarray(y, dtype=float)
        pq = q(y)
        if gv is None:
            return np.where(pq > 0, -np.inf, p(y))
        return p(y) - gv * pq

    fixed = [b for d in (p, q) for b in (d.center, *d.breakpoints) if lo < b < hi]
    for d in (p, q):
        fixed += [s for s in (d.lower, d.upper) if math.isfinite(s) and lo < s < hi]
    scan = np.union1d(np.linspace(lo, hi, _SCAN_POINTS), fixed)
    values = h(scan)
    kinks = []
    for k in range(scan.size - 1):
        u, w = scan[k], scan[k + 1]
        hu, hw = values[k], values[k + 1]
        if hu == 0.0:
            kinks.append(float(u))
        elif np.isfinite(hu) and np.isfinite(hw) and hu * hw < 0.0:
            kinks.append(optimize.brentq(lambda y: float(h(np.array([y]))[0]), u, w,
                                         xtol=1e-12, rtol=4 * np.finfo(float).eps))
    edges = sorted({lo, hi, *fixed, *kinks})

    def positive_part(y):
        return max(float(h(np.array([y]))[0]), 0.0)

    total, err = 0.0, 0.0
    for u, w in zip(edges[:-1], edges[1:]):
        if w <= u:
            continue
        mid = 0.5 * (u + w)
        if positive_part(mid) == 0.0 and positive_part(u) == 0.0 and positive_part(w) == 0.0:
            continue
        val, e = integrate.quad(positive_part, u, w, epsabs=1e-10, epsrel=1e-10, limit=200)
        total += val
        err += e
    value = _clip01(total)
    if full_output:
        return value, QuadratureInfo(abserr=err, lower=lo, upper=hi,
                                     kinks=tuple(kinks), segments=len(edges) - 1)
    return value
