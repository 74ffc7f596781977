"""Markov kernels and their E_gamma contraction coefficients.

For a kernel ``K`` the E_gamma contraction coefficient equals the largest
divergence between two of its output distributions,
``eta_gamma(K) = sup_{y1, y2} E_gamma(K(y1) || K(y2))``; at ``gamma = 1`` this
is Dobrushin's coefficient. Finite-state kernels get the exact value plus a
randomised brute-force ratio search; projected additive Gaussian and Laplace
kernels get the closed-form upper bounds used by the accountant.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import warnings
from pathlib import Path
from typing import Union

import numpy as np

from egamma_dp.divergences import GammaLike, as_gamma, egamma_rows, theta_gamma
from egamma_dp.errors import DomainError, InputError, PreconditionError


# ----------------------------------------------------------------------------
# Problem description types
# ----------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class LossRegularity:
    """Regularity constants of ``y -> loss(y, x)``, uniform in ``x``.

    Attributes:
        L: Lipschitz constant of the loss (bounds the gradient norm).
        beta: Lipschitz constant of the gradient (smoothness).
        rho: strong-convexity modulus. Any real loss has ``rho <= beta``; larger
            values are accepted with a :class:`RegularityWarning` because
            published parameter sets use them and the bounds stay well defined.
    """
    L: float
    beta: float
    rho: float = 0.0

    def problems(self):
        out = []
        if not self.L > 0:
            out.append(f"reg.L must be > 0 (got {self.L!r})")
        if not self.beta > 0:
            out.append(f"reg.beta must be > 0 (got {self.beta!r})")
        if not 0 <= self.rho:
            out.append(f"reg.rho must be >= 0 (got {self.rho!r})")
        return out

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise DomainError("; ".join(problems))
        if self.rho > self.beta:
            warnings.warn(
                f"rho={self.rho!r} exceeds beta={self.beta!r}; no differentiable loss "
                "is more strongly convex than it is smooth", RegularityWarning, stacklevel=3)


class RegularityWarning(UserWarning):
    """Declared regularity constants are mutually inconsistent."""


@dataclasses.dataclass(frozen=True)
class LaplaceNoise:
    """Laplace noise ``Lap(0, v)`` with scale ``v`` (variance ``2 v^2``); 1-d only."""
    v: float
    family = "laplace"
    d = 1

    def __post_init__(self):
        if not self.v > 0:
            raise DomainError(f"Laplace scale v must be > 0, got {self.v!r}")

    @property
    def scale(self) -> float:
        return self.v


@dataclasses.dataclass(frozen=True)
class GaussianNoise:
    """Isotropic Gaussian noise ``N(0, sigma^2 I_d)``."""
    sigma: float
    d: int = 1
    family = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"Gaussian sigma must be > 0, got {self.sigma!r}")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"noise dimension must be a positive integer, got {self.d!r}")

    @property
    def scale(self) -> float:
        return self.sigma


NoiseSpec = Union[LaplaceNoise, GaussianNoise]


@dataclasses.dataclass(frozen=True)
class Interval:
    """The parameter set ``K = [a, b]``."""
    a: float
    b: float
    kind = "interval"
    d = 1

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError(f"interval needs a < b, got [{self.a!r}, {self.b!r}]")

    @property
    def diameter(self) -> float:
        return self.b - self.a

    def contains(self, y) -> bool:
        return bool(np.all((np.asarray(y) >= self.a) & (np.asarray(y) <= self.b)))


@dataclasses.dataclass(frozen=True)
class Ball:
    """A compact convex set in ``R^d`` described only by its diameter."""
    diameter: float
    d: int = 1
    kind = "ball"

    def __post_init__(self):
        if not self.diameter > 0:
            raise DomainError(f"ball diameter must be > 0, got {self.diameter!r}")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"ball dimension must be a positive integer, got {self.d!r}")


DomainGeometry = Union[Interval, Ball]


@dataclasses.dataclass(frozen=True, eq=False)
class DiscreteKernel:
    """A row-stochastic ``S x S`` matrix; row ``i`` is ``K(state i)``."""
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InputError(f"kernel must be a non-empty square matrix, got shape {m.shape}")
        if np.any(~np.isfinite(m)) or np.any(m < 0):
            raise InputError("kernel entries must be finite and nonnegative")
        sums = m.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-12)
        if bad.size:
            raise InputError(f"row {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def states(self) -> int:
        return self.matrix.shape[0]

    def apply(self, mu: np.ndarray) -> np.ndarray:
        """Output distribution(s) ``mu K``; ``mu`` may be a batch of rows."""
        return np.asarray(mu, dtype=float) @ self.matrix

    @classmethod
    def from_csv(cls, path) -> "DiscreteKernel":
        with open(path, newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        try:
            return cls(np.array(rows, dtype=float))
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from exc

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in self.matrix:
                writer.writerow([f"{v:.17g}" for v in row])


def random_simplex(rng: np.random.Generator, size, states: int) -> np.ndarray:
    """Uniform samples from the probability simplex (normalised exponentials)."""
    shape = (size, states) if np.isscalar(size) else (*size, states)
    e = rng.standard_exponential(shape)
    return e / e.sum(axis=-1, keepdims=True)


def random_kernel(states: int, seed) -> DiscreteKernel:
    """A kernel whose rows are independent uniform points of the simplex."""
    rng = np.random.default_rng(seed)
    return DiscreteKernel(random_simplex(rng, states, states))


# ----------------------------------------------------------------------------
# Contraction coefficients
# ----------------------------------------------------------------------------


def lipschitz_M(eta: float, reg: LossRegularity) -> float:
    """Lipschitz constant of the gradient step ``y -> y - eta grad loss(y, x)``.

    ``sqrt(1 - 2 eta beta rho / (beta + rho))``, valid for
    ``eta < 2 / (beta + rho)``; exactly 1 for merely convex losses.

    Raises:
        PreconditionError: if the step size violates the smoothness condition.
    """
    eta = float(eta)
    if not eta > 0:
        raise DomainError(f"learning rate must be > 0, got {eta!r}")
    limit = 2.0 / (reg.beta + reg.rho)
    if not eta < limit:
        raise PreconditionError(
            f"learning rate eta={eta!r} violates the smoothness condition "
            f"eta < 2/(beta+rho) = {limit!r}; the gradient step is not a contraction")
    if reg.rho == 0:
        return 1.0
    return math.sqrt(1.0 - 2.0 * eta * reg.beta * reg.rho / (reg.beta + reg.rho))


def contraction_gaussian_projected(gamma: GammaLike, M: float, geom: DomainGeometry,
                                   eta: float, sigma: float) -> float:
    """Upper bound on eta_gamma of ``y -> Proj_K(psi(y) + eta Z)``, ``Z ~ N(0, sigma^2 I)``.

    Equal to ``theta_gamma(M * D_K / (eta * sigma))`` where ``D_K`` is the
    diameter of ``K`` and ``M`` the Lipschitz constant of ``psi``.
    """
    if not eta > 0 or not sigma > 0:
        raise DomainError(f"eta and sigma must be > 0, got eta={eta!r}, sigma={sigma!r}")
    if not 0 <= M <= 1:
        raise DomainError(f"M must lie in [0, 1], got {M!r}")
    return theta_gamma(as_gamma(gamma), M * geom.diameter / (eta * sigma))


def laplace_bracket(epsilon: float, threshold: float) -> float:
    """``[1 - exp((epsilon - threshold) / 2)]_+``, exactly 0 once ``epsilon >= threshold``."""
    if epsilon >= threshold:
        return 0.0
    return min(1.0, -math.expm1(0.5 * (epsilon - threshold)))


def contraction_laplace_projected(epsilon: float, M: float, a: float, b: float,
                                  eta: float, v: float) -> float:
    """Upper bound on eta_{e^eps} of ``y -> Proj_[a,b](psi(y) + eta Z)``, ``Z ~ Lap(0, v)``.

    ``[1 - exp(eps/2 - M (b - a) / (2 eta v))]_+``.
    """
    if not a < b:
        raise DomainError(f"interval needs a < b, got [{a!r}, {b!r}]")
    if not eta > 0 or not v > 0:
        raise DomainError(f"eta and v must be > 0, got eta={eta!r}, v={v!r}")
    if not 0 <= M <= 1:
        raise DomainError(f"M must lie in [0, 1], got {M!r}")
    if epsilon < 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon!r}")
    return laplace_bracket(epsilon, M * (b - a) / (eta * v))


def pairwise_egamma(k: DiscreteKernel, gamma: GammaLike) -> np.ndarray:
    """Matrix of ``E_gamma(K(i) || K(j))`` over all ordered state pairs."""
    rows = k.matrix
    g = as_gamma(gamma)
    out = np.empty((k.states, k.states))
    for i in range(k.states):
        out[i] = egamma_rows(rows[i][None, :], rows, g)
    return out


def contraction_discrete(k: DiscreteKernel, gamma: GammaLike) -> float:
    """Exact E_gamma contraction coefficient of a finite-state kernel.

    The diagonal ``i == j`` contributes 0, so it is harmlessly included.
    """
    return float(pairwise_egamma(k, gamma).max())


def contraction_bruteforce_ratio(k: DiscreteKernel, gamma: GammaLike, trials: int,
                                 seed) -> float:
    """Largest observed ``E_gamma(mu K || nu K) / E_gamma(mu || nu)``.

    Draws ``trials`` independent pairs ``(mu, nu)`` uniformly from the simplex
    using ``numpy.random.default_rng(seed)`` (``mu`` batch first, then ``nu``)
    and adds every pair of distinct point masses; pairs whose input
    divergence is below 1e-12 are skipped. The point masses have input
    divergence exactly 1, so they reproduce ``contraction_discrete``.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials!r}")
    g = as_gamma(gamma)
    rng = np.random.default_rng(seed)
    S = k.states
    mu = random_simplex(rng, trials, S)
    nu = random_simplex(rng, trials, S)
    den = egamma_rows(mu, nu, g)
    num = egamma_rows(k.apply(mu), k.apply(nu), g)
    keep = den > 1e-12
    best = float(np.max(num[keep] / den[keep])) if np.any(keep) else 0.0
    if S > 1:
        witness = pairwise_egamma(k, g)
        np.fill_diagonal(witness, 0.0)
        best = max(best, float(witness.max()))
    return best
