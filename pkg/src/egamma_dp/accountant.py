"""Per-record (epsilon, delta) guarantees of projected noisy SGD.

A single pass of PNSGD over ``n`` records is the kernel chain
``K_{x_1} ... K_{x_n}``. Changing record ``i`` perturbs one kernel; the
divergence it creates is bounded through Jensen's inequality and then shrinks
by the contraction coefficient of each of the ``n - i`` later kernels. The
functions here evaluate that product for Laplace and Gaussian noise, its
randomly stopped variant, and a Renyi-DP baseline converted to (epsilon, delta).
"""

from __future__ import annotations

import dataclasses
import enum
import itertools
import math
import warnings
from typing import Callable, Iterable, List, Optional, Sequence, Union

import numpy as np

from egamma_dp.divergences import Gamma, theta_gamma
from egamma_dp.errors import (ConfigError, ConsistencyError, DomainError,
                              MethodMismatchError)
from egamma_dp.kernels import (Ball, DomainGeometry, GaussianNoise, Interval,
                               LaplaceNoise, LossRegularity, NoiseSpec,
                               contraction_gaussian_projected,
                               contraction_laplace_projected, laplace_bracket,
                               lipschitz_M)

DEFAULT_EPS_GRID = np.linspace(0.0, 5.0, 200)


class Method(str, enum.Enum):
    THM3 = "thm3"    # Laplace noise
    THM4 = "thm4"    # Gaussian noise
    THM5 = "thm5"    # Gaussian noise, random stopping time
    PROP1 = "prop1"  # Renyi-DP baseline, Gaussian noise

    def __str__(self):
        return self.value


class DegenerateBoundWarning(RuntimeWarning):
    """A bound collapsed to the vacuous value because a factor reached 1."""


@dataclasses.dataclass(frozen=True)
class PnsgdConfig:
    """Everything the privacy bounds depend on.

    Attributes:
        eta: learning rate; must satisfy ``eta < 2 / (reg.beta + reg.rho)``.
        noise: noise law of ``Z``; the update injects ``eta * Z``.
        geom: the constraint set ``K`` onto which iterates are projected.
        n: number of records (= number of update steps).
        reg: regularity constants of the loss.
    """
    eta: float
    noise: NoiseSpec
    geom: DomainGeometry
    n: int
    reg: LossRegularity

    def __post_init__(self):
        problems = []
        if not self.eta > 0:
            problems.append(f"eta must be > 0 (got {self.eta!r})")
        elif not self.eta < 2.0 / (self.reg.beta + self.reg.rho):
            problems.append(
                f"eta={self.eta!r} violates the smoothness condition "
                f"eta < 2/(beta+rho) = {2.0 / (self.reg.beta + self.reg.rho)!r}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            problems.append(f"n must be a positive integer (got {self.n!r})")
        if isinstance(self.noise, LaplaceNoise) and not isinstance(self.geom, Interval):
            problems.append("Laplace noise is only analysed on an interval domain (d = 1)")
        if self.noise.d != self.geom.d:
            problems.append(
                f"noise dimension {self.noise.d} differs from domain dimension {self.geom.d}")
        if problems:
            raise ConfigError(problems)
        object.__setattr__(self, "n", int(self.n))

    @property
    def M(self) -> float:
        return lipschitz_M(self.eta, self.reg)

    @property
    def family(self) -> str:
        return self.noise.family

    def replace(self, **changes) -> "PnsgdConfig":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class DpPoint:
    """An (epsilon, delta) guarantee and how it was obtained.

    Attributes:
        valid: False when the method's hypothesis fails at this epsilon and the
            vacuous ``delta = 1`` is reported instead (Renyi baseline with
            ``epsilon <= kappa``, or a random-stop factor equal to 1).
    """
    epsilon: float
    delta: float
    method: Method
    valid: bool = True


@dataclasses.dataclass(frozen=True)
class CurveRow:
    epsilon: float
    delta_thm: float
    delta_baseline: Optional[float]
    method: Method
    i: int
    n: int


def fig2_config() -> PnsgdConfig:
    """Gaussian PNSGD with ``sigma=2, L=1, beta=0.5, eta=0.5, rho=0, D_K=1, n=40``."""
    return PnsgdConfig(eta=0.5, noise=GaussianNoise(2.0), geom=Ball(1.0),
                       n=40, reg=LossRegularity(L=1.0, beta=0.5, rho=0.0))


def fig3_config() -> PnsgdConfig:
    """Gaussian PNSGD with ``sigma=1, L=1, beta=0.3, eta=0.7, rho=0.4, D_K=1, n=40``."""
    return PnsgdConfig(eta=0.7, noise=GaussianNoise(1.0), geom=Ball(1.0),
                       n=40, reg=LossRegularity(L=1.0, beta=0.3, rho=0.4))


def _check_index(cfg: PnsgdConfig, i: int) -> int:
    if isinstance(i, bool) or int(i) != i or not 1 <= i <= cfg.n:
        raise DomainError(f"record index must lie in [1, {cfg.n}], got {i!r}")
    return int(i)


def _check_epsilon(epsilon: float) -> float:
    eps = float(epsilon)
    if math.isnan(eps) or eps < 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon!r}")
    return eps


def _require(cfg: PnsgdConfig, family: str, method: Method):
    if cfg.family != family:
        raise MethodMismatchError(f"{method} needs {family} noise, config has {cfg.family}")


def _clip01(x: float) -> float:
    return min(1.0, max(0.0, float(x)))


def compose_sdpi(initial_div: float, coefficients: Iterable[float]) -> float:
    """Divergence after a kernel chain: ``initial_div * prod(coefficients)``."""
    value = float(initial_div)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"initial divergence must lie in [0, 1], got {initial_div!r}")
    for c in coefficients:
        if not 0.0 <= c <= 1.0:
            raise DomainError(f"contraction coefficients must lie in [0, 1], got {c!r}")
        value *= c
    return _clip01(value)


def pure_dp_threshold(cfg: PnsgdConfig) -> float:
    """Smallest epsilon at which the Laplace bound gives ``delta = 0`` (for i < n)."""
    _require(cfg, "laplace", Method.THM3)
    v = cfg.noise.v
    return min(2.0 * cfg.reg.L / v, cfg.M * cfg.geom.diameter / (cfg.eta * v))


def delta_laplace_pnsgd(epsilon: float, cfg: PnsgdConfig, i: int) -> float:
    """delta for record ``i`` under Laplace noise on ``K = [a, b]``.

    ``(1 - e^{eps/2 - L/v})_+ (1 - e^{eps/2 - M(b-a)/(2 eta v)})_+^{n-i}``.
    """
    _require(cfg, "laplace", Method.THM3)
    eps = _check_epsilon(epsilon)
    i = _check_index(cfg, i)
    v = cfg.noise.v
    first = laplace_bracket(eps, 2.0 * cfg.reg.L / v)
    step = contraction_laplace_projected(eps, cfg.M, cfg.geom.a, cfg.geom.b, cfg.eta, v)
    return compose_sdpi(first, itertools.repeat(step, cfg.n - i))


def _gaussian_factors(eps: float, cfg: PnsgdConfig):
    g = Gamma.from_epsilon(eps)
    sigma = cfg.noise.sigma
    first = theta_gamma(g, 2.0 * cfg.reg.L / sigma)
    step = contraction_gaussian_projected(g, cfg.M, cfg.geom, cfg.eta, sigma)
    return first, step


def delta_gaussian_pnsgd(epsilon: float, cfg: PnsgdConfig, i: int) -> float:
    """delta for record ``i`` under Gaussian noise.

    ``theta(2L/sigma) * theta(M D_K / (eta sigma))^{n-i}`` with ``theta`` taken
    at ``gamma = e^eps``.
    """
    _require(cfg, "gaussian", Method.THM4)
    eps = _check_epsilon(epsilon)
    i = _check_index(cfg, i)
    first, step = _gaussian_factors(eps, cfg)
    return compose_sdpi(first, itertools.repeat(step, cfg.n - i))


def delta_random_stop(epsilon: float, cfg: PnsgdConfig) -> float:
    """delta of PNSGD stopped after a uniformly random number of steps.

    ``theta(2L/sigma) / (n (1 - theta(M D_K / (eta sigma))))``, the same for
    every record. When the step factor equals 1 the bound is vacuous; 1 is
    returned and a :class:`DegenerateBoundWarning` is issued.
    """
    _require(cfg, "gaussian", Method.THM5)
    eps = _check_epsilon(epsilon)
    first, step = _gaussian_factors(eps, cfg)
    if step >= 1.0:
        warnings.warn(f"random-stop bound is vacuous at epsilon={eps!r}: step factor is 1",
                      DegenerateBoundWarning, stacklevel=2)
        return 1.0
    return _clip01(first / (cfg.n * (1.0 - step)))


def rdp_kappa(cfg: PnsgdConfig, i: int) -> float:
    """Renyi-DP slope ``kappa`` such that record ``i`` enjoys ``(alpha, kappa alpha)``-RDP.

    ``2 L^2 M^{n-i+1} / ((n-i) sigma^2)`` for ``i < n`` and ``2 L^2 / sigma^2``
    for ``i = n``.
    """
    _require(cfg, "gaussian", Method.PROP1)
    i = _check_index(cfg, i)
    L, sigma = cfg.reg.L, cfg.noise.sigma
    if i == cfg.n:
        return 2.0 * L ** 2 / sigma ** 2
    k = cfg.n - i
    return 2.0 * L ** 2 * cfg.M ** (k + 1) / (k * sigma ** 2)


def rdp_delta(epsilon: float, kappa: float) -> float:
    """Optimal RDP-to-DP conversion ``exp(-(eps - kappa)^2 / (4 kappa))``; 1 if ``eps <= kappa``."""
    eps = _check_epsilon(epsilon)
    if not kappa > 0:
        raise DomainError(f"kappa must be > 0, got {kappa!r}")
    if eps <= kappa:
        return 1.0
    return _clip01(math.exp(-((eps - kappa) ** 2) / (4.0 * kappa)))


def delta_rdp_baseline(epsilon: float, cfg: PnsgdConfig, i: int) -> float:
    """Renyi-DP baseline delta for record ``i`` (vacuous 1 when ``eps <= kappa``)."""
    return rdp_delta(epsilon, rdp_kappa(cfg, i))


def rdp_delta_infimum(epsilon: float, kappa: float, points: int = 2001,
                      rounds: int = 40) -> float:
    """Brute-force ``inf_{alpha > 1} exp(-(alpha - 1)(eps - kappa alpha))``.

    The exponent is nonnegative once ``alpha >= eps / kappa``, so the search
    runs over ``(1, eps / kappa]`` on a grid that is repeatedly zoomed around
    its best point. Used as an oracle for :func:`rdp_delta`.
    """
    if not epsilon > kappa > 0:
        raise DomainError("the infimum is below 1 only when epsilon > kappa > 0")

    def exponent(alpha):
        return -(alpha - 1.0) * (epsilon - kappa * alpha)

    lo, hi = 1.0, epsilon / kappa
    best_alpha = None
    for _ in range(rounds):
        grid = np.linspace(lo, hi, points)
        vals = exponent(grid)
        k = int(np.argmin(vals))
        best_alpha = grid[k]
        step = grid[1] - grid[0]
        lo, hi = max(1.0, best_alpha - 2 * step), min(epsilon / kappa, best_alpha + 2 * step)
    return math.exp(exponent(best_alpha))


def _delta_function(cfg: PnsgdConfig, i: int, method: Method) -> Callable[[float], float]:
    if method is Method.THM3:
        return lambda eps: delta_laplace_pnsgd(eps, cfg, i)
    if method is Method.THM4:
        return lambda eps: delta_gaussian_pnsgd(eps, cfg, i)
    if method is Method.THM5:
        return lambda eps: delta_random_stop(eps, cfg)
    return lambda eps: delta_rdp_baseline(eps, cfg, i)


def default_method(cfg: PnsgdConfig) -> Method:
    return Method.THM3 if cfg.family == "laplace" else Method.THM4


def dp_point(epsilon: float, cfg: PnsgdConfig, i: int,
             method: Union[Method, str, None] = None) -> DpPoint:
    """Evaluates one guarantee and records whether the method's hypothesis held."""
    method = default_method(cfg) if method is None else Method(method)
    eps = _check_epsilon(epsilon)
    valid = True
    if method is Method.PROP1:
        valid = eps > rdp_kappa(cfg, i)
    elif method is Method.THM5:
        valid = _gaussian_factors(eps, cfg)[1] < 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateBoundWarning)
        delta = _delta_function(cfg, i, method)(eps)
    return DpPoint(epsilon=eps, delta=delta, method=method, valid=valid)


def epsilon_for_delta(delta_target: float, cfg: PnsgdConfig, i: int,
                      method: Union[Method, str, None] = None,
                      tol: float = 1e-9) -> float:
    """Smallest epsilon (to within ``tol``, rounded up) whose delta is <= ``delta_target``.

    Bisection on the nonincreasing map ``epsilon -> delta``; the upper end of the
    final bracket is returned, so the guarantee always holds.

    Raises:
        ConsistencyError: if the delta map is found to increase.
    """
    if not 0.0 < delta_target < 1.0:
        raise DomainError(f"delta_target must lie in (0, 1), got {delta_target!r}")
    method = default_method(cfg) if method is None else Method(method)
    if method is not Method.THM5:
        _check_index(cfg, i)
    delta = _delta_function(cfg, i, method)
    d_lo = delta(0.0)
    if d_lo <= delta_target:
        return 0.0
    lo, hi = 0.0, 1.0
    d_hi = delta(hi)
    while d_hi > delta_target:
        if d_hi > d_lo:
            raise ConsistencyError(f"delta increased from {d_lo!r} to {d_hi!r} at eps={hi!r}")
        lo, d_lo = hi, d_hi
        hi *= 2.0
        if hi > 1e6:
            raise ConsistencyError("delta never drops below the target")
        d_hi = delta(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        d_mid = delta(mid)
        if not d_hi <= d_mid <= d_lo:
            raise ConsistencyError(
                f"non-monotone delta: d({lo!r})={d_lo!r}, d({mid!r})={d_mid!r}, d({hi!r})={d_hi!r}")
        if d_mid <= delta_target:
            hi, d_hi = mid, d_mid
        else:
            lo, d_lo = mid, d_mid
    return hi


def curve(cfg: PnsgdConfig, i: int, eps_grid: Optional[Sequence[float]] = None,
          method: Union[Method, str, None] = None) -> List[CurveRow]:
    """delta-versus-epsilon rows for the applicable bound.

    Gaussian configurations evaluated with ``thm4`` also carry the Renyi
    baseline; other methods leave ``delta_baseline`` empty.
    """
    grid = DEFAULT_EPS_GRID if eps_grid is None else np.asarray(eps_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("epsilon grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("epsilon grid must be strictly increasing")
    method = default_method(cfg) if method is None else Method(method)
    i = _check_index(cfg, i)
    delta = _delta_function(cfg, i, method)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateBoundWarning)
        for eps in grid:
            eps = float(eps)
            base = delta_rdp_baseline(eps, cfg, i) if method is Method.THM4 else None
            rows.append(CurveRow(eps, delta(eps), base, method, i, cfg.n))
    return rows
