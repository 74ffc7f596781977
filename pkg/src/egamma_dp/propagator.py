"""Executable PNSGD and exact propagation of its output law on a 1-d grid.

The iterate distribution ``mu_t = mu_0 K_{x_1} ... K_{x_t}`` is tracked on a
uniform grid of ``G`` cells covering ``K = [a, b]``. Each step kernel is
discretised from the noise CDF: a cell receives the probability that
``psi_x(c) + eta Z`` lands in it, and the two boundary cells additionally
absorb the tails that the projection maps onto ``a`` and ``b``. Comparing the
propagated laws for two neighbouring datasets gives the actual divergence of
the algorithm, which must stay below the accountant's bound.
"""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from egamma_dp.accountant import PnsgdConfig
from egamma_dp.divergences import Gamma, egamma_rows
from egamma_dp.errors import DomainError, InputError, NumericalError
from egamma_dp.kernels import (DiscreteKernel, GaussianNoise, Interval, LaplaceNoise,
                               LossRegularity, NoiseSpec)

MIN_GRID = 16
MC_CHUNK = 65536


@dataclasses.dataclass(frozen=True)
class LossModel:
    """A loss described by its gradient in the parameter ``y``.

    Attributes:
        gradient: vectorised ``(y, x) -> d loss / d y``.
        regularity: the declared ``(L, beta, rho)``.
        domain: the parameter interval ``K``.
        data_domain: interval containing every record ``x``.
    """
    gradient: Callable[[np.ndarray, np.ndarray], np.ndarray]
    regularity: LossRegularity
    domain: Interval
    data_domain: Tuple[float, float]
    name: str = "custom"

    def problems(self, points: int = 33) -> List[str]:
        """Spot-checks the declared constants on a ``points x points`` grid."""
        reg = self.regularity
        ys = np.linspace(self.domain.a, self.domain.b, points)
        xs = np.linspace(self.data_domain[0], self.data_domain[1], points)
        out = []
        g = self.gradient(ys[:, None], xs[None, :])
        worst = float(np.max(np.abs(g)))
        if worst > reg.L * (1 + 1e-12):
            out.append(f"|gradient| reaches {worst!r} > L={reg.L!r}")
        dy = ys[:, None] - ys[None, :]
        off = dy != 0
        for x in xs:
            gx = self.gradient(ys, np.full_like(ys, x))
            inner = (gx[:, None] - gx[None, :]) * dy
            sq = dy ** 2
            if np.any(inner[off] > reg.beta * sq[off] * (1 + 1e-9) + 1e-15):
                out.append(f"gradient is not beta-Lipschitz (beta={reg.beta!r}) at x={x!r}")
                break
            if np.any(inner[off] < reg.rho * sq[off] * (1 - 1e-9) - 1e-15):
                out.append(f"loss is not rho-strongly convex (rho={reg.rho!r}) at x={x!r}")
                break
        return out

    def check(self, points: int = 33) -> "LossModel":
        problems = self.problems(points)
        if problems:
            raise InputError("; ".join(problems))
        return self


def quadratic_loss(c: float = 1.0, domain: Interval = Interval(0.0, 1.0),
                   data_domain: Optional[Tuple[float, float]] = None) -> LossModel:
    """``loss(y, x) = (c/2)(y - x)^2`` with constants ``(c W, c, c)``.

    ``W`` is the largest ``|y - x|`` over the parameter and data domains.
    """
    if not c > 0:
        raise DomainError(f"curvature c must be > 0, got {c!r}")
    lo, hi = data_domain if data_domain is not None else (domain.a, domain.b)
    width = max(domain.b - lo, hi - domain.a)
    return LossModel(
        gradient=lambda y, x: c * (np.asarray(y) - np.asarray(x)),
        regularity=LossRegularity(L=c * width, beta=c, rho=c),
        domain=domain, data_domain=(float(lo), float(hi)), name=f"quadratic(c={c!r})")


def psi_map(loss: LossModel, eta: float, x, y):
    """Gradient step ``y - eta * grad loss(y, x)``."""
    if not loss.domain.contains(y):
        raise DomainError(f"y={y!r} lies outside [{loss.domain.a}, {loss.domain.b}]")
    out = np.asarray(y, dtype=float) - eta * loss.gradient(np.asarray(y, dtype=float), x)
    return float(out) if np.ndim(out) == 0 else out


@dataclasses.dataclass(frozen=True, eq=False)
class GridDensity:
    """Cell masses of a distribution on ``[a, b]`` split into ``G`` equal cells.

    Atoms at ``a`` and ``b`` (created by the projection) are carried by the
    first and last cell.
    """
    a: float
    b: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise InputError("grid weights must be a non-empty vector")
        if abs(w.sum() - 1.0) > 1e-9:
            raise NumericalError(f"grid density has mass {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def G(self) -> int:
        return self.weights.size

    @property
    def width(self) -> float:
        return (self.b - self.a) / self.G

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.G + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.a + (np.arange(self.G) + 0.5) * self.width

    @classmethod
    def uniform(cls, a: float, b: float, G: int) -> "GridDensity":
        return cls(a, b, np.full(G, 1.0 / G))

    @classmethod
    def from_samples(cls, samples, a: float, b: float, G: int) -> "GridDensity":
        counts, _ = np.histogram(np.asarray(samples), bins=G, range=(a, b))
        if counts.sum() != np.size(samples):
            raise InputError("samples fall outside the grid")
        return cls(a, b, counts / counts.sum())

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["cell_center", "mass"])
            for c, m in zip(self.centers, self.weights):
                writer.writerow([f"{c:.17g}", f"{m:.17g}"])


def read_dataset(path) -> np.ndarray:
    """A dataset file: one real number per line (blank lines and ``#`` comments ignored)."""
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip().rstrip(",")
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: not a number: {line!r}") from exc
    return np.array(values)


def write_dataset(points, path) -> None:
    Path(path).write_text("".join(f"{x:.17g}\n" for x in np.asarray(points, dtype=float)))


def _noise_cdf(noise: NoiseSpec) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(noise, GaussianNoise):
        if noise.d != 1:
            raise DomainError("grid propagation is one-dimensional")
        return lambda z: stats.norm.cdf(z, scale=noise.sigma)
    if isinstance(noise, LaplaceNoise):
        return lambda z: stats.laplace.cdf(z, scale=noise.v)
    raise InputError(f"unsupported noise family {noise!r}")


def build_step_kernel(loss: LossModel, eta: float, x: float, noise: NoiseSpec,
                      geom: Interval, G: int) -> DiscreteKernel:
    """Discretised kernel ``y -> Proj_[a,b](psi_x(y) + eta Z)`` on ``G`` cells.

    Row ``i`` starts from the centre of cell ``i``; cell masses are exact CDF
    differences and the boundary cells absorb the projected tails.
    """
    if not isinstance(geom, Interval):
        raise DomainError("grid propagation needs an interval domain")
    if G < MIN_GRID:
        raise DomainError(f"grid size must be >= {MIN_GRID}, got {G!r}")
    cdf = _noise_cdf(noise)
    grid = GridDensity.uniform(geom.a, geom.b, G)
    means = psi_map(loss, eta, x, grid.centers)
    inner_edges = grid.edges[1:-1]
    F = cdf((inner_edges[None, :] - means[:, None]) / eta)
    rows = np.empty((G, G))
    rows[:, 0] = F[:, 0]
    rows[:, 1:-1] = np.diff(F, axis=1)
    rows[:, -1] = 1.0 - F[:, -1]
    np.maximum(rows, 0.0, out=rows)
    return DiscreteKernel(rows)


def propagate(mu0: GridDensity, data: Sequence[float], cfg: PnsgdConfig,
              loss: LossModel) -> List[GridDensity]:
    """``[mu_0, mu_1, ..., mu_n]`` for the records in ``data``, processed in order."""
    geom = cfg.geom
    if not isinstance(geom, Interval) or (mu0.a, mu0.b) != (geom.a, geom.b):
        raise DomainError("initial density must live on the configured interval")
    cache: Dict[float, DiscreteKernel] = {}
    out = [mu0]
    mu = mu0.weights
    for x in np.asarray(data, dtype=float):
        key = float(x)
        if key not in cache:
            cache[key] = build_step_kernel(loss, cfg.eta, key, cfg.noise, geom, mu0.G)
        mu = cache[key].apply(mu)
        drift = abs(mu.sum() - 1.0)
        if drift > 1e-9:
            raise NumericalError(f"mass drifted by {drift!r} during propagation")
        mu = mu / mu.sum()
        out.append(GridDensity(mu0.a, mu0.b, mu))
    return out


def _as_dataset(points, cfg: PnsgdConfig) -> np.ndarray:
    data = np.asarray(points, dtype=float)
    if data.ndim != 1 or data.size != cfg.n:
        raise InputError(f"dataset must contain n={cfg.n} records, got {data.size}")
    return data


def differing_index(data, data_prime) -> int:
    """1-based position where two neighbouring datasets differ."""
    a = np.asarray(data, dtype=float)
    b = np.asarray(data_prime, dtype=float)
    if a.shape != b.shape:
        raise InputError(f"datasets have different lengths ({a.size} vs {b.size})")
    diff = np.flatnonzero(a != b)
    if diff.size != 1:
        raise InputError(f"datasets must differ in exactly one record, they differ in {diff.size}")
    return int(diff[0]) + 1


def empirical_delta(epsilon, cfg: PnsgdConfig, loss: LossModel, data, data_prime,
                    G: int, mu0: Optional[GridDensity] = None):
    """``E_{e^eps}(mu_n || nu_n)`` for the propagated outputs on two datasets.

    The datasets must differ in exactly one record, except that identical
    datasets are accepted (and give 0). ``epsilon`` may be a scalar or a
    sequence; a sequence returns an array, reusing one propagation.
    """
    d = _as_dataset(data, cfg)
    dp = _as_dataset(data_prime, cfg)
    if not np.array_equal(d, dp):
        differing_index(d, dp)
    geom = cfg.geom
    start = GridDensity.uniform(geom.a, geom.b, G) if mu0 is None else mu0
    mu = propagate(start, d, cfg, loss)[-1].weights
    nu = propagate(start, dp, cfg, loss)[-1].weights
    eps = np.asarray(epsilon, dtype=float)
    vals = np.array([float(egamma_rows(mu, nu, Gamma.from_epsilon(e))) for e in eps.ravel()])
    return float(vals[0]) if eps.ndim == 0 else vals.reshape(eps.shape)


def simulate_pnsgd(cfg: PnsgdConfig, data, loss: LossModel, seed: int, trials: int,
                   y0: Optional[float] = None) -> np.ndarray:
    """Monte Carlo samples of the final iterate ``Y_n``.

    Trials are split into chunks of 65536; chunk ``k`` draws from
    ``numpy.random.default_rng(SeedSequence(seed).spawn(K)[k])``, first the
    starting points (uniform on ``K`` unless ``y0`` is given) and then one noise
    vector per step. The output therefore depends only on ``seed`` and
    ``trials``.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials!r}")
    geom = cfg.geom
    if not isinstance(geom, Interval):
        raise DomainError("simulation needs an interval domain")
    data = _as_dataset(data, cfg)
    chunks = -(-trials // MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(chunks)
    out = []
    for k, child in enumerate(children):
        size = min(MC_CHUNK, trials - k * MC_CHUNK)
        rng = np.random.default_rng(child)
        if y0 is None:
            y = rng.uniform(geom.a, geom.b, size)
        else:
            y = np.full(size, np.clip(float(y0), geom.a, geom.b))
        for x in data:
            if cfg.family == "gaussian":
                z = rng.normal(0.0, cfg.noise.sigma, size)
            else:
                z = rng.laplace(0.0, cfg.noise.v, size)
            y = np.clip(y - cfg.eta * (loss.gradient(y, x) + z), geom.a, geom.b)
        out.append(y)
    return np.concatenate(out)


@dataclasses.dataclass(frozen=True, eq=False)
class Instance:
    """A concrete 1-d PNSGD problem: configuration, loss and dataset."""
    cfg: PnsgdConfig
    loss: LossModel
    data: np.ndarray

    def neighbor(self, i: int, value: Optional[float] = None) -> np.ndarray:
        """The dataset with record ``i`` (1-based) replaced.

        By default the record is moved to the far end of the data domain, which
        maximises the change of the gradient for a quadratic loss.
        """
        if not 1 <= i <= self.data.size:
            raise DomainError(f"record index must lie in [1, {self.data.size}], got {i!r}")
        lo, hi = self.loss.data_domain
        if value is None:
            x = self.data[i - 1]
            value = hi if x - lo < hi - x else lo
        out = self.data.copy()
        out[i - 1] = value
        return out


def default_instance(n: int = 10, sigma: float = 1.0, eta: float = 0.2, c: float = 1.0,
                     seed: int = 0) -> Instance:
    """Quadratic loss on ``K = [0, 1]`` with Gaussian noise and uniform records.

    Records are ``default_rng(seed).uniform(0, 1, n)``.
    """
    domain = Interval(0.0, 1.0)
    loss = quadratic_loss(c, domain)
    cfg = PnsgdConfig(eta=eta, noise=GaussianNoise(sigma), geom=domain, n=n,
                      reg=loss.regularity)
    data = np.random.default_rng(seed).uniform(0.0, 1.0, n)
    return Instance(cfg, loss, data)
