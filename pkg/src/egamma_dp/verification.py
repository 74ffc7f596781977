"""Property suites that check every bound against an independent computation.

Each check returns a :class:`Check` carrying the measured margin (positive
means the property held with room to spare). ``run_suite`` is what the
``verify`` command executes.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Dict, Iterator, List

import numpy as np

from egamma_dp import accountant as acc
from egamma_dp.divergences import (Gamma, ScalarDensity, egamma_gaussian, egamma_laplace,
                                   egamma_quadrature, q_function, theta_gamma)
from egamma_dp.kernels import (Interval, LaplaceNoise, LossRegularity,
                               contraction_bruteforce_ratio, contraction_discrete,
                               contraction_gaussian_projected, random_kernel)
from egamma_dp.propagator import (GridDensity, build_step_kernel, default_instance,
                                  empirical_delta, propagate, simulate_pnsgd)

GAMMAS = (1.0, 1.5, math.e, 5.0, 10.0)
SHIFTS = (0.0, 0.1, 1.0, 3.0)
SCALES = (0.5, 1.0, 2.0)


@dataclasses.dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status}  {self.name}  margin={self.margin:.3e}"
        return f"{text}  {self.detail}" if self.detail else text


def _bound(name: str, error: float, tol: float, detail: str = "") -> Check:
    measured = f"error={error:.3e} tol={tol:.1e}"
    return Check(name, bool(error <= tol), tol - error,
                 f"{measured}  {detail}" if detail else measured)


# ----------------------------------------------------------------------------
# divergences
# ----------------------------------------------------------------------------


def check_q_function() -> Iterator[Check]:
    err = abs(q_function(1.959963984540054) - 0.025)
    yield _bound("q_function(1.95996...) = 0.025", err, 1e-9)
    err = max(abs(q_function(t) + q_function(-t) - 1.0) for t in (0.5, 1.0, 3.0))
    yield _bound("q_function symmetry", err, 1e-15)


def check_closed_forms(tol: float = 1e-6) -> Iterator[Check]:
    for family in ("gaussian", "laplace"):
        worst, where = 0.0, None
        for g in GAMMAS:
            for shift in SHIFTS:
                for scale in SCALES:
                    if family == "gaussian":
                        closed = egamma_gaussian(0.0, shift, scale, g)
                        p, q = ScalarDensity.gaussian(0.0, scale), ScalarDensity.gaussian(shift, scale)
                    else:
                        closed = egamma_laplace(0.0, shift, scale, g)
                        p, q = ScalarDensity.laplace(0.0, scale), ScalarDensity.laplace(shift, scale)
                    err = abs(closed - egamma_quadrature(p, q, g))
                    if err >= worst:
                        worst, where = err, (g, shift, scale)
        yield _bound(f"{family} closed form vs quadrature (60 cases)", worst, tol,
                     f"worst at (gamma, shift, scale)={where}")


def check_theta_monotone() -> Iterator[Check]:
    r = np.linspace(0.0, 10.0, 401)
    for g in (1.0, 1.5, math.e, 5.0):
        vals = np.array([theta_gamma(g, x) for x in r])
        drop = float(max(0.0, -np.min(np.diff(vals))))
        yield _bound(f"theta_gamma nondecreasing in r (gamma={g:.4g})", drop, 0.0)
    gs = np.linspace(1.0, 20.0, 200)
    vals = np.array([egamma_gaussian(0.0, 1.0, 1.0, g) for g in gs])
    rise = float(max(0.0, np.max(np.diff(vals))))
    yield _bound("E_gamma nonincreasing in gamma", rise, 0.0)


# ----------------------------------------------------------------------------
# contraction
# ----------------------------------------------------------------------------


def _max_row_tv(m: np.ndarray) -> float:
    return max(0.5 * float(np.abs(m[i] - m[j]).sum())
               for i in range(m.shape[0]) for j in range(m.shape[0]))


def check_finite_kernels(seed: int, kernels: int = 50, trials: int = 10_000) -> Iterator[Check]:
    ss = np.random.SeedSequence(seed)
    sizes = (3, 4, 6)
    over, under, tv_err = 0.0, 0.0, 0.0
    for k, child in enumerate(ss.spawn(kernels)):
        kern = random_kernel(sizes[k % 3], child)
        for g in (1.0, 2.0, math.e):
            exact = contraction_discrete(kern, g)
            brute = contraction_bruteforce_ratio(kern, g, trials, seed + k)
            over = max(over, brute - exact)
            under = max(under, exact - brute)
        tv_err = max(tv_err, abs(contraction_discrete(kern, 1.0) - _max_row_tv(kern.matrix)))
    yield _bound(f"brute-force ratio <= pairwise formula ({kernels} kernels)", over, 1e-9)
    yield _bound("point-mass witnesses attain the formula", under, 1e-12)
    yield _bound("gamma=1 equals max pairwise row TV", tv_err, 1e-12)


def check_step_kernels() -> Iterator[Check]:
    inst = default_instance()
    cfg = inst.cfg
    for G in (64, 128):
        kern = build_step_kernel(inst.loss, cfg.eta, float(inst.data[0]), cfg.noise, cfg.geom, G)
        excess = 0.0
        for eps in (0.0, 0.5, 1.0, 2.0):
            g = Gamma.from_epsilon(eps)
            bound = contraction_gaussian_projected(g, cfg.M, cfg.geom, cfg.eta, cfg.noise.sigma)
            excess = max(excess, contraction_discrete(kern, g) - bound)
        yield _bound(f"step kernel contraction <= projected bound (G={G})", excess, 5.0 / G)


# ----------------------------------------------------------------------------
# accountant
# ----------------------------------------------------------------------------


def check_rdp_minimisation(seed: int, pairs: int = 20) -> Iterator[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        kappa = float(rng.uniform(0.01, 2.0))
        eps = kappa * float(rng.uniform(1.05, 8.0))
        closed = acc.rdp_delta(eps, kappa)
        grid = acc.rdp_delta_infimum(eps, kappa)
        worst = max(worst, abs(closed - grid) / grid)
    yield _bound(f"RDP conversion closed form vs alpha-grid infimum ({pairs} pairs)", worst, 1e-6)


def check_figure_orderings() -> Iterator[Check]:
    for label, cfg, eps_max in (("fig2", acc.fig2_config(), 5.0), ("fig3", acc.fig3_config(), 2.5)):
        rows = [r for r in acc.curve(cfg, 39) if r.epsilon <= eps_max and r.delta_baseline < 1]
        gap = min(r.delta_baseline - r.delta_thm for r in rows) if rows else math.inf
        yield Check(f"{label} i=39: contraction bound below RDP baseline (eps<={eps_max})",
                    bool(rows) and gap > 0, gap, f"{len(rows)} grid points compared")


def check_laplace_threshold(seed: int, configs: int = 10) -> Iterator[Check]:
    rng = np.random.default_rng(seed)
    worst_zero, worst_pos = 0.0, math.inf
    for _ in range(configs):
        cfg, i = random_laplace_config(rng)
        thr = acc.pure_dp_threshold(cfg)
        for eps in thr * np.array([1.0, 1.01, 1.5, 3.0]):
            worst_zero = max(worst_zero, acc.delta_laplace_pnsgd(float(eps), cfg, i))
        worst_pos = min(worst_pos, acc.delta_laplace_pnsgd(0.99 * thr, cfg, i))
    yield _bound("Laplace delta is exactly 0 beyond the pure-DP threshold", worst_zero, 0.0)
    yield Check("Laplace delta > 0 at 0.99 x threshold", worst_pos > 0, worst_pos)


def random_laplace_config(rng: np.random.Generator):
    """A random valid Laplace configuration and a record index ``i < n``."""
    beta = float(rng.uniform(0.2, 2.0))
    rho = float(rng.uniform(0.0, beta))
    eta = float(rng.uniform(0.05, 0.95)) * 2.0 / (beta + rho)
    a = float(rng.uniform(-2.0, 0.0))
    b = a + float(rng.uniform(0.2, 3.0))
    n = int(rng.integers(2, 60))
    cfg = acc.PnsgdConfig(eta=eta, noise=LaplaceNoise(float(rng.uniform(0.2, 3.0))),
                          geom=Interval(a, b), n=n,
                          reg=LossRegularity(float(rng.uniform(0.1, 3.0)), beta, rho))
    return cfg, int(rng.integers(1, n))


def check_random_stop() -> Iterator[Check]:
    cfg = acc.fig2_config()
    worst = -math.inf
    for eps in (0.5, 1.0, 2.0):
        g = Gamma.from_epsilon(eps)
        first = theta_gamma(g, 2 * cfg.reg.L / cfg.noise.sigma)
        step = theta_gamma(g, cfg.M * cfg.geom.diameter / (cfg.eta * cfg.noise.sigma))
        total = acc.delta_random_stop(eps, cfg)
        for i in range(1, cfg.n + 1):
            chain = sum(first * step ** (r - i) for r in range(i, cfg.n + 1)) / cfg.n
            worst = max(worst, chain - total)
    yield _bound("random-stop delta dominates the averaged per-step bounds", worst, 1e-12)


def check_monotone_in_epsilon(seed: int) -> Iterator[Check]:
    eps = np.linspace(0.0, 6.0, 121)
    rng = np.random.default_rng(seed)
    lap, li = random_laplace_config(rng)
    cases = [
        ("thm4", lambda e: acc.delta_gaussian_pnsgd(e, acc.fig2_config(), 20)),
        ("thm5", lambda e: acc.delta_random_stop(e, acc.fig3_config())),
        ("prop1", lambda e: acc.delta_rdp_baseline(e, acc.fig3_config(), 30)),
        ("thm3", lambda e: acc.delta_laplace_pnsgd(e, lap, li)),
    ]
    for name, fn in cases:
        vals = np.array([fn(float(e)) for e in eps])
        rise = float(max(0.0, np.max(np.diff(vals))))
        yield _bound(f"{name} delta nonincreasing in epsilon", rise, 0.0)


def check_inversion() -> Iterator[Check]:
    cfg = acc.fig2_config()
    target = 1e-3
    eps = acc.epsilon_for_delta(target, cfg, 39)
    lo = acc.delta_gaussian_pnsgd(eps - 1e-6, cfg, 39)
    hi = acc.delta_gaussian_pnsgd(eps, cfg, 39)
    ok = hi <= target <= lo
    yield Check("epsilon_for_delta round trip (fig2, i=39, delta=1e-3)", ok,
                min(target - hi, lo - target), f"eps={eps:.12g}")


# ----------------------------------------------------------------------------
# propagator
# ----------------------------------------------------------------------------


def soundness_slack(G: int, indices=(1, 5, 10), eps_grid=None) -> np.ndarray:
    """``theoretical - empirical`` delta on the default instance, shape (len(indices), len(eps))."""
    inst = default_instance()
    eps = np.linspace(0.0, 4.0, 50) if eps_grid is None else np.asarray(eps_grid)
    out = []
    for i in indices:
        emp = empirical_delta(eps, inst.cfg, inst.loss, inst.data, inst.neighbor(i), G)
        theo = np.array([acc.delta_gaussian_pnsgd(float(e), inst.cfg, i) for e in eps])
        out.append(theo - emp)
    return np.array(out)


def check_soundness() -> Iterator[Check]:
    slack = {G: soundness_slack(G) for G in (64, 128, 256)}
    worst = float(-slack[128].min())
    yield _bound("empirical delta <= Gaussian bound + 5/G (G=128, i in {1,5,10})", worst, 5.0 / 128)
    yield Check("max slack at G=256 <= max slack at G=64",
                bool(slack[256].max() <= slack[64].max()),
                float(slack[64].max() - slack[256].max()))


def check_monte_carlo(seed: int, trials: int = 200_000, G: int = 128) -> Iterator[Check]:
    inst = default_instance()
    samples = simulate_pnsgd(inst.cfg, inst.data, inst.loss, seed, trials)
    hist = GridDensity.from_samples(samples, inst.cfg.geom.a, inst.cfg.geom.b, G)
    chain = propagate(GridDensity.uniform(inst.cfg.geom.a, inst.cfg.geom.b, G),
                      inst.data, inst.cfg, inst.loss)
    tv = 0.5 * float(np.abs(hist.weights - chain[-1].weights).sum())
    yield _bound(f"Monte Carlo histogram vs propagated law (TV, {trials} trials)", tv,
                 3.0 * math.sqrt(G / trials))
    drift = max(abs(float(m.weights.sum()) - 1.0) for m in chain)
    yield _bound("mass conserved through propagation", drift, 1e-9)


SUITES: Dict[str, Callable[[int], Iterator[Check]]] = {
    "divergences": lambda seed: _chain(check_q_function(), check_closed_forms(),
                                       check_theta_monotone()),
    "contraction": lambda seed: _chain(check_finite_kernels(seed), check_step_kernels()),
    "accountant": lambda seed: _chain(check_rdp_minimisation(seed), check_figure_orderings(),
                                      check_laplace_threshold(seed), check_random_stop(),
                                      check_monotone_in_epsilon(seed), check_inversion()),
    "propagator": lambda seed: _chain(check_soundness(), check_monte_carlo(seed)),
}


def _chain(*iters):
    for it in iters:
        yield from it


def run_suite(name: str, seed: int = 0) -> List[Check]:
    if name == "all":
        return [c for key in SUITES for c in SUITES[key](seed)]
    if name not in SUITES:
        raise KeyError(name)
    return list(SUITES[name](seed))
