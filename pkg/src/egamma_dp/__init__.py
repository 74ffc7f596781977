"""Differential-privacy accounting for iterative noisy algorithms via E_gamma contraction."""

__version__ = "0.1.0"

from egamma_dp.divergences import (DiscreteDistribution, Gamma, ScalarDensity,  # noqa: E402
                                   egamma_discrete, egamma_gaussian, egamma_laplace,
                                   egamma_quadrature, q_function, theta_gamma)
from egamma_dp.kernels import (Ball, DiscreteKernel, GaussianNoise, Interval,  # noqa: E402
                               LaplaceNoise, LossRegularity, contraction_bruteforce_ratio,
                               contraction_discrete, contraction_gaussian_projected,
                               contraction_laplace_projected, lipschitz_M)
from egamma_dp.accountant import (DpPoint, Method, PnsgdConfig, compose_sdpi,  # noqa: E402
                                  curve, delta_gaussian_pnsgd, delta_laplace_pnsgd,
                                  delta_random_stop, delta_rdp_baseline, epsilon_for_delta)

__all__ = [
    "Ball", "DiscreteDistribution", "DiscreteKernel", "DpPoint", "Gamma", "GaussianNoise",
    "Interval", "LaplaceNoise", "LossRegularity", "Method", "PnsgdConfig", "ScalarDensity",
    "compose_sdpi", "contraction_bruteforce_ratio", "contraction_discrete",
    "contraction_gaussian_projected", "contraction_laplace_projected", "curve",
    "delta_gaussian_pnsgd", "delta_laplace_pnsgd", "delta_random_stop", "delta_rdp_baseline",
    "egamma_discrete", "egamma_gaussian", "egamma_laplace", "egamma_quadrature",
    "epsilon_for_delta", "lipschitz_M", "q_function", "theta_gamma",
]
