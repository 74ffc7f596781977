import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egamma_dp.divergences import Gamma, q_function, theta_gamma
from egamma_dp.errors import DomainError, InputError, PreconditionError
from egamma_dp.kernels import (Ball, DiscreteKernel, GaussianNoise, Interval, LaplaceNoise,
                               LossRegularity, RegularityWarning, contraction_bruteforce_ratio,
                               contraction_discrete, contraction_gaussian_projected,
                               contraction_laplace_projected, laplace_bracket, lipschitz_M,
                               pairwise_egamma, random_kernel)


def tv_rows(matrix):
    """Independent max pairwise total variation, straight from the definition."""
    m = np.asarray(matrix)
    best = 0.0
    for i in range(len(m)):
        for j in range(len(m)):
            best = max(best, 0.5 * sum(abs(a - b) for a, b in zip(m[i], m[j])))
    return best


# ----------------------------------------------------------------------------
# Description types
# ----------------------------------------------------------------------------


def test_regularity_validation():
    with pytest.raises(DomainError, match="reg.L"):
        LossRegularity(0.0, 1.0)
    with pytest.raises(DomainError, match="reg.beta"):
        LossRegularity(1.0, -1.0)
    with pytest.raises(DomainError, match="reg.rho"):
        LossRegularity(1.0, 1.0, -0.1)


def test_regularity_warns_when_rho_exceeds_beta():
    with pytest.warns(RegularityWarning):
        LossRegularity(1.0, 0.3, 0.4)


def test_regularity_quiet_for_consistent_constants():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        LossRegularity(1.0, 0.5, 0.5)


@pytest.mark.parametrize("make", [lambda: LaplaceNoise(0.0), lambda: GaussianNoise(-1.0),
                                  lambda: GaussianNoise(1.0, d=0), lambda: Interval(1.0, 1.0),
                                  lambda: Ball(0.0)])
def test_invalid_descriptions(make):
    with pytest.raises(DomainError):
        make()


def test_geometry():
    assert Interval(-1.0, 2.0).diameter == 3.0
    assert Interval(0.0, 1.0).contains(0.5) and not Interval(0.0, 1.0).contains(1.5)
    assert Ball(2.0, d=3).diameter == 2.0 and Ball(2.0, d=3).d == 3


# ----------------------------------------------------------------------------
# Discrete kernels
# ----------------------------------------------------------------------------


def test_kernel_rejects_non_stochastic_rows():
    with pytest.raises(InputError, match="row 1"):
        DiscreteKernel([[1.0, 0.0], [0.6, 0.6]])
    with pytest.raises(InputError):
        DiscreteKernel([[0.5, 0.5]])


def test_kernel_is_read_only():
    k = DiscreteKernel([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        k.matrix[0, 0] = 0.5


def test_kernel_csv_roundtrip(tmp_path):
    k = random_kernel(5, seed=3)
    k.to_csv(tmp_path / "k.csv")
    np.testing.assert_array_equal(DiscreteKernel.from_csv(tmp_path / "k.csv").matrix, k.matrix)


def test_kernel_csv_bad_rows(tmp_path):
    (tmp_path / "k.csv").write_text("0.5,0.5\n0.2,0.2\n")
    with pytest.raises(InputError, match="k.csv"):
        DiscreteKernel.from_csv(tmp_path / "k.csv")


def test_random_kernel_is_seeded():
    np.testing.assert_array_equal(random_kernel(4, 11).matrix, random_kernel(4, 11).matrix)


@pytest.mark.parametrize("g", [1.0, 2.0, math.e, math.inf])
def test_identity_kernel_coefficient_is_one(g):
    k = DiscreteKernel(np.eye(4))
    assert contraction_discrete(k, Gamma(g)) == 1.0
    assert contraction_bruteforce_ratio(k, Gamma(g), trials=200, seed=0) == pytest.approx(1.0)


@pytest.mark.parametrize("g", [1.0, 3.0])
def test_constant_rows_coefficient_is_zero(g):
    k = DiscreteKernel(np.tile([0.2, 0.3, 0.5], (3, 1)))
    assert contraction_discrete(k, g) == 0.0
    # mu K and nu K agree up to rounding in the matrix product.
    assert contraction_bruteforce_ratio(k, g, trials=200, seed=0) < 1e-12


def test_three_state_example():
    k = DiscreteKernel([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    assert contraction_discrete(k, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert contraction_discrete(k, 1.0) == pytest.approx(tv_rows(k.matrix), abs=1e-15)


def test_pairwise_matrix_has_zero_diagonal():
    np.testing.assert_array_equal(np.diag(pairwise_egamma(random_kernel(5, 2), 1.5)), 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_bruteforce_attains_formula_with_point_masses(seed):
    k = random_kernel(4, seed)
    exact = contraction_discrete(k, 1.7)
    ratio = contraction_bruteforce_ratio(k, 1.7, trials=2000, seed=seed)
    assert abs(ratio - exact) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10_000), st.floats(1.0, 10.0))
def test_random_pairs_never_beat_the_formula(states, seed, g):
    k = random_kernel(states, seed)
    rng = np.random.default_rng(seed)
    exact = contraction_discrete(k, g)
    for _ in range(20):
        mu, nu = rng.dirichlet(np.ones(states)), rng.dirichlet(np.ones(states))
        den = np.maximum(mu - g * nu, 0).sum()
        if den > 1e-9:
            num = np.maximum(mu @ k.matrix - g * (nu @ k.matrix), 0).sum()
            assert num / den <= exact + 1e-9


def test_bruteforce_requires_trials():
    with pytest.raises(DomainError):
        contraction_bruteforce_ratio(random_kernel(3, 0), 1.0, trials=0, seed=0)


# ----------------------------------------------------------------------------
# Lipschitz constant
# ----------------------------------------------------------------------------


@pytest.mark.parametrize("eta", [0.01, 0.5, 1.9])
def test_lipschitz_convex_is_one(eta):
    assert lipschitz_M(eta, LossRegularity(1.0, 1.0, 0.0)) == 1.0


def test_lipschitz_second_figure_parameters():
    with pytest.warns(RegularityWarning):
        reg = LossRegularity(1.0, 0.3, 0.4)
    assert abs(lipschitz_M(0.7, reg) - math.sqrt(0.76)) < 1e-12


def test_lipschitz_small_step_limit():
    assert lipschitz_M(1e-12, LossRegularity(1.0, 2.0, 1.0)) == pytest.approx(1.0, abs=1e-9)


def test_lipschitz_smoothness_condition():
    with pytest.raises(PreconditionError, match="smoothness condition"):
        lipschitz_M(1.0, LossRegularity(1.0, 1.0, 1.0))
    with pytest.raises(DomainError):
        lipschitz_M(0.0, LossRegularity(1.0, 1.0))


# ----------------------------------------------------------------------------
# Projected continuous kernels
# ----------------------------------------------------------------------------


def test_gaussian_projected_first_figure_tv():
    value = contraction_gaussian_projected(1.0, 1.0, Ball(1.0), 0.5, 2.0)
    assert value == pytest.approx(1 - 2 * q_function(0.5), abs=1e-15)


def test_gaussian_projected_zero_lipschitz():
    assert contraction_gaussian_projected(2.0, 0.0, Ball(1.0), 0.5, 2.0) == 0.0


def test_gaussian_projected_decreases_to_zero_in_gamma():
    values = [contraction_gaussian_projected(math.exp(e), 1.0, Interval(0, 1), 0.5, 1.0)
              for e in (0.0, 0.5, 1.0, 2.0, 5.0, 20.0)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-12


def test_unprojected_limit_is_trivial():
    values = [contraction_gaussian_projected(math.e, 1.0, Ball(D), 1.0, 1.0)
              for D in (1, 10, 100, 1000)]
    assert values[-1] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("eta,sigma", [(0.0, 1.0), (1.0, 0.0)])
def test_gaussian_projected_errors(eta, sigma):
    with pytest.raises(DomainError):
        contraction_gaussian_projected(1.0, 1.0, Ball(1.0), eta, sigma)


def test_gaussian_projected_is_theta():
    assert contraction_gaussian_projected(2.0, 0.8, Ball(3.0), 0.4, 1.5) == \
        theta_gamma(2.0, 0.8 * 3.0 / (0.4 * 1.5))


def test_laplace_projected_values():
    assert contraction_laplace_projected(0.0, 1.0, 0.0, 1.0, 1.0, 1.0) == \
        pytest.approx(1 - math.exp(-0.5), abs=1e-15)
    assert contraction_laplace_projected(2.0, 1.0, 0.0, 1.0, 0.5, 1.0) == 0.0
    assert contraction_laplace_projected(0.3, 0.0, 0.0, 1.0, 0.5, 1.0) == 0.0


def test_laplace_projected_interval_order():
    with pytest.raises(DomainError):
        contraction_laplace_projected(0.0, 1.0, 1.0, 1.0, 1.0, 1.0)


def test_laplace_bracket_exact_zero_at_threshold():
    assert laplace_bracket(1.25, 1.25) == 0.0
    assert laplace_bracket(0.99 * 1.25, 1.25) > 0.0
