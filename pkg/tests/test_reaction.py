import math

import numpy as np
import pytest

from spde_reaction.rates import beta_bounds, DesignExponents
from spde_reaction.reaction import (ConfigurationError, DegenerateDataError, ThetaEstimatorConfig,
                                    estimate_from_projections, estimate_theta_coeff,
                                    estimate_theta_grid)
from spde_reaction.simulate import (CoefficientPaths, FieldDataset, SimConfig, replicate_seed,
                                    simulate_coefficients, simulate_dataset, synthesize_field)
from spde_reaction.spectral import GridProjector, GridSpec, ModeIndex, ModelParams, eigenvalue


def _single_mode(theta0, N=100, K=3, M=8):
    p = ModelParams(theta0=theta0, sigma=0.0, nu=0.1, kappa=1.0, eta=1.0)
    init = np.zeros((K, K))
    init[0, 0] = 1.0
    data = simulate_dataset(SimConfig(p, N, GridSpec(M, M), K, K, initial_coeffs=init))
    return p, data


def test_coefficient_path_exactly_zero_without_noise():
    p, data = _single_mode(0.0)
    for L in (1, 3):
        assert estimate_theta_coeff(data.coeffs, ThetaEstimatorConfig(0.6, L, p)).value == 0.0


def test_grid_path_small_without_noise():
    p, data = _single_mode(0.0, M=256)
    est = estimate_theta_grid(data, ThetaEstimatorConfig(0.6, 3, p))
    assert abs(est.value) <= 2e-2


def test_single_mode_closed_form():
    theta0, N = -0.5, 100
    p, data = _single_mode(theta0, N=N, K=1, M=2)
    lam = eigenvalue(ModeIndex(1, 1), p)
    expected = N * math.exp(-p.nu * lam / N) * math.expm1(theta0 / N)
    got = estimate_theta_coeff(data.coeffs, ThetaEstimatorConfig(0.3, 1, p)).value
    assert got == pytest.approx(expected, abs=1e-12)


@pytest.fixture(scope="module")
def noisy():
    p = ModelParams(theta0=-0.3, sigma=1.0, nu=0.1)
    cfg = SimConfig(p, 100, GridSpec(256, 256), 64, 64, seed=replicate_seed(3, 0))
    return p, simulate_dataset(cfg)


def test_scale_invariance(noisy):
    p, data = noisy
    cfg = ThetaEstimatorConfig(0.6, 16, p)
    base_g = estimate_theta_grid(data, cfg).value
    base_c = estimate_theta_coeff(data.coeffs, cfg).value
    scaled = FieldDataset(data.observations * 7.0, data.design)
    assert estimate_theta_grid(scaled, cfg).value == pytest.approx(base_g, rel=1e-13)
    coeffs7 = CoefficientPaths(data.coeffs.values * 7.0)
    assert estimate_theta_coeff(coeffs7, cfg).value == pytest.approx(base_c, rel=1e-13)
    # a power of two scales both sums exactly
    coeffs2 = CoefficientPaths(data.coeffs.values * 2.0)
    assert estimate_theta_coeff(coeffs2, cfg).value == base_c


def test_grid_and_coefficient_paths_agree(noisy):
    p, data = noisy
    cfg = ThetaEstimatorConfig(0.6, 16, p)
    diff = estimate_theta_grid(data, cfg).value - estimate_theta_coeff(data.coeffs, cfg).value
    assert abs(diff) <= 0.05


def test_refinement_shrinks_gap():
    p = ModelParams(sigma=1.0, nu=0.1)
    cfg = ThetaEstimatorConfig(0.6, 16, p)
    coeffs = simulate_coefficients(SimConfig(p, 100, GridSpec(4, 4), 64, 64, seed=11))
    ref = estimate_theta_coeff(coeffs, cfg).value
    gaps = [abs(estimate_theta_grid(synthesize_field(coeffs, GridSpec(M, M), p), cfg).value - ref)
            for M in (32, 128)]
    assert gaps[1] < gaps[0]


def test_value_is_ratio_and_modes_sum(noisy):
    p, data = noisy
    est = estimate_theta_coeff(data.coeffs, ThetaEstimatorConfig(0.0, 4, p), keep_modes=True)
    assert est.value == est.numerator / est.denominator
    assert est.denominator > 0
    assert math.fsum(est.per_mode_contributions.ravel()) == pytest.approx(est.numerator, rel=1e-12)


def test_projector_reuse_matches(noisy):
    p, data = noisy
    cfg = ThetaEstimatorConfig(0.6, 8, p)
    proj = GridProjector(data.grid, 8, p)
    assert estimate_theta_grid(data, cfg, projector=proj).value == estimate_theta_grid(data, cfg).value
    with pytest.raises(ConfigurationError):
        estimate_theta_grid(data, cfg, projector=GridProjector(data.grid, 4, p))


def test_errors():
    p = ModelParams(sigma=0.0)
    data = simulate_dataset(SimConfig(p, 5, GridSpec(4, 4), 2, 2))
    with pytest.raises(DegenerateDataError):
        estimate_theta_grid(data, ThetaEstimatorConfig(0.6, 2, p))
    with pytest.raises(ConfigurationError):
        estimate_theta_coeff(data.coeffs, ThetaEstimatorConfig(0.6, 3, p))
    with pytest.raises(ConfigurationError):
        ThetaEstimatorConfig(-1.0, 2, p)
    with pytest.raises(ConfigurationError):
        ThetaEstimatorConfig(0.5, 0, p)
    with pytest.raises(ConfigurationError):
        estimate_from_projections(np.ones((1, 2, 2)), ThetaEstimatorConfig(0.5, 2, p))


@pytest.mark.slow
def test_consistency_trend():
    # N = nu^-2, M^2 = nu^-m with m = 3.4 > n + 1 (beta_cons = 0.8), beta = 0.9,
    # L = nu^-1.4 above the truncation threshold 1.30 at this beta.
    beta, reps = 0.9, 50
    rmse, se = [], []
    for nu in (0.2, 0.1, 0.05):
        N = round(nu ** -2)
        M = math.ceil(nu ** -1.7)
        L = math.ceil(nu ** -1.4)
        d = DesignExponents.from_design(nu, N, M, L)
        bb = beta_bounds(0.5, d, beta)
        assert beta > bb.beta_cons and d.ell > bb.ell_cons_at_beta
        p = ModelParams(theta0=0.0, sigma=1.0, nu=nu)
        cfg = ThetaEstimatorConfig(beta, L, p)
        proj = GridProjector(GridSpec(M, M), L, p)
        errs = []
        for r in range(reps):
            sim = SimConfig(p, N, GridSpec(M, M), L, L, seed=replicate_seed(2024, r))
            data = simulate_dataset(sim, retain_coeffs=False)
            errs.append(estimate_theta_grid(data, cfg, projector=proj).value ** 2)
        errs = np.array(errs)
        rmse.append(math.sqrt(errs.mean()))
        se.append(errs.std(ddof=1) / math.sqrt(reps) / (2 * rmse[-1]))
    inversions = [i for i in range(2) if rmse[i + 1] > rmse[i]]
    assert len(inversions) <= 1, rmse
    for i in inversions:
        assert rmse[i + 1] - rmse[i] <= math.hypot(se[i], se[i + 1]), (rmse, se)
