"""Parameter estimation for a 2D linear parabolic SPDE with small diffusivity.

Submodules:
    spectral: eigenpairs, Fourier projections of grid data.
    simulate: spectral-Galerkin simulation and the spdefield-v1 dump format.
    reaction: the weighted reaction-parameter estimator.
    volatility: thinned grids, triple increments, psi and the sigma^2 estimator.
    rates: rate series, regime classification and design conditions.
    campaign: Monte Carlo campaigns with persisted records.
"""
from .kernels import BACKEND
from .spectral import GridProjector, GridSpec, ModeIndex, ModelParams
from .simulate import (CoefficientPaths, FieldDataset, SimConfig, load_dataset, save_dataset,
                       simulate_coefficients, simulate_dataset)
from .reaction import (ThetaEstimatorConfig, estimate_theta_coeff, estimate_theta_grid)
from .volatility import ThinnedGrid, estimate_sigma2, psi_details, psi_r_alpha, select_thinned_grid
from .rates import (DesignExponents, RateSeriesConfig, beta_bounds, check_design, rate_R,
                    rate_regime_theorem1)
from .campaign import CampaignConfig, load_config, run_campaign, run_replicate

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "GridProjector", "GridSpec", "ModeIndex", "ModelParams", "CoefficientPaths",
    "FieldDataset", "SimConfig", "load_dataset", "save_dataset", "simulate_coefficients",
    "simulate_dataset", "ThetaEstimatorConfig", "estimate_theta_coeff", "estimate_theta_grid",
    "ThinnedGrid", "estimate_sigma2", "psi_details", "psi_r_alpha", "select_thinned_grid",
    "DesignExponents", "RateSeriesConfig", "beta_bounds", "check_design", "rate_R",
    "rate_regime_theorem1", "CampaignConfig", "load_config", "run_campaign", "run_replicate",
]
