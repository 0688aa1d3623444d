"""Weighted minimum-contrast estimator of the reaction parameter theta0.

For projections p_i(l1, l2) of the observed field at t_i onto the first L x L
eigenfunctions, the estimate is

    sum_i sum_l mu^{-alpha beta} p_{i-1} (p_i - exp(-nu lambda / N) p_{i-1})
    -----------------------------------------------------------------------
           (1/N) sum_i sum_l mu^{-alpha beta} p_{i-1}^2

The grid path uses the discrete projections of the observed fields; the
coefficient path plugs in the exact Fourier coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .simulate import CoefficientPaths, FieldDataset
from .spectral import GridProjector, ModelParams, eigenvalue_table, mu_table


class DegenerateDataError(ValueError):
    """The data carry no information (zero denominator)."""


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ThetaEstimatorConfig:
    beta: float
    L: int
    params: ModelParams

    def __post_init__(self):
        if not self.beta > -1.0:
            raise ConfigurationError(f"beta must exceed -1, got {self.beta}")
        if self.L < 1:
            raise ConfigurationError("L must be >= 1")


@dataclass
class ThetaEstimate:
    value: float
    numerator: float
    denominator: float
    per_mode_contributions: np.ndarray | None = None


def _mode_constants(cfg: ThetaEstimatorConfig, N: int):
    p = cfg.params
    weights = mu_table(cfg.L) ** (-p.alpha * cfg.beta)
    decay = np.exp(-p.nu * eigenvalue_table(cfg.L, cfg.L, p) / N)
    return weights, decay


def estimate_from_projections(proj, cfg: ThetaEstimatorConfig,
                              keep_modes: bool = False) -> ThetaEstimate:
    """Estimator from an (N+1, L, L) array of per-slice mode projections."""
    proj = np.asarray(proj, dtype=np.float64)
    if proj.ndim != 3 or proj.shape[1:] != (cfg.L, cfg.L):
        raise ConfigurationError(f"projection array shape {proj.shape} does not match L={cfg.L}")
    N = proj.shape[0] - 1
    if N < 1:
        raise ConfigurationError("need at least two time slices")
    weights, decay = _mode_constants(cfg, N)
    num_modes, den_modes = kernels.compensated_time_sums(proj, decay)
    num_modes = weights * num_modes
    den_modes = weights * den_modes
    numerator = math.fsum(num_modes.ravel())
    denominator = math.fsum(den_modes.ravel()) / N
    if not denominator > 0.0:
        raise DegenerateDataError("all projected observations vanish; no estimate")
    return ThetaEstimate(value=numerator / denominator, numerator=numerator,
                         denominator=denominator,
                         per_mode_contributions=num_modes if keep_modes else None)


def estimate_theta_grid(data: FieldDataset, cfg: ThetaEstimatorConfig,
                        projector: GridProjector | None = None,
                        keep_modes: bool = False) -> ThetaEstimate:
    if data.N < 1:
        raise ConfigurationError("need N >= 1")
    if projector is None:
        projector = GridProjector(data.grid, cfg.L, cfg.params)
    elif projector.L != cfg.L or projector.grid != data.grid:
        raise ConfigurationError("projector does not match the dataset grid or L")
    proj = projector.project_series(data.observations)
    return estimate_from_projections(proj, cfg, keep_modes=keep_modes)


def estimate_theta_coeff(coeffs: CoefficientPaths, cfg: ThetaEstimatorConfig,
                         keep_modes: bool = False) -> ThetaEstimate:
    values = coeffs.values
    if values.shape[1] < cfg.L or values.shape[2] < cfg.L:
        raise ConfigurationError(
            f"L={cfg.L} exceeds the simulated truncation {values.shape[1:]}")
    return estimate_from_projections(values[:, :cfg.L, :cfg.L], cfg, keep_modes=keep_modes)
