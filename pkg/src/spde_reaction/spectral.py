"""Eigenstructure of the advection-diffusion operator on the unit square.

The operator has Dirichlet eigenpairs

    lambda_{l1,l2} = pi^2 (l1^2 + l2^2) + (kappa^2 + eta^2) / 4,
    e_{l1,l2}(y, z) = 2 sin(pi l1 y) sin(pi l2 z) exp(-(kappa y + eta z) / 2),

orthonormal for the inner product weighted by exp(kappa y + eta z). Spectral
tables are indexed ``[l1 - 1, l2 - 1]`` (row-major, l1 outer).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Array shape does not match the grid it is paired with."""


@dataclass(frozen=True)
class ModelParams:
    """Constants of the SPDE.

    Attributes:
        theta0: Reaction rate.
        sigma: Noise amplitude, positive.
        nu: Diffusivity in (0, 1).
        kappa: y-advection to diffusivity ratio.
        eta: z-advection to diffusivity ratio.
        alpha: Damping exponent of the Q-Wiener process, positive.
    """

    theta0: float = 0.0
    sigma: float = 1.0
    nu: float = 0.1
    kappa: float = 1.0
    eta: float = 1.0
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.nu < 1.0:
            raise ValueError(f"nu must lie in (0, 1), got {self.nu}")
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("theta0", "sigma", "nu", "kappa", "eta", "alpha")}


@dataclass(frozen=True)
class ModeIndex:
    l1: int
    l2: int

    def __post_init__(self):
        if self.l1 < 1 or self.l2 < 1:
            raise ValueError(f"mode indices must be >= 1, got ({self.l1}, {self.l2})")


@dataclass(frozen=True)
class SpectralQuantities:
    lam: float
    mu: float
    lambda_theta: float


@dataclass(frozen=True)
class GridSpec:
    """Uniform observation grid y_j = j/M1, z_k = k/M2 on [0, 1]^2."""

    M1: int
    M2: int

    def __post_init__(self):
        if self.M1 < 1 or self.M2 < 1:
            raise ValueError(f"grid resolution must be >= 1, got ({self.M1}, {self.M2})")

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.M1 + 1) / self.M1

    @property
    def z(self) -> np.ndarray:
        return np.arange(self.M2 + 1) / self.M2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M1 + 1, self.M2 + 1)


def mu(l1, l2):
    """pi^2 (l1^2 + l2^2); broadcasts over arrays."""
    l1 = np.asarray(l1, dtype=np.float64)
    l2 = np.asarray(l2, dtype=np.float64)
    return math.pi ** 2 * (l1 * l1 + l2 * l2)


def eigenvalue(idx: ModeIndex, params: ModelParams) -> float:
    return float(mu(idx.l1, idx.l2)) + (params.kappa ** 2 + params.eta ** 2) / 4.0


def spectral_quantities(idx: ModeIndex, params: ModelParams) -> SpectralQuantities:
    lam = eigenvalue(idx, params)
    return SpectralQuantities(lam=lam, mu=float(mu(idx.l1, idx.l2)),
                              lambda_theta=params.nu * lam - params.theta0)


def mode_grid(L1: int, L2: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Broadcastable (l1, l2) index arrays for the square mode set."""
    L2 = L1 if L2 is None else L2
    l1 = np.arange(1, L1 + 1, dtype=np.float64)[:, None]
    l2 = np.arange(1, L2 + 1, dtype=np.float64)[None, :]
    return l1, l2


def mu_table(L1: int, L2: int | None = None) -> np.ndarray:
    l1, l2 = mode_grid(L1, L2)
    return mu(l1, l2)


def eigenvalue_table(L1: int, L2: int | None, params: ModelParams) -> np.ndarray:
    return mu_table(L1, L2) + (params.kappa ** 2 + params.eta ** 2) / 4.0


def eigenfunction_eval(idx: ModeIndex, params: ModelParams, y, z):
    """e_{l1,l2}(y, z); broadcasts over ``y`` and ``z``."""
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    val = (2.0 * np.sin(math.pi * idx.l1 * y) * np.sin(math.pi * idx.l2 * z)
           * np.exp(-(params.kappa * y + params.eta * z) / 2.0))
    return val if val.ndim else float(val)


def h_antiderivative(l, x, a):
    """Antiderivative of sqrt(2) sin(pi l x) exp(a x / 2) in x."""
    x = np.asarray(x, dtype=np.float64)
    pl = math.pi * np.asarray(l, dtype=np.float64)
    half_a = 0.5 * a
    val = (math.sqrt(2.0) * np.exp(half_a * x) / (half_a ** 2 + pl ** 2)
           * (half_a * np.sin(pl * x) - pl * np.cos(pl * x)))
    return val if val.ndim else float(val)


def cell_increments(grid: GridSpec, L: int, a: float, axis: str) -> np.ndarray:
    """(M, L) table of h_l(node_j : a) - h_l(node_{j-1} : a).

    Entry ``[j-1, l-1]`` is the integral of sqrt(2) sin(pi l s) exp(a s / 2)
    over the j-th cell of the chosen axis.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if axis == "y":
        nodes = grid.y
    elif axis == "z":
        nodes = grid.z
    else:
        raise ValueError(f"axis must be 'y' or 'z', got {axis!r}")
    ls = np.arange(1, L + 1)[None, :]
    h = h_antiderivative(ls, nodes[:, None], a)
    return np.diff(h, axis=0)


class GridProjector:
    """Discrete Fourier projection [X]_{M,l1,l2} of grid fields.

    Cell increments for kappa (y-axis) and eta (z-axis) are computed once at
    construction and reused for every field. The projection equals the exact
    weighted inner product of the piecewise-constant (lower-left corner)
    extension of the field with each eigenfunction.
    """

    def __init__(self, grid: GridSpec, L: int, params: ModelParams):
        self.grid = grid
        self.L = L
        self.params = params
        self.hy = cell_increments(grid, L, params.kappa, "y")
        self.hy.setflags(write=False)
        self.hz = cell_increments(grid, L, params.eta, "z")
        self.hz.setflags(write=False)

    def _check(self, field: np.ndarray, ndim: int):
        if field.ndim != ndim or field.shape[-2:] != self.grid.shape:
            raise DimensionError(
                f"field shape {field.shape} incompatible with grid nodes {self.grid.shape}")

    def project(self, field) -> np.ndarray:
        """(L, L) table of projections for one time slice."""
        field = np.asarray(field, dtype=np.float64)
        self._check(field, 2)
        return self.hy.T @ field[:-1, :-1] @ self.hz

    def project_series(self, fields) -> np.ndarray:
        """(T, L, L) projections for a stack of time slices."""
        fields = np.asarray(fields, dtype=np.float64)
        self._check(fields, 3)
        tmp = np.matmul(self.hy.T[None, :, :], fields[:, :-1, :-1])
        return np.matmul(tmp, self.hz[None, :, :])

    def coefficient(self, field, idx: ModeIndex) -> float:
        return fourier_coeff_grid(field, self.grid, idx, self.params, self)


def fourier_coeff_grid(field, grid: GridSpec, idx: ModeIndex, params: ModelParams,
                       increments: GridProjector | None = None) -> float:
    """[X]_{M,l1,l2} for a single mode."""
    field = np.asarray(field, dtype=np.float64)
    if field.shape != grid.shape:
        raise DimensionError(f"field shape {field.shape} != grid nodes {grid.shape}")
    if increments is None or increments.L < max(idx.l1, idx.l2):
        increments = GridProjector(grid, max(idx.l1, idx.l2), params)
    hy = increments.hy[:, idx.l1 - 1]
    hz = increments.hz[:, idx.l2 - 1]
    return float(hy @ field[:-1, :-1] @ hz)


def weighted_norm_sq_beta(coeffs, beta: float, alpha: float) -> float:
    """sum mu_{l1,l2}^{-alpha beta} u_{l1,l2}^2 over the given coefficient table."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 2:
        raise DimensionError("coefficient table must be 2-D (l1, l2)")
    w = mu_table(*coeffs.shape) ** (-alpha * beta)
    return math.fsum((w * coeffs * coeffs).ravel())
