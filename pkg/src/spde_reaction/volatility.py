"""Volatility estimation from squared space-time triple increments.

The normalising constant is

    psi(r, alpha) = (2/pi) int_0^inf (1 - exp(-x^2)) x^{-1-2 alpha}
                    (J0(sqrt(2) r x) - 2 J0(r x) + 1) dx,

with r = delta / sqrt(nu Delta) the aspect ratio of the thinned grid.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .reaction import DegenerateDataError
from .simulate import FieldDataset
from .spectral import GridSpec, ModelParams

log = logging.getLogger(__name__)

# sup_u sqrt(u) |J1(u)| is about 0.80; padded.
_J1_ENVELOPE = 0.9


class SelectionError(ValueError):
    """No thinned grid with the requested margin fits the observation grid."""


class SamplingWarning(UserWarning):
    pass


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class ThinnedGrid:
    """Equally spaced interior sub-grid whose nodes are observation nodes.

    ``j_index``/``k_index`` give the positions of the thinned nodes on the full
    grid, so y_tilde_j = j_index[j] / M1.
    """

    b: float
    m1: int
    m2: int
    y0_tilde: float
    z0_tilde: float
    delta: float
    j_index: np.ndarray = field(repr=False, compare=False)
    k_index: np.ndarray = field(repr=False, compare=False)
    r: float | None = None
    notes: tuple[str, ...] = ()

    @property
    def y_nodes(self) -> np.ndarray:
        return self.y0_tilde + self.delta * np.arange(self.m1 + 1)

    @property
    def z_nodes(self) -> np.ndarray:
        return self.z0_tilde + self.delta * np.arange(self.m2 + 1)

    @classmethod
    def from_indices(cls, grid: GridSpec, b: float, j_start: int, k_start: int,
                     step1: int, step2: int, m1: int, m2: int, nu: float | None = None,
                     N: int | None = None) -> "ThinnedGrid":
        delta = step1 / grid.M1
        if not math.isclose(delta, step2 / grid.M2, rel_tol=0, abs_tol=1e-15):
            raise SelectionError("spacing differs between the two axes")
        jj = j_start + step1 * np.arange(m1 + 1)
        kk = k_start + step2 * np.arange(m2 + 1)
        if jj[0] < b * grid.M1 - 1e-9 or jj[-1] > (1 - b) * grid.M1 + 1e-9 \
                or kk[0] < b * grid.M2 - 1e-9 or kk[-1] > (1 - b) * grid.M2 + 1e-9:
            raise SelectionError("thinned nodes leave the interior band [b, 1-b]")
        r = None if nu is None or N is None else delta / math.sqrt(nu / N)
        return cls(b=b, m1=m1, m2=m2, y0_tilde=jj[0] / grid.M1, z0_tilde=kk[0] / grid.M2,
                   delta=delta, j_index=jj, k_index=kk, r=r)


def _common_steps(grid: GridSpec, target: float) -> tuple[int, int]:
    # delta = s1/M1 = s2/M2 must hold exactly
    g = math.gcd(grid.M1, grid.M2)
    unit1, unit2 = grid.M1 // g, grid.M2 // g
    n = max(1, round(target * g))
    return n * unit1, n * unit2


def select_thinned_grid(grid: GridSpec, b: float, target_m: tuple[int, int], nu: float,
                        N: int) -> ThinnedGrid:
    """Snap a requested m1 x m2 interior grid onto the observation grid.

    The nominal spacing (1 - 2b)/max(m1, m2) is rounded to the nearest spacing
    representable on both axes; the interval counts are then recomputed from
    the snapped spacing (capped by the interior band), and the achieved
    r = delta / sqrt(nu/N) is reported.
    """
    if not 0.0 < b < 0.5:
        raise SelectionError(f"margin b must lie in (0, 1/2), got {b}")
    t1, t2 = target_m
    if t1 < 1 or t2 < 1:
        raise SelectionError("target interval counts must be >= 1")
    span = 1.0 - 2.0 * b
    nominal = span / max(t1, t2)
    step1, step2 = _common_steps(grid, nominal)
    delta = step1 / grid.M1
    j_start = math.ceil(b * grid.M1 - 1e-9)
    k_start = math.ceil(b * grid.M2 - 1e-9)
    j_stop = math.floor((1 - b) * grid.M1 + 1e-9)
    k_stop = math.floor((1 - b) * grid.M2 + 1e-9)
    fit1 = (j_stop - j_start) // step1
    fit2 = (k_stop - k_start) // step2
    m1 = min(fit1, max(1, round(t1 * nominal / delta)))
    m2 = min(fit2, max(1, round(t2 * nominal / delta)))
    if m1 < 1 or m2 < 1:
        raise SelectionError(
            f"no interval of spacing {delta} fits in [{b}, {1 - b}] on this grid")
    thinned = ThinnedGrid.from_indices(grid, b, j_start, k_start, step1, step2, m1, m2,
                                       nu=nu, N=N)
    notes = []
    lo, hi = N / (10.0 * nu), 10.0 * N / nu
    if not lo <= m1 * m2 <= hi:
        msg = (f"m1*m2 = {m1 * m2} outside [{lo:g}, {hi:g}], "
               "the order-of-magnitude band around N/nu")
        notes.append(msg)
        warnings.warn(msg, SamplingWarning, stacklevel=2)
    return ThinnedGrid(**{**thinned.__dict__, "notes": tuple(notes)})


def triple_increment(data: FieldDataset, thinned: ThinnedGrid, i: int, j: int, k: int) -> float:
    """Alternating 8-corner space-time difference T_{i,j,k} X."""
    N = data.N
    if not (1 <= i <= N and 1 <= j <= thinned.m1 and 1 <= k <= thinned.m2):
        raise IndexError(f"(i, j, k) = ({i}, {j}, {k}) out of range")
    x = data.observations
    ja, jb = thinned.j_index[j - 1], thinned.j_index[j]
    ka, kb = thinned.k_index[k - 1], thinned.k_index[k]
    # time differences at the four corners first, so static fields give exact zeros
    d11 = x[i, jb, kb] - x[i - 1, jb, kb]
    d01 = x[i, ja, kb] - x[i - 1, ja, kb]
    d10 = x[i, jb, ka] - x[i - 1, jb, ka]
    d00 = x[i, ja, ka] - x[i - 1, ja, ka]
    return float((d11 - d01) - (d10 - d00))


def triple_increments(observations, thinned: ThinnedGrid) -> np.ndarray:
    """All T_{i,j,k} X as an (N, m1, m2) array."""
    sub = np.asarray(observations)[:, thinned.j_index][:, :, thinned.k_index]
    d = sub[1:] - sub[:-1]
    return (d[:, 1:, 1:] - d[:, :-1, 1:]) - (d[:, 1:, :-1] - d[:, :-1, :-1])


def bessel_j0(x: float) -> float:
    """J0 via the ascending series (x <= 12) or the Hankel expansion."""
    if x < 0:
        raise ValueError("bessel_j0 expects x >= 0")
    return kernels.bessel_j0(float(x))


@dataclass(frozen=True)
class PsiResult:
    value: float
    error_bound: float
    x_small: float
    x_max: float
    panels: int


def _oscillatory_tail_bound(r: float, alpha: float, x: float) -> float:
    # Integration by parts against d(x J1(cx))/dx = c x J0(cx) for each of
    # the two Bessel terms (frequencies sqrt(2) r and r, the second doubled).
    freq = (math.sqrt(2.0) * r) ** -1.5 + 2.0 * r ** -1.5
    shape = 1.0 + (2.0 + 2.0 * alpha) / (1.5 + 2.0 * alpha)
    return (2.0 / math.pi) * _J1_ENVELOPE * shape * freq * x ** (-1.5 - 2.0 * alpha)


def _small_x_series(r: float, alpha: float, x0: float) -> float:
    # (1 - e^{-x^2}) and the Bessel second difference are both entire; their
    # product series is integrated term by term on [0, x0].
    a_terms = []
    q = -0.25 * r * r
    term = 1.0
    k = 1
    while True:
        term *= q / (k * k)
        if k >= 2:
            a_terms.append((k, (2.0 ** k - 2.0) * term))
            if abs(a_terms[-1][1]) * x0 ** (2 * k) < 1e-22 and k > 4:
                break
        k += 1
    b_terms = []
    fact = 1.0
    m = 1
    while True:
        fact *= m
        coef = (-1.0) ** (m + 1) / fact
        b_terms.append((m, coef))
        if abs(coef) * x0 ** (2 * m) < 1e-22 and m > 4:
            break
        m += 1
    parts = []
    for k, a in a_terms:
        for m, bcoef in b_terms:
            p = 2 * k + 2 * m - 2.0 * alpha
            parts.append(a * bcoef * x0 ** p / p)
    return (2.0 / math.pi) * math.fsum(parts)


def _panel_edges(start: float, stop: float, cap: float) -> np.ndarray:
    # Geometric growth from ``start`` until the oscillation cap, then uniform.
    edges = [start]
    e = start
    while e < cap and e < stop:
        e = min(2.0 * e, stop)
        edges.append(e)
    if e < stop:
        n = math.ceil((stop - e) / cap)
        edges.extend(np.linspace(e, stop, n + 1)[1:].tolist())
    return np.asarray(edges)


def psi_details(r: float, alpha: float, tol: float = 1e-10) -> PsiResult:
    """psi(r, alpha) with its error budget.

    Series on [0, x0], adaptive Gauss-Kronrod panels no wider than
    pi/(sqrt(2) r) on [x0, X], the non-oscillatory tail X^{-2 alpha}/(2 alpha)
    added in closed form, and X chosen so the remaining oscillatory tail
    bound is below ``tol``.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if not r > 0.0:
        raise ValueError(f"r must be positive, got {r}")
    x0 = min(1.0, 2.0 / r)
    c_bound = _oscillatory_tail_bound(r, alpha, 1.0)
    # half the budget for the truncated oscillatory tail, half for the panels
    x_max = max(8.0, 4.0 / r, (2.0 * c_bound / tol) ** (1.0 / (1.5 + 2.0 * alpha)))
    head = _small_x_series(r, alpha, x0)
    edges = _panel_edges(x0, x_max, math.pi / (math.sqrt(2.0) * r))
    body, body_err, n_panels = kernels.psi_panels(r, alpha, edges, 0.5 * tol)
    # exp(-x^2) is below 1e-27 beyond x = 8
    tail = (2.0 / math.pi) * x_max ** (-2.0 * alpha) / (2.0 * alpha)
    bound = _oscillatory_tail_bound(r, alpha, x_max) + body_err
    return PsiResult(value=head + body + tail, error_bound=bound, x_small=x0,
                     x_max=x_max, panels=n_panels)


@lru_cache(maxsize=4096)
def psi_r_alpha(r: float, alpha: float) -> float:
    """The Bessel-integral constant psi(r, alpha), cached per (r, alpha)."""
    return psi_details(float(r), float(alpha)).value


@dataclass
class SigmaEstimate:
    value: float
    psi: float
    r: float


def _cell_weights(thinned: ThinnedGrid, params: ModelParams) -> np.ndarray:
    y, z = thinned.y_nodes, thinned.z_nodes
    wy = -params.kappa * (y[:-1] + y[1:])
    wz = -params.eta * (z[:-1] + z[1:])
    return np.exp((wy[:, None] + wz[None, :]) / 2.0)


def _check_params(params: ModelParams):
    if params.theta0 > 0:
        raise PreconditionError("volatility estimation requires theta0 <= 0")
    if not 0.0 < params.alpha < 2.0:
        raise PreconditionError("volatility estimation requires alpha in (0, 2)")


def _normalised_sumsq(data: FieldDataset, thinned: ThinnedGrid, params: ModelParams):
    N = data.N
    dt = 1.0 / N
    sumsq = kernels.triple_increment_sumsq(data.observations, thinned.j_index, thinned.k_index)
    return sumsq / (N * params.nu ** (params.alpha - 1.0) * dt ** params.alpha)


def _achieved_r(data: FieldDataset, thinned: ThinnedGrid, params: ModelParams) -> float:
    return thinned.delta / math.sqrt(params.nu / data.N)


def sigma_contrast(sigma2: float, data: FieldDataset, thinned: ThinnedGrid,
                   params: ModelParams) -> float:
    """Least-squares contrast whose minimiser is the volatility estimate."""
    _check_params(params)
    a = _normalised_sumsq(data, thinned, params)
    psi = psi_r_alpha(_achieved_r(data, thinned, params), params.alpha)
    resid = a - sigma2 * psi * _cell_weights(thinned, params)
    return math.fsum((resid * resid).ravel())


def estimate_sigma2(data: FieldDataset, thinned: ThinnedGrid,
                    params: ModelParams) -> SigmaEstimate:
    _check_params(params)
    r = _achieved_r(data, thinned, params)
    psi = psi_r_alpha(r, params.alpha)
    w = _cell_weights(thinned, params)
    a = _normalised_sumsq(data, thinned, params)
    num = math.fsum((a * w).ravel())
    if not num > 0.0:
        raise DegenerateDataError("all triple increments vanish; no estimate")
    den = psi * math.fsum((w * w).ravel())
    return SigmaEstimate(value=num / den, psi=psi, r=r)
