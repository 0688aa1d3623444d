"""Convergence-rate machinery for the weighted reaction estimator.

Covers the explicit mode series for the rate functional R_{beta,nu}, its
asymptotic regimes as nu -> 0, the condition exponents that govern the
discretisation requirements, and the resulting lower bounds on beta for a
power-law sampling design N = nu^-n, (M1 ^ M2)^2 = nu^-m, L = nu^-ell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import ModelParams, eigenvalue_table, mu_table

BOUNDARY_TOL = 1e-12
# below this |x| the closed forms lose digits to cancellation; the series
# truncation error there is under 1e-20
_TAYLOR_WINDOW = 0.05
_TAYLOR_TERMS = 12


class DomainError(ValueError):
    pass


def _exp_series(x, shift):
    # sum_k (-x)^k / (k + shift)!, Horner form
    acc = np.zeros_like(x)
    for k in range(_TAYLOR_TERMS, -1, -1):
        acc = 1.0 / math.factorial(k + shift) - x * acc
    return acc


def f1(x):
    """(1 - e^{-x}) / x, equal to 1 at x = 0."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < _TAYLOR_WINDOW
    safe = np.where(small, 1.0, x)
    direct = -np.expm1(-safe) / safe
    series = _exp_series(x, 1)
    val = np.where(small, series, direct)
    return val if val.ndim else float(val)


def f2(x):
    """(x - 1 + e^{-x}) / x^2, equal to 1/2 at x = 0."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < _TAYLOR_WINDOW
    safe = np.where(small, 1.0, x)
    direct = (safe + np.expm1(-safe)) / (safe * safe)
    series = _exp_series(x, 2)
    val = np.where(small, series, direct)
    return val if val.ndim else float(val)


@dataclass(frozen=True)
class RateSeriesConfig:
    truncation: int
    params: ModelParams
    initial_second_moments: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.truncation < 1:
            raise ValueError("truncation must be >= 1")
        if self.initial_second_moments is not None:
            m = np.asarray(self.initial_second_moments, dtype=np.float64)
            if m.shape != (self.truncation, self.truncation):
                raise ValueError("initial_second_moments must be truncation x truncation")
            if (m < 0).any():
                raise ValueError("second moments must be nonnegative")
            object.__setattr__(self, "initial_second_moments", m)


def _mode_weights(cfg: RateSeriesConfig):
    p = cfg.params
    T = cfg.truncation
    mus = mu_table(T)
    x = 2.0 * (p.nu * eigenvalue_table(T, T, p) - p.theta0)
    f = p.sigma ** 2 * f2(x)
    if cfg.initial_second_moments is not None:
        f = f + mus ** p.alpha * cfg.initial_second_moments * f1(x)
    return mus, f


def rate_R(beta: float, cfg: RateSeriesConfig) -> float:
    """Truncated mode series for R_{beta,nu} over the square 1..T x 1..T."""
    if not beta > -1.0:
        raise DomainError(f"beta must exceed -1, got {beta}")
    mus, f = _mode_weights(cfg)
    s = cfg.params.alpha * (beta + 1.0)
    num = math.fsum((f * mus ** (-s)).ravel())
    den = math.fsum((f * mus ** (-2.0 * s)).ravel())
    return num / math.sqrt(den)


def rate_R_tail_bound(beta: float, cfg: RateSeriesConfig) -> float:
    """Relative size of the modes dropped by the truncation.

    Compares sum over max(l1, l2) > T of (l1^2 + l2^2)^{-1-alpha(beta+1)},
    bounded by an integral over the region outside the quarter disc of
    radius T, with the same sum over the kept square.
    """
    s = 1.0 + cfg.params.alpha * (beta + 1.0)
    T = cfg.truncation
    tail = (math.pi / 2.0) * T ** (2.0 - 2.0 * s) / (2.0 * s - 2.0)
    l1 = np.arange(1, T + 1, dtype=np.float64)
    kept = math.fsum(((l1[:, None] ** 2 + l1[None, :] ** 2) ** (-s)).ravel())
    return tail / kept


@dataclass(frozen=True)
class Regime:
    tag: str
    expression: str
    value: float


def _compare(a: float, b: float) -> int:
    if abs(a - b) <= BOUNDARY_TOL:
        return 0
    return -1 if a < b else 1


def phi_regime(alpha: float, beta: float, nu: float) -> Regime:
    """Growth of int_0^1 E||X_t||^2_beta dt as nu -> 0."""
    if not beta > -1.0:
        raise DomainError("beta must exceed -1")
    if not 0.0 < nu < 1.0:
        raise DomainError("nu must lie in (0, 1)")
    s = alpha * (beta + 1.0)
    c = _compare(s, 1.0)
    if c < 0:
        return Regime("subcritical", "nu^{alpha(beta+1)-1}", nu ** (s - 1.0))
    if c == 0:
        return Regime("critical", "-log nu", -math.log(nu))
    return Regime("supercritical", "1", 1.0)


def rate_regime_theorem1(alpha: float, beta: float, nu: float) -> Regime:
    """Asymptotic order of R_{beta,nu} as nu -> 0 (five cases)."""
    if not beta > -1.0:
        raise DomainError("beta must exceed -1")
    if not 0.0 < nu < 1.0:
        raise DomainError("nu must lie in (0, 1)")
    lower = 1.0 / (2.0 * alpha) - 1.0
    upper = 1.0 / alpha - 1.0
    c_low = _compare(beta, lower)
    if c_low < 0:
        return Regime("sqrt", "nu^{-1/2}", nu ** -0.5)
    if c_low == 0:
        return Regime("boundary-sqrt-log", "(-nu log nu)^{-1/2}", (-nu * math.log(nu)) ** -0.5)
    c_up = _compare(beta, upper)
    if c_up < 0:
        return Regime("power", "nu^{alpha(beta+1)-1}", nu ** (alpha * (beta + 1.0) - 1.0))
    if c_up == 0:
        return Regime("boundary-log", "-log nu", -math.log(nu))
    return Regime("bounded", "1", 1.0)


@dataclass(frozen=True)
class ExponentTable:
    """Condition exponents at x = alpha(beta+1) for moment order p.

    ``space_b``/``space_c`` hold (threshold, exponent) pairs: the space
    conditions ask for nu (M1 ^ M2)^{2r} N^{-exponent} -> infinity with some
    r below the threshold. ``trunc_b``/``trunc_c`` are the analogous pairs
    for L. ``values`` keeps every named exponent for display.
    """

    x: float
    p: float
    alpha: float
    rho_time: float
    space_b: tuple[tuple[float, float], ...]
    trunc_b: tuple[float, float]
    space_c: tuple[tuple[float, float], ...]
    trunc_c: tuple[float, float]
    values: dict = field(compare=False)


def _rho_time(x: float) -> float:
    if x <= 0.5:
        return 2.0 * x
    if x < 1.0:
        return 1.0 / (2.0 * (1.0 - x))
    return math.inf


def exponent_tables(x: float, p: float, alpha: float) -> ExponentTable:
    """Every condition exponent for x in (0, 1] and finite p > 4/x or p = inf."""
    if not 0.0 < x <= 1.0:
        raise DomainError(f"x must lie in (0, 1], got {x}")
    if not alpha > 0.0:
        raise DomainError("alpha must be positive")
    rho_time = _rho_time(x)
    if math.isinf(p):
        v = {
            "rho_time": rho_time,
            "rho_space": 1.0 - 1.0 / (2.0 * x + 1.0),
            "rho_trunc": 2.0 * (1.0 - 1.0 / (2.0 * x + 1.0)),
            "phi_space": max(1.0 / x, 3.0 - 2.0 * x),
            "psi1_space": 2.0 / (2.0 * x + 1.0),
            "psi2_space": 1.5 - x,
            "phi_trunc": ((alpha - 1.0) * x + 2.0) / (2.0 * x),
            "psi_trunc": ((alpha - 1.0) * x + 2.0) / (2.0 * x + 1.0),
        }
        return ExponentTable(
            x=x, p=p, alpha=alpha, rho_time=rho_time,
            space_b=((1.0, v["phi_space"]),),
            trunc_b=(2.0, v["phi_trunc"]),
            space_c=((v["rho_space"], v["psi1_space"]), (0.5, v["psi2_space"])),
            trunc_c=(v["rho_trunc"], v["psi_trunc"]),
            values=v)
    if not p > 4.0 / x:
        raise DomainError(f"p must exceed 4/x = {4.0 / x}, got {p}")
    low = x <= 0.5
    num_trunc = (alpha - 1.0) * p * x + 2.0 * (1.0 - 2.0 * alpha + p)
    v = {
        "rho_time": rho_time,
        "tau1_space": 1.0 - 2.0 / (p * x - 2.0),
        "tau2_space": 1.0 - 1.0 / (p * x - 1.0) if low else 1.0 - 2.0 / p,
        "rho1_space": 1.0 - (p + 4.0) / (2.0 * p * x + p - 4.0),
        "rho2_space": (1.0 - (p + 2.0) / (2.0 * p * x + p - 2.0)) if low else 0.5 - 1.0 / p,
        "tau_trunc": 2.0 * (1.0 - 2.0 / (p * x - 2.0)),
        "rho_trunc": 2.0 * (1.0 - (p + 2.0) / (2.0 * p * x + p - 4.0)),
        "phi1_space": (p - 1.0) / (p * x - 2.0),
        "phi2_space": p / (p * x - 1.0) if low else 3.0 - 2.0 * x + 2.0 / p,
        "psi1_space": 2.0 * (p - 1.0) / (2.0 * p * x + p - 4.0),
        "psi2_space": 2.0 * p / (2.0 * p * x + p - 2.0) if low else 1.5 - x + 1.0 / p,
        "phi_trunc": num_trunc / (2.0 * (p * x - 2.0)),
        "psi_trunc": num_trunc / (2.0 * p * x + p - 4.0),
    }
    return ExponentTable(
        x=x, p=p, alpha=alpha, rho_time=rho_time,
        space_b=((v["tau1_space"], v["phi1_space"]), (v["tau2_space"], v["phi2_space"])),
        trunc_b=(v["tau_trunc"], v["phi_trunc"]),
        space_c=((v["rho1_space"], v["psi1_space"]), (v["rho2_space"], v["psi2_space"])),
        trunc_c=(v["rho_trunc"], v["psi_trunc"]),
        values=v)


@dataclass(frozen=True)
class DesignExponents:
    """Power-law design N = nu^-n, (M1 ^ M2)^2 = nu^-m, L = nu^-ell."""

    n: float
    m: float
    ell: float
    p: float = math.inf

    def __post_init__(self):
        if not self.n > 0:
            raise DomainError("design requires n > 0")
        if not self.m > self.n:
            raise DomainError(f"design requires m > n (m={self.m}, n={self.n})")
        if not (math.isinf(self.p) or self.p > 2):
            raise DomainError("moment order p must exceed 2")

    @classmethod
    def from_design(cls, nu: float, N: int, M: int, L: int, p: float = math.inf):
        """Exponents realised by concrete (nu, N, M1 ^ M2, L)."""
        lg = -math.log(nu)
        return cls(n=math.log(N) / lg, m=2.0 * math.log(M) / lg, ell=math.log(L) / lg, p=p)


@dataclass(frozen=True)
class BetaBounds:
    beta_cons: float
    beta_as_t: float
    beta_as_sp: float
    beta_asym: float
    ell_cons_at_cons: float
    ell_asym_at_asym: float | None
    ell_cons_at_beta: float | None = None
    ell_asym_at_beta: float | None = None


def _beta_cons(alpha: float, n: float, m: float) -> float:
    if m >= 2.0 * n + 1.0:
        return n / (alpha * (m - 1.0)) - 1.0
    return (3.0 - (m - 1.0) / n) / (2.0 * alpha) - 1.0


def _beta_as_t(alpha: float, n: float) -> float:
    if n >= 1.0:
        return 1.0 / (2.0 * alpha * n) - 1.0
    return (1.0 - n / 2.0) / alpha - 1.0


def _beta_as_sp(alpha: float, n: float, m: float) -> float:
    if not m > 1.0:
        raise DomainError(f"beta^(as-sp) requires m > 1 (m={m})")
    return max((1.0 + 2.0 * n) / (m - 1.0), (3.0 * n - m + 2.0) / n) / (2.0 * alpha) - 1.0


def _x_of(alpha: float, beta: float) -> float:
    return min(alpha * (beta + 1.0), 1.0)


def ell_threshold_consistency(alpha: float, beta: float, n: float) -> float:
    """(1 + n phi^(trunc)) / 2 at x = alpha(beta+1), p = inf."""
    t = exponent_tables(_x_of(alpha, beta), math.inf, alpha)
    return (1.0 + n * t.values["phi_trunc"]) / 2.0


def ell_threshold_asymptotic(alpha: float, beta: float, n: float) -> float:
    """(1 + n psi^(trunc)) / rho^(trunc) at x = alpha(beta+1), p = inf."""
    t = exponent_tables(_x_of(alpha, beta), math.inf, alpha)
    return (1.0 + n * t.values["psi_trunc"]) / t.values["rho_trunc"]


def beta_bounds(alpha: float, design: DesignExponents, beta: float | None = None) -> BetaBounds:
    """Lower bounds on beta for consistency and for the limit theorems.

    The ell thresholds are evaluated at the returned bounds and, when given,
    at the caller's ``beta``.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    n, m = design.n, design.m
    b_cons = _beta_cons(alpha, n, m)
    b_t = _beta_as_t(alpha, n)
    b_sp = _beta_as_sp(alpha, n, m)
    b_asym = max(b_t, b_sp)

    def _safe(fn, b):
        if not b > -1.0 or alpha * (b + 1.0) <= 0:
            return None
        return fn(alpha, b, n)

    return BetaBounds(
        beta_cons=b_cons, beta_as_t=b_t, beta_as_sp=b_sp, beta_asym=b_asym,
        ell_cons_at_cons=_safe(ell_threshold_consistency, b_cons),
        ell_asym_at_asym=_safe(ell_threshold_asymptotic, b_asym),
        ell_cons_at_beta=None if beta is None else _safe(ell_threshold_consistency, beta),
        ell_asym_at_beta=None if beta is None else _safe(ell_threshold_asymptotic, beta),
    )


@dataclass(frozen=True)
class Condition:
    name: str
    holds: bool
    inequality: str
    lhs: float
    rhs: float


@dataclass(frozen=True)
class DesignReport:
    alpha: float
    beta: float
    design: DesignExponents
    conditions: tuple[Condition, ...]
    consistency: bool
    asymptotic: bool
    notes: tuple[str, ...] = ()

    def by_name(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


def _strict(lhs: float, rhs: float) -> bool:
    return lhs > rhs + BOUNDARY_TOL


def check_design(alpha: float, beta: float, design: DesignExponents) -> DesignReport:
    """Evaluate the consistency and limit-theorem conditions for a design.

    Under N = nu^-n, (M1 ^ M2)^2 = nu^-m, L = nu^-ell each condition becomes
    a strict inequality in (n, m, ell): a space condition with threshold tau
    and exponent phi holds iff m tau > 1 + n phi, a truncation condition iff
    ell tau > 1 + n phi, and the time condition iff n rho^(time) > 1.
    """
    if not -1.0 < beta:
        raise DomainError("beta must exceed -1")
    n, m, ell = design.n, design.m, design.ell
    notes = []
    if beta > 1.0 / alpha - 1.0 + BOUNDARY_TOL:
        notes.append("beta exceeds 1/alpha - 1, outside the range covered by the limit theorems")
    x = _x_of(alpha, beta)
    p = design.p
    if not math.isinf(p) and not p > 4.0 / x:
        raise DomainError(f"p must exceed 4/(alpha(beta+1)) = {4.0 / x}")
    t = exponent_tables(x, p, alpha)
    conds = []
    for j, (tau, phi) in enumerate(t.space_b, start=1):
        conds.append(Condition(f"B1.{j}", _strict(m * tau, 1.0 + n * phi),
                               f"m*{tau:.6g} > 1 + n*{phi:.6g}", m * tau, 1.0 + n * phi))
    tau, phi = t.trunc_b
    conds.append(Condition("B2", _strict(ell * tau, 1.0 + n * phi),
                           f"ell*{tau:.6g} > 1 + n*{phi:.6g}", ell * tau, 1.0 + n * phi))
    rt = t.rho_time
    conds.append(Condition("C1", math.isinf(rt) or _strict(n * rt, 1.0),
                           f"n*{rt:.6g} > 1", n * rt, 1.0))
    for j, (rho, psi) in enumerate(t.space_c, start=1):
        conds.append(Condition(f"C2.{j}", _strict(m * rho, 1.0 + n * psi),
                               f"m*{rho:.6g} > 1 + n*{psi:.6g}", m * rho, 1.0 + n * psi))
    rho, psi = t.trunc_c
    conds.append(Condition("C3", _strict(ell * rho, 1.0 + n * psi),
                           f"ell*{rho:.6g} > 1 + n*{psi:.6g}", ell * rho, 1.0 + n * psi))
    conds.append(Condition("m>n+1", _strict(m, n + 1.0), "m > n + 1", m, n + 1.0))
    conds.append(Condition("m>n+2", _strict(m, n + 2.0), "m > n + 2", m, n + 2.0))
    if not m > n + 2.0:
        notes.append("m <= n + 2: the limit-theorem conditions are unreachable for this design")
    ok = {c.name: c.holds for c in conds}
    consistency = all(v for k, v in ok.items() if k.startswith("B")) and ok["m>n+1"]
    asymptotic = all(v for k, v in ok.items() if k.startswith("C")) and ok["m>n+2"]
    return DesignReport(alpha=alpha, beta=beta, design=design, conditions=tuple(conds),
                        consistency=consistency, asymptotic=asymptotic, notes=tuple(notes))
