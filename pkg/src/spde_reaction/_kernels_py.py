"""Pure numpy implementations of the hot kernels.

Same call signatures as the compiled ``_kernels`` extension. Used when the
extension is not built, or when ``SPDE_REACTION_PURE=1`` is set.
"""
import math

import numpy as np

BACKEND = "python"

SERIES_MAX_ARG = 12.0
_SERIES_TOL = 1e-18
# absolute accuracy of the psi integrand per unit length, relative to its
# envelope (8/pi) x^{-1-2 alpha}; Bessel branch switches leave ~1e-12 jumps
_FLOOR = 1e-12 * 8.0 / math.pi

# Gauss-Kronrod 7/15 abscissae (positive half) and weights.
XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
# Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES15 = np.concatenate([-XGK[:-1], XGK[::-1]])
_WK15 = np.concatenate([WGK[:-1], WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = WG[:3]
_WG15[[13, 11, 9]] = WG[:3]
_WG15[7] = WG[3]


def _j0_series(x):
    q = -0.25 * x * x
    total = np.ones_like(x)
    term = np.ones_like(x)
    k = 1
    while True:
        term = term * q / (k * k)
        total = total + term
        if not np.any(np.abs(term) >= _SERIES_TOL):
            return total
        k += 1


def _j0_hankel(x):
    # P and Q summed up to the smallest term (optimal truncation).
    p = np.ones_like(x)
    qq = np.zeros_like(x)
    coeff = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 60):
        coeff = coeff * (-((2 * k - 1) ** 2) / (k * 8.0)) / x
        mag = np.abs(coeff)
        active &= mag < prev
        if not active.any():
            break
        prev = np.where(active, mag, prev)
        sign = -1.0 if (k // 2) % 2 else 1.0
        contrib = np.where(active, sign * coeff, 0.0)
        if k % 2 == 0:
            p = p + contrib
        else:
            qq = qq + contrib
    chi = x - 0.25 * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - qq * np.sin(chi))


def bessel_j0_array(x):
    x = np.abs(np.asarray(x, dtype=np.float64))
    out = np.empty_like(x)
    small = x <= SERIES_MAX_ARG
    if small.any():
        out[small] = _j0_series(x[small])
    if (~small).any():
        out[~small] = _j0_hankel(x[~small])
    return out


def bessel_j0(x):
    return float(bessel_j0_array(np.array([x], dtype=np.float64))[0])


def bessel_second_difference(u):
    """J0(sqrt(2) u) - 2 J0(u) + 1, cancellation-free for small u."""
    u = np.abs(np.asarray(u, dtype=np.float64))
    out = np.empty_like(u)
    small = u <= 2.0
    if small.any():
        us = u[small]
        q = -0.25 * us * us
        term = np.ones_like(us)
        total = np.zeros_like(us)
        k = 1
        while True:
            term = term * q / (k * k)
            if k >= 2:
                total = total + (2.0 ** k - 2.0) * term
                if not np.any(np.abs(term) * 2.0 ** k >= _SERIES_TOL):
                    break
            k += 1
        out[small] = total
    big = ~small
    if big.any():
        ub = u[big]
        out[big] = bessel_j0_array(math.sqrt(2.0) * ub) - 2.0 * bessel_j0_array(ub) + 1.0
    return out


def psi_integrand(x, r, alpha):
    x = np.asarray(x, dtype=np.float64)
    return (2.0 / math.pi) * (-np.expm1(-x * x)) * x ** (-1.0 - 2.0 * alpha) \
        * bessel_second_difference(r * x)


def _gk15(a, b, r, alpha):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _NODES15[None, :]
    f = psi_integrand(x, r, alpha)
    k15 = half * (f @ _WK15)
    g7 = half * (f @ _WG15)
    return k15, np.abs(k15 - g7)


def psi_panels(r, alpha, edges, tol, max_depth=20):
    """Adaptive GK15 over consecutive panels given by ``edges``.

    Returns (integral, error_estimate, n_evaluated_panels).
    """
    edges = np.asarray(edges, dtype=np.float64)
    a = edges[:-1].copy()
    b = edges[1:].copy()
    span = edges[-1] - edges[0]
    total = 0.0
    err_total = 0.0
    n_panels = 0
    depth = 0
    while a.size:
        k15, err = _gk15(a, b, r, alpha)
        n_panels += a.size
        local_tol = np.maximum(tol * (b - a) / span, 50.0 * np.finfo(float).eps * np.abs(k15))
        local_tol = np.maximum(local_tol, _FLOOR * (b - a) * a ** (-1.0 - 2.0 * alpha))
        done = (err <= local_tol) | (depth >= max_depth)
        total += math.fsum(k15[done])
        err_total += float(np.sum(err[done]))
        a, b = a[~done], b[~done]
        mid = 0.5 * (a + b)
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
        depth += 1
    return total, err_total, n_panels


def compensated_time_sums(proj, decay):
    """Per-mode numerator and denominator sums of the reaction estimator.

    ``proj`` has shape (N+1, L, L); ``decay`` holds exp(-nu*lambda/N).
    Kahan summation over the time index, vectorised across modes.
    """
    proj = np.asarray(proj, dtype=np.float64)
    n_steps = proj.shape[0] - 1
    num = np.zeros(proj.shape[1:])
    num_c = np.zeros_like(num)
    den = np.zeros_like(num)
    den_c = np.zeros_like(num)
    for i in range(1, n_steps + 1):
        prev = proj[i - 1]
        y = prev * (proj[i] - decay * prev) - num_c
        t = num + y
        num_c = (t - num) - y
        num = t
        y = prev * prev - den_c
        t = den + y
        den_c = (t - den) - y
        den = t
    return num, den


def triple_increment_sumsq(obs, jidx, kidx):
    """Sum over time of squared triple increments, shape (m1, m2)."""
    obs = np.asarray(obs, dtype=np.float64)
    sub = obs[:, jidx][:, :, kidx]
    d = sub[1:] - sub[:-1]
    t = (d[:, 1:, 1:] - d[:, :-1, 1:]) - (d[:, 1:, :-1] - d[:, :-1, :-1])
    return np.sum(t * t, axis=0)
