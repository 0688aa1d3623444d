import math

import numpy as np
import pytest
from scipy import integrate

from spde_reaction.spectral import (DimensionError, GridProjector, GridSpec, ModeIndex,
                                    ModelParams, cell_increments, eigenfunction_eval,
                                    eigenvalue, fourier_coeff_grid, h_antiderivative, mu_table,
                                    spectral_quantities, weighted_norm_sq_beta)


@pytest.mark.parametrize("l1,l2,kappa,eta,expected", [
    (1, 1, 0.0, 0.0, 19.7392088),
    (1, 1, 1.0, 1.0, 20.2392088),
    (2, 1, 1.0, 1.0, 49.8480220),
])
def test_eigenvalue_examples(l1, l2, kappa, eta, expected):
    p = ModelParams(kappa=kappa, eta=eta)
    assert eigenvalue(ModeIndex(l1, l2), p) == pytest.approx(expected, abs=5e-8)


def test_spectral_quantities_shift_by_theta():
    p = ModelParams(theta0=-0.3, nu=0.2)
    q = spectral_quantities(ModeIndex(1, 2), p)
    assert q.mu == pytest.approx(5 * math.pi ** 2)
    assert q.lambda_theta == pytest.approx(0.2 * q.lam + 0.3)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        ModeIndex(0, 1)
    with pytest.raises(ValueError):
        ModelParams(nu=1.0)
    with pytest.raises(ValueError):
        ModelParams(alpha=0.0)
    with pytest.raises(ValueError):
        GridSpec(0, 3)


def test_eigenfunction_examples():
    flat = ModelParams(kappa=0.0, eta=0.0)
    adv = ModelParams(kappa=1.0, eta=1.0)
    assert eigenfunction_eval(ModeIndex(3, 2), adv, 0.0, 0.37) == 0.0
    assert eigenfunction_eval(ModeIndex(1, 1), flat, 0.5, 0.5) == pytest.approx(2.0, abs=1e-15)
    assert eigenfunction_eval(ModeIndex(1, 1), adv, 0.5, 0.5) == pytest.approx(1.2130613, abs=1e-7)


@pytest.mark.parametrize("kappa,eta", [(0.0, 0.0), (1.0, 1.0), (-2.0, 3.0)])
def test_orthonormality(kappa, eta):
    p = ModelParams(kappa=kappa, eta=eta)
    modes = [ModeIndex(a, b) for a in range(1, 5) for b in range(1, 5)]
    for i, m in enumerate(modes):
        for n in modes[i:]:
            def f(z, y):
                return (eigenfunction_eval(m, p, y, z) * eigenfunction_eval(n, p, y, z)
                        * math.exp(kappa * y + eta * z))
            val, _ = integrate.dblquad(f, 0, 1, 0, 1, epsabs=1e-11, epsrel=1e-11)
            assert val == pytest.approx(1.0 if m == n else 0.0, abs=1e-8)


def test_h_examples():
    assert h_antiderivative(1, 0.0, 0.0) == pytest.approx(-math.sqrt(2) / math.pi, abs=1e-15)
    span = h_antiderivative(1, 1.0, 0.0) - h_antiderivative(1, 0.0, 0.0)
    oracle, _ = integrate.quad(lambda x: math.sqrt(2) * math.sin(math.pi * x), 0, 1)
    assert span == pytest.approx(oracle, abs=1e-13)
    assert span == pytest.approx(2 * math.sqrt(2) / math.pi, abs=1e-15)


def test_h_derivative_example():
    l, x, a = 3, 0.4, 1.0
    target = math.sqrt(2) * math.sin(3 * math.pi * x) * math.exp(a * x / 2)
    step = 1e-4
    fd = (h_antiderivative(l, x + step, a) - h_antiderivative(l, x - step, a)) / (2 * step)
    assert fd == pytest.approx(target, rel=1e-6)


@pytest.mark.parametrize("l", [1, 2, 5, 8])
@pytest.mark.parametrize("a", [-4.0, 0.0, 2.5])
def test_h_derivative_second_order(l, a):
    xs = np.array([0.13, 0.5, 0.81])
    target = math.sqrt(2) * np.sin(math.pi * l * xs) * np.exp(a * xs / 2)
    errs = []
    for step in (1e-2, 5e-3, 2.5e-3):
        fd = (h_antiderivative(l, xs + step, a) - h_antiderivative(l, xs - step, a)) / (2 * step)
        errs.append(np.max(np.abs(fd - target)))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.6 < q < 4.4 for q in ratios), ratios


def test_cell_increment_examples():
    one = cell_increments(GridSpec(1, 1), 1, 0.0, "y")
    assert one.shape == (1, 1)
    assert one[0, 0] == pytest.approx(2 * math.sqrt(2) / math.pi, abs=1e-15)
    four = cell_increments(GridSpec(4, 4), 6, 0.0, "z")
    assert four[:, 0].sum() == pytest.approx(2 * math.sqrt(2) / math.pi, abs=1e-15)
    for l in (2, 4, 6):
        assert abs(four[:, l - 1].sum()) < 1e-14
    with pytest.raises(ValueError):
        cell_increments(GridSpec(4, 4), 2, 0.0, "x")


def test_projection_zero_and_linearity(rng):
    grid = GridSpec(12, 10)
    p = ModelParams(kappa=0.7, eta=-1.2)
    proj = GridProjector(grid, 5, p)
    assert np.all(proj.project(np.zeros(grid.shape)) == 0.0)
    x, y = rng.normal(size=grid.shape), rng.normal(size=grid.shape)
    lhs = proj.project(2.5 * x - 0.75 * y)
    rhs = 2.5 * proj.project(x) - 0.75 * proj.project(y)
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-13)
    with pytest.raises(DimensionError):
        proj.project(np.zeros((3, 3)))


def test_projection_of_first_eigenfunction_converges():
    p = ModelParams(kappa=1.0, eta=1.0)
    errors = []
    for M in (32, 64, 256):
        grid = GridSpec(M, M)
        field = eigenfunction_eval(ModeIndex(1, 1), p, grid.y[:, None], grid.z[None, :])
        errors.append(abs(fourier_coeff_grid(field, grid, ModeIndex(1, 1), p) - 1.0))
    assert errors[-1] < 2e-2
    assert errors[0] > errors[1] > errors[2]


def _cell_integral(l, lo, hi, a):
    val, _ = integrate.quad(lambda s: math.sqrt(2) * math.sin(math.pi * l * s) * math.exp(a * s / 2),
                            lo, hi, epsabs=1e-16, epsrel=1e-12)
    return val


def test_projection_matches_per_cell_quadrature(rng):
    grid = GridSpec(8, 8)
    p = ModelParams(kappa=1.3, eta=-0.4)
    L = 4
    field = rng.normal(size=grid.shape)
    proj = GridProjector(grid, L, p).project(field)
    y, z = grid.y, grid.z
    for l1 in range(1, L + 1):
        iy = [_cell_integral(l1, y[j], y[j + 1], p.kappa) for j in range(grid.M1)]
        for l2 in range(1, L + 1):
            iz = [_cell_integral(l2, z[k], z[k + 1], p.eta) for k in range(grid.M2)]
            brute = math.fsum(field[j, k] * iy[j] * iz[k]
                              for j in range(grid.M1) for k in range(grid.M2))
            assert proj[l1 - 1, l2 - 1] == pytest.approx(brute, rel=1e-10, abs=1e-14)
            single = fourier_coeff_grid(field, grid, ModeIndex(l1, l2), p)
            assert single == pytest.approx(brute, rel=1e-10, abs=1e-14)


def test_project_series_matches_slices(rng):
    grid = GridSpec(9, 7)
    p = ModelParams()
    proj = GridProjector(grid, 3, p)
    fields = rng.normal(size=(4,) + grid.shape)
    series = proj.project_series(fields)
    for i in range(4):
        np.testing.assert_allclose(series[i], proj.project(fields[i]), rtol=1e-14, atol=1e-15)


def test_increment_tables_are_read_only():
    proj = GridProjector(GridSpec(4, 4), 2, ModelParams())
    with pytest.raises(ValueError):
        proj.hy[0, 0] = 1.0


def test_weighted_norm_examples():
    u = np.zeros((3, 3))
    assert weighted_norm_sq_beta(u, 1.0, 0.5) == 0.0
    u[0, 0] = 1.0
    assert weighted_norm_sq_beta(u, 0.0, 0.5) == 1.0
    assert weighted_norm_sq_beta(u, 1.0, 0.5) == pytest.approx(0.2250791, abs=1e-7)
    assert weighted_norm_sq_beta(3 * u, 1.0, 0.5) == pytest.approx(9 * 0.2250791, abs=1e-6)


def test_mu_table_row_major():
    t = mu_table(3, 2)
    assert t.shape == (3, 2)
    assert t[2, 1] == pytest.approx(math.pi ** 2 * 13)
