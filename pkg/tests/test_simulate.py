import json
import math

import mpmath
import numpy as np
import pytest
from scipy import stats

from spde_reaction.simulate import (FORMAT_VERSION, CapacityError, CoefficientPaths, SimConfig,
                                    Synthesizer, load_dataset, mode_normals, ou_exact_step,
                                    ou_variance_factor, replicate_seed, save_dataset,
                                    simulate_coefficients, simulate_dataset, step_normals,
                                    synthesize_field)
from spde_reaction.spectral import (GridSpec, ModeIndex, ModelParams, eigenfunction_eval,
                                    eigenvalue, mu)


def test_ou_step_examples():
    assert ou_exact_step(1.0, 1.0, 3.0, 1.0, 0.0) == pytest.approx(0.3678794, abs=1e-7)
    assert ou_exact_step(0.0, 0.0, 1.0, 0.25, 1.0) == 0.5
    # extended-precision evaluation of the transition formula
    oracle = float(2 * mpmath.exp(-0.05) + mpmath.sqrt(-mpmath.expm1(-0.1)))
    assert oracle == pytest.approx(2.2109432, abs=1e-7)
    assert ou_exact_step(2.0, 0.5, 1.0, 0.1, 1.0) == pytest.approx(oracle, abs=1e-15)
    with pytest.raises(ValueError):
        ou_exact_step(1.0, 1.0, 1.0, 0.0, 0.0)


def test_variance_factor_continuous_at_switch():
    dt = 0.01
    below = ou_variance_factor(0.9e-8 / dt, dt)
    above = ou_variance_factor(1.1e-8 / dt, dt)
    assert below == dt
    assert above == pytest.approx(dt, rel=1e-7)
    # negative rates (theta0 > nu lambda) grow the variance
    assert ou_variance_factor(-2.0, dt) > dt


def test_zero_noise_zero_start_stays_zero():
    p = ModelParams(sigma=0.0)
    c = simulate_coefficients(SimConfig(p, 20, GridSpec(4, 4), 5, 3))
    assert not c.values.any()


def test_deterministic_decay():
    p = ModelParams(sigma=0.0, theta0=0.0, nu=0.1)
    init = np.zeros((3, 3))
    init[0, 0] = 1.0
    c = simulate_coefficients(SimConfig(p, 50, GridSpec(4, 4), 3, 3, initial_coeffs=init))
    t = np.arange(51) / 50
    expected = np.exp(-p.nu * eigenvalue(ModeIndex(1, 1), p) * t)
    np.testing.assert_allclose(c.values[:, 0, 0], expected, rtol=1e-13, atol=0)
    assert not c.values[:, 1:, :].any() and not c.values[:, :, 1:].any()


@pytest.fixture(scope="module")
def terminal_values():
    # x(1) of modes (1,1) and (1,2) over replicates, from the package's stream
    p = ModelParams(theta0=0.0, sigma=1.0, nu=0.1, kappa=1.0, eta=1.0, alpha=0.5)
    n = 2000
    out = np.empty((n, 2))
    for r in range(n):
        cfg = SimConfig(p, 100, GridSpec(2, 2), 1, 2, seed=replicate_seed(99, r))
        out[r] = simulate_coefficients(cfg).values[-1, 0, :]
    return p, out


def test_terminal_variance_matches_closed_form(terminal_values):
    p, vals = terminal_values
    lam = p.nu * eigenvalue(ModeIndex(1, 1), p)
    var = mu(1, 1) ** -0.5 * (1 - math.exp(-2 * lam)) / (2 * lam)
    n = vals.shape[0]
    sample = np.var(vals[:, 0], ddof=1)
    se = var * math.sqrt(2.0 / (n - 1))
    assert abs(sample - var) < 3 * se


def test_modes_uncorrelated(terminal_values):
    _, vals = terminal_values
    corr = np.corrcoef(vals[:, 0], vals[:, 1])[0, 1]
    assert abs(corr) < 3 / math.sqrt(vals.shape[0])


def test_exact_law_ks():
    # composition of 10 exact steps against the one-shot Gaussian law
    rng = np.random.default_rng(7)
    lam, scale, x0, steps = 1.7, 0.8, 0.6, 10
    x = np.full(100_000, x0)
    for _ in range(steps):
        x = ou_exact_step(x, lam, scale, 1.0 / steps, rng.standard_normal(x.size))
    mean = x0 * math.exp(-lam)
    sd = scale * math.sqrt((1 - math.exp(-2 * lam)) / (2 * lam))
    assert stats.kstest(x, "norm", args=(mean, sd)).pvalue > 1e-3


def test_normals_are_standard():
    z = mode_normals(3, 1, 0, 200_000)
    assert stats.kstest(z, "norm").pvalue > 1e-3


@pytest.mark.parametrize("start,count", [(0, 7), (1, 1), (5, 10), (12, 3), (3, 0)])
def test_partial_ranges_match_full_draw(start, count):
    full = mode_normals(11, 4, 0, 32)
    part = mode_normals(11, 4, start, count)
    np.testing.assert_array_equal(part, full[start:start + count])


def test_steps_are_distinct_streams():
    a = step_normals(5, 1, 4, 4)
    b = step_normals(5, 2, 4, 4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, step_normals(5, 1, 4, 4))


def test_reproducible_and_seed_sensitive():
    p = ModelParams()
    cfg = SimConfig(p, 10, GridSpec(6, 5), 8, 8, seed=123)
    a = simulate_dataset(cfg)
    b = simulate_dataset(cfg)
    np.testing.assert_array_equal(a.observations, b.observations)
    np.testing.assert_array_equal(a.coeffs.values, b.coeffs.values)
    c = simulate_dataset(SimConfig(p, 10, GridSpec(6, 5), 8, 8, seed=124))
    assert not np.array_equal(a.observations, c.observations)


def test_streaming_matches_stored_paths():
    cfg = SimConfig(ModelParams(theta0=-0.4), 12, GridSpec(10, 9), 7, 6, seed=8)
    stored = simulate_dataset(cfg, streaming=False)
    streamed = simulate_dataset(cfg, streaming=True)
    assert streamed.coeffs is None
    np.testing.assert_array_equal(stored.observations, streamed.observations)


def test_replicate_seed_depends_on_both_inputs():
    seeds = {replicate_seed(r, i) for r in (0, 1) for i in range(5)}
    assert len(seeds) == 10
    assert replicate_seed(4, 2) == replicate_seed(4, 2)


def test_synthesis_matches_naive_sum(rng):
    p = ModelParams(kappa=0.8, eta=-1.1)
    grid = GridSpec(8, 8)
    values = rng.normal(size=(3, 4, 4))
    fast = synthesize_field(CoefficientPaths(values), grid, p).observations
    naive = np.zeros_like(fast)
    for i in range(3):
        for j, y in enumerate(grid.y):
            for k, z in enumerate(grid.z):
                naive[i, j, k] = sum(values[i, a, b] * eigenfunction_eval(ModeIndex(a + 1, b + 1), p, y, z)
                                     for a in range(4) for b in range(4))
    np.testing.assert_allclose(fast, naive, rtol=0, atol=1e-12)


def test_single_mode_synthesis_and_boundary():
    p = ModelParams(kappa=0.0, eta=0.0)
    grid = GridSpec(6, 6)
    coeffs = np.zeros((3, 3))
    coeffs[0, 0] = 1.0
    field = Synthesizer(grid, p, 3, 3)(coeffs)
    expected = 2 * np.outer(np.sin(math.pi * grid.y), np.sin(math.pi * grid.z))
    np.testing.assert_allclose(field, expected, atol=1e-15)
    data = simulate_dataset(SimConfig(ModelParams(), 5, GridSpec(7, 9), 6, 6, seed=1))
    obs = data.observations
    assert not obs[:, 0, :].any() and not obs[:, -1, :].any()
    assert not obs[:, :, 0].any() and not obs[:, :, -1].any()


def test_zero_coefficients_give_zero_field():
    out = synthesize_field(CoefficientPaths(np.zeros((2, 3, 3))), GridSpec(4, 4), ModelParams())
    assert not out.observations.any()


def test_capacity_error():
    cfg = SimConfig(ModelParams(), 10, GridSpec(4, 4), 64, 64)
    with pytest.raises(CapacityError):
        simulate_coefficients(cfg, max_values=1000)
    with pytest.raises(MemoryError):
        simulate_dataset(cfg, streaming=False, max_values=1000)
    assert simulate_dataset(cfg, streaming=True).coeffs is None


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(ModelParams(), 0, GridSpec(4, 4), 2, 2)
    with pytest.raises(ValueError):
        SimConfig(ModelParams(), 3, GridSpec(4, 4), 2, 2, initial_coeffs=np.zeros((3, 2)))
    with pytest.raises(ValueError):
        SimConfig(ModelParams(), 3, GridSpec(4, 4), 2, 2, seed=-1)


def test_dump_round_trip(tmp_path):
    cfg = SimConfig(ModelParams(theta0=-0.2, kappa=0.5), 4, GridSpec(5, 3), 4, 4, seed=77)
    data = simulate_dataset(cfg)
    path = tmp_path / "d.spdefield"
    save_dataset(data, path)
    raw = path.read_bytes()
    header_line, payload = raw.split(b"\n", 1)
    header = json.loads(header_line)
    assert header["format"] == FORMAT_VERSION
    assert header["dims"] == [5, 6, 4]
    assert len(payload) == 5 * 6 * 4 * 8
    np.testing.assert_array_equal(np.frombuffer(payload, dtype="<f8").reshape(5, 6, 4),
                                  data.observations)
    back = load_dataset(path)
    np.testing.assert_array_equal(back.observations, data.observations)
    assert back.design.params == cfg.params
    assert back.design.seed == 77 and back.grid == cfg.grid


def test_load_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad"
    bad.write_bytes(json.dumps({"format": "other"}).encode() + b"\n")
    with pytest.raises(ValueError):
        load_dataset(bad)
    data = simulate_dataset(SimConfig(ModelParams(), 2, GridSpec(2, 2), 2, 2))
    good = tmp_path / "good"
    save_dataset(data, good)
    good.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_dataset(good)
