"""Spectral Galerkin simulation of the SPDE.

Each Fourier coefficient x_{l1,l2} is an Ornstein-Uhlenbeck process with
mean reversion nu*lambda_{l1,l2} - theta0 and noise sigma*mu_{l1,l2}^{-alpha/2},
stepped with its exact Gaussian transition. Grid fields are synthesised from
the truncated K1 x K2 expansion.

Random numbers come from a counter-based Philox stream: the standard normal
driving mode (l1, l2) at step i sits at a fixed position of the stream keyed
by the seed, so any subset of modes can be drawn independently and the result
does not depend on iteration order or worker count.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import GridSpec, ModelParams, eigenvalue_table, mu_table

FORMAT_VERSION = "spdefield-v1"
STREAMING_MODE_THRESHOLD = 10 ** 6
DEFAULT_MAX_COEFF_VALUES = 2 ** 26

_TWO_PI = 2.0 * math.pi
_INV_2_53 = 1.0 / 9007199254740992.0


class CapacityError(MemoryError):
    """Requested coefficient tensor exceeds the configured memory budget."""


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    N: int
    grid: GridSpec
    K1: int
    K2: int
    initial_coeffs: np.ndarray | None = field(default=None, compare=False)
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.K1 < 1 or self.K2 < 1:
            raise ValueError("K1 and K2 must be >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.initial_coeffs is not None:
            init = np.asarray(self.initial_coeffs, dtype=np.float64)
            if init.shape != (self.K1, self.K2):
                raise ValueError(
                    f"initial_coeffs shape {init.shape} != ({self.K1}, {self.K2})")
            object.__setattr__(self, "initial_coeffs", init)

    def initial(self) -> np.ndarray:
        if self.initial_coeffs is None:
            return np.zeros((self.K1, self.K2))
        return self.initial_coeffs.copy()


@dataclass
class CoefficientPaths:
    """x_{l1,l2}(t_i) as an array of shape (N+1, K1, K2)."""

    values: np.ndarray

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1


@dataclass
class FieldDataset:
    """Grid observations of shape (N+1, M1+1, M2+1)."""

    observations: np.ndarray
    design: SimConfig
    coeffs: CoefficientPaths | None = None

    @property
    def N(self) -> int:
        return self.observations.shape[0] - 1

    @property
    def grid(self) -> GridSpec:
        return self.design.grid


def ou_variance_factor(lambda_theta, dt):
    """(1 - exp(-2 lambda dt)) / (2 lambda), with the dt limit near lambda*dt = 0."""
    lam = np.asarray(lambda_theta, dtype=np.float64)
    small = np.abs(lam * dt) < 1e-8
    safe = np.where(small, 1.0, lam)
    val = np.where(small, dt, -np.expm1(-2.0 * safe * dt) / (2.0 * safe))
    return val if val.ndim else float(val)


def ou_exact_step(x, lambda_theta, noise_scale, dt, xi):
    """One exact transition of dx = -lambda x dt + scale dw over ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    decay = np.exp(-np.asarray(lambda_theta, dtype=np.float64) * dt)
    sd = np.asarray(noise_scale, dtype=np.float64) * np.sqrt(ou_variance_factor(lambda_theta, dt))
    val = decay * x + sd * xi
    return val if np.ndim(val) else float(val)


def philox_key(seed: int) -> np.ndarray:
    return np.random.SeedSequence(int(seed)).generate_state(2, dtype=np.uint64)


def replicate_seed(root_seed: int, replicate_id: int) -> int:
    """Seed of one replicate, derived from (root_seed, replicate_id)."""
    ss = np.random.SeedSequence(int(root_seed), spawn_key=(int(replicate_id),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def mode_normals(seed: int, step: int, start: int, count: int, key=None) -> np.ndarray:
    """Standard normals at positions [start, start+count) of step ``step``.

    Position q of a step uses raw Philox words 2*(q//2) and 2*(q//2)+1 through
    Box-Muller, so the value at each position is fixed by (seed, step, q).
    """
    if count <= 0:
        return np.empty(0)
    key = philox_key(seed) if key is None else key
    first_pair = start // 2
    last_pair = (start + count - 1) // 2
    word0 = 2 * first_pair
    block, offset = divmod(word0, 4)
    n_words = 2 * (last_pair - first_pair + 1)
    bitgen = np.random.Philox(key=key, counter=[block, 0, int(step), 0])
    raw = bitgen.random_raw(offset + n_words)[offset:]
    u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * _INV_2_53
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = _TWO_PI * u2
    out = np.empty(2 * u1.size)
    out[0::2] = rad * np.cos(ang)
    out[1::2] = rad * np.sin(ang)
    lo = start - 2 * first_pair
    return out[lo:lo + count]


def step_normals(seed: int, step: int, K1: int, K2: int, key=None) -> np.ndarray:
    """(K1, K2) normals for one time step; mode (l1, l2) at position (l1-1)*K2 + l2-1."""
    return mode_normals(seed, step, 0, K1 * K2, key=key).reshape(K1, K2)


class _Stepper:
    def __init__(self, config: SimConfig):
        p = config.params
        dt = 1.0 / config.N
        lam_theta = p.nu * eigenvalue_table(config.K1, config.K2, p) - p.theta0
        scale = p.sigma * mu_table(config.K1, config.K2) ** (-p.alpha / 2.0)
        self.decay = np.exp(-lam_theta * dt)
        self.sd = scale * np.sqrt(ou_variance_factor(lam_theta, dt))
        self.noisy = p.sigma != 0.0
        self.config = config
        self.key = philox_key(config.seed)

    def advance(self, x: np.ndarray, step: int) -> np.ndarray:
        out = self.decay * x
        if self.noisy:
            c = self.config
            out += self.sd * step_normals(c.seed, step, c.K1, c.K2, key=self.key)
        return out


def simulate_coefficients(config: SimConfig,
                          max_values: int = DEFAULT_MAX_COEFF_VALUES) -> CoefficientPaths:
    """All coefficient paths x_{l1,l2}(t_i), i = 0..N.

    Raises:
        CapacityError: (N+1)*K1*K2 exceeds ``max_values``. Use
            ``simulate_dataset(..., streaming=True)`` instead.
    """
    total = (config.N + 1) * config.K1 * config.K2
    if total > max_values:
        raise CapacityError(
            f"(N+1)*K1*K2 = {total} exceeds the budget of {max_values} values; "
            "use the streaming simulator")
    stepper = _Stepper(config)
    values = np.empty((config.N + 1, config.K1, config.K2))
    values[0] = config.initial()
    for i in range(1, config.N + 1):
        values[i] = stepper.advance(values[i - 1], i)
    return CoefficientPaths(values)


class Synthesizer:
    """Separable evaluation of sum_{l1,l2} x_{l1,l2} e_{l1,l2}(y_j, z_k)."""

    def __init__(self, grid: GridSpec, params: ModelParams, K1: int, K2: int):
        y, z = grid.y, grid.z
        self.sin_y = np.sin(math.pi * np.outer(y, np.arange(1, K1 + 1)))
        self.sin_z = np.sin(math.pi * np.outer(z, np.arange(1, K2 + 1)))
        # sin(pi l) is not exactly zero in floating point
        self.sin_y[[0, -1]] = 0.0
        self.sin_z[[0, -1]] = 0.0
        self.weight = 2.0 * np.outer(np.exp(-params.kappa * y / 2.0),
                                     np.exp(-params.eta * z / 2.0))

    def __call__(self, coeffs: np.ndarray) -> np.ndarray:
        if coeffs.ndim == 2:
            return self.weight * (self.sin_y @ coeffs @ self.sin_z.T)
        tmp = np.matmul(self.sin_y[None], coeffs)
        return self.weight * np.matmul(tmp, self.sin_z.T[None])


def synthesize_field(coeffs: CoefficientPaths, grid: GridSpec, params: ModelParams,
                     design: SimConfig | None = None) -> FieldDataset:
    values = coeffs.values
    _, K1, K2 = values.shape
    synth = Synthesizer(grid, params, K1, K2)
    obs = np.empty((values.shape[0],) + grid.shape)
    for i in range(values.shape[0]):
        obs[i] = synth(values[i])
    if design is None:
        design = SimConfig(params=params, N=values.shape[0] - 1, grid=grid, K1=K1, K2=K2)
    return FieldDataset(observations=obs, design=design, coeffs=coeffs)


def simulate_dataset(config: SimConfig, streaming: bool | None = None,
                     retain_coeffs: bool = True,
                     max_values: int = DEFAULT_MAX_COEFF_VALUES) -> FieldDataset:
    """Simulate coefficient paths and synthesise the observed grid fields.

    In streaming mode only the current coefficient slice is kept and each
    field is synthesised as the paths advance; ``coeffs`` is then ``None``.
    Streaming is the default when K1*K2 exceeds 10^6.
    """
    if streaming is None:
        streaming = config.K1 * config.K2 > STREAMING_MODE_THRESHOLD
    if not streaming:
        paths = simulate_coefficients(config, max_values=max_values)
        ds = synthesize_field(paths, config.grid, config.params, design=config)
        if not retain_coeffs:
            ds.coeffs = None
        return ds
    stepper = _Stepper(config)
    synth = Synthesizer(config.grid, config.params, config.K1, config.K2)
    obs = np.empty((config.N + 1,) + config.grid.shape)
    x = config.initial()
    obs[0] = synth(x)
    for i in range(1, config.N + 1):
        x = stepper.advance(x, i)
        obs[i] = synth(x)
    return FieldDataset(observations=obs, design=config, coeffs=None)


def save_dataset(dataset: FieldDataset, path) -> None:
    """Write observations as one JSON header line followed by raw little-endian float64."""
    cfg = dataset.design
    header = {
        "format": FORMAT_VERSION,
        "dims": list(dataset.observations.shape),
        "order": "time,y,z row-major",
        "params": cfg.params.to_dict(),
        "N": cfg.N, "M1": cfg.grid.M1, "M2": cfg.grid.M2,
        "K1": cfg.K1, "K2": cfg.K2,
        "seed": int(cfg.seed),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(dataset.observations, dtype="<f8").tobytes())


def load_dataset(path) -> FieldDataset:
    with open(Path(path), "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported dataset format {header.get('format')!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    dims = tuple(header["dims"])
    if data.size != int(np.prod(dims)):
        raise ValueError(f"payload holds {data.size} values, header declares {dims}")
    cfg = SimConfig(params=ModelParams(**header["params"]), N=header["N"],
                    grid=GridSpec(header["M1"], header["M2"]),
                    K1=header["K1"], K2=header["K2"], seed=header["seed"])
    return FieldDataset(observations=data.reshape(dims).astype(np.float64), design=cfg)
