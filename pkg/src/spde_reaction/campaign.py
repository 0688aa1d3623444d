"""Monte Carlo campaigns: configuration, replicates, persisted records and summaries."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import kernels
from .reaction import ThetaEstimatorConfig, estimate_theta_coeff, estimate_theta_grid
from .simulate import SimConfig, replicate_seed, simulate_dataset
from .spectral import GridProjector, GridSpec, ModelParams
from .volatility import SamplingWarning, ThinnedGrid, estimate_sigma2, select_thinned_grid

ENV_PREFIX = "SPDE_REACTION_"
RECORD_FIELDS = ("replicate_id", "seed", "theta_hat_grid", "theta_hat_coeff", "sigma2_hat",
                 "achieved_r", "status", "wall_time_ms")
ESTIMATOR_FIELDS = ("theta_hat_grid", "theta_hat_coeff", "sigma2_hat")
SUMMARY_FORMAT = "spde-reaction-summary-v1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILED_REPLICATES = 3
EXIT_IO = 4


class ConfigError(ValueError):
    """Invalid or inconsistent campaign configuration."""


_MODEL_KEYS = ("theta0", "sigma", "nu", "kappa", "eta", "alpha")

_TABLE_BASE = dict(theta0=0.0, sigma=1.0, nu=0.1, kappa=1.0, eta=1.0, alpha=0.5,
                   N=100, M1=200, M2=200, initial="zero", root_seed=0)

PROFILES: dict[str, dict] = {
    # the published runs: K1 = K2 = 10^4 is 10^8 modes per time step
    "paper-table1": {**_TABLE_BASE, "K1": 10_000, "K2": 10_000, "beta": 0.6, "L": 32,
                     "b": None, "m1": None, "m2": None, "replicates": 200,
                     "estimator_paths": ["grid"]},
    "paper-table2": {**_TABLE_BASE, "K1": 10_000, "K2": 10_000, "beta": None, "L": None,
                     "b": 0.1, "m1": 30, "m2": 30, "replicates": 200,
                     "estimator_paths": ["grid"]},
    "desk": {**_TABLE_BASE, "K1": 256, "K2": 256, "beta": 0.6, "L": 32,
             "b": 0.1, "m1": 30, "m2": 30, "replicates": 100,
             "estimator_paths": ["grid"]},
}
DEFAULT_PROFILE = "desk"


@dataclass(frozen=True)
class CampaignConfig:
    """Everything that determines a campaign's results, plus where to write them.

    ``beta``/``L`` enable the reaction estimator; ``b``/``m1``/``m2`` enable
    the volatility estimator. ``output_dir`` is excluded from the config hash.
    """

    theta0: float = 0.0
    sigma: float = 1.0
    nu: float = 0.1
    kappa: float = 1.0
    eta: float = 1.0
    alpha: float = 0.5
    N: int = 100
    M1: int = 200
    M2: int = 200
    K1: int = 256
    K2: int = 256
    initial: str = "zero"
    beta: float | None = None
    L: int | None = None
    b: float | None = None
    m1: int | None = None
    m2: int | None = None
    replicates: int = 1
    root_seed: int = 0
    estimator_paths: tuple[str, ...] = ("grid",)
    output_dir: str = "campaign-out"

    def __post_init__(self):
        object.__setattr__(self, "estimator_paths", tuple(self.estimator_paths))
        try:
            self.model
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for key in ("N", "M1", "M2", "K1", "K2", "replicates"):
            if int(getattr(self, key)) < 1:
                raise ConfigError(f"{key} must be >= 1")
        if not 0 <= int(self.root_seed) < 2 ** 64:
            raise ConfigError("root_seed must be an unsigned 64-bit integer")
        if self.initial != "zero":
            raise ConfigError("only the zero initial condition is supported in campaigns")
        bad = set(self.estimator_paths) - {"grid", "coeff"}
        if bad or not self.estimator_paths:
            raise ConfigError(f"estimator_paths must be a non-empty subset of {{grid, coeff}}, "
                              f"got {list(self.estimator_paths)}")
        if (self.beta is None) != (self.L is None):
            raise ConfigError("beta and L must be given together")
        sig = (self.b, self.m1, self.m2)
        if any(v is None for v in sig) and not all(v is None for v in sig):
            raise ConfigError("b, m1 and m2 must be given together")
        if not (self.theta_enabled or self.sigma_enabled):
            raise ConfigError("no estimator enabled: set (beta, L) and/or (b, m1, m2)")
        if self.theta_enabled:
            if not self.beta > -1:
                raise ConfigError("beta must exceed -1")
            if self.L < 1:
                raise ConfigError("L must be >= 1")
            if "coeff" in self.estimator_paths and self.L > min(self.K1, self.K2):
                raise ConfigError("coefficient path needs L <= min(K1, K2)")

    @property
    def theta_enabled(self) -> bool:
        return self.beta is not None

    @property
    def sigma_enabled(self) -> bool:
        return self.b is not None

    @property
    def model(self) -> ModelParams:
        return ModelParams(**{k: float(getattr(self, k)) for k in _MODEL_KEYS})

    @property
    def grid(self) -> GridSpec:
        return GridSpec(int(self.M1), int(self.M2))

    def sim_config(self, seed: int) -> SimConfig:
        return SimConfig(params=self.model, N=int(self.N), grid=self.grid,
                         K1=int(self.K1), K2=int(self.K2), seed=int(seed))

    def theta_config(self) -> ThetaEstimatorConfig | None:
        if not self.theta_enabled:
            return None
        return ThetaEstimatorConfig(beta=float(self.beta), L=int(self.L), params=self.model)

    def to_dict(self, include_output: bool = True) -> dict:
        d = asdict(self)
        d["estimator_paths"] = list(self.estimator_paths)
        if not include_output:
            d.pop("output_dir")
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(include_output=False), sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _coerce(name: str, raw: str):
    if name == "estimator_paths":
        return [s.strip() for s in raw.split(",") if s.strip()]
    if name in ("initial", "output_dir"):
        return raw
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        raise ConfigError(f"cannot parse {ENV_PREFIX}{name.upper()}={raw!r}") from None


def env_overrides(environ=None) -> dict:
    """Config values taken from ``SPDE_REACTION_<KEY>`` variables (key upper-cased)."""
    environ = os.environ if environ is None else environ
    out = {}
    for f in fields(CampaignConfig):
        var = ENV_PREFIX + f.name.upper()
        if var in environ:
            out[f.name] = _coerce(f.name, environ[var])
    return out


def load_config(path=None, profile: str | None = None, overrides: dict | None = None,
                environ=None) -> CampaignConfig:
    """Resolve a config: profile defaults, then the JSON file, then env vars, then overrides."""
    name = profile or DEFAULT_PROFILE
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    data = dict(PROFILES[name])
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        data.update(doc)
    data.update(env_overrides(environ))
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return CampaignConfig.from_dict(data)


@dataclass(frozen=True)
class EstimateRecord:
    replicate_id: int
    seed: int
    theta_hat_grid: float | None = None
    theta_hat_coeff: float | None = None
    sigma2_hat: float | None = None
    achieved_r: float | None = None
    status: str = "ok"
    wall_time_ms: float = 0.0
    config_hash: str = field(default="", compare=False)

    @property
    def failed(self) -> bool:
        return self.status != "ok"

    def same_result(self, other: "EstimateRecord") -> bool:
        """Equality ignoring wall time."""
        return replace(self, wall_time_ms=0.0) == replace(other, wall_time_ms=0.0)


def prepare_thinned_grid(config: CampaignConfig) -> ThinnedGrid | None:
    if not config.sigma_enabled:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        return select_thinned_grid(config.grid, float(config.b),
                                   (int(config.m1), int(config.m2)), config.nu, int(config.N))


def _failure(stage: str, exc: BaseException) -> str:
    msg = " ".join(str(exc).split())
    return f"{stage}:{type(exc).__name__}: {msg}" if msg else f"{stage}:{type(exc).__name__}"


def run_replicate(config: CampaignConfig, replicate_id: int,
                  thinned: ThinnedGrid | None = None) -> EstimateRecord:
    """Simulate one dataset and run every enabled estimator.

    Estimator errors are caught and reported in ``status``; the other
    estimators still run.
    """
    start = time.perf_counter()
    seed = replicate_seed(int(config.root_seed), int(replicate_id))
    if thinned is None:
        thinned = prepare_thinned_grid(config)
    out = {}
    errors = []
    want_coeff = config.theta_enabled and "coeff" in config.estimator_paths
    try:
        data = simulate_dataset(config.sim_config(seed), streaming=False if want_coeff else None,
                                retain_coeffs=want_coeff)
    except Exception as exc:  # noqa: BLE001 - recorded, campaign continues
        data = None
        errors.append(_failure("simulate", exc))
    if data is not None and config.theta_enabled:
        tcfg = config.theta_config()
        if "grid" in config.estimator_paths:
            try:
                proj = GridProjector(config.grid, tcfg.L, config.model)
                out["theta_hat_grid"] = estimate_theta_grid(data, tcfg, projector=proj).value
            except Exception as exc:  # noqa: BLE001
                errors.append(_failure("theta_grid", exc))
        if want_coeff:
            try:
                out["theta_hat_coeff"] = estimate_theta_coeff(data.coeffs, tcfg).value
            except Exception as exc:  # noqa: BLE001
                errors.append(_failure("theta_coeff", exc))
    if data is not None and thinned is not None:
        try:
            est = estimate_sigma2(data, thinned, config.model)
            out["sigma2_hat"] = est.value
            out["achieved_r"] = est.r
        except Exception as exc:  # noqa: BLE001
            errors.append(_failure("sigma2", exc))
    wall = (time.perf_counter() - start) * 1e3
    return EstimateRecord(replicate_id=int(replicate_id), seed=seed,
                          status="ok" if not errors else "failed " + "; ".join(errors),
                          wall_time_ms=wall, config_hash=config.config_hash, **out)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _parse_float(s: str) -> float | None:
    return None if s == "" else float(s)


class RecordWriter:
    """Single appender for ``records.csv``; flushes after every row."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(RECORD_FIELDS)
        self._fh.flush()

    def append(self, rec: EstimateRecord) -> None:
        self._w.writerow([_fmt(getattr(rec, k)) for k in RECORD_FIELDS])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_records(path, records) -> None:
    """Write records sorted by replicate id, replacing ``path`` atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with RecordWriter(tmp) as w:
        for rec in sorted(records, key=lambda r: r.replicate_id):
            w.append(rec)
    os.replace(tmp, path)


def read_records(path, config_hash: str = "") -> list[EstimateRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_FIELDS:
            raise ValueError(f"unexpected records header {reader.fieldnames}")
        recs = []
        for row in reader:
            recs.append(EstimateRecord(
                replicate_id=int(row["replicate_id"]), seed=int(row["seed"]),
                theta_hat_grid=_parse_float(row["theta_hat_grid"]),
                theta_hat_coeff=_parse_float(row["theta_hat_coeff"]),
                sigma2_hat=_parse_float(row["sigma2_hat"]),
                achieved_r=_parse_float(row["achieved_r"]),
                status=row["status"], wall_time_ms=float(row["wall_time_ms"]),
                config_hash=config_hash))
    return recs


def _stats(values: list[float], true: float) -> dict:
    n = len(values)
    if n == 0:
        return {"n": 0, "mean": None, "sd": None, "bias": None, "true": true}
    mean = math.fsum(values) / n
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else None
    return {"n": n, "mean": mean, "sd": sd, "bias": mean - true, "true": true}


def summarize(records, config: CampaignConfig) -> dict:
    """Per-estimator mean, sample s.d. (n - 1) and bias; order-independent.

    ``sd`` is ``None`` (JSON null) when fewer than two values are available.
    """
    recs = sorted(records, key=lambda r: r.replicate_id)
    truth = {"theta_hat_grid": config.theta0, "theta_hat_coeff": config.theta0,
             "sigma2_hat": config.sigma ** 2}
    enabled = []
    if config.theta_enabled:
        enabled += [f"theta_hat_{p}" for p in ("grid", "coeff") if p in config.estimator_paths]
    if config.sigma_enabled:
        enabled.append("sigma2_hat")
    est = {}
    for name in enabled:
        vals = [getattr(r, name) for r in recs if getattr(r, name) is not None]
        est[name] = _stats(vals, truth[name])
    return {
        "format": SUMMARY_FORMAT,
        "config_hash": config.config_hash,
        "config": config.to_dict(include_output=False),
        "replicates": len(recs),
        "failed": sum(r.failed for r in recs),
        "failed_ids": [r.replicate_id for r in recs if r.failed],
        "estimators": est,
    }


@dataclass
class CampaignResult:
    summary: dict
    records: list[EstimateRecord]
    records_path: Path | None
    summary_path: Path | None

    @property
    def exit_code(self) -> int:
        return EXIT_FAILED_REPLICATES if self.summary["failed"] else EXIT_OK


def _worker(args):
    config, rid, thinned = args
    return run_replicate(config, rid, thinned)


def run_campaign(config: CampaignConfig, jobs: int = 1, write: bool = True) -> CampaignResult:
    """Run all replicates, appending each record to ``records.csv`` as it finishes.

    Up to ``jobs`` worker processes are used. When the run ends the record
    file is rewritten in replicate order and ``summary.json`` is written.
    The summary does not depend on ``jobs``. An ``OSError`` while writing
    propagates after the rows written so far have been flushed.
    """
    thinned = prepare_thinned_grid(config)
    ids = range(int(config.replicates))
    records: list[EstimateRecord] = []
    rec_path = sum_path = None
    writer = None
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        rec_path, sum_path = out / "records.csv", out / "summary.json"
        writer = RecordWriter(rec_path)
    try:
        if jobs <= 1:
            for rid in ids:
                rec = run_replicate(config, rid, thinned)
                records.append(rec)
                if writer:
                    writer.append(rec)
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futs = [pool.submit(_worker, (config, rid, thinned)) for rid in ids]
                for fut in as_completed(futs):
                    rec = fut.result()
                    records.append(rec)
                    if writer:
                        writer.append(rec)
    finally:
        if writer:
            writer.close()
    records.sort(key=lambda r: r.replicate_id)
    summary = summarize(records, config)
    summary["backend"] = kernels.BACKEND
    if write:
        write_records(rec_path, records)
        tmp = sum_path.with_name(sum_path.name + ".tmp")
        tmp.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, sum_path)
    return CampaignResult(summary=summary, records=records, records_path=rec_path,
                          summary_path=sum_path)
