"""Command line entry point: ``spde-reaction {simulate,estimate,campaign,inspect}``."""
from __future__ import annotations

import json
import math
import sys
import warnings
from pathlib import Path

import click

from . import kernels
from .campaign import (EXIT_CONFIG, EXIT_IO, PROFILES, ConfigError, load_config,
                       prepare_thinned_grid, run_campaign)
from .rates import (DesignExponents, DomainError, RateSeriesConfig, beta_bounds, check_design,
                    phi_regime, rate_R, rate_R_tail_bound, rate_regime_theorem1)
from .reaction import ThetaEstimatorConfig, estimate_theta_grid
from .simulate import load_dataset, replicate_seed, save_dataset, simulate_dataset
from .spectral import ModelParams
from .volatility import estimate_sigma2, psi_details, select_thinned_grid

DATASET_NAME = "field.spdefield"


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _table(rows, as_json: bool) -> None:
    """Print (key, value) rows as an aligned table, or as one JSON object."""
    if as_json:
        click.echo(json.dumps({k: v for k, v in rows}, sort_keys=False))
        return
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        if isinstance(v, float):
            v = format(v, ".12g")
        click.echo(f"{k.ljust(width)}  {v}")


def _resolve(config, profile, **overrides):
    try:
        return load_config(config, profile, overrides)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))


_profile_opt = click.option("--profile", type=click.Choice(sorted(PROFILES)), default=None,
                            help="Named base configuration (default: desk).")
_config_opt = click.option("--config", "config", type=click.Path(dir_okay=False), default=None,
                           help="JSON config; its keys override the profile.")
_seed_opt = click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None,
                         help="Root seed (overrides root_seed).")
_json_opt = click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")


@click.group()
@click.version_option(package_name="spde-reaction")
def main():
    """Simulate the 2D small-diffusivity SPDE and estimate its parameters.

    Config keys may also be set through SPDE_REACTION_<KEY> environment
    variables, e.g. SPDE_REACTION_K1=128.
    """


@main.command()
@_config_opt
@_profile_opt
@_seed_opt
@click.option("--replicate-id", type=click.IntRange(0), default=0, show_default=True,
              help="Replicate whose seed is used, matching the campaign's records.")
@click.option("--out", type=click.Path(file_okay=False), required=True,
              help="Output directory for the spdefield-v1 dump.")
def simulate(config, profile, seed, replicate_id, out):
    """Simulate one dataset and dump it in spdefield-v1 format."""
    cfg = _resolve(config, profile, root_seed=seed)
    rseed = replicate_seed(int(cfg.root_seed), replicate_id)
    try:
        data = simulate_dataset(cfg.sim_config(rseed), retain_coeffs=False)
    except (ValueError, MemoryError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    path = Path(out) / DATASET_NAME
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_dataset(data, path)
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    click.echo(str(path))


@main.command()
@click.option("--data", "data_path", type=click.Path(dir_okay=False), required=True,
              help="spdefield-v1 dataset written by `simulate`.")
@_config_opt
@_profile_opt
@click.option("--beta", type=float, default=None)
@click.option("--L", "L", type=int, default=None)
@click.option("--b", type=float, default=None)
@click.option("--m", "m", type=int, default=None, help="Target m1 = m2 for the thinned grid.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for estimates.json.")
@_json_opt
def estimate(data_path, config, profile, beta, L, b, m, out, as_json):
    """Run the enabled estimators on a stored dataset.

    Model parameters come from the dataset header; estimator settings from
    the config/profile and the flags.
    """
    over = {"beta": beta, "L": L, "b": b, "m1": m, "m2": m}
    cfg = _resolve(config, profile, **over)
    try:
        data = load_dataset(data_path)
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    except ValueError as exc:
        _fail(EXIT_CONFIG, f"bad dataset: {exc}")
    params: ModelParams = data.design.params
    rows = [("backend", kernels.BACKEND)]
    failed = False
    if cfg.theta_enabled:
        try:
            est = estimate_theta_grid(data, ThetaEstimatorConfig(cfg.beta, cfg.L, params))
            rows.append(("theta_hat_grid", est.value))
        except ValueError as exc:
            rows.append(("theta_hat_grid", f"failed: {exc}"))
            failed = True
    if cfg.sigma_enabled:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                tg = select_thinned_grid(data.grid, cfg.b, (cfg.m1, cfg.m2), params.nu, data.N)
            s = estimate_sigma2(data, tg, params)
            rows += [("sigma2_hat", s.value), ("achieved_r", s.r), ("psi", s.psi),
                     ("m1", tg.m1), ("m2", tg.m2)]
        except ValueError as exc:
            rows.append(("sigma2_hat", f"failed: {exc}"))
            failed = True
    _table(rows, as_json)
    if out is not None:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "estimates.json").write_text(json.dumps(dict(rows), indent=2) + "\n")
        except OSError as exc:
            _fail(EXIT_IO, str(exc))
    sys.exit(3 if failed else 0)


@main.command()
@_config_opt
@_profile_opt
@_seed_opt
@click.option("--jobs", type=click.IntRange(1), default=1, show_default=True,
              help="Worker processes.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Output directory (overrides output_dir).")
@click.option("--replicates", type=click.IntRange(1), default=None)
def campaign(config, profile, seed, jobs, out, replicates):
    """Run a Monte Carlo campaign, writing records.csv and summary.json."""
    cfg = _resolve(config, profile, root_seed=seed, output_dir=out, replicates=replicates)
    try:
        prepare_thinned_grid(cfg)
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))
    try:
        result = run_campaign(cfg, jobs=jobs)
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    s = result.summary
    rows = [("config_hash", s["config_hash"]), ("replicates", s["replicates"]),
            ("failed", s["failed"])]
    for name, st in s["estimators"].items():
        for k in ("mean", "sd", "bias"):
            rows.append((f"{name}.{k}", "NA" if st[k] is None else st[k]))
    rows.append(("output", str(Path(cfg.output_dir))))
    _table(rows, False)
    sys.exit(result.exit_code)


@main.group()
def inspect():
    """Rate regimes, beta bounds, design conditions and psi values."""


def _domain(fn):
    try:
        return fn()
    except (DomainError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))


@inspect.command()
@click.option("--alpha", type=float, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--nu", type=float, required=True)
@click.option("--theta0", type=float, default=0.0, show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--truncation", type=click.IntRange(1), default=2000, show_default=True,
              help="Modes per axis in the R series.")
@_json_opt
def rates(alpha, beta, nu, theta0, sigma, truncation, as_json):
    """Asymptotic order of R_{beta,nu} and its truncated series value."""
    def run():
        p = ModelParams(theta0=theta0, sigma=sigma, nu=nu, alpha=alpha)
        reg = rate_regime_theorem1(alpha, beta, nu)
        phi = phi_regime(alpha, beta, nu)
        cfg = RateSeriesConfig(truncation, p)
        return [("regime", reg.expression), ("regime_tag", reg.tag),
                ("order_value", reg.value), ("phi_regime", phi.expression),
                ("phi_tag", phi.tag), ("R", rate_R(beta, cfg)),
                ("R_tail_rel_bound", rate_R_tail_bound(beta, cfg))]
    _table(_domain(run), as_json)


@inspect.command()
@click.option("--alpha", type=float, required=True)
@click.option("--n", "n", type=float, required=True, help="N = nu^-n.")
@click.option("--m", "m", type=float, required=True, help="(M1 ^ M2)^2 = nu^-m.")
@click.option("--ell", type=float, default=None, help="L = nu^-ell (reported only).")
@click.option("--beta", type=float, default=None, help="Also evaluate ell thresholds here.")
@_json_opt
def bounds(alpha, n, m, ell, beta, as_json):
    """Lower bounds on beta and the matching ell thresholds."""
    def run():
        d = DesignExponents(n=n, m=m, ell=ell if ell is not None else 1.0)
        bb = beta_bounds(alpha, d, beta)
        rows = [("beta_cons", bb.beta_cons), ("beta_as_t", bb.beta_as_t),
                ("beta_as_sp", bb.beta_as_sp), ("beta_asym", bb.beta_asym),
                ("ell_cons_at_beta_cons", bb.ell_cons_at_cons),
                ("ell_asym_at_beta_asym", bb.ell_asym_at_asym)]
        if beta is not None:
            rows += [("ell_cons_at_beta", bb.ell_cons_at_beta),
                     ("ell_asym_at_beta", bb.ell_asym_at_beta)]
        return rows
    _table(_domain(run), as_json)


@inspect.command()
@click.option("--alpha", type=float, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--n", "n", type=float, default=None)
@click.option("--m", "m", type=float, default=None)
@click.option("--ell", type=float, default=None)
@click.option("--nu", type=float, default=None, help="With --N/--M/--L: derive exponents.")
@click.option("--N", "N", type=int, default=None)
@click.option("--M", "M", type=int, default=None)
@click.option("--L", "L", type=int, default=None)
@click.option("--p", type=float, default=math.inf, show_default=True, help="Moment order.")
@_json_opt
def conditions(alpha, beta, n, m, ell, nu, N, M, L, p, as_json):
    """Check the consistency and limit-theorem conditions for a design."""
    def run():
        if None not in (nu, N, M, L):
            d = DesignExponents.from_design(nu, N, M, L, p=p)
        elif None not in (n, m, ell):
            d = DesignExponents(n=n, m=m, ell=ell, p=p)
        else:
            raise ValueError("give either --n/--m/--ell or --nu/--N/--M/--L")
        rep = check_design(alpha, beta, d)
        rows = [("n", d.n), ("m", d.m), ("ell", d.ell)]
        rows += [(c.name, f"{'holds' if c.holds else 'fails'}  {c.inequality}  "
                          f"({c.lhs:.6g} vs {c.rhs:.6g})") for c in rep.conditions]
        rows += [("consistency", rep.consistency), ("asymptotic", rep.asymptotic)]
        rows += [(f"note{i}", s) for i, s in enumerate(rep.notes, 1)]
        return rows
    _table(_domain(run), as_json)


@inspect.command()
@click.option("--r", "r", type=float, required=True)
@click.option("--alpha", type=float, required=True)
@click.option("--tol", type=float, default=1e-10, show_default=True)
@_json_opt
def psi(r, alpha, tol, as_json):
    """The volatility normaliser psi(r, alpha) with its error bound."""
    res = _domain(lambda: psi_details(r, alpha, tol))
    _table([("psi", res.value), ("error_bound", res.error_bound), ("x_max", res.x_max),
            ("panels", res.panels), ("backend", kernels.BACKEND)], as_json)


if __name__ == "__main__":  # pragma: no cover
    main()
