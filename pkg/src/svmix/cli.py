"""Batch command-line interface.

Subcommands: ``simulate`` (synthetic data), ``fit`` (MCMC), ``marglik``
(model comparison), ``report-data`` (plot-ready CSV files).  Options can
come from a ``key = value`` config file (``--config``); explicit flags
override config keys, and SVMIX_OUTDIR supplies the default output
directory.  All numeric output is written at 17 significant digits so
files round-trip bit-exactly; every command is deterministic given its
seed (wall-clock timing goes to a separate timing.txt).

Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .diagnostics import autocorrelations, summarize, volatility_proxy
from .errors import ConfigurationError, DataError, NumericalError
from .marglik import CjConfig, chib_marglik
from .mixture import approx_density, build_grid, exact_log_chisq1_density
from .model import PriorSpec, SvmParams, simulate
from .particle import PfConfig
from .samplers import McmcConfig, run_chain
from .validation import check_series

FMT = "%.17g"


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------


def parse_config_file(path: str) -> dict[str, str]:
    """Read ``key = value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, val = line.split("=", 1)
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Apply config-file values underneath explicit flags."""
    if not getattr(args, "config", None):
        return args
    file_vals = parse_config_file(args.config)
    # an option counts as explicit when it differs from the subcommand default
    sub = args._subparser
    defaults = {a.dest: sub.get_default(a.dest) for a in sub._actions}
    for key, raw in file_vals.items():
        if key not in defaults:
            raise ConfigurationError(f"unknown config key {key!r}")
        if getattr(args, key) == defaults[key]:
            setattr(args, key, raw)
    return args


def _outdir(args) -> Path:
    out = args.out or os.environ.get("SVMIX_OUTDIR", ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    arr = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, arr, delimiter=",", header=",".join(header), comments="", fmt=FMT)


def _write_kv(path: Path, items: dict) -> None:
    lines = []
    for k, v in items.items():
        if isinstance(v, float):
            lines.append(f"{k} = {v:.17g}")
        else:
            lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")


def _read_named_csv(path: str) -> tuple[list[str], np.ndarray]:
    try:
        with open(path) as fh:
            header = fh.readline().strip()
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc
    names = [c.strip() for c in header.split(",")]
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(names):
        raise DataError(f"{path}: header names {len(names)} columns, data has {data.shape[1]}")
    return names, data


def _load_series(path: str, column: str | None) -> np.ndarray:
    names, data = _read_named_csv(path)
    if column is None:
        if len(names) != 1:
            raise DataError(f"{path} has columns {names}; pick one with --column")
        col = 0
    else:
        if column not in names:
            raise DataError(f"column {column!r} not in {path} (has {names})")
        col = names.index(column)
    return check_series(data[:, col], name=f"{path}:{column or names[0]}")


def _as_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def _parse_int_list(text: str) -> tuple[int, ...]:
    if not text:
        return ()
    return tuple(int(tok) for tok in str(text).split(",") if tok.strip())


def _parse_float_list(text: str) -> tuple[float, ...]:
    if not text:
        return ()
    return tuple(float(tok) for tok in str(text).split(",") if tok.strip())


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    out = _outdir(args)
    n = int(args.n)
    rho = None if args.rho in (None, "", "none") else float(args.rho)
    params = SvmParams(mu=float(args.mu), phi=float(args.phi),
                       sigma2=float(args.sigma) ** 2, beta=float(args.beta), rho=rho)
    params.validate()
    rng = np.random.default_rng(int(args.seed))
    y, h = simulate(params, n, rng)
    prefix = args.prefix
    _write_csv(out / f"{prefix}_y.csv", ["y"], [y])
    _write_csv(out / f"{prefix}_h.csv", ["h"], [h])
    truth = {"mu": params.mu, "phi": params.phi, "sigma2": params.sigma2,
             "beta": params.beta, "n": n, "seed": int(args.seed)}
    if rho is not None:
        truth["rho"] = rho
    _write_kv(out / f"{prefix}_params.txt", truth)
    return 0


def _mcmc_config(args, model: str, algorithm: str, seed: int) -> McmcConfig:
    return McmcConfig(
        n_burnin=int(args.burnin),
        n_draws=int(args.draws),
        algorithm=algorithm,
        model=model,
        mix_order=int(args.j),
        offset=float(args.c),
        seed=seed,
        flat_proposal_scale=float(args.c0),
        store_h_indices=_parse_int_list(args.h_indices),
        store_h_thin=int(args.h_thin),
        correction=not _as_bool(args.no_correction),
    )


def _summary_rows(chain) -> tuple[list[str], np.ndarray]:
    rows = []
    names = []
    for i, name in enumerate(chain.param_names):
        s = summarize(chain.draws[:, i])
        names.append(name)
        rows.append([s.mean, s.sd, s.q025, s.q975, s.inefficiency, s.prob_positive])
        if name == "sigma2":
            s2 = summarize(np.sqrt(chain.draws[:, i]))
            names.append("sigma")
            rows.append([s2.mean, s2.sd, s2.q025, s2.q975, s2.inefficiency, s2.prob_positive])
    for k, idx in enumerate(chain.h_indices):
        s = summarize(chain.h_draws[:, k])
        names.append(f"h_{idx}")
        rows.append([s.mean, s.sd, s.q025, s.q975, s.inefficiency, s.prob_positive])
    return names, np.asarray(rows)


def _write_chain_outputs(out: Path, tag: str, chain) -> None:
    _write_csv(out / f"chain_theta{tag}.csv", list(chain.param_names),
               [chain.draws[:, i] for i in range(chain.draws.shape[1])])
    if chain.h_indices:
        _write_csv(out / f"chain_h{tag}.csv",
                   [f"h_{i}" for i in chain.h_indices],
                   [chain.h_draws[:, k] for k in range(chain.h_draws.shape[1])])
    if chain.h_paths.shape[0]:
        header = ["iter"] + [f"h_{t + 1}" for t in range(chain.h_paths.shape[1])]
        arr = np.column_stack([chain.h_path_iters.astype(float), chain.h_paths])
        np.savetxt(out / f"chain_h_paths{tag}.csv", arr, delimiter=",",
                   header=",".join(header), comments="", fmt=FMT)
    names, rows = _summary_rows(chain)
    with open(out / f"summary{tag}.csv", "w") as fh:
        fh.write("name,mean,sd,q025,q975,inefficiency,prob_positive\n")
        for nm, row in zip(names, rows):
            fh.write(nm + "," + ",".join(FMT % v for v in row) + "\n")
    cfg = chain.config
    info = {
        "model": cfg.model, "algorithm": cfg.algorithm,
        "n_burnin": cfg.n_burnin, "n_draws": cfg.n_draws,
        "mix_order": cfg.mix_order, "offset": cfg.offset, "seed": cfg.seed,
        "flat_proposal_scale": cfg.flat_proposal_scale,
        "store_h_indices": ",".join(str(i) for i in cfg.store_h_indices),
        "store_h_thin": cfg.store_h_thin, "correction": cfg.correction,
        "accept_alpha": chain.accept_alpha,
        "accept_correction": chain.accept_correction,
    }
    _write_kv(out / f"run_info{tag}.txt", info)
    _write_kv(out / f"timing{tag}.txt", {"elapsed_seconds": chain.elapsed})


def _run_one_chain(payload):
    y, priors, config = payload
    return run_chain(y, priors, config)


def cmd_fit(args) -> int:
    out = _outdir(args)
    y = _load_series(args.data, args.column)
    priors = _priors_from_args(args)
    n_chains = int(args.chains)
    if n_chains < 1:
        raise ConfigurationError("--chains must be >= 1")
    configs = [
        _mcmc_config(args, args.model, args.algorithm, int(args.seed) + k)
        for k in range(n_chains)
    ]
    for cfg in configs:
        cfg.validate()
    if n_chains == 1:
        chains = [run_chain(y, priors, configs[0])]
    else:
        with ProcessPoolExecutor(max_workers=n_chains) as pool:
            chains = list(pool.map(_run_one_chain, [(y, priors, c) for c in configs]))
    for k, chain in enumerate(chains):
        tag = "" if n_chains == 1 else f"_chain{k}"
        _write_chain_outputs(out, tag, chain)
    return 0


def _priors_from_args(args) -> PriorSpec:
    pri = PriorSpec(
        mu0=float(args.prior_mu0), sigma0_sq=float(args.prior_mu_var),
        phi_a=float(args.prior_phi_a), phi_b=float(args.prior_phi_b),
        n0=float(args.prior_n0), s0=float(args.prior_s0),
        b0=float(args.prior_b0), B0=float(args.prior_beta_var),
    )
    pri.validate()
    return pri


def cmd_marglik(args) -> int:
    out = _outdir(args)
    y = _load_series(args.data, args.column)
    priors = _priors_from_args(args)
    models = [m.strip() for m in str(args.models).split(",") if m.strip()]
    rows = []
    for k, model in enumerate(models):
        seed = int(args.seed) + 1000 * k
        cfg = _mcmc_config(args, model, "ordinate", seed)
        if cfg.store_h_thin == 0:
            cfg.store_h_thin = max(1, cfg.n_draws // 2000)
        cfg.validate()
        chain = run_chain(y, priors, cfg)
        result = chib_marglik(
            y, priors, model, chain,
            PfConfig(n_particles=int(args.particles), seed=seed + 1),
            CjConfig(n_reduced_burnin=int(args.reduced_burnin),
                     n_reduced=int(args.reduced), n_batches=int(args.batches),
                     pf_reps=int(args.pf_reps)),
            np.random.default_rng(seed + 2),
        )
        gap = result.identity_gap()
        print(f"{model}: log m(y) = {result.log_marglik:.3f} (se {result.standard_error:.3f}), "
              f"identity gap = {gap:.3e}")
        if gap != 0.0:
            raise NumericalError("marginal-likelihood identity failed to recombine")
        rows.append([model, result.log_marglik, result.loglik, result.log_prior,
                     result.log_posterior, result.standard_error, result.se_pf,
                     result.se_ordinate])
    with open(out / "marglik.csv", "w") as fh:
        fh.write("model,log_marglik,loglik,log_prior,log_posterior,se,se_pf,se_ordinate\n")
        for row in rows:
            fh.write(row[0] + "," + ",".join(FMT % v for v in row[1:]) + "\n")
    return 0


def cmd_report_data(args) -> int:
    out = _outdir(args)
    wrote = False
    betas = _parse_float_list(args.density_betas)
    if betas:
        u = np.arange(-15.0, 5.0 + 1e-9, 0.01)
        for b in betas:
            grid = build_grid(b, int(args.j))
            exact = np.array([exact_log_chisq1_density(v, b * b, 1e-10) for v in u])
            approx = approx_density(u, grid)
            _write_csv(out / f"density_beta{b:g}.csv", ["u", "exact", "approx", "diff"],
                       [u, exact, approx, exact - approx])
        wrote = True
    if args.chain:
        names, data = _read_named_csv(args.chain)
        iters = np.arange(data.shape[0], dtype=float)
        for i, name in enumerate(names):
            _write_csv(out / f"trace_{name}.csv", ["iteration", "value"], [iters, data[:, i]])
            lags = np.arange(int(args.max_lag) + 1, dtype=float)
            rho = np.concatenate([[1.0], autocorrelations(data[:, i], int(args.max_lag))])
            _write_csv(out / f"acf_{name}.csv", ["lag", "acf"], [lags, rho])
        wrote = True
    if args.h_paths:
        if not args.data:
            raise ConfigurationError("band output needs --data alongside --h-paths")
        names, paths = _read_named_csv(args.h_paths)
        if names and names[0] == "iter":
            paths = paths[:, 1:]
        y = _load_series(args.data, args.column)
        if paths.shape[1] != y.shape[0]:
            raise DataError("h-paths width does not match the data length")
        beta_hat = float(args.beta_hat)
        lower, med, upper = np.quantile(paths, [0.025, 0.5, 0.975], axis=0)
        proxy = volatility_proxy(y, beta_hat, offset=float(args.c),
                                 rng=np.random.default_rng(int(args.seed)))
        t = np.arange(1, y.shape[0] + 1, dtype=float)
        _write_csv(out / "band.csv", ["t", "lower", "median", "upper", "proxy"],
                   [t, lower, med, upper, proxy])
        wrote = True
    if not wrote:
        raise ConfigurationError(
            "report-data needs --density-betas, --chain, or --h-paths to produce output"
        )
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--out", default=None, help="output directory (default $SVMIX_OUTDIR or .)")
    p.add_argument("--seed", default=0, type=int)


def _add_mcmc_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default="svm", help="sv | svm | svl | svml")
    p.add_argument("--burnin", default=10_000)
    p.add_argument("--draws", default=50_000)
    p.add_argument("--j", default=2, help="mixture truncation order J")
    p.add_argument("--c", default=1e-7, help="offset inside log(y^2 + c)")
    p.add_argument("--c0", default=1.0, help="flat-proposal scale")
    p.add_argument("--h-indices", default="", help="1-based h indices to store, e.g. 250,750")
    p.add_argument("--h-thin", default=0, help="store every k-th full h path (0 = off)")
    p.add_argument("--no-correction", action="store_true",
                   help="skip the svml exact-correction step")
    p.add_argument("--prior-mu0", default=0.0)
    p.add_argument("--prior-mu-var", default=9.0)
    p.add_argument("--prior-phi-a", default=1.0)
    p.add_argument("--prior-phi-b", default=1.0)
    p.add_argument("--prior-n0", default=0.001)
    p.add_argument("--prior-s0", default=0.001)
    p.add_argument("--prior-b0", default=0.0)
    p.add_argument("--prior-beta-var", default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svmix", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate synthetic data")
    _add_common(p_sim)
    p_sim.add_argument("--n", default=1000)
    p_sim.add_argument("--mu", default=0.0)
    p_sim.add_argument("--phi", default=0.97)
    p_sim.add_argument("--sigma", default=0.3)
    p_sim.add_argument("--beta", default=0.0)
    p_sim.add_argument("--rho", default=None)
    p_sim.add_argument("--prefix", default="sim")
    p_sim.set_defaults(func=cmd_simulate, _subparser=p_sim)

    p_fit = sub.add_parser("fit", help="run an MCMC chain")
    _add_common(p_fit)
    _add_mcmc_options(p_fit)
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--column", default=None)
    p_fit.add_argument("--algorithm", default="gms", help="gms | gmh | svml | ordinate")
    p_fit.add_argument("--chains", default=1, help="independent chains run concurrently")
    p_fit.set_defaults(func=cmd_fit, _subparser=p_fit)

    p_ml = sub.add_parser("marglik", help="log marginal likelihood per model")
    _add_common(p_ml)
    _add_mcmc_options(p_ml)
    p_ml.add_argument("--data", required=True)
    p_ml.add_argument("--column", default=None)
    p_ml.add_argument("--models", default="svm", help="comma list, e.g. sv,svm,svl,svml")
    p_ml.add_argument("--particles", default=80_000)
    p_ml.add_argument("--pf-reps", default=10)
    p_ml.add_argument("--reduced", default=5000)
    p_ml.add_argument("--reduced-burnin", default=500)
    p_ml.add_argument("--batches", default=10)
    p_ml.set_defaults(func=cmd_marglik, _subparser=p_ml)

    p_rep = sub.add_parser("report-data", help="emit plot-ready CSV files")
    _add_common(p_rep)
    p_rep.add_argument("--density-betas", default="", help="comma list of beta values")
    p_rep.add_argument("--j", default=2)
    p_rep.add_argument("--chain", default=None, help="chain_theta.csv for traces/ACFs")
    p_rep.add_argument("--max-lag", default=500)
    p_rep.add_argument("--h-paths", default=None, help="chain_h_paths.csv for the band file")
    p_rep.add_argument("--data", default=None)
    p_rep.add_argument("--column", default=None)
    p_rep.add_argument("--beta-hat", default=0.0)
    p_rep.add_argument("--c", default=1e-7)
    p_rep.set_defaults(func=cmd_report_data, _subparser=p_rep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _resolve(args)
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
