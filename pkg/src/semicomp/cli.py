"""Command-line front end: ``semicomp <subcommand> --config run.json``.

Every subcommand reads a JSON config, writes its outputs into the output
directory and leaves ``config.json`` there: the fully resolved config (with
absolute paths and the seed actually used), which reproduces the run when fed
back in.  Exit codes: 0 success, 1 invalid input or config, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .aft import AFTConfig, AFTHyper, init_start_values_aft, mcmc_aft
from .bayes_phr import MCMCConfig, PHRHyper, init_start_values_phr, mcmc_phr, substream
from .data import (
    INTERVAL_OUTCOMES,
    SEMICOMP_OUTCOMES,
    UNIVARIATE_OUTCOMES,
    ColumnBinding,
    DataError,
    ModelSpec,
    load_interval_csv,
    load_semicomp_csv,
    load_univariate_csv,
    to_interval_representation,
    validate,
    write_semicomp_csv,
    write_univariate_csv,
)
from .diagnostics import bayes_baseline_curves, summarize_posterior
from .freq import FreqFit, fit_freq_id, fit_freq_univariate, predict_baseline
from .samples import PosteriorSamples
from .simulate import WeibullIDTruth, simulate_id, simulate_univariate

log = logging.getLogger("semicomp")

SUBCOMMANDS = ("simulate", "fit-freq", "fit-bayes", "fit-aft", "diagnose", "predict")
COVARIATE_STREAM = 20_000


class ConfigError(ValueError):
    """Config missing a field or violating an invariant; the message names the field."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="semicomp", description="Simulate, fit and diagnose semi-competing risks models.")
    p.add_argument("subcommand", help=" | ".join(SUBCOMMANDS))
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="chains run concurrently up to this limit")
    p.add_argument("--output-dir", help="output directory (overrides the config)")
    return p


def _require(cfg: dict, key: str, where: str = ""):
    if key not in cfg:
        raise ConfigError(f"{where}{key}: required field missing")
    return cfg[key]


def _path(cfg: dict, key: str, base: Path) -> Path:
    p = Path(_require(cfg, key))
    p = (base / p) if not p.is_absolute() else p
    if not p.exists():
        raise ConfigError(f"{key}: file {p} does not exist")
    return p.resolve()


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_curves(path: Path, curves):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["g", "kind", "t", "point", "lower", "upper"])
        for c in curves:
            for i, t in enumerate(c.times):
                lo = "" if c.lower is None else repr(float(c.lower[i]))
                hi = "" if c.upper is None else repr(float(c.upper[i]))
                w.writerow(["" if c.transition is None else c.transition, c.kind, repr(float(t)),
                            repr(float(c.point[i])), lo, hi])


def _spec(cfg: dict, framework: str, **force) -> ModelSpec:
    d = dict(cfg.get("model", {}))
    d.update(force)
    d["framework"] = framework
    try:
        return ModelSpec.from_dict(d)
    except ValueError as e:
        raise ConfigError(f"model.{e}") from None


def _binding(cfg: dict, outcomes) -> ColumnBinding:
    try:
        return ColumnBinding.from_dict(cfg.get("binding", {}), default_outcomes=outcomes)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _check_valid(dataset):
    bad = validate(dataset)
    if bad:
        raise ConfigError(f"data: {len(bad)} invalid records; first at row {bad[0].index + 1}: {bad[0].message}")


# --- subcommands -------------------------------------------------------------


def _covariates(sim: dict, base: Path, seed: int):
    """Covariate table (name -> column) from a file or a generator spec."""
    if "covariate_file" in sim:
        path = _path(sim, "covariate_file", base)
        sim["covariate_file"] = str(path)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        return {h: np.array([float(r[j]) for r in body]) for j, h in enumerate(header)}, len(body)
    n = int(_require(sim, "n", "simulate."))
    if n < 0:
        raise ConfigError("simulate.n: must be non-negative")
    rng = substream(seed, COVARIATE_STREAM)
    table = {}
    for name, spec in sorted(sim.get("generate", {}).items()):
        dist = spec.get("dist", "normal")
        if dist == "normal":
            table[name] = rng.normal(spec.get("mean", 0.0), spec.get("sd", 1.0), n)
        elif dist == "bernoulli":
            table[name] = (rng.random(n) < spec.get("p", 0.5)).astype(float)
        else:
            raise ConfigError(f"simulate.generate.{name}.dist: unknown distribution {dist!r}")
    return table, n


def _block(table, names, n, label):
    for nm in names:
        if nm not in table:
            raise ConfigError(f"simulate.{label}: unknown covariate {nm!r}")
    return np.column_stack([table[nm] for nm in names]) if names else np.zeros((n, 0))


def cmd_simulate(cfg: dict, base: Path, out: Path, seed: int, threads: int):
    sim = _require(cfg, "simulate")
    table, n = _covariates(sim, base, seed)
    J = sim.get("n_clusters")
    cluster_of = None if J is None else (np.arange(n) % int(J)) + 1
    truth = _require(sim, "truth", "simulate.")
    if sim.get("analysis", "illness-death") == "univariate":
        names = tuple(sim.get("x", ()))
        data = simulate_univariate(_block(table, names, n, "x"), truth["alpha"], truth["kappa"], truth.get("beta", ()),
                                   truth.get("cens", (0.0, 0.0)), seed, cluster_of=cluster_of,
                                   sigmaV2=truth.get("sigmaV2", 0.0), names=names)
        write_univariate_csv(out / "data.csv", data)
        return
    try:
        wt = WeibullIDTruth(alpha=truth["alpha"], kappa=truth["kappa"], beta1=truth.get("beta1", ()),
                            beta2=truth.get("beta2", ()), beta3=truth.get("beta3", ()),
                            theta=truth.get("theta", 0.0), SigmaV=truth.get("SigmaV"),
                            cens=truth.get("cens", (0.0, 0.0)))
    except KeyError as e:
        raise ConfigError(f"simulate.truth.{e.args[0]}: required field missing") from None
    except ValueError as e:
        raise ConfigError(f"simulate.truth.{e}") from None
    names = [tuple(sim.get(f"x{g}", ())) for g in (1, 2, 3)]
    X = [_block(table, names[g - 1], n, f"x{g}") for g in (1, 2, 3)]
    if (cluster_of is None) != (wt.SigmaV is None):
        raise ConfigError("simulate.n_clusters: required exactly when truth.SigmaV is given")
    data = simulate_id(*X, wt, seed, cluster_of=cluster_of, names=names)
    write_semicomp_csv(out / "data.csv", data)


def _load_phr_data(cfg, base, spec):
    path = _path(cfg, "data", base)
    cfg["data"] = str(path)
    if spec.analysis == "univariate":
        return load_univariate_csv(path, _binding(cfg, UNIVARIATE_OUTCOMES))
    data = load_semicomp_csv(path, _binding(cfg, SEMICOMP_OUTCOMES))
    _check_valid(data)
    return data


def cmd_fit_freq(cfg: dict, base: Path, out: Path, seed: int, threads: int):
    spec = _spec(cfg, "frequentist")
    data = _load_phr_data(cfg, base, spec)
    opts = cfg.get("options", {})
    fixed = opts.get("fixed")
    kw = dict(max_iter=int(opts.get("max_iter", 500)), tol=float(opts.get("tol", 1e-8)), fixed=fixed)
    fit = fit_freq_univariate(data, **kw) if spec.analysis == "univariate" else fit_freq_id(data, spec, **kw)
    (out / "fit.json").write_text(fit.to_json() + "\n", encoding="utf-8")
    if not fit.converged:
        log.warning("optimizer did not converge: %s", fit.message)
    if "tgrid" in cfg and fit.converged:
        _write_curves(out / "curves.csv", predict_baseline(fit, cfg["tgrid"], float(cfg.get("level", 0.95))))


def _summaries(samples: PosteriorSamples, out: Path, level: float):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        table = summarize_posterior(samples, level)
    for w in caught:
        log.warning("%s", w.message)
    (out / "summary.txt").write_text(table.to_text(), encoding="utf-8")
    (out / "summary.csv").write_text(table.to_csv(), encoding="utf-8")


def cmd_fit_bayes(cfg: dict, base: Path, out: Path, seed: int, threads: int):
    spec = _spec(cfg, "bayesian")
    if spec.family != "PHR":
        raise ConfigError("model.family: fit-bayes fits PHR models; use fit-aft for AFT")
    if spec.analysis != "illness-death":
        raise ConfigError("model.analysis: Bayesian fitting covers illness-death data")
    data = _load_phr_data(cfg, base, spec)
    try:
        hyper = PHRHyper.from_dict(cfg.get("hyper", {}))
        mc = dict(_require(cfg, "mcmc"))
        mc["seed"] = seed
        config = MCMCConfig.from_dict(mc)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"hyper/mcmc: {e}") from None
    starts = init_start_values_phr(data, spec, hyper, config.n_chains, seed, sg_max=config.sg_max,
                                   kg_max=config.Kg_max, rj_scheme=config.rj_scheme)
    samples = mcmc_phr(data, spec, hyper, starts, config, threads=threads)
    samples.write(out / "samples")
    _summaries(samples, out, float(cfg.get("level", 0.95)))


def cmd_fit_aft(cfg: dict, base: Path, out: Path, seed: int, threads: int):
    _spec(cfg, "bayesian", family="AFT", baseline="LogNormal", h3="semi-Markov")
    path = _path(cfg, "data", base)
    cfg["data"] = str(path)
    fmt = cfg.get("format", "semicomp")
    if fmt == "semicomp":
        rc = load_semicomp_csv(path, _binding(cfg, SEMICOMP_OUTCOMES))
        _check_valid(rc)
        data = to_interval_representation(rc)
    elif fmt == "interval":
        data = load_interval_csv(path, _binding(cfg, INTERVAL_OUTCOMES))
    else:
        raise ConfigError(f"format: unknown data format {fmt!r}")
    try:
        hyper = AFTHyper(**cfg.get("hyper", {}))
        mc = dict(_require(cfg, "mcmc"))
        mc["seed"] = seed
        config = AFTConfig(**mc)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"hyper/mcmc: {e}") from None
    starts = init_start_values_aft(data, config.n_chains, seed)
    samples = mcmc_aft(data, hyper, starts, config, threads=threads)
    samples.write(out / "samples")
    _summaries(samples, out, float(cfg.get("level", 0.95)))


def cmd_diagnose(cfg: dict, base: Path, out: Path, seed: int, threads: int):
    src = _path(cfg, "samples", base)
    cfg["samples"] = str(src)
    _summaries(PosteriorSamples.read(src), out, float(cfg.get("level", 0.95)))


def cmd_predict(cfg: dict, base: Path, out: Path, seed: int, threads: int):
    tgrid = _require(cfg, "tgrid")
    level = float(cfg.get("level", 0.95))
    if "fit" in cfg:
        src = _path(cfg, "fit", base)
        cfg["fit"] = str(src)
        fit = FreqFit.from_dict(json.loads(src.read_text(encoding="utf-8")))
        curves = predict_baseline(fit, tgrid, level)
    else:
        src = _path(cfg, "samples", base)
        cfg["samples"] = str(src)
        samples = PosteriorSamples.read(src)
        kinds = cfg.get("kind", ["Surv", "Haz"])
        curves = [c for k in ([kinds] if isinstance(kinds, str) else kinds)
                  for c in bayes_baseline_curves(samples, tgrid, level, k)]
    _write_curves(out / "curves.csv", curves)


COMMANDS = {
    "simulate": cmd_simulate,
    "fit-freq": cmd_fit_freq,
    "fit-bayes": cmd_fit_bayes,
    "fit-aft": cmd_fit_aft,
    "diagnose": cmd_diagnose,
    "predict": cmd_predict,
}


def run_cli(argv=None) -> int:
    """Run one subcommand; returns the process exit code."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand not in COMMANDS:
            parser.print_help(sys.stderr)
            raise ConfigError(f"unknown subcommand {args.subcommand!r}")
        cfg_path = Path(args.config).resolve()
        if not cfg_path.exists():
            raise ConfigError(f"--config: file {cfg_path} does not exist")
        try:
            cfg = json.loads(cfg_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"--config: invalid JSON ({e})") from None
        if not isinstance(cfg, dict):
            raise ConfigError("--config: top level must be a JSON object")
        base = cfg_path.parent
        seed = args.seed if args.seed is not None else cfg.get("seed")
        if seed is None:
            raise ConfigError("seed: required (in the config or via --seed)")
        seed = int(seed)
        out = args.output_dir or cfg.get("output_dir")
        if out is None:
            raise ConfigError("output_dir: required (in the config or via --output-dir)")
        out = Path(out)
        out = (base / out if not out.is_absolute() and not args.output_dir else out).resolve()
        if args.threads < 1:
            raise ConfigError("--threads: must be at least 1")
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.subcommand](cfg, base, out, seed, args.threads)
        cfg["seed"] = seed
        cfg["output_dir"] = str(out)
        cfg["subcommand"] = args.subcommand
        _write_json(out / "config.json", cfg)
    except (ConfigError, DataError, KeyError, TypeError, ValueError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run_cli())
