"""Command-line interface.

Every subcommand writes its outputs atomically into an output directory
together with ``manifest.json`` (config hash, seeds, output digests). Tables
are also printed to stdout as CSV. Exit status: 0 ok, 2 bad configuration,
3 inconsistent data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import recipes
from .augmentation import (
    InconsistentReports,
    MaxAttemptsExceeded,
    NoPossibleInfector,
    darci,
    extract_intervals,
    fill_recoveries,
    mh_impute,
    reject_impute,
)
from .core import DEFAULT_PARAMS, PARAM_NAMES, IncompatibleEvent, ModelParams, ProcessState
from .estimators import (
    GammaDist,
    NoRoot,
    PriorSet,
    confidence_intervals,
    mle_closed,
    mle_open_labeled,
    mle_open_numeric,
    posterior_params,
)
from .ingest import ContactPing, MissingOnset, SurveyRow, ingest_period, synthetic_study
from .likelihood import InvalidTrace, SufficientStats, sufficient_stats
from .mcmc import METHODS, Chain, DegenerateChain, ImputationError, diagnostics, gibbs_run
from .simulator import (
    PartialData,
    SimConfig,
    erdos_renyi_edges,
    hubnet_edges,
    make_rng,
    simulate,
    synthesize_missingness,
)
from .storage import (
    BundleError,
    atomic_write,
    bundle_variant,
    chain_from_csv,
    chain_to_csv,
    csv_text,
    output_root,
    read_bundle,
    read_json,
    state_from_json,
    write_bundle,
    write_json,
    write_manifest,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
VARIANTS = ("sir-closed", "sir-open", "sis")
RECIPES = ("table2", "fig2", "fig5", "fig6", "table4", "table5", "table6")

DATA_ERRORS = (
    BundleError,
    InconsistentReports,
    InvalidTrace,
    IncompatibleEvent,
    NoPossibleInfector,
    MissingOnset,
)
NUMERIC_ERRORS = (NoRoot, DegenerateChain, MaxAttemptsExceeded)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Resolved settings of one run; recorded in the manifest."""

    command: str
    variant: str = "sir-closed"
    params: dict = field(default_factory=dict)
    priors: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    missingness: dict = field(default_factory=dict)
    mcmc: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    output: str = ""

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.variant == "sir-open" and self.params and self.params.get("xi") is None:
            raise ConfigError("variant sir-open needs an external infection rate (xi)")
        if self.variant != "sir-open" and self.params.get("xi") is not None:
            raise ConfigError("xi is only valid for variant sir-open")


# -- argument parsing -----------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters")
    for name in PARAM_NAMES:
        g.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float, default=getattr(DEFAULT_PARAMS, name))
    g.add_argument("--xi", type=float, default=None, help="external infection rate (open population)")


def _add_common(p: argparse.ArgumentParser, seed: bool = True) -> None:
    p.add_argument("--out", type=Path, default=None, help="output directory")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netepi", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=None, help="INI file with defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a coupled epidemic/network trace")
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--graph", default="er:0.1", help="er:P, hubnet:P or a path to an initial-state JSON")
    p.add_argument("--i0", type=int, default=1)
    p.add_argument("--t-max", dest="t_max", type=float, default=60.0)
    p.add_argument("--variant", choices=VARIANTS, default="sir-closed")
    p.add_argument("--eta", type=float, default=0.0, help="fraction of recovery times to remove")
    p.add_argument("--report-period", dest="report_period", type=float, default=7.0)
    _add_params(p)
    _add_common(p)

    p = sub.add_parser("stats", help="sufficient statistics of a bundle")
    p.add_argument("bundles", nargs="+", type=Path)
    _add_common(p, seed=False)

    p = sub.add_parser("mle", help="maximum likelihood estimates")
    p.add_argument("bundles", nargs="+", type=Path)
    p.add_argument("--network", choices=("dynamic", "static", "mixing"), default="dynamic")
    p.add_argument("--level", type=float, default=0.95)
    _add_common(p, seed=False)

    p = sub.add_parser("bayes", help="conjugate Gamma posteriors from complete data")
    p.add_argument("bundles", nargs="+", type=Path)
    p.add_argument("--priors", type=Path, default=None, help="INI file with a [priors] section")
    p.add_argument("--level", type=float, default=0.95)
    _add_common(p, seed=False)

    p = sub.add_parser("impute", help="impute missing recovery times once")
    p.add_argument("bundle", type=Path)
    p.add_argument("--method", choices=("darci", "reject", "mh"), default="darci")
    p.add_argument("--gamma", type=float, default=DEFAULT_PARAMS.gamma)
    _add_common(p)

    p = sub.add_parser("bayes-run", help="data-augmented Gibbs sampler")
    p.add_argument("bundles", nargs="+", type=Path)
    p.add_argument("--method", choices=METHODS, default="darci")
    p.add_argument("--iters", type=_positive_int, default=1200)
    p.add_argument("--burnin", type=int, default=200)
    p.add_argument("--thin", type=_positive_int, default=1)
    p.add_argument("--priors", type=Path, default=None)
    _add_common(p)

    p = sub.add_parser("diagnose", help="ESS and Geweke diagnostics of chain files")
    p.add_argument("chains", nargs="+", type=Path)
    _add_common(p, seed=False)

    p = sub.add_parser("ingest", help="preprocess ping and survey logs")
    p.add_argument("--pings", type=Path, default=None)
    p.add_argument("--surveys", type=Path, default=None)
    p.add_argument("--n", type=_positive_int, default=103)
    p.add_argument("--t-max", dest="t_max", type=float, default=None)
    p.add_argument("--synthetic", action="store_true", help="generate two-period synthetic logs first")
    p.add_argument("--rssi-min", dest="rssi_min", type=int, default=-90)
    p.add_argument("--gap", type=float, default=7.5, help="minutes")
    p.add_argument("--jitter-min", dest="jitter_min", type=float, default=1.0, help="minutes")
    p.add_argument("--jitter-max", dest="jitter_max", type=float, default=6.0, help="minutes")
    p.add_argument("--delay-max", dest="delay_max", type=float, default=3.0, help="days")
    p.add_argument("--window", type=float, default=3.0, help="days")
    _add_common(p)

    p = sub.add_parser("bench-timing", help="per-draw imputation timings")
    p.add_argument("--repeats", type=_positive_int, default=200)
    p.add_argument("--methods", default="darci,reject")
    _add_common(p)

    p = sub.add_parser("reproduce", help="run a named experiment")
    p.add_argument("recipe", choices=RECIPES)
    p.add_argument("--replicates", type=_positive_int, default=None)
    p.add_argument("--method", choices=METHODS, default="darci")
    p.add_argument("--jobs", type=_positive_int, default=1)
    _add_common(p)
    return parser


def _config_defaults(path: Path) -> dict[str, str]:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    out = {}
    for section in cp.sections():
        if section == "priors":
            continue
        for key, value in cp[section].items():
            out[key.replace("-", "_")] = value
    return out


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path, default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config is not None:
        defaults = _config_defaults(known.config)
        for action in parser._subparsers._group_actions:  # type: ignore[union-attr]
            for sp in action.choices.values():
                dests = {a.dest for a in sp._actions}
                sp.set_defaults(**{k: v for k, v in defaults.items() if k in dests})
    args = parser.parse_args(argv)
    if known.config is not None:
        # string defaults from the config file go through each option's type
        args = parser.parse_args(argv)
    return args


def read_priors(path: Path | None, open_population: bool) -> PriorSet:
    if path is None:
        return PriorSet.default(open_population=open_population)
    cp = configparser.ConfigParser()
    if not cp.read(path) or "priors" not in cp:
        raise ConfigError(f"{path} has no [priors] section")
    values = {}
    for key, text in cp["priors"].items():
        try:
            shape, rate = (float(x) for x in text.replace(",", " ").split())
        except ValueError as exc:
            raise ConfigError(f"prior {key}: expected 'shape, rate', got {text!r}") from exc
        values[key] = (shape, rate)
    if open_population and "xi" not in values:
        values["xi"] = (PriorSet.default(True).xi.shape, PriorSet.default(True).xi.rate)
    try:
        return PriorSet.from_mapping(values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- helpers -------------------------------------------------------------------------


def _out_dir(args) -> Path:
    return args.out if args.out is not None else output_root() / args.command


def _emit(out: Path, name: str, text: str, written: list, echo: bool = True) -> None:
    atomic_write(out / name, text)
    written.append(out / name)
    if echo:
        sys.stdout.write(text)


def _finish(cfg: ExperimentConfig, out: Path, written: list) -> None:
    config = asdict(cfg)
    config.pop("output")
    write_manifest(out, cfg.command, config, cfg.seeds, written)


def _params_from_args(args) -> ModelParams:
    values = {n: getattr(args, n) for n in PARAM_NAMES}
    values["xi"] = args.xi
    try:
        return ModelParams.from_mapping(values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _initial_graph(spec: str, n: int, rng: np.random.Generator) -> ProcessState:
    kind, _, arg = spec.partition(":")
    if kind in ("er", "hubnet") and arg:
        try:
            p = float(arg)
        except ValueError as exc:
            raise ConfigError(f"bad graph probability in {spec!r}") from exc
        if not 0 <= p <= 1:
            raise ConfigError(f"graph probability must lie in [0, 1], got {p}")
        edges = erdos_renyi_edges(n, p, rng) if kind == "er" else hubnet_edges(n, p, rng)
        return ProcessState.initial(n, [], edges)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"graph spec {spec!r} is neither er:P, hubnet:P nor an existing file")
    return state_from_json(read_json(path))


def _load_bundles(paths: Sequence[Path]) -> list[PartialData]:
    return [read_bundle(p) for p in paths]


def _complete_stats(partials: Sequence[PartialData], variant: str = "sir") -> SufficientStats:
    total = None
    for pd in partials:
        if variant == "sir" and len(pd.report_times) and extract_intervals(pd):
            raise InconsistentReports(
                "bundle has recovery times missing from the trace; use bayes-run"
            )
        st = sufficient_stats(
            pd.g0, pd.events, pd.t_max, variant=variant, open_population=pd.open_population
        )
        total = st if total is None else total + st
    assert total is not None
    return total


def _stats_rows(st: SufficientStats) -> list[list]:
    rows = [[name, k, e] for name, (k, e) in st.counts_and_exposures().items()]
    rows.append(["n_e", st.n_e, None])
    rows.append(["n_r", st.n_r, None])
    if st.n_e_int is not None:
        rows.append(["n_e_internal", st.n_e_int, st.exp_si])
        rows.append(["n_e_external", st.n_e_ext, st.exp_s])
    return rows


# -- subcommands ----------------------------------------------------------------------


def cmd_simulate(args) -> int:
    params = _params_from_args(args)
    cfg = ExperimentConfig(
        "simulate",
        variant=args.variant,
        params=params.as_dict(),
        simulation={"n": args.n, "graph": args.graph, "i0": args.i0, "t_max": args.t_max},
        missingness={"eta": args.eta, "report_period": args.report_period},
        seeds=[args.seed],
    )
    if not 0 <= args.i0 <= args.n:
        raise ConfigError(f"i0 must lie in [0, {args.n}]")
    if not 0 <= args.eta <= 1:
        raise ConfigError("eta must lie in [0, 1]")
    if args.variant == "sis" and args.eta > 0:
        raise ConfigError("missing recovery times are supported for SIR data only")
    g0 = _initial_graph(args.graph, args.n, make_rng(args.seed))
    variant = "sis" if args.variant == "sis" else "sir"
    g, trace = simulate(SimConfig(g0, params, args.t_max, args.seed, i0=args.i0, variant=variant))
    partial = synthesize_missingness(
        g, trace, args.t_max, args.eta, args.report_period, make_rng(args.seed + 1)
    ) if variant == "sir" else PartialData(g, trace, np.zeros(0), np.zeros((0, g.n), bool), args.t_max)
    out = _out_dir(args)
    truth = {"params": params.as_dict(), "removed_recoveries": {str(k): v for k, v in partial.truth.items()}}
    written = write_bundle(out, partial, meta={"variant": variant, "seed": args.seed}, truth=truth)
    _finish(cfg, out, written)
    print(f"wrote {len(partial.events)} events to {out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    variant = bundle_variant(args.bundles[0])
    st = _complete_stats(_load_bundles(args.bundles), variant)
    out, written = _out_dir(args), []
    _emit(out, "stats.csv", csv_text(("quantity", "count", "exposure"), _stats_rows(st)), written)
    _finish(ExperimentConfig("stats", mcmc={"bundles": [str(b) for b in args.bundles]}), out, written)
    return EXIT_OK


def cmd_mle(args) -> int:
    partials = _load_bundles(args.bundles)
    variant = bundle_variant(args.bundles[0])
    out, written = _out_dir(args), []
    rows: list[list] = []
    if args.network != "dynamic":
        from .likelihood import infection_exposure

        n_e, exposure = 0, 0.0
        for pd in partials:
            k, e = infection_exposure(pd.g0, list(pd.events), pd.t_max, args.network)
            n_e, exposure = n_e + k, exposure + e
        est = n_e / exposure if n_e else 0.0
        rows.append(["beta", est, None, None, args.network])
    else:
        st = _complete_stats(partials, variant)
        res = mle_closed(st)
        ci = confidence_intervals(st, args.level)
        for name in PARAM_NAMES:
            lo, hi = ci[name]
            rows.append([name, res[name], lo, hi, "closed-form"])
        if any(pd.open_population for pd in partials):
            num = mle_open_numeric(st)
            rows[0] = ["beta", num["beta"], None, None, "numeric"]
            if st.n_e_int is not None:
                lab = mle_open_labeled(st)
                rows.append(["beta", lab["beta"], None, None, "labeled"])
                rows.append(["xi", lab["xi"], None, None, "labeled"])
            rows.append(["xi", num["xi"], None, None, "numeric"])
    _emit(out, "mle.csv", csv_text(("parameter", "estimate", "lower", "upper", "method"), rows), written)
    cfg = ExperimentConfig("mle", mcmc={"network": args.network, "level": args.level,
                                        "bundles": [str(b) for b in args.bundles]})
    _finish(cfg, out, written)
    return EXIT_OK


def cmd_bayes(args) -> int:
    partials = _load_bundles(args.bundles)
    open_pop = any(pd.open_population for pd in partials)
    priors = read_priors(args.priors, open_pop)
    st = _complete_stats(partials, bundle_variant(args.bundles[0]))
    post = posterior_params(st, priors)
    lo_q, hi_q = (1 - args.level) / 2, 1 - (1 - args.level) / 2
    rows = [[n, g.shape, g.rate, g.mean, float(g.ppf(lo_q)), float(g.ppf(hi_q))] for n, g in post.items()]
    out, written = _out_dir(args), []
    _emit(out, "posterior.csv", csv_text(("parameter", "shape", "rate", "mean", "lower", "upper"), rows), written)
    pri = {n: [g.shape, g.rate] for n, g in priors.as_dict().items()}
    _finish(ExperimentConfig("bayes", priors=pri, mcmc={"level": args.level}), out, written)
    return EXIT_OK


def cmd_impute(args) -> int:
    pd = read_bundle(args.bundle)
    rng = make_rng(args.seed)
    imputed: dict[int, float] = {}
    for iv in extract_intervals(pd):
        if args.method == "darci":
            r = darci(iv, args.gamma, rng)
        elif args.method == "reject":
            r = reject_impute(iv, args.gamma, rng)
        else:
            r = mh_impute(iv, args.gamma, darci(iv, args.gamma, rng), rng)
        imputed.update(r)
    trace = fill_recoveries(pd, imputed)
    full = PartialData(pd.g0, trace, pd.report_times, pd.reports, pd.t_max, {}, pd.open_population)
    out = _out_dir(args)
    written = write_bundle(out, full, meta={"imputed_from": str(args.bundle), "method": args.method})
    cfg = ExperimentConfig("impute", params={}, mcmc={"method": args.method, "gamma": args.gamma}, seeds=[args.seed])
    _finish(cfg, out, written)
    print(f"imputed {len(imputed)} recovery times into {out}")
    return EXIT_OK


def _chain_summary_rows(chain: Chain) -> list[list]:
    rows = []
    for name, s in chain.summary().items():
        rows.append([name, s["mean"], s["lower"], s["upper"]])
    return rows


def _diagnostic_rows(diag: dict, label: str) -> list[list]:
    names = list(diag)
    return [
        ["ESS", *(diag[n]["ess"] for n in names), label],
        ["Z-score", *(diag[n]["z"] for n in names), label],
        ["Pr(>|Z|)", *(diag[n]["p"] for n in names), label],
    ]


def cmd_bayes_run(args) -> int:
    if not args.iters > args.burnin >= 0:
        raise ConfigError("need iters > burnin >= 0")
    partials = _load_bundles(args.bundles)
    open_pop = any(pd.open_population for pd in partials)
    priors = read_priors(args.priors, open_pop)
    chain = gibbs_run(partials, priors, args.iters, args.burnin, args.thin, args.method, args.seed)
    out, written = _out_dir(args), []
    _emit(out, "chain.csv", chain_to_csv(chain.names, chain.draws), written, echo=False)
    _emit(out, "summary.csv", csv_text(("parameter", "mean", "lower", "upper"), _chain_summary_rows(chain)), written)
    diag = diagnostics(chain)
    _emit(out, "diagnostics.csv", csv_text(("statistic", *chain.names, "method"), _diagnostic_rows(diag, args.method)), written)
    info = {"method": args.method, "iters": args.iters, "burnin": args.burnin, "thin": args.thin,
            "acceptance": chain.acceptance}
    write_json(out / "run.json", info)
    written.append(out / "run.json")
    pri = {n: [g.shape, g.rate] for n, g in priors.as_dict().items()}
    cfg = ExperimentConfig("bayes-run", variant="sir-open" if open_pop else "sir-closed", priors=pri,
                           mcmc=info | {"bundles": [str(b) for b in args.bundles]}, seeds=[args.seed])
    _finish(cfg, out, written)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    rows, header = [], None
    for path in args.chains:
        names, draws = chain_from_csv(path.read_text())
        label = path.stem
        run = path.with_name("run.json")
        if run.exists():
            label = read_json(run).get("method", label)
        chain = Chain(names, draws, 0, 1, 0, label)
        header = header or ("statistic", *names, "method")
        rows += _diagnostic_rows(diagnostics(chain), label)
    out, written = _out_dir(args), []
    _emit(out, "diagnostics.csv", csv_text(header, rows), written)
    _finish(ExperimentConfig("diagnose", mcmc={"chains": [str(c) for c in args.chains]}), out, written)
    return EXIT_OK


def read_pings(path: Path) -> list[ContactPing]:
    with open(path, newline="") as fh:
        return [
            ContactPing(float(r["time"]), int(r["p1"]), int(r["p2"]), int(r["rssi"]))
            for r in csv.DictReader(fh)
        ]


def pings_to_csv(pings) -> str:
    return csv_text(("p1", "p2", "time", "rssi"), [[p.p1, p.p2, p.time, p.rssi] for p in pings])


def read_surveys(path: Path) -> list[SurveyRow]:
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            syms = frozenset(s for s in r["symptoms"].split(";") if s)
            onset = float(r["onset"]) if r["onset"] else None
            rows.append(SurveyRow(int(r["person"]), int(r["week"]), r["felt_ill"] == "1", syms, onset))
    return rows


def surveys_to_csv(rows) -> str:
    return csv_text(
        ("person", "week", "felt_ill", "symptoms", "onset"),
        [[r.person, r.week, r.felt_ill, ";".join(sorted(r.symptoms)), r.onset] for r in rows],
    )


def cmd_ingest(args) -> int:
    out, written = _out_dir(args), []
    periods = []
    if args.synthetic:
        for k, sp in enumerate(synthetic_study(n=args.n, seed=args.seed)):
            raw = out / f"raw{k + 1}"
            _emit(raw, "pings.csv", pings_to_csv(sp.pings), written, echo=False)
            _emit(raw, "surveys.csv", surveys_to_csv(sp.surveys), written, echo=False)
            periods.append((sp.pings, sp.surveys, sp.t_max))
    else:
        if args.pings is None or args.surveys is None or args.t_max is None:
            raise ConfigError("ingest needs --pings, --surveys and --t-max (or --synthetic)")
        periods.append((read_pings(args.pings), read_surveys(args.surveys), args.t_max))
    provenance = []
    for k, (pings, surveys, t_max) in enumerate(periods):
        res = ingest_period(
            pings, surveys, args.n, t_max, seed=args.seed * 100 + k,
            rssi_min=args.rssi_min, gap=args.gap, jitter=(args.jitter_min, args.jitter_max),
            delay=(0.0, args.delay_max), window=args.window,
        )
        written += write_bundle(out / f"period{k + 1}", res.partial, meta={"provenance": res.provenance})
        labels = [[e.p1, e.time, int(x)] for e, x in zip(
            [e for e in res.partial.events if e.kind.name == "INFECTION"], res.partial.events.external or ())]
        _emit(out / f"period{k + 1}", "labels.csv", csv_text(("person", "time", "external"), labels), written, echo=False)
        provenance.append(res.provenance)
    rows = [[k + 1, *p.values()] for k, p in enumerate(provenance)]
    _emit(out, "provenance.csv", csv_text(("period", *provenance[0].keys()), rows), written)
    cfg = ExperimentConfig("ingest", variant="sir-open",
                           simulation={"n": args.n, "rssi_min": args.rssi_min, "gap": args.gap,
                                       "jitter": [args.jitter_min, args.jitter_max],
                                       "delay_max": args.delay_max, "window": args.window,
                                       "synthetic": args.synthetic}, seeds=[args.seed])
    _finish(cfg, out, written)
    return EXIT_OK


def _timing_rows(rows) -> list[list]:
    return [[r["interval"], r["to_recover"], r["method"], r["min_us"], r["median_us"]] for r in rows]


def cmd_bench_timing(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    bad = set(methods) - {"darci", "reject", "mh"}
    if bad:
        raise ConfigError(f"unknown timing method(s): {sorted(bad)}")
    rows = recipes.table5(args.repeats, args.seed, methods)
    out, written = _out_dir(args), []
    _emit(out, "timing.csv", csv_text(("interval", "to_recover", "method", "min_us", "median_us"), _timing_rows(rows)), written)
    # timings are hardware dependent, so they are excluded from the manifest digests
    _finish(ExperimentConfig("bench-timing", mcmc={"repeats": args.repeats, "methods": list(methods)},
                             seeds=[args.seed]), out, [])
    return EXIT_OK


def cmd_reproduce(args) -> int:
    out, written = _out_dir(args), []
    name = args.recipe
    settings = {"recipe": name, "replicates": args.replicates, "method": args.method, "jobs": args.jobs}
    if name == "table2":
        res = recipes.table2(args.replicates or 50, args.seed, args.jobs)
        s = res["summary"]
        cols = ("dynamic", "static", "mixing")
        rows = [[stat, *(s[c][key] for c in cols)] for stat, key in
                (("Mean", "mean"), ("SD", "sd"), ("2.5% quantile", "q025"), ("97.5% quantile", "q975"))]
        _emit(out, "table2.csv", csv_text(("statistic", "dynamic network", "static network", "no network"), rows), written)
        reps = [[seed, *(r[c] for c in cols)] for seed, r in zip(res["seeds"], res["rows"])]
        _emit(out, "replicates.csv", csv_text(("seed", *cols), reps), written, echo=False)
        seeds = res["seeds"]
    elif name == "fig2":
        res = recipes.fig2(seed=args.seed if args.seed else 1)
        series = res["series"]
        _emit(out, "series.csv", csv_text(tuple(series[0]), [list(r.values()) for r in series]), written, echo=False)
        _emit(out, "counts.csv", csv_text(("kind", "count"), list(res["counts"].items())), written)
        seeds = [args.seed]
    elif name in ("fig5", "fig6"):
        eta = 0.5 if name == "fig5" else 1.0
        bench = recipes.benchmark_chain(eta, args.method, args.seed)
        chain = bench["chain"]
        _emit(out, "benchmark_chain.csv", chain_to_csv(chain.names, chain.draws), written, echo=False)
        rows = [[n, s["mean"], s["lower"], s["upper"], bench["truth"][n]] for n, s in bench["summary"].items()]
        _emit(out, "benchmark_summary.csv", csv_text(("parameter", "mean", "lower", "upper", "truth"), rows), written)
        seeds = [args.seed]
        if args.replicates:
            cov = recipes.coverage_study(eta, args.replicates, args.seed, args.jobs, args.method)
            rows = [[seed, n, r[n]["mean"], r[n]["lower"], r[n]["upper"], r[n]["truth"], r[n]["covered"]]
                    for seed, r in zip(cov["seeds"], cov["rows"]) for n in PARAM_NAMES]
            _emit(out, "coverage.csv", csv_text(("seed", "parameter", "mean", "lower", "upper", "truth", "covered"), rows), written, echo=False)
            summ = [[n, cov["covered"][n], len(cov["rows"]), cov["median_width"][n]] for n in PARAM_NAMES]
            _emit(out, "coverage_summary.csv", csv_text(("parameter", "covered", "replicates", "median_width"), summ), written)
            seeds = cov["seeds"]
    elif name == "table4":
        seeds = list(range(args.seed, args.seed + (args.replicates or 1)))
        res = recipes.table4(seeds)
        rows = []
        for m, diag in res.items():
            rows += _diagnostic_rows(diag, m.upper() if m != "darci" else "DARCI")
        _emit(out, "table4.csv", csv_text(("statistic", *PARAM_NAMES, "method"), rows), written)
    elif name == "table5":
        rows = recipes.table5(args.replicates or 200, args.seed)
        _emit(out, "table5.csv", csv_text(("interval", "to_recover", "method", "min_us", "median_us"), _timing_rows(rows)), written)
        written = []
        seeds = [args.seed]
    else:
        res = recipes.table6(args.seed, args.replicates or 1, args.jobs)
        rows = [[r["parameter"], r["mean"], r["q025"], r["q975"], r["multi_sd"], r["truth"]] for r in res["rows"]]
        _emit(out, "table6.csv", csv_text(("parameter", "mean", "q025", "q975", "multi_sd", "truth"), rows), written)
        seeds = [args.seed]
    _finish(ExperimentConfig("reproduce", mcmc=settings, seeds=list(seeds)), out, written)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "stats": cmd_stats,
    "mle": cmd_mle,
    "bayes": cmd_bayes,
    "impute": cmd_impute,
    "bayes-run": cmd_bayes_run,
    "diagnose": cmd_diagnose,
    "ingest": cmd_ingest,
    "bench-timing": cmd_bench_timing,
    "reproduce": cmd_reproduce,
}


def _classify(exc: BaseException) -> int:
    if isinstance(exc, ImputationError) and exc.__cause__ is not None:
        return _classify(exc.__cause__)
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DATA_ERRORS):
        return EXIT_DATA
    if isinstance(exc, NUMERIC_ERRORS):
        return EXIT_NUMERIC
    if isinstance(exc, (FileNotFoundError, ValueError)):
        return EXIT_CONFIG
    raise exc


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001
        code = _classify(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
