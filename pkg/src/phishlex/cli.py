"""Command-line entry point.

Subcommands: ingest, train, evaluate, predict, importance, pdns-aggregate,
watch. Any long option can be preset in a ``key=value`` config file passed
with ``--config`` (keys use the option name, dashes or underscores) or via
an environment variable ``PHISHLEX_<OPTION>`` (e.g. ``PHISHLEX_SEED=7``).
Precedence: command line, then environment, then config file.

Exit codes: 0 ok, 2 ingest failure, 3 training/evaluation failure,
4 watch could not start, 5 misuse (bad usage, importance of an SVM model).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
import warnings
from fractions import Fraction
from pathlib import Path

from . import __version__, model_store
from .classify import classify_hosts
from .dataset import LabeledDataset, SplitConfig, curate, load_allowlist, load_blocklist, load_dataset, split
from .errors import (
    DatasetError,
    ExperimentError,
    HostError,
    NonConvergence,
    PhishlexError,
    StoreError,
)
from .evaluate import (
    evaluate_model,
    expand_grid,
    format_table,
    reports_to_csv,
    run_experiment,
    train,
)
from .svm import GAMMA_PRESETS, SvmParams
from .tree import ForestModel, ForestParams, TreeParams, feature_importance
from .url_model import normalize

log = logging.getLogger("phishlex")

EXIT_INGEST = 2
EXIT_TRAIN = 3
EXIT_WATCH = 4
EXIT_MISUSE = 5
ENV_PREFIX = "PHISHLEX_"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; here 2 means an ingest failure."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_MISUSE, f"{self.prog}: error: {message}\n")


# -- value parsers -------------------------------------------------------------

_UNBOUNDED = {"inf", "none", "all", "unbounded", "∞"}


def opt_int(text: str) -> int | None:
    """Integer, or ``inf``/``all``/``none`` for unbounded."""
    if text.strip().lower() in _UNBOUNDED:
        return None
    return int(text)


def gamma_value(text: str) -> float:
    """A float, a fraction like ``1/500``, or a preset name."""
    text = text.strip()
    if text in GAMMA_PRESETS:
        return GAMMA_PRESETS[text]
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(
            f"bad gamma {text!r}; use a number, a fraction or one of {sorted(GAMMA_PRESETS)}"
        ) from None


def listed(convert):
    def parse(text: str):
        return [convert(part) for part in text.split(",") if part.strip()]

    parse.__name__ = f"list of {convert.__name__}"
    return parse


def _bool(text: str) -> bool:
    return str(text).strip().lower() in {"1", "true", "yes", "on"}


# -- shared option groups -----------------------------------------------------------


def _add_split(p):
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--no-stratify", action="store_true", help="plain rather than per-class split")


def _add_model_params(p, multi: bool = False):
    conv = (lambda f: listed(f)) if multi else (lambda f: f)
    g = p.add_argument_group("forest")
    g.add_argument("--n-estimators", type=conv(int), default=[10] if multi else 10)
    g.add_argument("--max-depth", type=conv(opt_int), default=[None] if multi else None)
    g.add_argument("--max-features", type=conv(opt_int), default=[None] if multi else None)
    g.add_argument("--min-samples-split", type=conv(int), default=[2] if multi else 2)
    g.add_argument("--max-leaf-nodes", type=conv(opt_int), default=[None] if multi else None)
    g.add_argument("--no-bootstrap", action="store_true")
    g = p.add_argument_group("svm")
    g.add_argument("--c", type=conv(float), default=[1.0] if multi else 1.0)
    g.add_argument("--gamma", type=conv(gamma_value), default=[1 / 21] if multi else 1 / 21)
    g.add_argument("--tolerance", type=float, default=1e-3)
    g.add_argument("--max-passes", type=int, default=200)


def _add_output(p):
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--csv", type=Path, help="also write the report table as CSV")
    p.add_argument("--plot", type=Path, help="write a figure (PNG/PDF/SVG by extension)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phishlex", description=__doc__.split("\n\n")[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, help="key=value file presetting options")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="curate allow/block lists into a labeled feature CSV")
    p.add_argument("--allow", type=Path, required=True)
    p.add_argument("--block", type=Path, required=True)
    p.add_argument("--allow-limit", type=opt_int, default=500)
    p.add_argument("--block-limit", type=opt_int, default=None)
    order = p.add_mutually_exclusive_group()
    order.add_argument("--shuffle-source", action="store_true", help="seeded shuffle of the blocklist before the limit")
    order.add_argument("--sort-source", action="store_true", help="sort the blocklist alphabetically by host before the limit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="split, train, score the hold-out half and save a model")
    p.add_argument("--data", type=Path, required=True, help="feature CSV from ingest, or a host,Type file")
    p.add_argument("--algo", choices=["forest", "svm"], default="forest")
    _add_model_params(p)
    _add_split(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-out", type=Path, required=True)
    _add_output(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="hyperparameter sweep on a hold-out split, or score a saved model")
    p.add_argument("--data", type=Path, required=True, help="feature CSV from ingest, or a host,Type file")
    p.add_argument("--model", type=Path, help="score this model on all of --data instead of sweeping")
    p.add_argument("--algo", choices=["forest", "svm", "both"], default="forest")
    _add_model_params(p, multi=True)
    _add_split(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    _add_output(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify hosts or URLs with a saved model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--input", type=Path, help="file with one host/URL per line ('-' for stdin)")
    p.add_argument("hosts", nargs="*")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("importance", help="feature importance of a saved forest")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--csv", type=Path)
    p.add_argument("--plot", type=Path)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("pdns-aggregate", help="aggregate a passivedns log")
    p.add_argument("--input", default="-", help="log file, or '-' for stdin")
    p.add_argument("--out", type=Path, help="aggregated CSV (default stdout)")
    p.add_argument("--hosts-out", type=Path, help="write distinct query hosts, one per line")
    p.add_argument("--delimiter", default="||")
    p.add_argument("--window", type=float, default=12 * 3600, help="seconds")
    p.set_defaults(func=cmd_pdns_aggregate)

    p = sub.add_parser("watch", help="poll an input file, alert on malicious hosts, retrain on schedule")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--alerts", type=Path, required=True)
    p.add_argument("--interval", type=float, default=3600.0, help="poll interval in seconds")
    p.add_argument("--retrain-csv", type=Path)
    p.add_argument("--retrain-every", type=float, help="seconds between retrains")
    p.add_argument("--max-polls", type=int, help="stop after this many polls")
    p.set_defaults(func=cmd_watch)
    return parser


# -- config / environment presets ------------------------------------------------------


def read_config(path: Path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value", EXIT_MISUSE)
        key, value = line.split("=", 1)
        out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _apply_presets(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    presets: dict[str, str] = {}
    if known.config:
        if not known.config.exists():
            raise CliError(f"config file not found: {known.config}", EXIT_MISUSE)
        presets.update(read_config(known.config))
    for key, value in os.environ.items():
        if key.startswith(ENV_PREFIX):
            presets[key[len(ENV_PREFIX):].lower()] = value
    if not presets:
        return
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in [parser, *subparsers.choices.values()]:
        defaults = {}
        for action in sp._actions:
            if action.dest in presets:
                value = presets[action.dest]
                if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                    defaults[action.dest] = _bool(value)
                else:
                    # argparse runs string defaults through the option's type
                    defaults[action.dest] = value
                    action.required = False
        sp.set_defaults(**defaults)


# -- helpers -------------------------------------------------------------------


def _emit(args, text: str, payload) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        print(text)


def _forest_params(args, seed: int, pick=lambda v: v) -> ForestParams:
    return ForestParams(
        n_estimators=pick(args.n_estimators),
        tree=TreeParams(
            max_depth=pick(args.max_depth),
            max_features=pick(args.max_features),
            min_samples_split=pick(args.min_samples_split),
            max_leaf_nodes=pick(args.max_leaf_nodes),
        ),
        bootstrap=not args.no_bootstrap,
        seed=seed,
    )


def _svm_params(args, seed: int, pick=lambda v: v) -> SvmParams:
    return SvmParams(
        c=pick(args.c),
        gamma=pick(args.gamma),
        tolerance=args.tolerance,
        max_passes=args.max_passes,
        seed=seed,
    )


def _load_dataset(path: Path, code: int, both_classes: bool = True) -> LabeledDataset:
    if not path.exists():
        raise CliError(f"training data not found: {path}", code)
    try:
        ds = load_dataset(path)
    except (PhishlexError, ValueError) as exc:
        raise CliError(f"{path}: {exc}", code) from exc
    if both_classes and min(ds.class_counts()) == 0:
        benign, malicious = ds.class_counts()
        raise CliError(f"{path}: EmptyDataset: {benign} benign and {malicious} malicious rows", code)
    return ds


def _load_model(path: Path, code: int):
    if not path.exists():
        raise CliError(f"model file not found: {path}", code)
    try:
        return model_store.load(path)
    except (StoreError, OSError) as exc:
        raise CliError(f"cannot load model {path}: {exc}", code) from exc


def _split_cfg(args) -> SplitConfig:
    return SplitConfig(train_fraction=args.train_fraction, seed=args.seed, stratified=not args.no_stratify)


# -- commands ------------------------------------------------------------------


def _host_key(entry) -> str:
    # order by host, not raw URL, so the scheme does not partition the list
    try:
        return normalize(entry)
    except HostError:
        return ""


def cmd_ingest(args) -> int:
    for path in (args.allow, args.block):
        if not path.exists():
            raise CliError(f"input file not found: {path}", EXIT_INGEST)
    try:
        allow = load_allowlist(args.allow, args.allow_limit)
        block = load_blocklist(args.block)
        if args.shuffle_source:
            random.Random(args.seed).shuffle(block)
        elif args.sort_source:
            block.sort(key=_host_key)
        if args.block_limit is not None:
            block = block[: args.block_limit]
        ds = curate(allow, block)
        rows = ds.to_csv(args.out)
    except (DatasetError, OSError) as exc:
        raise CliError(f"ingest failed: {exc}", EXIT_INGEST) from exc
    prov = ds.provenance.as_dict()
    benign, malicious = ds.class_counts()
    summary = {**prov, "rows": rows, "benign": benign, "malicious": malicious, "out": str(args.out)}
    text = "\n".join(f"{k:>20}: {v}" for k, v in summary.items())
    _emit(args, text, summary)
    return 0


def _write_extras(args, reports, *, importance=None) -> None:
    if args.csv:
        args.csv.write_text(reports_to_csv(reports), encoding="utf-8")
    if args.plot:
        from . import plots

        if len(reports) == 1:
            plots.confusion_chart(reports[0].matrix, args.plot, title=f"{reports[0].algorithm} hold-out")
        else:
            plots.sweep_chart(reports, args.plot)


def cmd_train(args) -> int:
    ds = _load_dataset(args.data, EXIT_TRAIN)
    params = _forest_params(args, args.seed) if args.algo == "forest" else _svm_params(args, args.seed)
    try:
        train_ds, test_ds = split(ds, _split_cfg(args))
        X, y = train_ds.arrays()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NonConvergence)
            model = train(params, X, y)
        report = evaluate_model(model, params, test_ds)
    except (PhishlexError, ValueError) as exc:
        raise CliError(f"training failed: {type(exc).__name__}: {exc}", EXIT_TRAIN) from exc
    for w in caught:
        if issubclass(w.category, NonConvergence):
            print(f"warning: {w.message}", file=sys.stderr)
            report.extra["non_convergence"] = True
    digest = model_store.save(model, args.model_out, model_store.file_digest(args.data))
    report.extra["model"] = str(args.model_out)
    report.extra["model_digest"] = digest
    report.extra["train_size"] = len(train_ds)
    _write_extras(args, [report])
    _emit(args, format_table([report]) + f"\nmodel: {args.model_out} ({digest[:16]})", report.as_dict())
    return 0


def cmd_evaluate(args) -> int:
    ds = _load_dataset(args.data, EXIT_TRAIN, both_classes=not args.model)
    if args.model:
        env = _load_model(args.model, EXIT_MISUSE)
        model = env.payload
        try:
            report = evaluate_model(model, model.params, ds)
        except (PhishlexError, ValueError) as exc:
            raise CliError(f"evaluation failed: {exc}", EXIT_TRAIN) from exc
        report.extra["model"] = str(args.model)
        _write_extras(args, [report])
        _emit(args, format_table([report]), report.as_dict())
        return 0
    grid = []
    if args.algo in ("forest", "both"):
        grid += expand_grid(
            _forest_params(args, args.seed, pick=lambda v: v[0]),
            n_estimators=args.n_estimators,
            max_depth=args.max_depth,
            max_features=args.max_features,
            min_samples_split=args.min_samples_split,
            max_leaf_nodes=args.max_leaf_nodes,
        )
    if args.algo in ("svm", "both"):
        grid += expand_grid(_svm_params(args, args.seed, pick=lambda v: v[0]), c=args.c, gamma=args.gamma)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergence)
            reports = run_experiment(ds, grid, _split_cfg(args), n_jobs=args.jobs)
    except (ExperimentError, PhishlexError, ValueError) as exc:
        raise CliError(f"evaluation failed: {exc}", EXIT_TRAIN) from exc
    _write_extras(args, reports)
    _emit(args, format_table(reports), [r.as_dict() for r in reports])
    return 0


def cmd_predict(args) -> int:
    env = _load_model(args.model, EXIT_MISUSE)
    texts = list(args.hosts)
    if args.input:
        stream = sys.stdin if str(args.input) == "-" else open(args.input, encoding="utf-8")
        with stream:
            texts += [ln.strip() for ln in stream if ln.strip() and not ln.startswith("#")]
    if not texts:
        raise CliError("no hosts given", EXIT_MISUSE)
    rows = []
    for text in texts:
        try:
            (v,) = classify_hosts(env.payload, [text])
        except HostError as exc:
            rows.append({"input": text, "error": str(exc)})
            continue
        rows.append({"input": text, "host": v.host, "label": str(v.label), "score": v.score})
    lines = []
    for r in rows:
        if "error" in r:
            lines.append(f"{r['input']}\terror\t{r['error']}")
        else:
            score = ",".join(f"{k}={v}" for k, v in r["score"].items())
            lines.append(f"{r['host']}\t{r['label']}\t{score}")
    _emit(args, "\n".join(lines), rows)
    return 0


def cmd_importance(args) -> int:
    env = _load_model(args.model, EXIT_MISUSE)
    model = env.payload
    if not isinstance(model, ForestModel):
        raise CliError("feature importance is only defined for forest models", EXIT_MISUSE)
    imp = feature_importance(model)
    names = model.feature_names
    order = sorted(range(len(imp)), key=lambda i: (-imp[i], i))
    rows = [{"id": i + 1, "name": names[i], "importance": float(imp[i])} for i in order]
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("id,name,importance\n")
            for r in rows:
                fh.write(f"{r['id']},{r['name']},{r['importance']!r}\n")
    if args.plot:
        from . import plots

        plots.importance_chart(names, imp, args.plot)
    text = "\n".join(f"F{r['id']:<3d} {r['name']:<14} {r['importance']:.6f}" for r in rows)
    _emit(args, text, rows)
    return 0


def cmd_pdns_aggregate(args) -> int:
    from .pdns import aggregate, aggregates_to_csv, query_hosts, read_log

    if args.input == "-":
        entries = aggregate(read_log(sys.stdin, args.delimiter), window=args.window)
    else:
        path = Path(args.input)
        if not path.exists():
            raise CliError(f"log file not found: {path}", EXIT_INGEST)
        with open(path, encoding="utf-8") as fh:
            entries = aggregate(read_log(fh, args.delimiter), window=args.window)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            aggregates_to_csv(entries, fh)
    else:
        sys.stdout.write(aggregates_to_csv(entries))
    if args.hosts_out:
        args.hosts_out.write_text("".join(h + "\n" for h in query_hosts(entries)), encoding="utf-8")
    return 0


def cmd_watch(args) -> int:
    from .watch import RetrainConfig, WatchConfig, Watcher

    if (args.retrain_csv is None) != (args.retrain_every is None):
        raise CliError("--retrain-csv and --retrain-every go together", EXIT_MISUSE)
    try:
        cfg = WatchConfig(
            input_path=args.input,
            model_path=args.model,
            alert_sink=args.alerts,
            poll_interval=args.interval,
            retrain=RetrainConfig(args.retrain_csv, args.retrain_every) if args.retrain_csv else None,
        )
        watcher = Watcher(cfg)
    except (StoreError, OSError, ValueError) as exc:
        raise CliError(f"watch cannot start: {exc}", EXIT_WATCH) from exc
    log.info("watching %s with model %s", cfg.input_path, watcher.model_digest[:16])
    try:
        watcher.run(max_polls=args.max_polls)
    except KeyboardInterrupt:
        pass
    watcher.wait_for_retrain()
    print(
        f"polls={watcher.polls} predictions={watcher.predictions} "
        f"alerts={watcher.malicious_predictions} model={watcher.model_digest[:16]}"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_presets(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
