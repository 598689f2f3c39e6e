"""Command-line interface.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import indicators as ind
from .autoencoder import save_checkpoint, write_loss_csv
from .errors import ConfigError, SelfSupError
from .experiment import (
    ExperimentConfig,
    chronological_split,
    load_series,
    run_experiment,
    run_pretext,
)
from .labeling import class_counts_sweep, naive_label, write_labels_csv
from .market_data import CsvSchema, ingest_csv, log_returns, write_csv
from .metrics import f1_scores
from .report import emit_report, load_report, read_series_csv, write_series_csv
from .svm import SvmConfig, featurize, predict, save_svm, train_svm

logger = logging.getLogger("selfsup_labels")

STRUCTURE_FLAGS = {"sma": "sma_only", "ema": "ema_only", "combined": "combined"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _tau_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tau grid {text!r}") from None


def _add_data_args(p, positional=True):
    if positional:
        p.add_argument("path", help="close-price CSV")
    p.add_argument("--date-column", default=None)
    p.add_argument("--close-column", default=None)
    p.add_argument("--skip-bad-rows", action="store_true", default=None)


def _add_experiment_args(p):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--tau-grid", type=_tau_list, help="comma-separated thresholds")
    p.add_argument("--split", type=float)
    p.add_argument("--leakage-mode", choices=["train_segment_only", "full_series"])
    p.add_argument("--structure", choices=sorted(STRUCTURE_FLAGS))
    p.add_argument("--epochs", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")


def build_parser():
    parser = _Parser(prog="selfsup-labels", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate a price CSV and re-emit it")
    _add_data_args(p)
    p.add_argument("--out", help="write the validated series here")

    p = sub.add_parser("label", help="naive threshold labels")
    _add_data_args(p)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--tau-grid", type=_tau_list, help="print class counts for each threshold")
    p.add_argument("--out", help="labels CSV")

    p = sub.add_parser("denoise", help="train the autoencoder and write the denoised series")
    _add_data_args(p, positional=False)
    p.add_argument("path", nargs="?")
    _add_experiment_args(p)

    p = sub.add_parser("train-svm", help="train and evaluate the SVM on one labeled series")
    _add_data_args(p)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--gamma", default="scale")
    p.add_argument("--out", help="directory for model.bin and predictions.csv")

    p = sub.add_parser("indicators", help="buy signals from MA crossover, MACD and Bollinger Bands")
    _add_data_args(p)
    p.add_argument("--ma-short", type=int, default=10)
    p.add_argument("--ma-long", type=int, default=50)
    p.add_argument("--bb-window", type=int, default=20)
    p.add_argument("--bb-k", type=float, default=2.0)
    p.add_argument("--warmup", choices=ind.WARMUPS, default="full")
    p.add_argument("--out", help="signals CSV (default stdout)")

    p = sub.add_parser("diff-signals", help="match two signal CSVs")
    p.add_argument("original")
    p.add_argument("denoised")
    p.add_argument("--match-window", type=int, default=5)
    p.add_argument("--indicator", help="only this indicator")
    p.add_argument("--out", help="diff CSV (one per indicator: <out>_<indicator>.csv)")
    p.add_argument("--markdown", action="store_true", help="print side-by-side tables")

    p = sub.add_parser("run", help="full contrastive experiment")
    p.add_argument("--data", help="close-price CSV (overrides the config)")
    _add_data_args(p, positional=False)
    _add_experiment_args(p)

    p = sub.add_parser("report", help="re-render report files from report.json")
    p.add_argument("report_json")
    p.add_argument("--series", help="series.csv written by run")
    p.add_argument("--out", required=True)
    return parser


def _schema(args):
    return CsvSchema(args.date_column or "date", args.close_column or "close")


def _load_config(args, data_path=None):
    mapping = {}
    if getattr(args, "config", None):
        try:
            mapping = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"bad config file: {exc}") from None
        if not isinstance(mapping, dict):
            raise ConfigError("config file must hold a mapping")
    cfg = ExperimentConfig.from_mapping(mapping)
    over = {
        "seed": args.seed,
        "tau_grid": args.tau_grid,
        "split": args.split,
        "leakage_mode": args.leakage_mode,
        "out": args.out,
        "workers": args.workers,
        "train.epochs": args.epochs,
        "features.structure": STRUCTURE_FLAGS.get(args.structure) if args.structure else None,
        "data.path": data_path,
        "data.date_column": args.date_column,
        "data.close_column": args.close_column,
        "data.skip_bad_rows": args.skip_bad_rows,
    }
    return cfg.with_overrides(**over)


def cmd_ingest(args):
    series = ingest_csv(args.path, _schema(args), bool(args.skip_bad_rows))
    print(f"rows={len(series)} first={series.timestamps[0]} last={series.timestamps[-1]} "
          f"skipped={series.skipped_rows}")
    if args.out:
        write_csv(series, args.out, _schema(args))


def cmd_label(args):
    series = ingest_csv(args.path, _schema(args), bool(args.skip_bad_rows))
    r = log_returns(series)
    if args.tau_grid:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["tau", "count_up", "count_down", "count_none"])
        for c in class_counts_sweep(r, args.tau_grid):
            w.writerow([repr(c.tau), c.count_up, c.count_down, c.count_none])
    labels = naive_label(r, args.tau)
    if args.out:
        write_labels_csv(args.out, series.timestamps, r, labels)
    elif not args.tau_grid:
        write_labels_csv(sys.stdout, series.timestamps, r, labels)


def cmd_denoise(args):
    cfg = _load_config(args, args.path)
    series = load_series(cfg)
    pretext = run_pretext(cfg, series)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_series_csv(out / "series.csv", series.timestamps, series.prices, pretext.denoised.prices)
    save_checkpoint(pretext.model, out / "autoencoder.bin")
    write_loss_csv(pretext.model, out / "loss_history.csv")
    (out / "diagnostics.json").write_text(json.dumps(pretext.diagnostics, sort_keys=True, indent=2) + "\n")
    d = pretext.diagnostics
    print(f"final_loss={d['final_loss']:.6g} tv_ratio={d['tv_ratio']:.4f} "
          f"channel_spread={d['channel_spread']:.4g} -> {out}")


def cmd_train_svm(args):
    series = ingest_csv(args.path, _schema(args), bool(args.skip_bad_rows))
    gamma = args.gamma if args.gamma == "scale" else float(args.gamma)
    try:
        config = SvmConfig(C=args.C, gamma=gamma)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    labels = naive_label(log_returns(series), args.tau)
    samples = featurize(series.prices, labels, args.window)
    split = chronological_split(len(series), args.window, args.split)
    k = split.n_train
    train_set = type(samples)(samples.features[:k], samples.targets[:k], samples.window)
    model = train_svm(train_set, config)
    pred = predict(model, samples.features[k:])
    f1 = f1_scores(pred, samples.targets[k:])
    print(f"train={k} test={len(pred)} gamma={model.gamma:.6g} macro_f1={f1.macro_f1:.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_svm(model, out / "model.bin")
        with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", "actual", "predicted"])
            for i, a, p in zip(samples.indices[k:], samples.targets[k:], pred):
                w.writerow([series.timestamps[i + 1], int(a), int(p)])


def cmd_indicators(args):
    series = ingest_csv(args.path, _schema(args), bool(args.skip_bad_rows))
    signals = []
    signals += ind.ma_crossover_buys(series, args.ma_short, args.ma_long, args.warmup)
    signals += ind.macd_buys(series, args.warmup)
    signals += ind.bollinger_buys(series, args.bb_window, args.bb_k)
    ind.write_signals_csv(args.out or sys.stdout, signals)


def _read_signals(path):
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            s = ind.BuySignal(int(row["index"]), float(row["price"]), row["indicator"],
                              row["timestamp"] or None)
            out.setdefault(s.indicator, []).append(s)
    return {k: sorted(v, key=lambda s: s.index) for k, v in out.items()}


def cmd_diff_signals(args):
    orig, den = _read_signals(args.original), _read_signals(args.denoised)
    names = [args.indicator] if args.indicator else sorted(set(orig) | set(den))
    for name in names:
        diff = ind.diff_signals(orig.get(name, []), den.get(name, []), args.match_window)
        print(f"{name}: matched={len(diff.pairs)} unmatched_original={len(diff.unmatched_original)} "
              f"unmatched_denoised={len(diff.unmatched_denoised)} "
              f"lower={diff.verdicts().count('lower')}")
        if args.out:
            ind.write_diff_csv(f"{args.out}_{name}.csv", diff)
        if args.markdown:
            print(ind.diff_markdown(diff, name))


def cmd_run(args):
    cfg = _load_config(args, args.data)
    report, pretext, series = run_experiment(cfg)
    files = emit_report(report, cfg.out,
                        series=(series.timestamps, series.prices, pretext.denoised.prices),
                        model=pretext.model)
    w1, w2 = np.array(report.macro_f1(1)), np.array(report.macro_f1(2))
    print(f"taus={len(report.taus)} mean_macro_f1 w1={w1.mean():.4f} w2={w2.mean():.4f} "
          f"tv_ratio={report.diagnostics['tv_ratio']:.4f} files={len(files)} -> {cfg.out}")


def cmd_report(args):
    report = load_report(args.report_json)
    series = read_series_csv(args.series) if args.series else None
    files = emit_report(report, args.out, series=series)
    print(f"wrote {len(files)} files -> {args.out}")


COMMANDS = {
    "ingest": cmd_ingest,
    "label": cmd_label,
    "denoise": cmd_denoise,
    "train-svm": cmd_train_svm,
    "indicators": cmd_indicators,
    "diff-signals": cmd_diff_signals,
    "run": cmd_run,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except SelfSupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
