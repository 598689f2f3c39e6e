"""Write an ExperimentReport to disk: JSON, CSV tables, SVG figures, markdown."""

import csv
from pathlib import Path

import numpy as np

from . import plots
from .errors import SelfSupError
from .experiment import ExperimentReport
from .autoencoder import save_checkpoint, write_loss_csv
from .indicators import BuySignal, SignalDiff, diff_markdown, write_diff_csv

INDICATOR_TITLES = {
    "ma_cross": "Close price comparison via MA crossover",
    "bb": "Close price comparison via Bollinger Bands",
    "macd": "Close price comparison via MACD",
}


class ReportIoError(SelfSupError):
    exit_code = 2


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_series_csv(path, timestamps, original, denoised):
    _write_csv(path, ["timestamp", "original", "denoised"],
               zip(timestamps, map(float, original), map(float, denoised)))


def read_series_csv(path):
    stamps, orig, den = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            stamps.append(row["timestamp"])
            orig.append(float(row["original"]))
            den.append(float(row["denoised"]))
    return stamps, np.array(orig), np.array(den)


def _diff_from_report(entry):
    def sig(d):
        return BuySignal(d["index"], d["price"], d["indicator"], d["timestamp"])

    by_o = {s["index"]: sig(s) for s in entry["original"]}
    by_d = {s["index"]: sig(s) for s in entry["denoised"]}
    return SignalDiff(
        pairs=[(by_o[a], by_d[b]) for a, b in entry["pairs"]],
        unmatched_original=[by_o[i] for i in entry["unmatched_original"]],
        unmatched_denoised=[by_d[i] for i in entry["unmatched_denoised"]],
    )


def f1_rows(report):
    for a, b in zip(report.workflow1, report.workflow2):
        yield (a["tau"], a["f1"]["macro_f1"], b["f1"]["macro_f1"],
               a["f1"]["weighted_f1"], b["f1"]["weighted_f1"],
               int(a["degenerate"]), int(b["degenerate"]))


def _indicator_order(name):
    order = list(INDICATOR_TITLES)
    return (order.index(name) if name in order else len(order), name)


def _flag(result):
    return " *" if result["degenerate"] else ""


def summary_markdown(report):
    d = report.diagnostics
    lines = [
        "# Contrastive labeling experiment",
        "",
        f"- prices: {report.n_prices}; samples: {report.split['n_samples']} "
        f"(train {report.split['n_train']}, test {report.split['n_samples'] - report.split['n_train']})",
        f"- seed: {report.seed}; config fingerprint: `{report.config_fingerprint[:16]}`",
        f"- autoencoder: {d['channels']} channels, loss {d['initial_loss']:.5f} -> {d['final_loss']:.5f} "
        f"(best epoch {d['best_epoch']} of {d['epochs_run']}), channel spread {d['channel_spread']:.4f}",
        f"- total variation denoised/original: {d['tv_ratio']:.3f}",
        f"- loss rises after epoch 5: {d['loss_descent']['rises']}, largest "
        f"{d['loss_descent']['max_rise']:.1%}" + (" (flagged)" if d["loss_descent"]["flagged"] else ""),
        f"- leakage mode: {d['leakage_mode']}"
        + (" (denoiser saw the test segment)" if d["leaks_test_segment"] else ""),
        "",
        "## Macro F1 by threshold",
        "",
        "| tau | Workflow 1 | Workflow 2 | none (W1) | none (W2) |",
        "|---:|---:|---:|---:|---:|",
    ]
    for a, b in zip(report.workflow1, report.workflow2):
        lines.append(
            f"| {a['tau']:.5f} | {a['f1']['macro_f1']:.3f}{_flag(a)} | {b['f1']['macro_f1']:.3f}{_flag(b)} "
            f"| {a['counts']['count_none']} | {b['counts']['count_none']} |"
        )
    lines += ["", "`*` single-class training labels: constant classifier.", ""]
    for name in sorted(report.indicators, key=_indicator_order):
        entry = report.indicators[name]
        title = INDICATOR_TITLES.get(name, name)
        if "skipped" in entry:
            lines += [f"**{title}**: skipped ({entry['skipped']})", ""]
            continue
        lines.append(diff_markdown(_diff_from_report(entry), title))
    return "\n".join(lines)


def emit_report(report, outdir, series=None, model=None):
    """Write every report artifact into ``outdir``.

    ``series`` is an optional (timestamps, original, denoised) triple used for
    the price overlay; ``model`` an optional trained autoencoder whose
    checkpoint and loss history are saved alongside.
    """
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []

        def path(name):
            written.append(name)
            return out / name

        path("report.json").write_text(report.to_json(), encoding="utf-8")
        _write_csv(path("f1_vs_tau.csv"),
                   ["tau", "workflow1_macro_f1", "workflow2_macro_f1", "workflow1_weighted_f1",
                    "workflow2_weighted_f1", "workflow1_degenerate", "workflow2_degenerate"],
                   f1_rows(report))
        count_rows = []
        for wf, res in ((1, report.workflow1), (2, report.workflow2)):
            for r in res:
                c = r["counts"]
                count_rows.append((r["tau"], wf, c["count_up"], c["count_down"], c["count_none"]))
        _write_csv(path("class_counts.csv"), ["tau", "workflow", "count_up", "count_down", "count_none"],
                   count_rows)
        sig_rows = []
        for name, entry in report.indicators.items():
            if "skipped" in entry:
                continue
            for source in ("original", "denoised"):
                sig_rows += [(source, s["indicator"], s["timestamp"], s["index"], s["price"])
                             for s in entry[source]]
            diff = _diff_from_report(entry)
            write_diff_csv(path(f"diff_{name}.csv"), diff)
        _write_csv(path("signals.csv"), ["source", "indicator", "timestamp", "index", "price"], sig_rows)

        plots.plot_f1_vs_tau(report, path("f1_vs_tau.svg"))
        plots.plot_class_counts(report, path("class_counts_vs_tau.svg"))
        if series is not None:
            stamps, orig, den = series
            write_series_csv(path("series.csv"), stamps, orig, den)
            plots.plot_price_overlay(stamps, orig, den, path("price_overlay.svg"))
            plots.plot_signals(orig, den, report.indicators, path("signals.svg"))
        if model is not None:
            save_checkpoint(model, path("autoencoder.bin"))
            write_loss_csv(model, path("loss_history.csv"))
        path("summary.md").write_text(summary_markdown(report), encoding="utf-8")
    except OSError as exc:
        raise ReportIoError(f"cannot write report to {out}: {exc}") from exc
    return [out / name for name in written]


def load_report(path):
    return ExperimentReport.from_json(Path(path).read_text(encoding="utf-8"))
