"""Static SVG figures for the experiment report.

Figures are drawn through the object API (no pyplot state) and saved with
a fixed hash salt and no date metadata so repeated runs are byte-identical.
Each SVG carries the plotted numbers as a CSV block in a leading comment.
"""

import io

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

_RC = {
    "svg.hashsalt": "selfsup-labels",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

COLORS = {"original": "tab:orange", "denoised": "tab:blue"}
CLASS_NAMES = {1: "up", 0: "none", -1: "down"}


def _data_comment(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in row))
    body = "\n".join(lines).replace("--", "- -")
    return f"<!-- data\n{body}\n-->\n"


def _save(fig, path, header, rows):
    buf = io.BytesIO()
    FigureCanvasSVG(fig)
    fig.savefig(buf, format="svg", metadata={"Date": None})
    text = buf.getvalue().decode("utf-8")
    # comment goes after the XML declaration and doctype
    cut = text.index("<svg")
    text = text[:cut] + _data_comment(header, rows) + text[cut:]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def plot_f1_vs_tau(report, path):
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(7, 4))
        ax = fig.add_subplot()
        w1, w2 = report.macro_f1(1), report.macro_f1(2)
        ax.plot(report.taus, w1, marker="o", color=COLORS["original"], label="Workflow 1 (naive labels)")
        ax.plot(report.taus, w2, marker="s", color=COLORS["denoised"], label="Workflow 2 (denoised labels)")
        ax.set_xlabel("threshold tau (log return)")
        ax.set_ylabel("macro F1 (test)")
        ax.set_ylim(0, 1.05)
        ax.legend(loc="best")
        fig.tight_layout()
        _save(fig, path, ["tau", "workflow1_macro_f1", "workflow2_macro_f1"],
              zip(report.taus, w1, w2))


def plot_class_counts(report, path):
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(7, 4))
        ax = fig.add_subplot()
        rows = []
        styles = {1: ("-", report.workflow1), 2: ("--", report.workflow2)}
        for wf, (ls, res) in styles.items():
            for key, cls in (("count_up", 1), ("count_none", 0), ("count_down", -1)):
                vals = [r["counts"][key] for r in res]
                ax.plot(report.taus, vals, ls, label=f"W{wf} {CLASS_NAMES[cls]}")
        for k, tau in enumerate(report.taus):
            a, b = report.workflow1[k]["counts"], report.workflow2[k]["counts"]
            rows.append((tau, a["count_up"], a["count_none"], a["count_down"],
                         b["count_up"], b["count_none"], b["count_down"]))
        ax.set_xlabel("threshold tau (log return)")
        ax.set_ylabel("labels per class")
        ax.legend(loc="best", ncol=2, fontsize=8)
        fig.tight_layout()
        _save(fig, path, ["tau", "w1_up", "w1_none", "w1_down", "w2_up", "w2_none", "w2_down"], rows)


def plot_price_overlay(timestamps, original, denoised, path):
    """Exactly two data lines, tagged series-original and series-denoised."""
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(9, 4))
        ax = fig.add_subplot()
        t = range(len(original))
        ax.plot(t, original, color=COLORS["original"], lw=0.9, label="original", gid="series-original")
        ax.plot(t, denoised, color=COLORS["denoised"], lw=1.2, label="denoised", gid="series-denoised")
        ax.set_xlabel("index")
        ax.set_ylabel("close")
        ax.legend(loc="best")
        fig.tight_layout()
        _save(fig, path, ["timestamp", "original", "denoised"],
              zip(timestamps, map(float, original), map(float, denoised)))


def plot_signals(original, denoised, indicators, path):
    markers = {"ma_cross": "^", "macd": "*", "bb": "v"}
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(9, 4))
        ax = fig.add_subplot()
        ax.plot(range(len(original)), original, color=COLORS["original"], lw=0.8)
        ax.plot(range(len(denoised)), denoised, color=COLORS["denoised"], lw=1.0)
        rows = []
        for name, res in indicators.items():
            if "skipped" in res:
                continue
            for source in ("original", "denoised"):
                sig = res[source]
                if sig:
                    ax.scatter([s["index"] for s in sig], [s["price"] for s in sig],
                               marker=markers.get(name, "o"), s=30, color=COLORS[source],
                               edgecolors="black", linewidths=0.4, label=f"{name} ({source})")
                rows += [(name, source, s["index"], s["price"]) for s in sig]
        ax.set_xlabel("index")
        ax.set_ylabel("close")
        ax.legend(loc="best", fontsize=7, ncol=2)
        fig.tight_layout()
        _save(fig, path, ["indicator", "source", "index", "price"], rows)
