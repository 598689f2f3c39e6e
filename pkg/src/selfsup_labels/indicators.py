"""Buy signals from MA crossover, MACD and Bollinger Bands, and signal-set diffs.

A buy fires at t on a strict upward cross: the fast quantity is at or below
the slow one at t-1 and strictly above it at t. With ``warmup="full"`` no
signal fires until every statistic involved has a complete window;
``warmup="expanding"`` lets partial-history averages cross as well.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._io import text_output
from .errors import SeriesTooShort, WindowOrder
from .features import ema_values

MACD_FAST, MACD_SLOW, MACD_SIGNAL = 12, 26, 9
WARMUPS = ("full", "expanding")


@dataclass(frozen=True)
class BuySignal:
    index: int
    price: float
    indicator: str
    timestamp: str = None


def _rolling_mean(x, w, expanding):
    out = np.full(len(x), np.nan)
    out[w - 1:] = sliding_window_view(x, w).mean(axis=1)
    if expanding:
        head = min(w - 1, len(x))
        out[:head] = np.cumsum(x[:head]) / np.arange(1, head + 1)
    return out


def _rolling_std(x, w):
    out = np.full(len(x), np.nan)
    out[w - 1:] = sliding_window_view(x, w).std(axis=1)  # population
    return out


def upward_crosses(fast, slow, first=1):
    """Indices t >= first with fast[t-1] <= slow[t-1] and fast[t] > slow[t]; NaNs never cross."""
    fast = np.asarray(fast, dtype=float)
    slow = np.asarray(slow, dtype=float)
    with np.errstate(invalid="ignore"):
        hit = (fast[:-1] <= slow[:-1]) & (fast[1:] > slow[1:])
    idx = np.flatnonzero(hit) + 1
    return idx[idx >= max(first, 1)]


def _signals(idx, prices, name, timestamps):
    return [BuySignal(int(i), float(prices[i]), name,
                      None if timestamps is None else str(timestamps[i])) for i in idx]


def _unpack(prices):
    stamps = getattr(prices, "timestamps", None)
    return np.asarray(getattr(prices, "prices", prices), dtype=float), stamps


def ma_crossover_lines(prices, short_window, long_window, warmup="full"):
    x, _ = _unpack(prices)
    expanding = warmup == "expanding"
    return _rolling_mean(x, short_window, expanding), _rolling_mean(x, long_window, expanding)


def ma_crossover_buys(prices, short_window=10, long_window=50, warmup="full", timestamps=None):
    x, stamps = _unpack(prices)
    stamps = timestamps if timestamps is not None else stamps
    if short_window >= long_window:
        raise WindowOrder(f"short window {short_window} must be < long window {long_window}")
    if short_window < 1 or long_window > len(x):
        raise SeriesTooShort(f"long window {long_window} exceeds series length {len(x)}")
    fast, slow = ma_crossover_lines(x, short_window, long_window, warmup)
    first = 1 if warmup == "expanding" else long_window
    return _signals(upward_crosses(fast, slow, first), x, "ma_cross", stamps)


def macd_lines(prices):
    x, _ = _unpack(prices)
    macd = ema_values(x, MACD_FAST) - ema_values(x, MACD_SLOW)
    return macd, ema_values(macd, MACD_SIGNAL)


def macd_buys(prices, warmup="full", timestamps=None):
    x, stamps = _unpack(prices)
    stamps = timestamps if timestamps is not None else stamps
    if len(x) <= MACD_SLOW + MACD_SIGNAL:
        raise SeriesTooShort(f"MACD needs more than {MACD_SLOW + MACD_SIGNAL} prices")
    macd, signal = macd_lines(x)
    # signal line complete at index (slow-1)+(signal-1); a cross needs t-1 there
    first = 1 if warmup == "expanding" else MACD_SLOW + MACD_SIGNAL - 1
    return _signals(upward_crosses(macd, signal, first), x, "macd", stamps)


def bollinger_lower(prices, window=20, k=2.0):
    x, _ = _unpack(prices)
    middle = _rolling_mean(x, window, False)
    return middle - k * _rolling_std(x, window)


def bollinger_buys(prices, window=20, k=2.0, timestamps=None):
    """Price crossing up through the lower band; bands need a full window."""
    x, stamps = _unpack(prices)
    stamps = timestamps if timestamps is not None else stamps
    if len(x) <= window:
        raise SeriesTooShort(f"Bollinger bands need more than {window} prices")
    lower = bollinger_lower(x, window, k)
    return _signals(upward_crosses(x, lower, window), x, "bb", stamps)


@dataclass
class SignalDiff:
    pairs: list = field(default_factory=list)  # (original, denoised)
    unmatched_original: list = field(default_factory=list)
    unmatched_denoised: list = field(default_factory=list)

    @property
    def deltas(self):
        return [d.price - o.price for o, d in self.pairs]

    def verdicts(self):
        out = []
        for delta in self.deltas:
            out.append("lower" if delta < 0 else "higher" if delta > 0 else "equal")
        return out


def diff_signals(original, denoised, match_window=5):
    """Greedy nearest-index matching within +/- match_window positions.

    Candidate pairs are taken in order of index distance, ties broken by the
    earlier original then the earlier denoised signal.
    """
    cands = []
    for a, o in enumerate(original):
        for b, d in enumerate(denoised):
            gap = abs(o.index - d.index)
            if gap <= match_window:
                cands.append((gap, o.index, d.index, a, b))
    cands.sort()
    used_o, used_d, matched = set(), set(), []
    for _, _, _, a, b in cands:
        if a in used_o or b in used_d:
            continue
        used_o.add(a)
        used_d.add(b)
        matched.append((a, b))
    matched.sort()
    return SignalDiff(
        pairs=[(original[a], denoised[b]) for a, b in matched],
        unmatched_original=[o for a, o in enumerate(original) if a not in used_o],
        unmatched_denoised=[d for b, d in enumerate(denoised) if b not in used_d],
    )


def write_signals_csv(target, signals):
    with text_output(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["indicator", "timestamp", "index", "price"])
        for s in signals:
            w.writerow([s.indicator, s.timestamp if s.timestamp is not None else "", s.index, repr(s.price)])


def diff_rows(diff):
    """Rows (orig_ts, orig_idx, orig_price, den_ts, den_idx, den_price, verdict) in time order."""
    rows = []
    for (o, d), verdict in zip(diff.pairs, diff.verdicts()):
        rows.append((o.timestamp, o.index, o.price, d.timestamp, d.index, d.price, verdict))
    for o in diff.unmatched_original:
        rows.append((o.timestamp, o.index, o.price, None, None, None, "unmatched"))
    for d in diff.unmatched_denoised:
        rows.append((None, None, None, d.timestamp, d.index, d.price, "unmatched"))
    rows.sort(key=lambda r: r[1] if r[1] is not None else r[4])
    return rows


def write_diff_csv(target, diff):
    with text_output(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["original_timestamp", "original_index", "original_price",
                    "denoised_timestamp", "denoised_index", "denoised_price", "comparison"])
        for row in diff_rows(diff):
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


def diff_markdown(diff, title="Close price comparison", decimals=2):
    """Side-by-side table in the original/denoised layout."""
    def cell(ts, idx, price):
        if idx is None:
            return "", ""
        return (ts if ts is not None else str(idx)), f"{price:.{decimals}f}"

    lines = [f"**{title}**", "",
             "| Date | Buy with original | Date | Buy with denoised | |",
             "|---|---:|---|---:|---|"]
    for ot, oi, op, dt, di, dp, verdict in diff_rows(diff):
        a, b = cell(ot, oi, op)
        c, d = cell(dt, di, dp)
        lines.append(f"| {a} | {b} | {c} | {d} | {verdict if verdict != 'unmatched' else ''} |")
    return "\n".join(lines) + "\n"
