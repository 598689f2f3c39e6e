"""Moving-average target stack and replicated-price input for the autoencoder."""

import csv
import json
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

from .errors import DegenerateScaler, FormatError, WindowOutOfRange

STRUCTURES = ("combined", "sma_only", "ema_only")

_FMAT_MAGIC = b"FMAT"
_FMAT_VERSION = 1


@dataclass(frozen=True)
class MovingAverageSpec:
    kind: str  # "SMA" | "EMA"
    window: int

    @property
    def name(self):
        return f"{self.kind}{self.window}"


@dataclass(frozen=True)
class ScalerParams:
    min: float
    max: float
    fit_range: tuple = (0, 0)

    def __post_init__(self):
        if not self.max > self.min:
            raise DegenerateScaler(f"scaler range is empty (min={self.min}, max={self.max})")

    def transform(self, values):
        return (np.asarray(values, dtype=float) - self.min) / (self.max - self.min)

    def inverse(self, scaled):
        return np.asarray(scaled, dtype=float) * (self.max - self.min) + self.min

    def as_dict(self):
        return {"min": self.min, "max": self.max, "fit_range": list(self.fit_range)}


@dataclass(eq=False)
class FeatureMatrices:
    pure: np.ndarray
    noisy: np.ndarray
    specs: list = field(default_factory=list)
    scaler: ScalerParams = None

    @property
    def shape(self):
        return self.pure.shape


def _prices(series):
    return np.asarray(getattr(series, "prices", series), dtype=float)


def _check_window(window, n):
    if not 2 <= window <= n:
        raise WindowOutOfRange(f"window {window} outside [2, {n}]")


def sma(series, window):
    """Simple moving average; the first window-1 entries average the available history."""
    x = _prices(series)
    _check_window(window, len(x))
    out = np.empty_like(x)
    head = min(window - 1, len(x))
    out[:head] = np.cumsum(x[:head]) / np.arange(1, head + 1)
    out[window - 1:] = sliding_window_view(x, window).mean(axis=1)
    return out


def ema(series, window):
    """Recursive EMA with alpha = 2/(window+1), seeded at the first price.

    The recursion is defined for any window >= 2, including windows longer
    than the series.
    """
    x = _prices(series)
    if window < 2:
        raise WindowOutOfRange(f"EMA window {window} < 2")
    return ema_values(x, window)


def ema_values(x, window):
    alpha = 2.0 / (window + 1)
    y, _ = lfilter([alpha], [1.0, alpha - 1.0], x, zi=[(1.0 - alpha) * x[0]])
    return y


def total_variation(values):
    return float(np.sum(np.abs(np.diff(np.asarray(values, dtype=float)))))


def fit_scaler(series, fit_range=None):
    """Min-max statistics over prices[start:stop] only."""
    x = _prices(series)
    start, stop = fit_range if fit_range is not None else (0, len(x))
    if not 0 <= start < stop <= len(x):
        raise ValueError(f"fit range {start}:{stop} invalid for length {len(x)}")
    seg = x[start:stop]
    return ScalerParams(float(seg.min()), float(seg.max()), (int(start), int(stop)))


def moving_average_specs(l2, lk, structure="combined"):
    if structure not in STRUCTURES:
        raise ValueError(f"structure must be one of {STRUCTURES}")
    windows = range(l2, lk + 1)
    specs = []
    if structure in ("combined", "sma_only"):
        specs += [MovingAverageSpec("SMA", w) for w in windows]
    if structure in ("combined", "ema_only"):
        specs += [MovingAverageSpec("EMA", w) for w in windows]
    return specs


def build_pure_input(series, l2, lk, scaler, structure="combined"):
    """Stack SMA_l2..SMA_lk then EMA_l2..EMA_lk, min-max scaled; shape (L, n)."""
    x = _prices(series)
    if not 2 <= l2 <= lk <= len(x):
        raise WindowOutOfRange(f"need 2 <= l2 <= lk <= n, got l2={l2}, lk={lk}, n={len(x)}")
    rows = []
    for spec in moving_average_specs(l2, lk, structure):
        fn = sma if spec.kind == "SMA" else ema
        rows.append(fn(x, spec.window))
    return scaler.transform(np.vstack(rows))


def build_noisy_input(series, L, scaler):
    if L < 1:
        raise ValueError("L must be >= 1")
    row = scaler.transform(_prices(series))
    return np.tile(row, (L, 1))


def build_feature_matrices(series, l2, lk, scaler, structure="combined"):
    specs = moving_average_specs(l2, lk, structure)
    pure = build_pure_input(series, l2, lk, scaler, structure)
    noisy = build_noisy_input(series, len(specs), scaler)
    return FeatureMatrices(pure, noisy, specs, scaler)


def save_feature_matrices(fm, path):
    """Flat binary: magic, version, JSON header (L, n, specs, scaler), then
    pure and noisy as row-major little-endian doubles."""
    L, n = fm.pure.shape
    header = json.dumps({
        "L": L,
        "n": n,
        "specs": [[s.kind, s.window] for s in fm.specs],
        "scaler": fm.scaler.as_dict() if fm.scaler else None,
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_FMAT_MAGIC)
        fh.write(struct.pack("<HI", _FMAT_VERSION, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(fm.pure, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(fm.noisy, dtype="<f8").tobytes())


def load_feature_matrices(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _FMAT_MAGIC:
            raise FormatError(f"{path}: not a feature-matrix file")
        version, hlen = struct.unpack("<HI", fh.read(6))
        if version != _FMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        header = json.loads(fh.read(hlen))
        L, n = header["L"], header["n"]
        pure = np.frombuffer(fh.read(8 * L * n), dtype="<f8").reshape(L, n).copy()
        noisy = np.frombuffer(fh.read(8 * L * n), dtype="<f8").reshape(L, n).copy()
    sc = header["scaler"]
    scaler = ScalerParams(sc["min"], sc["max"], tuple(sc["fit_range"])) if sc else None
    specs = [MovingAverageSpec(k, w) for k, w in header["specs"]]
    return FeatureMatrices(pure, noisy, specs, scaler)


def write_feature_csv(fm, path, timestamps=None):
    n = fm.pure.shape[1]
    stamps = timestamps if timestamps is not None else range(n)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "price_scaled"] + [s.name for s in fm.specs])
        for j, t in enumerate(stamps):
            w.writerow([t, repr(float(fm.noisy[0, j]))] + [repr(float(v)) for v in fm.pure[:, j]])
