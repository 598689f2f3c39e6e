"""Fixed-horizon threshold labels on one-step log returns."""

import csv
from dataclasses import dataclass

import numpy as np

from ._io import text_output
from .errors import NegativeTau

UP, NONE, DOWN = 1, 0, -1
CLASSES = (DOWN, NONE, UP)


@dataclass(frozen=True, eq=False)
class LabelSeries:
    labels: np.ndarray
    tau: float
    source: str = "original"

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int8)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class ClassCounts:
    tau: float
    count_up: int
    count_down: int
    count_none: int

    @property
    def total(self):
        return self.count_up + self.count_down + self.count_none

    def as_dict(self):
        return {
            "tau": self.tau,
            "count_up": self.count_up,
            "count_down": self.count_down,
            "count_none": self.count_none,
        }


def _check_tau(tau):
    if not tau >= 0:
        raise NegativeTau(f"tau must be >= 0, got {tau}")


def label_values(r, tau):
    """+1 above tau, -1 below -tau, 0 inside the closed band [-tau, tau]."""
    _check_tau(tau)
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape, dtype=np.int8)
    out[r > tau] = UP
    out[r < -tau] = DOWN
    return out


def naive_label(returns, tau, source="original"):
    if returns.kind != "log":
        raise ValueError("labels are defined on log returns")
    return LabelSeries(label_values(returns.values, tau), float(tau), source)


def count_classes(labels, tau):
    labels = np.asarray(labels)
    return ClassCounts(
        tau=float(tau),
        count_up=int(np.sum(labels == UP)),
        count_down=int(np.sum(labels == DOWN)),
        count_none=int(np.sum(labels == NONE)),
    )


def class_counts_sweep(returns, taus):
    taus = [float(t) for t in taus]
    for t in taus:
        _check_tau(t)
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("tau grid must be strictly increasing")
    return [count_classes(naive_label(returns, t).labels, t) for t in taus]


def default_tau_grid(returns, points=21, quantile=0.9):
    """Linear grid from 0 to the given quantile of |r|."""
    top = float(np.quantile(np.abs(returns.values), quantile))
    if top <= 0:
        return [0.0]
    return [float(v) for v in np.linspace(0.0, top, points)]


def write_labels_csv(target, timestamps, returns, labels):
    """timestamps are the full price timestamps; labels align with index 1.."""
    with text_output(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "return", "label", "tau", "source"])
        for t, r, y in zip(timestamps[1:], returns.values, labels.labels):
            w.writerow([t, repr(float(r)), int(y), repr(labels.tau), labels.source])
