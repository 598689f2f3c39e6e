"""Contrastive experiment: naive labels vs labels from the denoised series.

Workflow 1 labels the raw closes and trains the SVM on them. Workflow 2
trains the denoising autoencoder once (pretext), rebuilds the price series
from its output, relabels it and trains an identically configured SVM
(downstream). Both split samples chronologically.
"""

import hashlib
import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import indicators as ind
from .autoencoder import (
    AutoencoderModel,
    DenoisedSeries,
    TrainConfig,
    loss_descent,
    reconstruct,
    train,
)
from .errors import ConfigError, SeriesTooShort
from .features import build_feature_matrices, fit_scaler, total_variation
from .labeling import count_classes, default_tau_grid, naive_label
from .market_data import CsvSchema, ingest_csv, log_returns, log_returns_of
from .metrics import f1_scores
from .svm import SingleClassWarning, SvmConfig, featurize, predict, train_svm

logger = logging.getLogger(__name__)

LEAKAGE_MODES = ("train_segment_only", "full_series")


@dataclass(frozen=True)
class DataConfig:
    path: str = None
    date_column: str = "date"
    close_column: str = "close"
    frequency_hint: str = "daily"
    skip_bad_rows: bool = False


@dataclass(frozen=True)
class FeatureConfig:
    l2: int = 2
    lk: int = 21
    structure: str = "combined"


@dataclass(frozen=True)
class IndicatorConfig:
    ma_short: int = 10
    ma_long: int = 50
    bb_window: int = 20
    bb_k: float = 2.0
    match_window: int = 5
    warmup: str = "full"


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    seed: int = 0
    tau_grid: tuple = None  # None: linear grid from 0 to the 90th percentile of |r|
    tau_points: int = 21
    split: float = 0.8
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    leakage_mode: str = "train_segment_only"
    svm: SvmConfig = field(default_factory=SvmConfig)
    svm_window: int = 10
    indicators: IndicatorConfig = field(default_factory=IndicatorConfig)
    out: str = "out"
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.split < 1:
            raise ConfigError(f"split must lie in (0, 1), got {self.split}")
        if self.tau_grid is not None:
            grid = tuple(float(t) for t in self.tau_grid)
            if not grid:
                raise ConfigError("tau grid is empty")
            if any(t < 0 for t in grid):
                raise ConfigError("tau values must be >= 0")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError("tau grid must be strictly increasing")
            object.__setattr__(self, "tau_grid", grid)
        if self.tau_points < 1:
            raise ConfigError("tau_points must be >= 1")
        if self.leakage_mode not in LEAKAGE_MODES:
            raise ConfigError(f"leakage_mode must be one of {LEAKAGE_MODES}")
        if self.features.structure not in ("combined", "sma_only", "ema_only"):
            raise ConfigError(f"unknown structure {self.features.structure!r}")
        if self.indicators.warmup not in ind.WARMUPS:
            raise ConfigError(f"warmup must be one of {ind.WARMUPS}")
        if self.svm_window < 1:
            raise ConfigError("svm window must be >= 1")

    def as_dict(self):
        d = asdict(self)
        d["tau_grid"] = list(self.tau_grid) if self.tau_grid is not None else None
        return d

    def identity(self):
        """Settings that determine results; output location and parallelism excluded."""
        d = self.as_dict()
        d.pop("out")
        d.pop("workers")
        return d

    def fingerprint(self):
        d = self.identity()
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_mapping(cls, mapping):
        """Build from a nested mapping (as read from the YAML config file)."""
        mapping = dict(mapping or {})
        nested = {"data": DataConfig, "features": FeatureConfig, "train": TrainConfig,
                  "svm": SvmConfig, "indicators": IndicatorConfig}
        # "autoencoder" is accepted as an alias section for the training config
        if "autoencoder" in mapping:
            mapping["train"] = {**mapping.get("train", {}), **mapping.pop("autoencoder")}
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for key, value in mapping.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in nested:
                sub = nested[key]
                allowed = {f.name for f in fields(sub)}
                bad = set(value or {}) - allowed
                if bad:
                    raise ConfigError(f"unknown keys in [{key}]: {sorted(bad)}")
                try:
                    kwargs[key] = sub(**(value or {}))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"invalid [{key}] section: {exc}") from None
            else:
                kwargs[key] = value
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def with_overrides(self, **over):
        """Apply flag-style overrides; dotted keys address nested sections."""
        cfg = self
        for key, value in over.items():
            if value is None:
                continue
            if "." in key:
                section, name = key.split(".", 1)
                sub = getattr(cfg, section)
                try:
                    cfg = replace(cfg, **{section: replace(sub, **{name: value})})
                except (TypeError, ValueError) as exc:
                    raise ConfigError(str(exc)) from None
            else:
                cfg = replace(cfg, **{key: value})
        return cfg


@dataclass(frozen=True)
class Split:
    """Chronological sample split plus the price prefix the training samples touch."""

    n_samples: int
    n_train: int
    price_end: int  # prices[:price_end] cover every training feature and target


def chronological_split(n_prices, window, fraction):
    m = n_prices - 1 - window
    if m < 2:
        raise SeriesTooShort(f"{n_prices} prices leave {m} samples with window {window}")
    n_train = int(np.floor(fraction * m))
    n_train = min(max(n_train, 1), m - 1)
    # sample k uses returns k..k+window, i.e. prices k..k+window+1
    return Split(m, n_train, n_train + window + 1)


def load_series(config):
    if not config.data.path:
        raise ConfigError("no data path configured")
    schema = CsvSchema(config.data.date_column, config.data.close_column)
    return ingest_csv(config.data.path, schema, config.data.skip_bad_rows, config.data.frequency_hint)


def resolve_taus(config, series):
    if config.tau_grid is not None:
        return list(config.tau_grid)
    return default_tau_grid(log_returns(series), config.tau_points)


def _evaluate(prices, tau, config, split, source):
    """Label, featurize, train on the first split samples, score on the rest."""
    labels = naive_label(log_returns_of(prices), tau, source)
    samples = featurize(prices, labels, config.svm_window)
    k = split.n_train
    train_set = type(samples)(samples.features[:k], samples.targets[:k], samples.window, samples.indices[:k])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SingleClassWarning)
        model = train_svm(train_set, config.svm)
    pred = predict(model, samples.features[k:])
    f1 = f1_scores(pred, samples.targets[k:])
    return {
        "tau": float(tau),
        "f1": f1.as_dict(),
        "counts": count_classes(labels.labels, tau).as_dict(),
        "degenerate": bool(model.single_class),
        "warnings": [str(w.message) for w in caught],
        "svm_converged": bool(model.converged),
        "svm_gamma": float(model.gamma),
        "svm_config": config.svm.as_dict(),
        "n_train": int(k),
        "n_test": int(len(pred)),
    }


def _sweep(prices, taus, config, split, source):
    if config.workers > 1 and len(taus) > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            return list(pool.map(_evaluate, [prices] * len(taus), taus, [config] * len(taus),
                                 [split] * len(taus), [source] * len(taus)))
    return [_evaluate(prices, t, config, split, source) for t in taus]


def run_workflow1(config, series=None, taus=None):
    """Naive labels on the original closes -> SVM. Returns per-tau result dicts."""
    series = series if series is not None else load_series(config)
    taus = taus if taus is not None else resolve_taus(config, series)
    split = chronological_split(len(series), config.svm_window, config.split)
    return _sweep(np.asarray(series.prices), taus, config, split, "original")


@dataclass(eq=False)
class Pretext:
    model: AutoencoderModel
    denoised: object  # DenoisedSeries
    scaler: object
    diagnostics: dict


def run_pretext(config, series):
    """Fit scaler and autoencoder (once, tau-independent) and reconstruct the series."""
    x = np.asarray(series.prices)
    split = chronological_split(len(x), config.svm_window, config.split)
    end = split.price_end if config.leakage_mode == "train_segment_only" else len(x)
    scaler = fit_scaler(x, (0, end))
    fc = config.features
    fm = build_feature_matrices(x, fc.l2, fc.lk, scaler, fc.structure)
    model = AutoencoderModel.build(fm.pure.shape[0], seed=config.seed, train_config=config.train)
    # moving averages are causal, so columns < end only involve prices < end
    trained = train(model, fm.noisy[:, :end], fm.pure[:, :end], config.train)
    denoised = reconstruct(trained, fm.noisy, scaler)
    if end < len(x):
        # the convolutions look a few steps ahead, so the training prefix is
        # reconstructed from the prefix alone to keep test prices out of it
        head = reconstruct(trained, fm.noisy[:, :end], scaler)
        prices = np.concatenate([head.prices, denoised.prices[end:]])
        scaled = np.concatenate([head.scaled, denoised.scaled[end:]])
        spread = max(head.channel_spread, denoised.channel_spread)
        denoised = DenoisedSeries(prices, denoised.model_fingerprint, spread, scaled)
    hist = trained.loss_history
    diagnostics = {
        "leakage_mode": config.leakage_mode,
        "leaks_test_segment": config.leakage_mode == "full_series",
        "fit_range": [0, int(end)],
        "channels": int(fm.pure.shape[0]),
        "initial_loss": float(hist[0]),
        "final_loss": float(min(hist)),
        "best_epoch": int(trained.best_epoch),
        "epochs_run": len(hist),
        "channel_spread": denoised.channel_spread,
        "tv_original": total_variation(x),
        "tv_denoised": total_variation(denoised.prices),
        "model_fingerprint": denoised.model_fingerprint,
        "loss_descent": loss_descent(hist),
    }
    diagnostics["tv_ratio"] = diagnostics["tv_denoised"] / diagnostics["tv_original"]
    if diagnostics["loss_descent"]["flagged"]:
        logger.warning("training loss rose by %.1f%% within one epoch",
                       100 * diagnostics["loss_descent"]["max_rise"])
    return Pretext(trained, denoised, scaler, diagnostics)


def run_workflow2(config, series=None, taus=None, pretext=None):
    """Denoise, relabel from the reconstruction, then the Workflow 1 SVM protocol.

    Returns (per-tau results, Pretext).
    """
    series = series if series is not None else load_series(config)
    taus = taus if taus is not None else resolve_taus(config, series)
    pretext = pretext or run_pretext(config, series)
    split = chronological_split(len(series), config.svm_window, config.split)
    results = _sweep(np.asarray(pretext.denoised.prices), taus, config, split, "denoised")
    return results, pretext


def _signal_dict(s):
    return {"index": s.index, "price": s.price, "indicator": s.indicator, "timestamp": s.timestamp}


def run_indicators(config, series, denoised_prices):
    ic = config.indicators
    stamps = series.timestamps
    runners = {
        "ma_cross": lambda p: ind.ma_crossover_buys(p, ic.ma_short, ic.ma_long, ic.warmup, stamps),
        "macd": lambda p: ind.macd_buys(p, ic.warmup, stamps),
        "bb": lambda p: ind.bollinger_buys(p, ic.bb_window, ic.bb_k, stamps),
    }
    out = {}
    for name, fn in runners.items():
        try:
            orig = fn(np.asarray(series.prices))
            den = fn(np.asarray(denoised_prices))
        except SeriesTooShort as exc:
            out[name] = {"skipped": str(exc)}
            continue
        diff = ind.diff_signals(orig, den, ic.match_window)
        out[name] = {
            "original": [_signal_dict(s) for s in orig],
            "denoised": [_signal_dict(s) for s in den],
            "pairs": [[o.index, d.index] for o, d in diff.pairs],
            "deltas": diff.deltas,
            "verdicts": diff.verdicts(),
            "unmatched_original": [s.index for s in diff.unmatched_original],
            "unmatched_denoised": [s.index for s in diff.unmatched_denoised],
        }
    return out


@dataclass
class ExperimentReport:
    config: dict
    config_fingerprint: str
    seed: int
    taus: list
    workflow1: list
    workflow2: list
    diagnostics: dict
    indicators: dict
    n_prices: int
    split: dict

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(**{f.name: d[f.name] for f in fields(cls)})

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def rows(self, workflow):
        """Per-tau results for workflow 1 or 2 (also accepts "workflow1"/"workflow2")."""
        if workflow in (1, "1", "workflow1"):
            return self.workflow1
        if workflow in (2, "2", "workflow2"):
            return self.workflow2
        raise ValueError(f"unknown workflow {workflow!r}")

    def macro_f1(self, workflow):
        return [r["f1"]["macro_f1"] for r in self.rows(workflow)]

    def count_none(self, workflow):
        return [r["counts"]["count_none"] for r in self.rows(workflow)]


def run_experiment(config, series=None):
    """Both workflows plus indicator comparison. Returns (report, pretext, series)."""
    series = series if series is not None else load_series(config)
    taus = resolve_taus(config, series)
    split = chronological_split(len(series), config.svm_window, config.split)
    logger.info("workflow 1 over %d tau values", len(taus))
    w1 = run_workflow1(config, series, taus)
    logger.info("pretext: training autoencoder")
    w2, pretext = run_workflow2(config, series, taus)
    sig = run_indicators(config, series, pretext.denoised.prices)
    report = ExperimentReport(
        config=config.identity(),
        config_fingerprint=config.fingerprint(),
        seed=config.seed,
        taus=[float(t) for t in taus],
        workflow1=w1,
        workflow2=w2,
        diagnostics=pretext.diagnostics,
        indicators=sig,
        n_prices=len(series),
        split=asdict(split),
    )
    # json round trip normalises tuples and numpy scalars
    return ExperimentReport.from_json(report.to_json()), pretext, series
