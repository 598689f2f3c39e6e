"""Denoising autoencoder: architecture, training, reconstruction, checkpoints."""

import copy
import csv
import hashlib
import json
import logging
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import FormatError, NonFiniteLoss, ShapeMismatch
from .layers import Conv1dLayer, conv1d_backward, conv1d_forward

logger = logging.getLogger(__name__)

_CKPT_MAGIC = b"SSDAE\x00"
_CKPT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    patience: int = 50  # None disables early stopping
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    window_length: int = 2048
    window_stride: int = 1024
    windows_per_batch: int = 8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.window_stride < 1 or self.window_stride > self.window_length:
            raise ValueError("window_stride must lie in [1, window_length]")


@dataclass(frozen=True)
class Architecture:
    encoder_channels: tuple = (16, 8)
    kernel_size: int = 3

    def layer_plan(self, L):
        c1, c2 = self.encoder_channels
        k = self.kernel_size
        return [
            ("conv", L, c1, k, "relu"),
            ("conv", c1, c2, k, "relu"),
            ("transposed_conv", c2, c1, k, "relu"),
            ("transposed_conv", c1, L, k, "relu"),
            ("conv", L, L, k, "sigmoid"),
        ]


@dataclass(eq=False)
class AutoencoderModel:
    layers: list
    seed: int = 0
    train_config: TrainConfig = field(default_factory=TrainConfig)
    loss_history: list = field(default_factory=list)
    best_epoch: int = None

    @classmethod
    def build(cls, L, seed=0, train_config=None, architecture=None):
        arch = architecture or Architecture()
        rng = np.random.default_rng(seed)
        layers = [Conv1dLayer.init(kind, cin, cout, k, act, rng)
                  for kind, cin, cout, k, act in arch.layer_plan(L)]
        return cls(layers, seed, train_config or TrainConfig())

    @property
    def channels(self):
        return self.layers[0].in_channels

    def params(self):
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.biases]
        return out

    def set_params(self, params):
        for i, layer in enumerate(self.layers):
            layer.weights = params[2 * i].copy()
            layer.biases = params[2 * i + 1].copy()

    def describe(self):
        return {
            "layers": [layer.describe() for layer in self.layers],
            "seed": self.seed,
            "train_config": asdict(self.train_config),
        }

    def fingerprint(self):
        h = hashlib.sha256(json.dumps(self.describe(), sort_keys=True).encode())
        for p in self.params():
            h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
        return h.hexdigest()

    def forward(self, x, return_caches=False):
        x = np.asarray(x, dtype=float)
        if x.shape[-2] != self.channels:
            raise ShapeMismatch(f"model expects {self.channels} channels, got {x.shape[-2]}")
        caches = []
        a = x
        for layer in self.layers:
            a, cache = conv1d_forward(a, layer, return_cache=True)
            caches.append((a, cache))
        return (a, caches) if return_caches else a

    def loss_and_grads(self, x, target):
        """Mean squared reconstruction error and its parameter gradients."""
        out, caches = self.forward(x, return_caches=True)
        diff = out - target
        loss = float(np.mean(diff * diff))
        g = 2.0 * diff / diff.size
        grads = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            _, cache = caches[i]
            g, dw, db = conv1d_backward(self.layers[i], None, g, cache=cache)
            grads[2 * i], grads[2 * i + 1] = dw, db
        return loss, grads


def window_starts(n, length, stride):
    if n <= length:
        return [0]
    starts = list(range(0, n - length + 1, stride))
    if starts[-1] != n - length:
        starts.append(n - length)
    return starts


def _batches(noisy, pure, cfg):
    n = noisy.shape[1]
    if n <= cfg.window_length:
        return [(noisy[None], pure[None])]
    starts = window_starts(n, cfg.window_length, cfg.window_stride)
    w = cfg.window_length
    out = []
    for i in range(0, len(starts), cfg.windows_per_batch):
        chunk = starts[i:i + cfg.windows_per_batch]
        out.append((np.stack([noisy[:, s:s + w] for s in chunk]),
                    np.stack([pure[:, s:s + w] for s in chunk])))
    return out


class _Adam:
    def __init__(self, params, cfg):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


class _Sgd:
    def __init__(self, params, cfg):
        self.cfg = cfg

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.cfg.learning_rate * g


def train(model, noisy, pure, config=None):
    """Fit the model mapping noisy -> pure by full-batch gradient descent.

    Targets are clipped to [0, 1], the sigmoid range. ``loss_history[e]`` is
    the loss of the parameters entering epoch ``e``; the returned model holds
    the parameters with the lowest recorded loss. Series longer than
    ``window_length`` are cut into overlapping windows processed in fixed order.
    """
    cfg = config or model.train_config
    noisy = np.asarray(noisy, dtype=float)
    pure = np.clip(np.asarray(pure, dtype=float), 0.0, 1.0)
    if noisy.shape != pure.shape:
        raise ShapeMismatch(f"noisy {noisy.shape} and pure {pure.shape} differ")
    if not (np.all(np.isfinite(noisy)) and np.all(np.isfinite(pure))):
        raise ValueError("training inputs must be finite")

    model = copy.deepcopy(model)
    model.train_config = cfg
    params = model.params()
    opt = (_Adam if cfg.optimizer == "adam" else _Sgd)(params, cfg)
    batches = _batches(noisy, pure, cfg)
    weights = np.array([b[0].shape[0] for b in batches], dtype=float)
    weights /= weights.sum()

    history = []
    best_loss, best_epoch, best_params = np.inf, 0, None
    for epoch in range(cfg.epochs):
        before = [p.copy() for p in params]
        epoch_loss = 0.0
        for (xb, tb), wgt in zip(batches, weights):
            loss, grads = model.loss_and_grads(xb, tb)
            if not np.isfinite(loss):
                raise NonFiniteLoss(epoch, loss)
            epoch_loss += wgt * loss
            opt.step(params, grads)
        history.append(float(epoch_loss))
        if epoch_loss < best_loss:
            best_loss, best_epoch, best_params = epoch_loss, epoch, before
        if cfg.patience is not None and epoch - best_epoch >= cfg.patience:
            logger.info("early stop at epoch %d (best %d)", epoch, best_epoch)
            break

    model.set_params(best_params)
    model.loss_history = history
    model.best_epoch = best_epoch
    return model


def loss_descent(history, start=5, tolerance=0.05):
    """Summarise epoch-over-epoch loss increases after ``start``.

    A rise larger than ``tolerance`` (relative to the previous epoch) is
    flagged; smaller ones count as transients.
    """
    h = np.asarray(history[start:], dtype=float)
    if len(h) < 2:
        return {"rises": 0, "max_rise": 0.0, "flagged": False}
    rel = h[1:] / h[:-1] - 1.0
    max_rise = float(max(rel.max(), 0.0))
    return {"rises": int(np.sum(rel > 0)), "max_rise": max_rise, "flagged": max_rise > tolerance}


@dataclass(eq=False)
class DenoisedSeries:
    prices: np.ndarray
    model_fingerprint: str
    channel_spread: float
    scaled: np.ndarray = None

    def __len__(self):
        return len(self.prices)


def predict_matrix(model, noisy):
    """Forward pass over the whole (L, n) input, windowed and stitched when long."""
    noisy = np.asarray(noisy, dtype=float)
    cfg = model.train_config
    L, n = noisy.shape
    if n <= cfg.window_length:
        return model.forward(noisy)
    w = cfg.window_length
    acc = np.zeros((L, n))
    hits = np.zeros(n)
    starts = window_starts(n, w, cfg.window_stride)
    for i in range(0, len(starts), cfg.windows_per_batch):
        chunk = starts[i:i + cfg.windows_per_batch]
        out = model.forward(np.stack([noisy[:, s:s + w] for s in chunk]))
        for s, o in zip(chunk, out):
            acc[:, s:s + w] += o
            hits[s:s + w] += 1
    return acc / hits


def reconstruct(model, noisy, scaler):
    """Collapse the L output channels to one series by their mean, in price units."""
    out = predict_matrix(model, noisy)
    collapsed = out.mean(axis=0)
    spread = float(np.max(out.std(axis=0)))
    prices = scaler.inverse(collapsed)
    if not np.all(np.isfinite(prices)):
        raise NonFiniteLoss(-1, float("nan"))
    return DenoisedSeries(prices, model.fingerprint(), spread, collapsed)


def save_checkpoint(model, path):
    """Magic, version, JSON architecture descriptor, seed, then raw LE doubles."""
    desc = model.describe()
    desc["loss_history_length"] = len(model.loss_history)
    desc["best_epoch"] = model.best_epoch
    blob = json.dumps(desc, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<HIq", _CKPT_VERSION, len(blob), int(model.seed)))
        fh.write(blob)
        for p in model.params():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        if fh.read(len(_CKPT_MAGIC)) != _CKPT_MAGIC:
            raise FormatError(f"{path}: not an autoencoder checkpoint")
        version, blen, seed = struct.unpack("<HIq", fh.read(14))
        if version != _CKPT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        desc = json.loads(fh.read(blen))
        layers = []
        for d in desc["layers"]:
            shape = (d["out_channels"], d["in_channels"], d["kernel_size"])
            w = np.frombuffer(fh.read(8 * int(np.prod(shape))), dtype="<f8").reshape(shape)
            b = np.frombuffer(fh.read(8 * d["out_channels"]), dtype="<f8")
            layers.append(Conv1dLayer(d["kind"], d["in_channels"], d["out_channels"],
                                      d["kernel_size"], w.copy(), b.copy(), d["activation"]))
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after parameters")
    cfg = dict(desc["train_config"])
    model = AutoencoderModel(layers, seed, TrainConfig(**cfg))
    model.best_epoch = desc.get("best_epoch")
    return model


def write_loss_csv(model, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(model.loss_history):
            w.writerow([i, repr(v)])
