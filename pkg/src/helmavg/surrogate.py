"""Dense ReLU network for the averaged response, trained from scratch.

The model is a composition of affine maps and rectifications,
5 -> 128 -> 128 -> 128 -> 1 by default.  Training is minibatch ADAM on
the mean squared error with a polynomially decaying step size and
validation-based early stopping that restores the best weights seen.
All arithmetic is float64 numpy; nothing here depends on a deep
learning framework.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .validation import as_radii_matrix, check_finite_vector

FORMAT_MAGIC = "helmavg-mlp"
FORMAT_VERSION = 1


@dataclass
class MlpModel:
    """Layer weights A_k (out x in) and biases b_k."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for w, b in zip(self.weights, self.biases):
            digest.update(np.ascontiguousarray(w).tobytes())
            digest.update(np.ascontiguousarray(b).tobytes())
        return digest.hexdigest()[:16]


@dataclass(frozen=True)
class TrainConfig:
    s0: float = 1e-3
    s_end: float = 1e-4
    decay_steps: int = 10_000
    decay_power: float = 0.5
    batch_size: int = 128
    max_epochs: int = 500
    patience: int = 25
    min_delta: float = 1e-5
    val_fraction: float = 0.2
    init_seed: int = 0
    shuffle_seed: int = 1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden_layers: int = 3
    hidden_units: int = 128

    def __post_init__(self):
        if not (0.0 < self.val_fraction < 1.0):
            raise ValueError("val_fraction must lie in (0, 1)")
        for name in ("s0", "s_end", "decay_steps", "batch_size", "max_epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def layer_dims(self) -> list[int]:
        return [5] + [self.hidden_units] * self.hidden_layers + [1]


@dataclass
class TrainHistory:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def n_epochs(self) -> int:
        return len(self.val_mse)


def init_glorot(layer_dims: list[int], seed: int) -> MlpModel:
    """Uniform(-L, L) weights with L = sqrt(6/(fan_in + fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases)


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Nested affine/ReLU evaluation; the output layer stays affine.

    Accepts a single input vector or a batch; returns a scalar or a
    vector accordingly.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    z = np.atleast_2d(x)
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = z @ w.T + b
        if i < last:
            z = np.maximum(z, 0.0)
    out = z[:, 0]
    return float(out[0]) if single else out


def loss_and_gradients(model: MlpModel, X: np.ndarray, y: np.ndarray):
    """MSE over the batch and its exact reverse-mode gradients.

    The rectifier subgradient at zero is taken as zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) == 0:
        raise ValueError("batch is empty")

    last = len(model.weights) - 1
    acts = [X]
    pre = []
    z = X
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = z @ w.T + b
        pre.append(z)
        if i < last:
            z = np.maximum(z, 0.0)
        acts.append(z)

    resid = acts[-1][:, 0] - y
    mse = float(np.mean(resid ** 2))

    n = len(y)
    delta = (2.0 / n) * resid[:, None]
    grads_w = [np.empty(0)] * len(model.weights)
    grads_b = [np.empty(0)] * len(model.biases)
    for i in range(last, -1, -1):
        grads_w[i] = delta.T @ acts[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (pre[i - 1] > 0.0)
    return mse, grads_w, grads_b


def lr_schedule(step: int, config: TrainConfig) -> float:
    """Polynomial decay from s0 to s_end over decay_steps, constant after."""
    if step < 0:
        raise ValueError("step must be nonnegative")
    frac = min(step, config.decay_steps) / config.decay_steps
    return (config.s0 - config.s_end) * (1.0 - frac) ** config.decay_power + config.s_end


class _Adam:
    def __init__(self, model: MlpModel, config: TrainConfig):
        self.config = config
        self.m_w = [np.zeros_like(w) for w in model.weights]
        self.v_w = [np.zeros_like(w) for w in model.weights]
        self.m_b = [np.zeros_like(b) for b in model.biases]
        self.v_b = [np.zeros_like(b) for b in model.biases]
        self.t = 0

    def step(self, model: MlpModel, grads_w, grads_b) -> None:
        cfg = self.config
        lr = lr_schedule(self.t, cfg)
        self.t += 1
        b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for i in range(len(model.weights)):
            for m, v, g, p in ((self.m_w[i], self.v_w[i], grads_w[i], model.weights[i]),
                               (self.m_b[i], self.v_b[i], grads_b[i], model.biases[i])):
                m *= b1
                m += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * g * g
                p -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)


def train(data, config: TrainConfig = TrainConfig()) -> tuple[MlpModel, TrainHistory]:
    """Fit the network on a dataset or an (X, y) pair.

    Validation MSE is checked once per epoch; a drop larger than
    ``min_delta`` below the best value seen counts as an improvement, and
    after ``patience`` epochs without one training stops and the weights
    of the best epoch are restored.
    """
    if hasattr(data, "as_arrays"):
        X, y = data.as_arrays()
    else:
        X, y = data
    X = as_radii_matrix(X)
    y = check_finite_vector(y)
    if len(X) < 10:
        raise ValueError("need at least 10 rows to train")

    split_rng = np.random.default_rng([config.shuffle_seed, 0])
    perm = split_rng.permutation(len(X))
    n_val = max(1, int(round(len(X) * config.val_fraction)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    X_train, y_train = X[train_idx], y[train_idx]
    X_val, y_val = X[val_idx], y[val_idx]

    model = init_glorot(config.layer_dims, config.init_seed)
    opt = _Adam(model, config)
    history = TrainHistory(metadata={
        "batch_size": config.batch_size,
        "layer_dims": config.layer_dims,
        "n_train": len(X_train),
        "n_val": len(X_val),
    })

    best_val = math.inf
    best_model = model.copy()
    improve_ref = math.inf
    since_improvement = 0

    for epoch in range(config.max_epochs):
        order = np.random.default_rng([config.shuffle_seed, epoch + 1]).permutation(len(X_train))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            mse, grads_w, grads_b = loss_and_gradients(model, X_train[batch], y_train[batch])
            if not np.isfinite(mse):
                raise FloatingPointError(
                    f"loss became non-finite at epoch {epoch}, step {opt.t}; "
                    "inspect the data scaling or reduce the step size"
                )
            epoch_losses.append(mse * len(batch))
            opt.step(model, grads_w, grads_b)

        history.train_mse.append(math.fsum(epoch_losses) / len(order))
        val_pred = forward(model, X_val)
        val_mse = float(np.mean((val_pred - y_val) ** 2))
        history.val_mse.append(val_mse)

        if val_mse < best_val:
            best_val = val_mse
            best_model = model.copy()
            history.best_epoch = epoch
        if improve_ref - val_mse > config.min_delta:
            improve_ref = val_mse
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement >= config.patience:
                history.stopped_early = True
                break

    return best_model, history


def predict(model: MlpModel, radii) -> np.ndarray:
    """Forward pass with short rows broadcast to the 5-point grid."""
    X = as_radii_matrix(radii)
    return forward(model, X)


def save(model: MlpModel, path) -> None:
    """JSON header line followed by the row-major float64 payload."""
    header = {
        "format": FORMAT_MAGIC,
        "version": FORMAT_VERSION,
        "layer_dims": model.layer_dims,
        "dtype": "float64",
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        for w, b in zip(model.weights, model.biases):
            f.write(np.ascontiguousarray(w, dtype=np.float64).tobytes())
            f.write(np.ascontiguousarray(b, dtype=np.float64).tobytes())


def load(path) -> MlpModel:
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode("ascii"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: not a model checkpoint ({exc})") from exc
        if header.get("format") != FORMAT_MAGIC:
            raise ValueError(f"{path}: unknown format {header.get('format')!r}")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {header.get('version')!r}")
        dims = header["layer_dims"]
        payload = f.read()

    expected = sum((dims[i + 1] * dims[i] + dims[i + 1]) for i in range(len(dims) - 1))
    data = np.frombuffer(payload, dtype=np.float64)
    if len(data) != expected:
        raise ValueError(f"{path}: payload holds {len(data)} values, expected {expected}")

    weights, biases, pos = [], [], 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(data[pos:pos + fan_out * fan_in].reshape(fan_out, fan_in).copy())
        pos += fan_out * fan_in
        biases.append(data[pos:pos + fan_out].copy())
        pos += fan_out
    return MlpModel(weights, biases)


class MlpRegressor(BaseEstimator, RegressorMixin):
    """Estimator wrapper around the from-scratch network.

    Hyperparameters mirror :class:`TrainConfig`; after ``fit`` the raw
    model and training history are available as ``model_`` and
    ``history_``.
    """

    def __init__(self, hidden_layers: int = 3, hidden_units: int = 128,
                 s0: float = 1e-3, s_end: float = 1e-4, decay_steps: int = 10_000,
                 batch_size: int = 128, max_epochs: int = 500, patience: int = 25,
                 min_delta: float = 1e-5, val_fraction: float = 0.2,
                 init_seed: int = 0, shuffle_seed: int = 1):
        self.hidden_layers = hidden_layers
        self.hidden_units = hidden_units
        self.s0 = s0
        self.s_end = s_end
        self.decay_steps = decay_steps
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.min_delta = min_delta
        self.val_fraction = val_fraction
        self.init_seed = init_seed
        self.shuffle_seed = shuffle_seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            s0=self.s0, s_end=self.s_end, decay_steps=self.decay_steps,
            batch_size=self.batch_size, max_epochs=self.max_epochs,
            patience=self.patience, min_delta=self.min_delta,
            val_fraction=self.val_fraction, init_seed=self.init_seed,
            shuffle_seed=self.shuffle_seed, hidden_layers=self.hidden_layers,
            hidden_units=self.hidden_units,
        )

    def fit(self, X, y):
        self.model_, self.history_ = train((X, y), self._config())
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return predict(self.model_, X)
