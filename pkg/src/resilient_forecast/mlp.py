"""The 168-50-1 forecasting network: forward pass, loss, gradients, training.

Inputs are log loads and the output is a log load. The model also carries a
fixed affine scaler. With the identity scaler the output is exactly::

    z_hat = w2 . sigmoid(w1 @ x_log + b1) + b2

Training fits the scaler from the clean training data (one scalar centre and
scale for all inputs, one for the target) so that plain gradient descent is
usable on inputs that all sit near ln(load) ~ 10.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ._backend import BACKEND, kernels
from .dataio import WINDOW_LENGTH, WindowedDataset
from .errors import DivergenceError, ValidationError

N_HIDDEN = 50
MODEL_FORMAT = "resilient-forecast/mlp"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Scaler:
    input_center: float = 0.0
    input_scale: float = 1.0
    output_center: float = 0.0
    output_scale: float = 1.0

    @property
    def is_identity(self) -> bool:
        return self == Scaler()


def _frozen(a, shape, name):
    a = np.array(a, dtype=np.float64)
    if a.shape != shape:
        raise ValidationError(f"{name} has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite values")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MLPModel:
    """Weights of a one-hidden-layer network. ``w2`` is stored as a vector."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    scaler: Scaler = field(default_factory=Scaler)
    seed: int | None = None
    hidden_activation: str = "sigmoid"
    output_activation: str = "linear"

    def __post_init__(self):
        w1 = np.asarray(self.w1)
        if w1.ndim != 2:
            raise ValidationError("w1 must be a matrix")
        h, n = w1.shape
        object.__setattr__(self, "w1", _frozen(w1, (h, n), "w1"))
        object.__setattr__(self, "b1", _frozen(self.b1, (h,), "b1"))
        object.__setattr__(self, "w2", _frozen(np.ravel(self.w2), (h,), "w2"))
        b2 = float(self.b2)
        if not np.isfinite(b2):
            raise ValidationError("b2 is not finite")
        object.__setattr__(self, "b2", b2)
        if self.hidden_activation != "sigmoid" or self.output_activation != "linear":
            raise ValidationError("only sigmoid hidden / linear output units are supported")

    @property
    def n_in(self) -> int:
        return self.w1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w1.shape[0]


@dataclass(frozen=True)
class Gradient:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.01
    max_epochs: int = 1000
    loss_tolerance: float = 1e-8
    seed: int = 0
    standardize: bool = True

    def validate(self):
        if not (self.eta > 0 and np.isfinite(self.eta)):
            raise ValidationError("eta must be a positive finite number")
        if int(self.max_epochs) != self.max_epochs or self.max_epochs < 1:
            raise ValidationError("max_epochs must be an integer >= 1")
        if not self.loss_tolerance >= 0:
            raise ValidationError("loss_tolerance must be non-negative")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown training keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TrainReport:
    """``loss_trace[j]`` is E (log units) at the parameters entering epoch ``j``."""

    epochs_run: int
    loss_trace: tuple
    final_loss: float

    def to_dict(self):
        return {"epochs_run": self.epochs_run, "final_loss": self.final_loss,
                "loss_trace": list(self.loss_trace)}


def init_model(seed: int, n_in: int = WINDOW_LENGTH, n_hidden: int = N_HIDDEN) -> MLPModel:
    """Uniform +-1/sqrt(fan_in) weights per layer, zero biases."""
    rng = np.random.default_rng(seed)
    a1, a2 = 1.0 / np.sqrt(n_in), 1.0 / np.sqrt(n_hidden)
    w1 = rng.uniform(-a1, a1, size=(n_hidden, n_in))
    w2 = rng.uniform(-a2, a2, size=n_hidden)
    return MLPModel(w1, np.zeros(n_hidden), w2, 0.0, seed=seed)


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def _check_input(model, x_log):
    x = np.asarray(x_log, dtype=np.float64)
    if x.shape != (model.n_in,):
        raise ValidationError(f"input must have length {model.n_in}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("input contains non-finite values")
    return x


def forward(model: MLPModel, x_log) -> float:
    """Forecast in log space for one window."""
    x = _check_input(model, x_log)
    s = model.scaler
    h = _sigmoid(model.w1 @ ((x - s.input_center) / s.input_scale) + model.b1)
    return float(s.output_center + s.output_scale * (h @ model.w2 + model.b2))


def forward_batch(model: MLPModel, x_log) -> np.ndarray:
    x = np.asarray(x_log, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_in:
        raise ValidationError(f"inputs must be (N, {model.n_in})")
    if not np.all(np.isfinite(x)):
        raise ValidationError("inputs contain non-finite values")
    s = model.scaler
    xn = np.ascontiguousarray((x - s.input_center) / s.input_scale)
    out = kernels.predict(model.w1, model.b1, model.w2, model.b2, xn)
    return s.output_center + s.output_scale * np.asarray(out)


def loss(z_hat: float, z: float) -> float:
    return 0.5 * (z_hat - z) ** 2


def dataset_loss(model: MLPModel, data: WindowedDataset) -> float:
    """Mean squared-error loss E over all samples."""
    if len(data) == 0:
        raise ValidationError("dataset is empty")
    r = forward_batch(model, data.x_log) - data.z
    return float(np.mean(0.5 * r * r))


def backprop(model: MLPModel, x_log, z: float) -> Gradient:
    """Exact gradient of ``loss(forward(model, x_log), z)`` w.r.t. every parameter."""
    x = _check_input(model, x_log)
    s = model.scaler
    xn = (x - s.input_center) / s.input_scale
    a = model.w1 @ xn + model.b1
    h = _sigmoid(a)
    z_hat = s.output_center + s.output_scale * (h @ model.w2 + model.b2)
    g_out = (z_hat - z) * s.output_scale
    # sigma'(a) as sigma(a) * sigma(-a): 1 - h cancels badly once units saturate
    g_pre = g_out * model.w2 * h * _sigmoid(-a)
    return Gradient(np.outer(g_pre, xn), g_pre, g_out * h, float(g_out))


def _canonical(data: WindowedDataset):
    """Distinct (input, target) rows in sorted order with weights count/N.

    Summing over this canonical form makes each update independent of sample
    order, and duplicated samples weigh exactly as their multiplicity.
    """
    rows = np.column_stack([data.x_log, data.z])
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    weight = counts / len(data)
    return np.ascontiguousarray(uniq[:, :-1]), np.ascontiguousarray(uniq[:, -1]), weight


def fit_scaler(x, z, weight) -> Scaler:
    xc = float(weight @ x.mean(axis=1))
    xs = float(np.sqrt(weight @ ((x - xc) ** 2).mean(axis=1)))
    zc = float(weight @ z)
    zs = float(np.sqrt(weight @ (z - zc) ** 2))
    return Scaler(xc, xs if xs > 0 else 1.0, zc, zs if zs > 0 else 1.0)


def train(model: MLPModel, data: WindowedDataset, cfg: TrainConfig) -> tuple[MLPModel, TrainReport]:
    """Full-batch gradient descent from ``model``.

    Each epoch applies ``w <- w - eta * grad`` of the mean loss in the
    scaler's standardized units; with the identity scaler this is
    ``w - (eta / N) * sum_m grad_w L_m``. When ``cfg.standardize`` is set and
    the model still has the identity scaler, a scaler is first fitted to
    ``data``; an already fitted scaler is kept.
    """
    cfg.validate()
    if len(data) == 0:
        raise ValidationError("dataset is empty")
    if data.window_length != model.n_in:
        raise ValidationError(f"window length {data.window_length} != model input {model.n_in}")
    x, z, weight = _canonical(data)
    scaler = model.scaler
    if cfg.standardize and scaler.is_identity:
        scaler = fit_scaler(x, z, weight)
    xn = np.ascontiguousarray((x - scaler.input_center) / scaler.input_scale)
    zn = np.ascontiguousarray((z - scaler.output_center) / scaler.output_scale)

    w1, b1, w2 = (np.array(a, dtype=np.float64, order="C") for a in (model.w1, model.b1, model.w2))
    b2 = np.array([model.b2])
    unit = scaler.output_scale**2
    trace, diverged = kernels.fit(
        w1, b1, w2, b2, xn, zn, weight, float(cfg.eta), int(cfg.max_epochs), cfg.loss_tolerance / unit
    )
    if diverged >= 0:
        raise DivergenceError(diverged + 1)
    if not all(np.all(np.isfinite(a)) for a in (w1, b1, w2, b2)):
        raise DivergenceError(len(trace))
    trace = tuple(float(e) * unit for e in trace)
    out = replace(model, w1=w1, b1=b1, w2=w2, b2=float(b2[0]), scaler=scaler, seed=cfg.seed)
    return out, TrainReport(len(trace), trace, trace[-1])


# -- persistence ------------------------------------------------------------


def model_to_dict(model: MLPModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layers": {"input": model.n_in, "hidden": model.n_hidden, "output": 1},
        "activations": {"hidden": model.hidden_activation, "output": model.output_activation},
        "w1": model.w1.tolist(),
        "b1": model.b1.tolist(),
        "w2": [model.w2.tolist()],
        "b2": model.b2,
        "scaler": asdict(model.scaler),
        "seed": model.seed,
    }


def model_from_dict(d: dict) -> MLPModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValidationError("not a model document")
    if d.get("version") != MODEL_VERSION:
        raise ValidationError(f"unsupported model version {d.get('version')}")
    layers = d["layers"]
    model = MLPModel(
        np.array(d["w1"]), np.array(d["b1"]), np.array(d["w2"]).ravel(), d["b2"],
        Scaler(**d["scaler"]), d.get("seed"),
        d["activations"]["hidden"], d["activations"]["output"],
    )
    if (model.n_in, model.n_hidden, 1) != (layers["input"], layers["hidden"], layers["output"]):
        raise ValidationError("layer dimensions disagree with weight shapes")
    return model


def save_model(model: MLPModel, path):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> MLPModel:
    return model_from_dict(json.loads(Path(path).read_text()))


__all__ = [
    "BACKEND", "Gradient", "MLPModel", "Scaler", "TrainConfig", "TrainReport",
    "backprop", "dataset_loss", "fit_scaler", "forward", "forward_batch", "init_model",
    "load_model", "loss", "model_from_dict", "model_to_dict", "save_model", "train",
]
