"""Small fully connected network fitting (k1, theta) -> SSIM.

Architecture is fixed at 2 inputs, 10 tanh hidden units, 1 linear output.
Training is full-batch Adam with mean squared error, bit-deterministic under
a fixed seed. The fitted surface turns into an SSIM threshold band via
empirical quantiles of its predictions over a grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from advsmo.errors import DegenerateRangeError, EmptyDatasetError, EmptyGridError
from advsmo.search import CandidatePair

HIDDEN = 10


@dataclass(frozen=True)
class InputNorm:
    """Per-feature (min, max) used to map raw (k1, theta) into [0, 1]^2."""

    k1_min: float
    k1_max: float
    theta_min: float
    theta_max: float

    def __post_init__(self):
        if not (self.k1_min < self.k1_max and self.theta_min < self.theta_max):
            raise DegenerateRangeError(
                f"normalization needs min < max per feature, got "
                f"k1 ({self.k1_min}, {self.k1_max}), theta ({self.theta_min}, {self.theta_max})")

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        mins = np.array([self.k1_min, self.theta_min], dtype=np.float64)
        maxs = np.array([self.k1_max, self.theta_max], dtype=np.float64)
        return mins, maxs


def normalize_input(pair: CandidatePair, norm: InputNorm) -> np.ndarray:
    """(v - min) / (max - min) per feature, clamped into [0, 1]."""
    mins, maxs = norm.as_arrays()
    raw = np.array([pair.k1, pair.theta], dtype=np.float64)
    return np.clip((raw - mins) / (maxs - mins), 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class SurrogateModel:
    w1: np.ndarray   # (10, 2)
    b1: np.ndarray   # (10,)
    w2: np.ndarray   # (1, 10)
    b2: np.ndarray   # (1,)
    input_norm: InputNorm
    seed: int = 0
    epochs_trained: int = 0

    def __post_init__(self):
        shapes = {"w1": (HIDDEN, 2), "b1": (HIDDEN,), "w2": (1, HIDDEN), "b2": (1,)}
        for name, shape in shapes.items():
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 700
    step_size: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0:
            raise ValueError("epochs must be > 0")
        if not (self.step_size > 0.0):
            raise ValueError("step_size must be > 0")


@dataclass(frozen=True)
class TrainResult:
    model: SurrogateModel
    loss_curve: list[float]  # one MSE value per epoch, post-update

    @property
    def final_loss(self) -> float:
        return self.loss_curve[-1]


def forward(model: SurrogateModel, x: np.ndarray) -> float:
    """b2 + w2 . tanh(w1 x + b1) for a single normalized 2-vector."""
    x = np.asarray(x, dtype=np.float64).reshape(2)
    h = np.tanh(model.w1 @ x + model.b1)
    return float((model.w2 @ h + model.b2)[0])


def _forward_batch(w1, b1, w2, b2, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = np.tanh(x @ w1.T + b1)          # (n, 10)
    pred = h @ w2.T + b2                # (n, 1)
    return h, pred[:, 0]


def mse_loss(model: SurrogateModel, inputs: np.ndarray, targets: np.ndarray) -> float:
    _, pred = _forward_batch(model.w1, model.b1, model.w2, model.b2,
                             np.asarray(inputs, dtype=np.float64))
    r = pred - np.asarray(targets, dtype=np.float64)
    return float((r * r).mean())


def loss_gradients(model: SurrogateModel, inputs: np.ndarray,
                   targets: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic gradients of the batch MSE with respect to every parameter."""
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    n = len(y)
    h, pred = _forward_batch(model.w1, model.b1, model.w2, model.b2, x)
    g_pred = (2.0 / n) * (pred - y)                 # (n,)
    g_w2 = (g_pred[None, :] @ h)                    # (1, 10)
    g_b2 = np.array([g_pred.sum()])
    g_h = g_pred[:, None] * model.w2[0][None, :]    # (n, 10)
    g_z1 = g_h * (1.0 - h * h)
    g_w1 = g_z1.T @ x                               # (10, 2)
    g_b1 = g_z1.sum(axis=0)
    return {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}


def _init_params(seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {
        "w1": rng.uniform(-0.5, 0.5, size=(HIDDEN, 2)),
        "b1": rng.uniform(-0.5, 0.5, size=HIDDEN),
        "w2": rng.uniform(-0.5, 0.5, size=(1, HIDDEN)),
        "b2": rng.uniform(-0.5, 0.5, size=1),
    }


def norm_from_dataset(pairs: Sequence[CandidatePair]) -> InputNorm:
    k1s = [p.k1 for p in pairs]
    thetas = [p.theta for p in pairs]
    return InputNorm(k1_min=float(min(k1s)), k1_max=float(max(k1s)),
                     theta_min=float(min(thetas)), theta_max=float(max(thetas)))


def train(dataset: Sequence[tuple[CandidatePair, float]], cfg: TrainConfig) -> TrainResult:
    """Full-batch Adam for cfg.epochs epochs; uniform [-0.5, 0.5] init from cfg.seed.

    Inputs are normalized with the dataset's own per-feature (min, max).
    Identical dataset and seed produce a bit-identical model and loss curve.
    """
    if len({pair for pair, _ in dataset}) < 2:
        raise EmptyDatasetError("training needs at least 2 distinct samples")
    pairs = [pair for pair, _ in dataset]
    norm = norm_from_dataset(pairs)
    x = np.stack([normalize_input(p, norm) for p in pairs])
    y = np.array([target for _, target in dataset], dtype=np.float64)

    params = _init_params(cfg.seed)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    losses: list[float] = []
    for t in range(1, cfg.epochs + 1):
        snapshot = SurrogateModel(input_norm=norm, seed=cfg.seed, **params)
        grads = loss_gradients(snapshot, x, y)
        for key in params:
            g = grads[key]
            m[key] = cfg.beta1 * m[key] + (1.0 - cfg.beta1) * g
            v[key] = cfg.beta2 * v[key] + (1.0 - cfg.beta2) * g * g
            m_hat = m[key] / (1.0 - cfg.beta1 ** t)
            v_hat = v[key] / (1.0 - cfg.beta2 ** t)
            params[key] = params[key] - cfg.step_size * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        post = SurrogateModel(input_norm=norm, seed=cfg.seed, **params)
        losses.append(mse_loss(post, x, y))
    model = SurrogateModel(input_norm=norm, seed=cfg.seed,
                           epochs_trained=cfg.epochs, **params)
    return TrainResult(model=model, loss_curve=losses)


def predict_pair(model: SurrogateModel, pair: CandidatePair) -> float:
    return forward(model, normalize_input(pair, model.input_norm))


def derive_ssim_band(model: SurrogateModel, grid: Sequence[CandidatePair],
                     quantiles: tuple[float, float] = (0.25, 0.75)) -> tuple[float, float]:
    """(lo, hi) empirical quantiles of the predicted SSIM surface over the grid,
    with linear interpolation."""
    if not grid:
        raise EmptyGridError("band derivation needs a nonempty grid")
    q_lo, q_hi = quantiles
    if not (0.0 <= q_lo < q_hi <= 1.0):
        raise ValueError(f"need 0 <= q_lo < q_hi <= 1, got ({q_lo}, {q_hi})")
    preds = np.array([predict_pair(model, p) for p in grid], dtype=np.float64)
    return float(np.quantile(preds, q_lo)), float(np.quantile(preds, q_hi))


def model_to_json(model: SurrogateModel) -> str:
    doc = {
        "w1": model.w1.tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.tolist(),
        "b2": model.b2.tolist(),
        "input_norm": {"k1_min": model.input_norm.k1_min, "k1_max": model.input_norm.k1_max,
                       "theta_min": model.input_norm.theta_min,
                       "theta_max": model.input_norm.theta_max},
        "seed": model.seed,
        "epochs_trained": model.epochs_trained,
    }
    return json.dumps(doc, indent=2) + "\n"


def model_from_json(text: str) -> SurrogateModel:
    doc = json.loads(text)
    norm = InputNorm(**doc["input_norm"])
    return SurrogateModel(
        w1=np.array(doc["w1"], dtype=np.float64),
        b1=np.array(doc["b1"], dtype=np.float64),
        w2=np.array(doc["w2"], dtype=np.float64),
        b2=np.array(doc["b2"], dtype=np.float64),
        input_norm=norm, seed=int(doc["seed"]),
        epochs_trained=int(doc["epochs_trained"]),
    )
