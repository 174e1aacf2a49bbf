"""Binary probabilistic classifiers with exact analytic gradients.

Two architectures: a logistic-regression linear model and a fixed
two-hidden-layer perceptron (50 and 10 rectified-linear units) with a single
sigmoid output head. Batched forward passes return the positive-class
probability together with a cache of intermediate activations; the matching
backward pass consumes that cache and produces exact parameter gradients for
any upstream derivative with respect to the positive-class probability.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .team_model import Prediction

__all__ = [
    "LinearModel",
    "MlpModel",
    "Model",
    "GradientBuffer",
    "ForwardCache",
    "sigmoid",
    "init_model",
    "forward",
    "forward_batch",
    "backward",
    "backward_batch",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]

# Logits are clamped here before the sigmoid; sigma(500) is within one ulp of
# 1.0, so only pathological inputs are affected.
LOGIT_CLAMP = 500.0

HIDDEN1 = 50
HIDDEN2 = 10


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (no overflow for any finite z)."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: np.ndarray  # shape (1,)

    kind = "linear"

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[0])

    def parameters(self) -> dict[str, np.ndarray]:
        return {"weights": self.weights, "bias": self.bias}

    def weight_names(self) -> tuple[str, ...]:
        return ("weights",)

    def copy(self) -> "LinearModel":
        return LinearModel(weights=self.weights.copy(), bias=self.bias.copy())


@dataclass
class MlpModel:
    w1: np.ndarray  # (50, n)
    b1: np.ndarray  # (50,)
    w2: np.ndarray  # (10, 50)
    b2: np.ndarray  # (10,)
    w3: np.ndarray  # (10,)
    b3: np.ndarray  # (1,)

    kind = "mlp"

    @property
    def n_features(self) -> int:
        return int(self.w1.shape[1])

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            "w1": self.w1,
            "b1": self.b1,
            "w2": self.w2,
            "b2": self.b2,
            "w3": self.w3,
            "b3": self.b3,
        }

    def weight_names(self) -> tuple[str, ...]:
        return ("w1", "w2", "w3")

    def copy(self) -> "MlpModel":
        return MlpModel(**{k: v.copy() for k, v in self.parameters().items()})


Model = Union[LinearModel, MlpModel]


@dataclass
class GradientBuffer:
    """Per-parameter gradient accumulator, shape-congruent with its model."""

    data: dict[str, np.ndarray]

    @classmethod
    def zeros_like(cls, model: Model) -> "GradientBuffer":
        return cls({k: np.zeros_like(v) for k, v in model.parameters().items()})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    def items(self):
        return self.data.items()

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.data.values())


@dataclass
class ForwardCache:
    """Intermediate activations of one batched forward pass."""

    kind: str
    features: np.ndarray
    z: np.ndarray
    prob1: np.ndarray
    a1: np.ndarray | None = None
    h1: np.ndarray | None = None
    a2: np.ndarray | None = None
    h2: np.ndarray | None = None


def _glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_model(kind: str, n_features: int, seed: int = 0) -> Model:
    """Create a fresh model: zeros for linear, Glorot-uniform weights for mlp.

    Zero linear initialization predicts 0.5 everywhere; the log-loss objective
    is convex for this model, so the start does not matter. Biases are zero
    for both kinds. Deterministic given the seed.
    """
    if n_features < 1:
        raise ValueError(f"n_features must be >= 1, got {n_features}")
    if kind == "linear":
        return LinearModel(
            weights=np.zeros(n_features), bias=np.zeros(1)
        )
    if kind == "mlp":
        rng = np.random.default_rng(seed)
        return MlpModel(
            w1=_glorot_uniform(rng, n_features, HIDDEN1, (HIDDEN1, n_features)),
            b1=np.zeros(HIDDEN1),
            w2=_glorot_uniform(rng, HIDDEN1, HIDDEN2, (HIDDEN2, HIDDEN1)),
            b2=np.zeros(HIDDEN2),
            w3=_glorot_uniform(rng, HIDDEN2, 1, (HIDDEN2,)),
            b3=np.zeros(1),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def _check_batch(model: Model, features: np.ndarray) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"features must be a 2-d batch, got shape {X.shape}")
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"feature width {X.shape[1]} does not match model "
            f"n_features {model.n_features}"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    return X


def forward_batch(model: Model, features) -> tuple[np.ndarray, ForwardCache]:
    """Positive-class probabilities for a batch, plus the activation cache."""
    X = _check_batch(model, features)
    if model.kind == "linear":
        z = X @ model.weights + model.bias[0]
        prob1 = sigmoid(np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP))
        return prob1, ForwardCache(kind="linear", features=X, z=z, prob1=prob1)
    a1 = X @ model.w1.T + model.b1
    h1 = np.maximum(a1, 0.0)
    a2 = h1 @ model.w2.T + model.b2
    h2 = np.maximum(a2, 0.0)
    z = h2 @ model.w3 + model.b3[0]
    prob1 = sigmoid(np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP))
    return prob1, ForwardCache(
        kind="mlp", features=X, z=z, prob1=prob1, a1=a1, h1=h1, a2=a2, h2=h2
    )


def forward(model: Model, features) -> Prediction:
    """Single-example forward pass yielding a two-class Prediction."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"features must be a 1-d vector, got shape {x.shape}")
    prob1, _ = forward_batch(model, x[None, :])
    return Prediction.from_positive_prob(float(prob1[0]))


def backward_batch(model: Model, cache: ForwardCache, d_prob1) -> GradientBuffer:
    """Exact parameter gradients given upstream d(loss)/d(prob1) per example.

    The cache must come from a forward pass of the same model on the same
    batch; mismatched shapes or kinds are rejected.
    """
    g = np.asarray(d_prob1, dtype=np.float64)
    if cache.kind != model.kind:
        raise ValueError(
            f"forward cache kind {cache.kind!r} does not match model {model.kind!r}"
        )
    if cache.features.shape[1] != model.n_features:
        raise ValueError("forward cache does not match model feature width")
    if g.shape != cache.prob1.shape:
        raise ValueError(
            f"d_prob1 shape {g.shape} does not match batch shape {cache.prob1.shape}"
        )
    X = cache.features
    dz = g * cache.prob1 * (1.0 - cache.prob1)
    if model.kind == "linear":
        return GradientBuffer(
            {"weights": X.T @ dz, "bias": np.array([dz.sum()])}
        )
    da2 = (dz[:, None] * model.w3[None, :]) * (cache.a2 > 0.0)
    da1 = (da2 @ model.w2) * (cache.a1 > 0.0)
    return GradientBuffer(
        {
            "w1": da1.T @ X,
            "b1": da1.sum(axis=0),
            "w2": da2.T @ cache.h1,
            "b2": da2.sum(axis=0),
            "w3": cache.h2.T @ dz,
            "b3": np.array([dz.sum()]),
        }
    )


def backward(
    model: Model,
    features,
    d_loss_d_prob1: float,
    cache: ForwardCache | None = None,
) -> GradientBuffer:
    """Single-example gradient of a loss with upstream derivative d_loss_d_prob1.

    When no cache is supplied the matching forward pass is recomputed; a
    supplied cache is validated against the features to reject stale
    activations.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"features must be a 1-d vector, got shape {x.shape}")
    if cache is None:
        _, cache = forward_batch(model, x[None, :])
    else:
        if cache.features.shape != (1, x.shape[0]) or not np.array_equal(
            cache.features[0], x
        ):
            raise ValueError("forward cache does not match the given features")
    return backward_batch(model, cache, np.array([d_loss_d_prob1]))


# Serialization: a flat JSON object {kind, n_features, <param>: row-major list}.
# JSON floats use repr, so decimal round-trips are bit-exact.


def model_to_dict(model: Model) -> dict:
    out: dict = {"kind": model.kind, "n_features": model.n_features}
    for name, value in model.parameters().items():
        out[name] = value.ravel(order="C").tolist()
    return out


_MLP_SHAPES = {
    "w1": (HIDDEN1, None),
    "b1": (HIDDEN1,),
    "w2": (HIDDEN2, HIDDEN1),
    "b2": (HIDDEN2,),
    "w3": (HIDDEN2,),
    "b3": (1,),
}


def model_from_dict(data: dict) -> Model:
    kind = data.get("kind")
    n = int(data["n_features"])
    if kind == "linear":
        return LinearModel(
            weights=np.asarray(data["weights"], dtype=np.float64).reshape(n),
            bias=np.asarray(data["bias"], dtype=np.float64).reshape(1),
        )
    if kind == "mlp":
        arrays = {}
        for name, shape in _MLP_SHAPES.items():
            shape = tuple(n if s is None else s for s in shape)
            arrays[name] = np.asarray(data[name], dtype=np.float64).reshape(shape)
        return MlpModel(**arrays)
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model: Model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n")


def load_model(path) -> Model:
    return model_from_dict(json.loads(Path(path).read_text()))
