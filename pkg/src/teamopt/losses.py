"""Training objectives: log-loss, negated team utility, and the team-shaped log loss.

Each loss exposes a per-example form returning (value, d_value/d_prob_of_true_label)
and a batched ``batch_loss`` that reduces over a mini-batch, adds L2 weight
decay, and backpropagates through the model.

The accept/solve branch indicator is treated as a constant under
differentiation: it is a step function with zero derivative almost
everywhere, so the solve branch contributes exactly zero gradient and the
accept branch differentiates only its affine (or logarithmic) term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifiers import GradientBuffer, Model, backward_batch, forward_batch
from .team_model import HumanPolicy, Prediction, confidences, true_label_probs

__all__ = [
    "LOSS_KINDS",
    "LossSpec",
    "log_loss",
    "eu_loss",
    "team_loss",
    "batch_loss",
]

LOSS_KINDS = ("log_loss", "expected_utility_loss", "team_loss")

# Probabilities and log arguments are clamped here before taking logs.
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossSpec:
    """Which objective to optimize, and the policy it is evaluated under.

    ``team_offset`` is the positive constant added to the utility inside the
    team loss's logarithm; left unset it defaults to beta, which makes the
    accept branch exactly log-loss shaped (shifted by -log(1+beta)).
    """

    kind: str
    policy: HumanPolicy | None = None
    team_offset: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"kind must be one of {LOSS_KINDS}, got {self.kind!r}")
        if self.kind != "log_loss" and self.policy is None:
            raise ValueError(f"{self.kind} requires a policy")
        if self.team_offset is not None and not self.team_offset > 0.0:
            raise ValueError(f"team_offset must be > 0, got {self.team_offset}")

    @property
    def offset(self) -> float:
        if self.team_offset is not None:
            return self.team_offset
        if self.policy is None:
            raise ValueError("team offset undefined without a policy")
        return self.policy.params.beta


def log_loss(pred: Prediction, true_label: int) -> tuple[float, float]:
    """-log h[y] and its derivative -1/h[y] (probability floored at 1e-12)."""
    p = max(float(pred.probs[true_label]), PROB_FLOOR)
    return float(-np.log(p)), -1.0 / p


def eu_loss(
    pred: Prediction, true_label: int, policy: HumanPolicy
) -> tuple[float, float]:
    """Negated expected team utility.

    Accept branch: value -(1+beta)*h[y] + beta scaled by the accept
    probability, gradient -p_accept*(1+beta). Solve branch: constant value,
    zero gradient.
    """
    params = policy.params
    h_true = float(pred.probs[true_label])
    if pred.confidence >= params.accept_threshold:
        p_accept = policy.accept_probability
        grad = -p_accept * (1.0 + params.beta)
    else:
        p_accept = 0.0
        grad = 0.0
    accept_term = (1.0 + params.beta) * h_true - params.beta
    value = -(p_accept * accept_term + (1.0 - p_accept) * params.solve_utility)
    return value, grad


def team_loss(
    pred: Prediction,
    true_label: int,
    policy: HumanPolicy,
    team_offset: float | None = None,
) -> tuple[float, float]:
    """-log(utility + offset): log-loss shaped where accepted, flat where solved."""
    params = policy.params
    offset = params.beta if team_offset is None else team_offset
    if not offset > 0.0:
        raise ValueError(f"team_offset must be > 0, got {offset}")
    h_true = float(pred.probs[true_label])
    if pred.confidence >= params.accept_threshold:
        p_accept = policy.accept_probability
    else:
        p_accept = 0.0
    accept_term = (1.0 + params.beta) * h_true - params.beta
    psi = p_accept * accept_term + (1.0 - p_accept) * params.solve_utility
    shifted = max(psi + offset, PROB_FLOOR)
    value = float(-np.log(shifted))
    grad = -p_accept * (1.0 + params.beta) / shifted if p_accept > 0.0 else 0.0
    return value, grad


def _per_example(prob1, labels, spec: LossSpec) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized per-example loss values and d(value)/d(prob1)."""
    p1 = np.asarray(prob1, dtype=np.float64)
    y = np.asarray(labels)
    h_true = true_label_probs(p1, y)
    to_p1 = np.where(y == 1, 1.0, -1.0)
    if spec.kind == "log_loss":
        clamped = np.maximum(h_true, PROB_FLOOR)
        return -np.log(clamped), (-1.0 / clamped) * to_p1
    policy = spec.policy
    params = policy.params
    accept = confidences(p1) >= params.accept_threshold
    p_accept = np.where(accept, policy.accept_probability, 0.0)
    accept_term = (1.0 + params.beta) * h_true - params.beta
    psi = p_accept * accept_term + (1.0 - p_accept) * params.solve_utility
    if spec.kind == "expected_utility_loss":
        return -psi, -p_accept * (1.0 + params.beta) * to_p1
    shifted = np.maximum(psi + spec.offset, PROB_FLOOR)
    grad = -p_accept * (1.0 + params.beta) / shifted
    return -np.log(shifted), grad * to_p1


def batch_loss(
    model: Model,
    features,
    labels,
    spec: LossSpec,
    l2_weight: float = 0.0,
) -> tuple[float, GradientBuffer]:
    """Mean per-example loss plus l2_weight*||weights||^2 (biases excluded).

    Returns the scalar value and the exact gradient with respect to every
    model parameter. The reduction order is fixed, so results are
    reproducible for identical inputs.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"batch must be a non-empty 2-d array, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValueError(f"labels shape {y.shape} does not match batch {X.shape}")
    if l2_weight < 0.0:
        raise ValueError(f"l2_weight must be >= 0, got {l2_weight}")
    prob1, cache = forward_batch(model, X)
    values, d_p1 = _per_example(prob1, y, spec)
    n = X.shape[0]
    grads = backward_batch(model, cache, d_p1 / n)
    value = float(np.mean(values))
    if l2_weight > 0.0:
        params = model.parameters()
        # overflow here just means divergence; the caller's finiteness check
        # turns it into an abort
        with np.errstate(over="ignore"):
            for name in model.weight_names():
                w = params[name]
                value += l2_weight * float(np.sum(w * w))
                grads.data[name] += 2.0 * l2_weight * w
    return value, grads
