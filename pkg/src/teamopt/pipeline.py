"""End-to-end experiment protocol: grid search, warm-started team training,
multi-seed aggregation, and parameter sweeps.

The protocol per seed: split 80/20 into train/test, standardize on the
training portion, train the log-loss reference (checkpointed on accuracy),
then warm-start a copy from the reference's best parameters and train it on
the team objective (checkpointed on expected utility). Because the
pre-training evaluation is a checkpoint candidate, the team model's
validation expected utility can never end below its warm start.

Seeds are independent, so multi-seed runs can fan out over worker processes
(``jobs``); results are collected in seed order and identical to a serial
run.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial

import numpy as np

from .analysis import Metrics, evaluate
from .classifiers import Model, init_model
from .data import Dataset, split, standardize
from .losses import LossSpec
from .optim import TrainConfig, TrainResult, train
from .team_model import HumanPolicy, UtilityParams

__all__ = [
    "GridSpec",
    "SeedOutcome",
    "ExperimentReport",
    "SweepPoint",
    "derive_seeds",
    "seed_splits",
    "cross_validate",
    "train_pair",
    "run_experiment",
    "sweep",
    "report_to_json",
    "write_sweep_csv",
]

N_FOLDS = 5
TEST_FRACTION = 0.2
VAL_FRACTION = 0.2


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter candidates for cross-validated grid search."""

    learning_rates: tuple[float, ...]
    l2_weights: tuple[float, ...]
    batch_sizes: tuple[int, ...]
    decays: tuple[float, ...]
    patiences: tuple[int, ...]

    def __post_init__(self) -> None:
        for name in ("learning_rates", "l2_weights", "batch_sizes", "decays", "patiences"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")

    @classmethod
    def default(cls) -> "GridSpec":
        return cls(
            learning_rates=(1e-3, 1e-2, 1e-1, 1.0),
            l2_weights=(1e-3, 1e-2, 1e-1),
            batch_sizes=(4, 8, 32),
            decays=(0.1, 0.9),
            patiences=(2, 5, 10),
        )

    def cells(self):
        return itertools.product(
            self.learning_rates,
            self.l2_weights,
            self.batch_sizes,
            self.decays,
            self.patiences,
        )


def derive_seeds(seed: int, count: int) -> list[int]:
    """Independent child seeds for the sub-steps of one experiment seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def seed_splits(
    dataset: Dataset, seed: int
) -> tuple[Dataset, Dataset, Dataset, Dataset, int, int]:
    """One seed's standardized splits: (train80, fit, val, test, b_seed, t_seed).

    ``train80`` is the full standardized training portion; ``fit``/``val`` is
    its 80/20 sub-split used for checkpointing.
    """
    outer_seed, inner_seed, baseline_seed, team_seed = derive_seeds(seed, 4)
    train80, test = split(dataset, (1.0 - TEST_FRACTION, TEST_FRACTION), seed=outer_seed)
    train80, test = standardize(train80, test)
    fit, val = split(train80, (1.0 - VAL_FRACTION, VAL_FRACTION), seed=inner_seed)
    return train80, fit, val, test, baseline_seed, team_seed


def cross_validate(
    dataset: Dataset,
    model_kind: str,
    spec: LossSpec,
    grid: GridSpec,
    base_config: TrainConfig | None = None,
) -> TrainConfig:
    """Pick the grid cell with the best mean checkpoint metric over 5 folds.

    Divergent cells (non-finite training loss) score -inf and are never
    selected. Ties break toward smaller learning rate, then larger L2
    weight, then larger batch.
    """
    n = dataset.n_examples
    if n < N_FOLDS * 5:
        raise ValueError(
            f"cross-validation needs at least {N_FOLDS * 5} examples, got {n}"
        )
    base = base_config or TrainConfig()
    perm = np.random.default_rng(base.seed).permutation(n)
    bounds = [round(n * (f + 1) / N_FOLDS) for f in range(N_FOLDS)]
    folds = []
    start = 0
    for stop in bounds:
        folds.append(perm[start:stop])
        start = stop
    fold_seeds = derive_seeds(base.seed, N_FOLDS)

    best_key: tuple | None = None
    best_config = None
    for lr, l2, batch, decay, patience in grid.cells():
        config = replace(
            base,
            learning_rate=lr,
            l2_weight=l2,
            batch_size=batch,
            scheduler_decay=decay,
            scheduler_patience=patience,
        )
        scores = []
        for f, val_idx in enumerate(folds):
            train_idx = np.concatenate([folds[g] for g in range(N_FOLDS) if g != f])
            fold_train, fold_val = standardize(
                dataset.subset(train_idx), dataset.subset(val_idx)
            )
            model = init_model(model_kind, dataset.n_features, seed=fold_seeds[f])
            try:
                result = train(
                    model,
                    fold_train,
                    fold_val,
                    spec,
                    replace(config, seed=fold_seeds[f]),
                )
            except RuntimeError:
                scores.append(-math.inf)
                continue
            scores.append(result.best_val_metric)
        mean_score = float(np.mean(scores)) if all(map(math.isfinite, scores)) else -math.inf
        key = (mean_score, -lr, l2, batch, -decay, -patience)
        if best_key is None or key > best_key:
            best_key = key
            best_config = config
    return best_config


@dataclass(frozen=True)
class SeedOutcome:
    seed: int
    baseline: Metrics
    team: Metrics
    delta: Metrics
    team_val_gain: float

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "baseline": self.baseline.to_dict(),
            "team": self.team.to_dict(),
            "delta": self.delta.to_dict(),
            "team_val_gain": self.team_val_gain,
        }


def _mean_metrics(items: list[Metrics]) -> Metrics:
    return Metrics(
        accuracy=float(np.mean([m.accuracy for m in items])),
        expected_utility=float(np.mean([m.expected_utility for m in items])),
        empirical_utility=float(np.mean([m.empirical_utility for m in items])),
    )


@dataclass(frozen=True)
class ExperimentReport:
    model_kind: str
    params: UtilityParams
    accept_probability: float
    n_seeds: int
    baseline_config: TrainConfig
    team_config: TrainConfig
    team_loss_kind: str
    per_seed: tuple[SeedOutcome, ...]
    mean_baseline: Metrics
    mean_team: Metrics
    mean_delta: Metrics

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "params": {
                "beta": self.params.beta,
                "lam": self.params.lam,
                "human_accuracy": self.params.human_accuracy,
                "accept_threshold": self.params.accept_threshold,
            },
            "accept_probability": self.accept_probability,
            "n_seeds": self.n_seeds,
            "baseline_config": vars(self.baseline_config).copy(),
            "team_config": vars(self.team_config).copy(),
            "team_loss_kind": self.team_loss_kind,
            "per_seed": [s.to_dict() for s in self.per_seed],
            "mean_baseline": self.mean_baseline.to_dict(),
            "mean_team": self.mean_team.to_dict(),
            "mean_delta": self.mean_delta.to_dict(),
        }


def _delta(team: Metrics, baseline: Metrics) -> Metrics:
    return Metrics(
        accuracy=team.accuracy - baseline.accuracy,
        expected_utility=team.expected_utility - baseline.expected_utility,
        empirical_utility=team.empirical_utility - baseline.empirical_utility,
    )


def train_pair(
    dataset: Dataset,
    model_kind: str,
    policy: HumanPolicy,
    seed: int,
    baseline_config: TrainConfig,
    team_config: TrainConfig,
    team_loss_kind: str = "expected_utility_loss",
    baseline_model: Model | None = None,
) -> tuple[Model, Model, TrainResult | None, TrainResult, Dataset]:
    """One seed of the protocol; returns both best models, results, test set.

    A supplied ``baseline_model`` replaces the log-loss training stage: it is
    used as the warm start (and reference) directly, in which case the
    baseline result is None.
    """
    _, fit, val, test, baseline_seed, team_seed = seed_splits(dataset, seed)

    if baseline_model is None:
        baseline_result = train(
            init_model(model_kind, dataset.n_features, seed=baseline_seed),
            fit,
            val,
            LossSpec(kind="log_loss", policy=policy),
            replace(baseline_config, checkpoint_metric="accuracy", seed=baseline_seed),
        )
        baseline_model = baseline_result.best_model
    else:
        baseline_result = None

    team_spec = LossSpec(kind=team_loss_kind, policy=policy)
    team_result = train(
        baseline_model,
        fit,
        val,
        team_spec,
        replace(team_config, checkpoint_metric="expected_utility", seed=team_seed),
    )
    return (
        baseline_model,
        team_result.best_model,
        baseline_result,
        team_result,
        test,
    )


def _seed_outcome(
    seed: int,
    dataset: Dataset,
    model_kind: str,
    policy: HumanPolicy,
    baseline_config: TrainConfig,
    team_config: TrainConfig,
    team_loss_kind: str,
    baseline_model: Model | None,
) -> tuple[SeedOutcome, tuple[Model, Model]]:
    baseline, team, _, team_result, test = train_pair(
        dataset,
        model_kind,
        policy,
        seed,
        baseline_config,
        team_config,
        team_loss_kind,
        baseline_model,
    )
    baseline_metrics = evaluate(baseline, test, policy)
    team_metrics = evaluate(team, test, policy)
    outcome = SeedOutcome(
        seed=seed,
        baseline=baseline_metrics,
        team=team_metrics,
        delta=_delta(team_metrics, baseline_metrics),
        team_val_gain=team_result.best_val_metric - team_result.initial_val_metric,
    )
    return outcome, (baseline, team)


def run_experiment(
    dataset: Dataset,
    model_kind: str,
    params: UtilityParams,
    n_seeds: int = 10,
    accept_probability: float = 1.0,
    baseline_config: TrainConfig | None = None,
    team_config: TrainConfig | None = None,
    grid: GridSpec | None = None,
    team_loss_kind: str = "expected_utility_loss",
    seed: int = 0,
    return_models: bool = False,
    baseline_model: Model | None = None,
    jobs: int = 1,
):
    """Multi-seed comparison of the log-loss reference vs team training.

    When a grid is given, hyperparameters are cross-validated once on the
    first seed's training portion under the log-loss objective and reused
    for both trainings (the team run switches the checkpoint metric only).
    With ``return_models`` the per-seed (baseline, team) model pairs come
    back alongside the report. A supplied ``baseline_model`` is used as the
    warm start on every seed instead of training the reference. ``jobs`` > 1
    fans the seeds out over worker processes; results are identical to a
    serial run.
    """
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be >= 1, got {n_seeds}")
    policy = HumanPolicy(params=params, accept_probability=accept_probability)
    if grid is not None:
        outer_seed = derive_seeds(seed, 1)[0]
        train80, _ = split(
            dataset, (1.0 - TEST_FRACTION, TEST_FRACTION), seed=outer_seed
        )
        searched = cross_validate(
            train80,
            model_kind,
            LossSpec(kind="log_loss", policy=policy),
            grid,
            base_config=baseline_config,
        )
        baseline_config = searched
        team_config = team_config or searched
    baseline_config = baseline_config or TrainConfig()
    team_config = team_config or baseline_config
    # the report carries the configs exactly as trained
    baseline_config = replace(baseline_config, checkpoint_metric="accuracy")
    team_config = replace(team_config, checkpoint_metric="expected_utility")

    run_one = partial(
        _seed_outcome,
        dataset=dataset,
        model_kind=model_kind,
        policy=policy,
        baseline_config=baseline_config,
        team_config=team_config,
        team_loss_kind=team_loss_kind,
        baseline_model=baseline_model,
    )
    seeds = [seed + s for s in range(n_seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, seeds))
    else:
        results = [run_one(s) for s in seeds]
    outcomes = [outcome for outcome, _ in results]
    models = [pair for _, pair in results]
    mean_baseline = _mean_metrics([o.baseline for o in outcomes])
    mean_team = _mean_metrics([o.team for o in outcomes])
    report = ExperimentReport(
        model_kind=model_kind,
        params=params,
        accept_probability=accept_probability,
        n_seeds=n_seeds,
        baseline_config=baseline_config,
        team_config=team_config,
        team_loss_kind=team_loss_kind,
        per_seed=tuple(outcomes),
        mean_baseline=mean_baseline,
        mean_team=mean_team,
        mean_delta=_mean_metrics([o.delta for o in outcomes]),
    )
    if return_models:
        return report, models
    return report


@dataclass(frozen=True)
class SweepPoint:
    human_accuracy: float
    beta: float
    lam: float
    baseline_eu: float
    delta_eu: float


def sweep(
    dataset: Dataset,
    model_kind: str,
    a_values,
    beta_values,
    lam: float,
    n_seeds: int = 10,
    **experiment_kwargs,
) -> list[SweepPoint]:
    """Run the experiment over the (human accuracy) x (penalty) product grid."""
    points = []
    for a in a_values:
        for beta in beta_values:
            params = UtilityParams(beta=beta, lam=lam, human_accuracy=a)
            rep = run_experiment(
                dataset, model_kind, params, n_seeds=n_seeds, **experiment_kwargs
            )
            points.append(
                SweepPoint(
                    human_accuracy=a,
                    beta=beta,
                    lam=lam,
                    baseline_eu=rep.mean_baseline.expected_utility,
                    delta_eu=rep.mean_delta.expected_utility,
                )
            )
    return points


def report_to_json(report: ExperimentReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sweep_csv(points: list[SweepPoint], path) -> None:
    """Header (a_or_beta, baseline_eu, delta_eu); the varying parameter fills
    the first column, or "a=..|beta=.." when both vary."""
    a_varies = len({p.human_accuracy for p in points}) > 1
    beta_varies = len({p.beta for p in points}) > 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a_or_beta", "baseline_eu", "delta_eu"])
        for p in points:
            if a_varies and beta_varies:
                label = f"a={p.human_accuracy!r}|beta={p.beta!r}"
            elif beta_varies:
                label = repr(p.beta)
            else:
                label = repr(p.human_accuracy)
            writer.writerow([label, repr(p.baseline_eu), repr(p.delta_eu)])
