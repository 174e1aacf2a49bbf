"""Loss values, gradients, branch behavior, and the batched reduction."""

import numpy as np
import pytest

from helpers import finite_difference_gradients, max_relative_error, random_model
from teamopt.classifiers import forward, init_model
from teamopt.losses import LossSpec, batch_loss, eu_loss, log_loss, team_loss
from teamopt.team_model import (
    HumanPolicy,
    Prediction,
    UtilityParams,
    expected_utility,
)


def policy(beta=1.0, lam=0.5, a=1.0, p=1.0):
    return HumanPolicy(UtilityParams(beta=beta, lam=lam, human_accuracy=a), p)


def pred_true_prob(h):
    return Prediction.from_probs([1.0 - h, h])


class TestLogLoss:
    def test_reference_values(self):
        assert log_loss(pred_true_prob(1.0), 1)[0] == 0.0
        assert log_loss(pred_true_prob(0.5), 1)[0] == pytest.approx(np.log(2.0), abs=1e-12)
        assert log_loss(pred_true_prob(0.25), 1)[0] == pytest.approx(np.log(4.0), abs=1e-12)

    def test_derivative(self):
        value, grad = log_loss(pred_true_prob(0.25), 1)
        assert grad == -4.0

    def test_floor_keeps_value_finite(self):
        value, grad = log_loss(pred_true_prob(0.0), 1)
        assert np.isfinite(value) and np.isfinite(grad)
        assert value == pytest.approx(-np.log(1e-12))


class TestEuLoss:
    def test_accept_region_values(self):
        pol = policy()
        assert eu_loss(pred_true_prob(1.0), 1, pol)[0] == -1.0
        # gradient is -(1+beta) everywhere in the accept branch
        assert eu_loss(pred_true_prob(0.8), 1, pol)[1] == -2.0
        assert eu_loss(pred_true_prob(0.99), 1, pol)[1] == -2.0

    def test_solve_region_flat(self):
        value, grad = eu_loss(pred_true_prob(0.6), 1, policy())
        assert value == -0.5
        assert grad == 0.0

    def test_negates_expected_utility_exactly(self):
        pol = policy(beta=2.5, lam=0.7, a=0.9, p=0.6)
        rng = np.random.default_rng(4)
        for _ in range(200):
            h = float(rng.random())
            pred = pred_true_prob(h)
            assert eu_loss(pred, 1, pol)[0] == -expected_utility(pred, 1, pol)


class TestTeamLoss:
    @pytest.mark.parametrize("beta", [1.0, 3.0])
    def test_accept_branch_is_shifted_log_loss(self, beta):
        pol = policy(beta=beta)
        shift = np.log(1.0 + beta)
        low = pol.accept_threshold + 1e-6
        for h in np.linspace(low, 1.0, 100):
            pred = pred_true_prob(h)
            tv, _ = team_loss(pred, 1, pol, team_offset=beta)
            lv, _ = log_loss(pred, 1)
            assert tv - lv == pytest.approx(-shift, abs=1e-12)

    def test_solve_branch_flat(self):
        value, grad = team_loss(pred_true_prob(0.6), 1, policy())
        assert grad == 0.0
        # constant equals -log(solve utility + offset)
        assert value == pytest.approx(-np.log(0.5 + 1.0), abs=1e-12)

    def test_reference_value(self):
        value, _ = team_loss(pred_true_prob(1.0), 1, policy(), team_offset=1.0)
        assert value == pytest.approx(-np.log(2.0), abs=1e-12)

    def test_default_offset_is_beta(self):
        spec = LossSpec("team_loss", policy(beta=4.0))
        assert spec.offset == 4.0
        spec = LossSpec("team_loss", policy(beta=4.0), team_offset=0.5)
        assert spec.offset == 0.5


class TestLossSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            LossSpec("hinge")
        with pytest.raises(ValueError):
            LossSpec("expected_utility_loss")
        with pytest.raises(ValueError):
            LossSpec("team_loss", policy(), team_offset=0.0)


class TestBatchLoss:
    def test_zero_init_log_loss_is_log_two(self):
        model = init_model("linear", 2)
        X = np.random.default_rng(0).normal(size=(32, 2))
        y = np.random.default_rng(1).integers(0, 2, 32)
        value, _ = batch_loss(model, X, y, LossSpec("log_loss"), l2_weight=0.0)
        assert value == pytest.approx(np.log(2.0), abs=1e-12)

    def test_single_example_matches_per_example_plus_l2(self):
        model = random_model("linear", 2, seed=2)
        x = np.array([0.3, -1.1])
        pred = forward(model, x)
        expected_value = log_loss(pred, 1)[0] + 0.01 * float(
            np.sum(model.weights**2)
        )
        value, _ = batch_loss(model, x[None, :], np.array([1]), LossSpec("log_loss"), 0.01)
        assert value == pytest.approx(expected_value, rel=1e-12)

    def test_duplicated_batch_matches_single(self):
        model = random_model("mlp", 2, seed=9)
        x = np.array([[0.4, 0.2]])
        spec = LossSpec("expected_utility_loss", policy())
        single, _ = batch_loss(model, x, np.array([1]), spec)
        repeated, _ = batch_loss(model, np.repeat(x, 5, axis=0), np.ones(5, dtype=int), spec)
        assert repeated == pytest.approx(single, rel=1e-12)

    def test_empty_batch_rejected(self):
        model = init_model("linear", 2)
        with pytest.raises(ValueError):
            batch_loss(model, np.empty((0, 2)), np.empty(0, dtype=int), LossSpec("log_loss"))

    def test_l2_excludes_biases(self):
        model = init_model("linear", 2)
        model.bias[:] = [3.0]
        X = np.zeros((4, 2))
        y = np.array([1, 1, 1, 1])
        with_l2, grads = batch_loss(model, X, y, LossSpec("log_loss"), l2_weight=10.0)
        without, _ = batch_loss(model, X, y, LossSpec("log_loss"), l2_weight=0.0)
        assert with_l2 == without  # zero weights, bias not penalized
        value_w, grads_w = batch_loss(model, X, y, LossSpec("log_loss"), l2_weight=1.0)
        model.weights[:] = [2.0, 0.0]
        value2, grads2 = batch_loss(model, X, y, LossSpec("log_loss"), l2_weight=1.0)
        assert grads2["weights"][0] == pytest.approx(2.0 * 1.0 * 2.0, abs=1e-12)

    def test_solve_region_gradients_exactly_zero(self):
        # zero-init model predicts 0.5 < threshold everywhere
        model = init_model("linear", 3)
        X = np.random.default_rng(5).normal(size=(16, 3))
        y = np.random.default_rng(6).integers(0, 2, 16)
        for kind in ("expected_utility_loss", "team_loss"):
            _, grads = batch_loss(model, X, y, LossSpec(kind, policy()))
            for g in grads.data.values():
                assert np.all(g == 0.0)


class TestGradientFidelity:
    """Analytic gradients vs central finite differences for all three losses."""

    @staticmethod
    def sample_case(rng, kind, policy_):
        """A (model, x, y) triple away from the threshold and saturation.

        Some random models saturate their outputs for nearly all inputs, so
        after a bounded number of input draws a fresh model is drawn instead.
        """
        c = policy_.accept_threshold
        while True:
            model = random_model(kind, 3, seed=int(rng.integers(1_000_000)), scale=0.5)
            for _ in range(100):
                x = rng.normal(size=3)
                p1 = float(forward(model, x).probs[1])
                conf = max(p1, 1.0 - p1)
                if abs(conf - c) > 1e-3 and 0.01 < p1 < 0.99:
                    return model, x, int(rng.integers(0, 2))

    @pytest.mark.parametrize("model_kind", ["linear", "mlp"])
    @pytest.mark.parametrize("loss_kind", ["log_loss", "expected_utility_loss", "team_loss"])
    def test_matches_finite_differences(self, model_kind, loss_kind):
        pol = policy()
        spec = LossSpec(loss_kind, pol)
        seed = sum(map(ord, f"{model_kind}:{loss_kind}"))
        rng = np.random.default_rng(seed)
        for _ in range(20):
            model, x, y = self.sample_case(rng, model_kind, pol)
            _, grads = batch_loss(model, x[None, :], np.array([y]), spec, l2_weight=0.0)
            numeric = finite_difference_gradients(
                model, x[None, :], np.array([y]), spec, l2_weight=0.0
            )
            assert max_relative_error(grads.data, numeric) < 1e-4
