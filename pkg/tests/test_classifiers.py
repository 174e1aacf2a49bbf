"""Model initialization, forward passes, analytic gradients, serialization."""

import numpy as np
import pytest

from helpers import random_model
from teamopt.classifiers import (
    backward,
    forward,
    forward_batch,
    init_model,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
)


class TestInit:
    def test_linear_zero_init(self):
        model = init_model("linear", 2, seed=0)
        assert np.all(model.weights == 0.0)
        assert model.bias[0] == 0.0

    def test_mlp_deterministic(self):
        a = init_model("mlp", 2, seed=7)
        b = init_model("mlp", 2, seed=7)
        for name, p in a.parameters().items():
            assert np.array_equal(p, b.parameters()[name])

    def test_mlp_glorot_bound(self):
        model = init_model("mlp", 2, seed=7)
        assert np.all(np.abs(model.w1) <= np.sqrt(6.0 / 52.0))
        assert np.all(np.abs(model.w2) <= np.sqrt(6.0 / 60.0))
        assert np.all(np.abs(model.w3) <= np.sqrt(6.0 / 11.0))
        assert np.all(model.b1 == 0.0) and np.all(model.b2 == 0.0)

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            init_model("linear", 0)
        with pytest.raises(ValueError):
            init_model("tree", 2)


class TestForward:
    def test_zero_init_predicts_half(self):
        model = init_model("linear", 3)
        pred = forward(model, [5.0, -2.0, 0.3])
        np.testing.assert_array_equal(pred.probs, [0.5, 0.5])

    def test_hand_computed_logistic(self):
        model = init_model("linear", 2)
        model.weights[:] = [1.0, 0.0]
        pred = forward(model, [np.log(3.0), 0.0])
        assert pred.probs[1] == pytest.approx(0.75, abs=1e-12)
        assert pred.probs[0] == pytest.approx(0.25, abs=1e-12)

    def test_probs_sum_to_one(self):
        rng = np.random.default_rng(0)
        for i in range(1000):
            kind = "linear" if i % 2 == 0 else "mlp"
            model = random_model(kind, 3, seed=i)
            pred = forward(model, rng.normal(size=3))
            assert abs(pred.probs.sum() - 1.0) < 1e-12

    def test_extreme_logits_stay_finite(self):
        model = init_model("linear", 1)
        model.weights[:] = [1000.0]
        assert forward(model, [1000.0]).probs[1] == 1.0
        tiny = forward(model, [-1000.0]).probs[1]
        assert 0.0 <= tiny < 1e-200

    def test_errors(self):
        model = init_model("linear", 2)
        with pytest.raises(ValueError):
            forward(model, [1.0])
        with pytest.raises(ValueError):
            forward(model, [1.0, np.nan])

    def test_batch_order_independence(self):
        model = random_model("mlp", 4, seed=5)
        rng = np.random.default_rng(5)
        X = rng.normal(size=(64, 4))
        perm = rng.permutation(64)
        p_full, _ = forward_batch(model, X)
        p_perm, _ = forward_batch(model, X[perm])
        assert np.array_equal(p_full[perm], p_perm)


class TestBackward:
    def _fd_oracle(self, model, x, upstream, h=1e-5):
        grads = {}
        for name, p in model.parameters().items():
            g = np.zeros_like(p)
            fp, fg = p.reshape(-1), g.reshape(-1)
            for i in range(fp.size):
                orig = fp[i]
                fp[i] = orig + h
                up = float(forward(model, x).probs[1])
                fp[i] = orig - h
                down = float(forward(model, x).probs[1])
                fp[i] = orig
                fg[i] = upstream * (up - down) / (2.0 * h)
            grads[name] = g
        return grads

    def _max_rel_err(self, analytic, numeric, floor=1e-6):
        worst = 0.0
        for name, a in analytic.items():
            f = numeric[name]
            denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)
            worst = max(worst, float(np.max(np.abs(a - f) / denom)))
        return worst

    def test_linear_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        for seed in range(20):
            model = random_model("linear", 3, seed=seed)
            x = rng.normal(size=3)
            upstream = float(rng.normal())
            analytic = backward(model, x, upstream)
            numeric = self._fd_oracle(model, x, upstream)
            assert self._max_rel_err(dict(analytic.items()), numeric) < 1e-6

    def test_mlp_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        for seed in range(20):
            model = random_model("mlp", 3, seed=seed, scale=0.4)
            x = rng.normal(size=3)
            upstream = float(rng.normal())
            analytic = backward(model, x, upstream)
            numeric = self._fd_oracle(model, x, upstream)
            assert self._max_rel_err(dict(analytic.items()), numeric) < 1e-4

    def test_zero_upstream_gives_zero_gradient(self):
        model = random_model("mlp", 2, seed=0)
        grads = backward(model, np.array([0.4, -1.2]), 0.0)
        for g in grads.data.values():
            assert np.all(g == 0.0)

    def test_stale_cache_rejected(self):
        model = random_model("linear", 2, seed=1)
        _, cache = forward_batch(model, np.array([[1.0, 2.0]]))
        with pytest.raises(ValueError):
            backward(model, np.array([9.0, 9.0]), 1.0, cache=cache)

    def test_matching_cache_accepted(self):
        model = random_model("linear", 2, seed=1)
        x = np.array([1.0, 2.0])
        _, cache = forward_batch(model, x[None, :])
        fresh = backward(model, x, 0.7)
        cached = backward(model, x, 0.7, cache=cache)
        for name, g in fresh.items():
            assert np.array_equal(g, cached[name])


class TestMonotonicity:
    def test_probability_increases_along_weight_direction(self):
        model = random_model("linear", 2, seed=3)
        x0 = np.array([0.1, -0.4])
        ts = np.linspace(-3.0, 3.0, 41)
        probs = [float(forward(model, x0 + t * model.weights).probs[1]) for t in ts]
        assert all(a < b for a, b in zip(probs, probs[1:]))


class TestSerialization:
    @pytest.mark.parametrize("kind", ["linear", "mlp"])
    def test_round_trip_bit_exact(self, kind, tmp_path):
        model = random_model(kind, 3, seed=17)
        clone = model_from_dict(model_to_dict(model))
        for name, p in model.parameters().items():
            assert np.array_equal(p, clone.parameters()[name])
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        for name, p in model.parameters().items():
            assert np.array_equal(p, loaded.parameters()[name])

    def test_dict_shape(self):
        model = init_model("linear", 2)
        data = model_to_dict(model)
        assert data["kind"] == "linear"
        assert data["n_features"] == 2
        assert data["weights"] == [0.0, 0.0]
        assert data["bias"] == [0.0]
