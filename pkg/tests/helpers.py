"""Shared test utilities: random models and the finite-difference gradient oracle."""

import numpy as np

from teamopt.classifiers import init_model
from teamopt.losses import batch_loss


def random_model(kind, n_features, seed, scale=0.8):
    """A model with parameters perturbed away from the standard init."""
    model = init_model(kind, n_features, seed=seed)
    rng = np.random.default_rng(seed + 1)
    for p in model.parameters().values():
        p += rng.normal(0.0, scale, size=p.shape)
    return model


def finite_difference_gradients(model, features, labels, spec, l2_weight=0.0, h=1e-5):
    """Central differences of batch_loss with respect to every parameter."""
    grads = {}
    for name, p in model.parameters().items():
        g = np.zeros_like(p)
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            up, _ = batch_loss(model, features, labels, spec, l2_weight)
            flat_p[i] = orig - h
            down, _ = batch_loss(model, features, labels, spec, l2_weight)
            flat_p[i] = orig
            flat_g[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def max_relative_error(analytic, numeric, floor=1e-6):
    """Worst elementwise relative error between two gradient dicts."""
    worst = 0.0
    for name, a in analytic.items():
        f = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)
        worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst
