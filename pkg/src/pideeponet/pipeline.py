"""End-to-end runs: mask a truth field, build inputs, train, predict, score."""

import time
from dataclasses import dataclass

import numpy as np

from .baseline import train_mlp_baseline
from .config import MLP_BASELINE, RunConfig
from .dataio import error_metrics, make_mask
from .deeponet import build_training_set, init_operator_model, predict_field, sample_configuration_points
from .funcgen import generate
from .physics import train


@dataclass
class Prepared:
    cfg: RunConfig
    truth: object
    mask: object
    training_set: object


@dataclass
class FitResult:
    cfg: RunConfig
    truth: object
    mask: object
    training_set: object
    model: object
    history: list
    prediction: object
    runtime_s: float
    stop_reason: str = "epochs"
    train_result: object = None


def prepare(cfg, truth):
    M, T = truth.shape
    mask = make_mask(M, T, cfg.rate, cfg.mask_seed)
    functions = generate(cfg.generator, M, T, cfg.n_functions, cfg.seed,
                         length_scale=cfg.length_scale, degree=cfg.cheb_degree)
    theta = sample_configuration_points(cfg.m, cfg.seed)
    return Prepared(cfg, truth, mask, build_training_set(truth, mask, functions, theta))


def new_model(cfg, ts, theta):
    return init_operator_model(
        theta, p=cfg.p, hidden_layers=cfg.hidden_layers, hidden=cfg.hidden, seed=cfg.seed,
        speed_mean=ts.speed_mean, speed_std=ts.speed_std, length=ts.length,
        duration=ts.duration, init=cfg.init,
    )


def fit(cfg, truth, callback=None):
    prep = prepare(cfg, truth)
    ts = prep.training_set
    M, T = truth.shape
    t0 = time.perf_counter()
    if cfg.mode == MLP_BASELINE:
        model, history = train_mlp_baseline(
            ts, cfg.epochs, cfg.lr, cfg.hidden_layers, cfg.hidden, cfg.seed
        )
        pred = truth.like(model.predict_field(M, T))
        return FitResult(cfg, truth, prep.mask, ts, model, history, pred,
                         time.perf_counter() - t0)
    theta = sample_configuration_points(cfg.m, cfg.seed)
    model = new_model(cfg, ts, theta)
    res = train(model, ts, cfg.train_config(), callback=callback)
    pred = truth.like(predict_field(model, ts.branch_inputs, M, T))
    return FitResult(cfg, truth, prep.mask, ts, model, res.history, pred,
                     time.perf_counter() - t0, res.stop_reason, res)


def split_metrics(pred, truth, mask):
    """Train (observed) and test (held-out) metrics, keys like ``test_rmse``."""
    out = {}
    for name, sel in (("train", mask.observed), ("test", ~mask.observed)):
        if not sel.any():
            for k in ("mse", "rmse", "mae", "mape"):
                out[f"{name}_{k}"] = float("nan")
            continue
        for k, v in error_metrics(pred.values[sel], truth.values[sel]).items():
            out[f"{name}_{k}"] = v
    return out


def constant_mean_rmse(truth, mask):
    """Held-out RMSE of predicting the observed-cell mean everywhere."""
    held = ~mask.observed
    mean = truth.values[mask.observed].mean()
    return float(np.sqrt(np.mean((truth.values[held] - mean) ** 2)))
