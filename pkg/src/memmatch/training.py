"""Cross-entropy training with Adam/SGD, early stopping on validation AUC, grid search."""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .data import split
from .errors import InputError, NumericError
from .evaluation import roc_auc
from .model import (
    DEFAULT_D,
    DEFAULT_ELL,
    DEFAULT_P,
    HyperParams,
    ModelParams,
    baseline_forward_batch,
    count_params,
    forward_batch,
    predict_proba,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise InputError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise InputError("batch_size and max_epochs must be >= 1")
        if self.patience < 0:
            raise InputError(f"patience must be >= 0, got {self.patience}")
        if self.optimizer not in ("adam", "sgd"):
            raise InputError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class GridSpec:
    ell_values: tuple = DEFAULT_ELL
    p_values: tuple = DEFAULT_P
    d_values: tuple = DEFAULT_D

    def __post_init__(self):
        if not (self.ell_values and self.p_values and self.d_values):
            raise InputError("grid lists must be non-empty")

    def points(self):
        return list(itertools.product(self.ell_values, self.p_values, self.d_values))


@dataclass
class OptimizerState:
    step: int = 0
    epoch: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def cross_entropy_loss(y, label):
    """``-log(y[label])`` with ``y`` clamped to 1e-12; works on numpy or Tensor input."""
    if isinstance(y, ad.Tensor):
        labels = np.atleast_1d(np.asarray(label))
        if not np.isin(labels, (0, 1)).all():
            raise InputError(f"labels must be 0 or 1, got {label!r}")
        picked = ad.sum(y * np.eye(2)[labels].reshape(y.shape), axis=-1)
        return -ad.mean(ad.log(picked))
    if label not in (0, 1):
        raise InputError(f"label must be 0 or 1, got {label!r}")
    return float(-math.log(max(float(np.asarray(y)[label]), ad.LOG_FLOOR)))


def _apply_update(params, grads, cfg, state):
    state.step += 1
    lr = cfg.learning_rate
    if cfg.optimizer == "sgd":
        for name, g in grads.items():
            params.arrays[name] -= lr * g
        return
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, g in grads.items():
        m = state.m.setdefault(name, np.zeros_like(g))
        v = state.v.setdefault(name, np.zeros_like(g))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params.arrays[name] -= lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


def batch_loss(params, codes, labels, leaves=None):
    leaves = leaves if leaves is not None else params.leaves()
    fwd = baseline_forward_batch if params.kind == "lstm" else forward_batch
    y = fwd(codes, leaves)["y"]
    return cross_entropy_loss(y, labels), leaves


def gradients(params, codes, labels):
    """Mean-over-batch loss and ``{name: gradient}`` for every parameter."""
    loss, leaves = batch_loss(params, codes, labels)
    for leaf in leaves.values():
        leaf.zero_grad()
    ad.backward(loss)
    return loss.item(), {name: leaf.grad for name, leaf in leaves.items()}


def train_epoch(data, params, cfg, state):
    """One shuffled pass of mini-batch updates, in place on ``params``.

    Returns ``(params, mean per-sample loss)``. The shuffle is seeded from
    ``cfg.seed`` and the epoch counter in ``state``.
    """
    if len(data) == 0:
        raise InputError("train_epoch needs data")
    if data.t != params.hp.t:
        raise InputError(f"data length {data.t} != model length {params.hp.t}")
    codes, labels = data.codes, data.labels
    rng = np.random.default_rng([cfg.seed, state.epoch])
    order = rng.permutation(len(data))
    total = 0.0
    for b, start in enumerate(range(0, len(order), cfg.batch_size)):
        idx = order[start : start + cfg.batch_size]
        loss, grads = gradients(params, codes[idx], labels[idx])
        if not math.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
            raise NumericError(f"non-finite loss or gradient in epoch {state.epoch}, batch {b}")
        _apply_update(params, grads, cfg, state)
        if not all(np.isfinite(params.arrays[name]).all() for name in grads):
            raise NumericError(f"parameters overflowed in epoch {state.epoch}, batch {b}")
        total += loss * len(idx)
    state.epoch += 1
    return params, total / len(data)


def evaluate_auc(params, data):
    return roc_auc(predict_proba(params, data.codes), data.labels)


def fit(train, val, hp, cfg, kind="mmn", init_seed=None, history_path=None, params=None):
    """Train with early stopping on validation AUC.

    Returns ``(best_params, history)``; ``history`` holds one dict per epoch
    with ``epoch``, ``train_loss`` and ``val_auc``. When ``val`` is ``None`` a
    seeded 10% of ``train`` is held out.
    """
    if val is None:
        train, val = split(train, 0.1, cfg.seed)
    if len(val) == 0:
        raise InputError("validation set is empty")
    if train.t != hp.t:
        raise InputError(f"data length {train.t} != hyperparameter t={hp.t}")
    if params is None:
        params = ModelParams.init(hp, cfg.seed if init_seed is None else init_seed, kind=kind)
    state = OptimizerState()
    best, best_auc, since_best = params.copy(), -math.inf, 0
    history = []
    sink = open(history_path, "w") if history_path else None
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            _, loss = train_epoch(train, params, cfg, state)
            auc = evaluate_auc(params, val)
            row = {"epoch": epoch, "train_loss": loss, "val_auc": auc}
            history.append(row)
            if sink:
                sink.write(json.dumps(row) + "\n")
                sink.flush()
            log.info("epoch %d loss %.4f val_auc %.4f", epoch, loss, auc)
            if auc > best_auc:
                best, best_auc, since_best = params.copy(), auc, 0
            else:
                since_best += 1
            if since_best >= cfg.patience:
                break
    finally:
        if sink:
            sink.close()
    return best, history


def grid_search(train, val, grid, cfg, kind="mmn"):
    """Fit every (ell, p, d) point; rank by val AUC, then fewer params, then (ell, p, d).

    ``cfg`` is a TrainConfig or a callable ``(ell, p, d) -> TrainConfig``.
    Returns a list of dicts with ``ell``, ``p``, ``d``, ``val_auc``, ``n_params``
    and ``error`` (``None`` unless that point failed).
    """
    config_for = cfg if callable(cfg) else (lambda ell, p, d: cfg)
    if val is None:
        train, val = split(train, 0.1, config_for(*grid.points()[0]).seed)
    results = []
    for ell, p, d in grid.points():
        row = {"ell": ell, "p": p, "d": d, "val_auc": math.nan, "error": None}
        try:
            hp = HyperParams(ell=ell, p=p, d=d, t=train.t)
            row["n_params"] = count_params(hp, baseline=kind == "lstm")
            _, history = fit(train, val, hp, config_for(ell, p, d), kind=kind)
            row["val_auc"] = max(h["val_auc"] for h in history)
        except Exception as exc:  # noqa: BLE001 - a failed point is recorded, not fatal
            log.warning("grid point (%d, %d, %d) failed: %s", ell, p, d, exc)
            row["error"] = str(exc)
            row.setdefault("n_params", 0)
        results.append(row)

    def key(r):
        failed = r["error"] is not None or math.isnan(r["val_auc"])
        return (failed, -r["val_auc"] if not failed else 0.0, r["n_params"], r["ell"], r["p"], r["d"])

    return sorted(results, key=key)
