"""Regularized discrete gradient flow with metric snapshots."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dag import Dag, reduced_incidence
from .errors import DivergenceDetected
from .invariants import balance
from .network import RELU, Activation, Dataset, loss_and_gradient
from .singularity import jacobian, nuclear_norm_and_grad, singular_values

REGULARIZERS = ("none", "l1", "l2", "nuclear")
# tuned values reported for the tabular replication; retune per dataset
DEFAULT_ALPHA = {"none": 0.0, "l1": 10.0, "l2": 20.0, "nuclear": 0.05}
NULL_SV = 1e-3


@dataclass
class TrainConfig:
    lr: float = 1e-3
    steps: int = 1000
    loss: str = "mse"
    regularizer: str = "none"
    alpha: float | None = None
    seed: int = 0
    init: tuple = ("uniform", -1.0, 1.0)
    log_every: int = 10
    batch_size: int | None = None

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be an integer >= 1")
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"unknown regularizer {self.regularizer!r}")
        if self.alpha is None:
            self.alpha = DEFAULT_ALPHA[self.regularizer]
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        self.init = tuple(self.init)

    @property
    def effective_regularizer(self) -> str:
        return "none" if self.alpha == 0 else self.regularizer

    def to_dict(self):
        d = asdict(self)
        d["init"] = list(self.init)
        return d


def init_params(dag: Dag, scheme: Sequence, seed: int) -> np.ndarray:
    """``("uniform", a, b)``, ``("normal", s)`` or ``("explicit", values)``."""
    rng = np.random.default_rng(seed)
    kind = scheme[0]
    if kind == "uniform":
        a, b = float(scheme[1]), float(scheme[2])
        return rng.uniform(a, b, dag.n_edges)
    if kind == "normal":
        return rng.normal(0.0, float(scheme[1]), dag.n_edges)
    if kind == "explicit":
        th = np.array(scheme[1], dtype=float)
        if th.shape != (dag.n_edges,):
            raise ValueError("explicit init has the wrong length")
        return th
    raise ValueError(f"unknown init scheme {kind!r}")


def regularizer_value_and_grad(kind: str, B: np.ndarray, theta: np.ndarray):
    if kind == "none":
        return 0.0, np.zeros_like(theta)
    if kind == "l1":
        return float(np.sum(np.abs(theta))), np.sign(theta)
    if kind == "l2":
        return float(np.sum(theta * theta)), 2.0 * theta
    if kind == "nuclear":
        return nuclear_norm_and_grad(B, theta)
    raise ValueError(kind)


def prune_scores(dag: Dag, theta) -> tuple[np.ndarray, np.ndarray]:
    """Per hidden node: product and max of squared in/out weight norms."""
    th = np.asarray(theta, dtype=float)
    s = np.empty(len(dag.hidden))
    smax = np.empty(len(dag.hidden))
    for k, v in enumerate(dag.hidden):
        win = sum(th[dag.edge_index[e]] ** 2 for e in dag.in_edges(v))
        wout = sum(th[dag.edge_index[e]] ** 2 for e in dag.out_edges(v))
        s[k] = win * wout
        smax[k] = max(win, wout)
    return s, smax


@dataclass
class Snapshot:
    step: int
    task_loss: float
    reg_value: float
    balance: np.ndarray
    drift: float
    singular_values: np.ndarray
    n_null_sv: int
    score: np.ndarray
    score_max: np.ndarray


@dataclass
class TrainRecord:
    hidden: tuple
    config: dict
    snapshots: list[Snapshot] = field(default_factory=list)
    max_drift: float = 0.0

    @property
    def steps(self) -> list[int]:
        return [s.step for s in self.snapshots]

    def final(self) -> Snapshot:
        return self.snapshots[-1]

    def columns(self) -> list[str]:
        n_sv = len(self.snapshots[0].singular_values) if self.snapshots else 0
        cols = ["step", "task_loss", "reg_value", "drift", "n_null_sv"]
        cols += [f"c_{v}" for v in self.hidden]
        cols += [f"sv_{i}" for i in range(n_sv)]
        cols += [f"s_{v}" for v in self.hidden]
        cols += [f"smax_{v}" for v in self.hidden]
        return cols

    def rows(self):
        for s in self.snapshots:
            yield ([s.step, s.task_loss, s.reg_value, s.drift, s.n_null_sv]
                   + list(s.balance) + list(s.singular_values)
                   + list(s.score) + list(s.score_max))

    def column_manifest(self) -> dict:
        return {
            "step": "optimizer step index (0 = before the first update)",
            "task_loss": "batch-averaged task loss at this step",
            "reg_value": "unscaled regularizer value (alpha not applied)",
            "drift": "max_v |c_v(t) - c_v(0)|",
            "n_null_sv": f"number of Jacobian singular values <= {NULL_SV}",
            "c_<node>": "balance of hidden node <node>",
            "sv_<i>": "i-th largest singular value of 2 B diag(theta)",
            "s_<node>": "product prune score of hidden node <node>",
            "smax_<node>": "max prune score of hidden node <node>",
        }

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            for row in self.rows():
                w.writerow([_fmt(x) for x in row])

    def write_long_csv(self, path):
        """step, quantity, index, value rows for plotting tools."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "quantity", "index", "value"])
            for s in self.snapshots:
                for name, val in (("task_loss", s.task_loss), ("reg_value", s.reg_value),
                                  ("drift", s.drift), ("n_null_sv", s.n_null_sv)):
                    w.writerow([s.step, name, "", _fmt(val)])
                for name, arr, idx in (("c", s.balance, self.hidden),
                                       ("sv", s.singular_values, range(len(s.singular_values))),
                                       ("s", s.score, self.hidden),
                                       ("smax", s.score_max, self.hidden)):
                    for i, x in zip(idx, arr):
                        w.writerow([s.step, name, i, _fmt(x)])

    def to_dict(self) -> dict:
        return {
            "hidden": list(self.hidden),
            "config": self.config,
            "max_drift": self.max_drift,
            "snapshots": [
                {
                    "step": s.step,
                    "task_loss": s.task_loss,
                    "reg_value": s.reg_value,
                    "balance": s.balance.tolist(),
                    "drift": s.drift,
                    "singular_values": s.singular_values.tolist(),
                    "n_null_sv": s.n_null_sv,
                    "score": s.score.tolist(),
                    "score_max": s.score_max.tolist(),
                }
                for s in self.snapshots
            ],
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def train(dag: Dag, act: Activation, data: Dataset, cfg: TrainConfig,
          theta0=None, callback=None):
    """Runs ``theta <- theta - lr * (g_task + alpha * g_reg)`` for ``cfg.steps`` steps.

    Snapshots are taken at step 0, every ``log_every`` steps, and at the
    final step. ``callback(step, theta, g_task)`` is invoked before each
    update with the task gradient at the current point.
    """
    data.check(dag)
    B = reduced_incidence(dag)
    theta = (init_params(dag, cfg.init, cfg.seed) if theta0 is None
             else np.array(theta0, dtype=float))
    reg = cfg.effective_regularizer
    rng = np.random.default_rng(cfg.seed + 1)
    c0 = balance(B, theta)
    record = TrainRecord(dag.hidden, cfg.to_dict())

    def snap(step, task_loss):
        c = balance(B, theta)
        sv = singular_values(jacobian(B, theta))
        rv, _ = regularizer_value_and_grad(reg, B, theta) if reg != "none" else (0.0, None)
        s, smax = prune_scores(dag, theta)
        record.snapshots.append(Snapshot(
            step, task_loss, rv, c, float(np.max(np.abs(c - c0), initial=0.0)),
            sv, int(np.sum(sv <= NULL_SV)) + (len(dag.hidden) - len(sv)), s, smax,
        ))

    batch = data
    for step in range(cfg.steps + 1):
        if cfg.batch_size is not None and cfg.batch_size < len(data):
            batch = data.subset(rng.choice(len(data), cfg.batch_size, replace=False))
        task_loss, g = loss_and_gradient(dag, act, theta, batch, cfg.loss)
        if not math.isfinite(task_loss):
            raise DivergenceDetected(f"loss became {task_loss} at step {step}")
        drift = float(np.max(np.abs(balance(B, theta) - c0), initial=0.0))
        record.max_drift = max(record.max_drift, drift)
        if step % cfg.log_every == 0 or step == cfg.steps:
            snap(step, task_loss)
        if step == cfg.steps:
            break
        if callback is not None:
            callback(step, theta, g)
        if reg != "none":
            _, gr = regularizer_value_and_grad(reg, B, theta)
            g = g + cfg.alpha * gr
        theta = theta - cfg.lr * g
        if not np.all(np.isfinite(theta)):
            raise DivergenceDetected(f"parameters became non-finite at step {step + 1}")
    return theta, record


def estimate_edge_drop_rate(theta, tau: float = 1e-3) -> float:
    th = np.asarray(theta, dtype=float)
    if th.size == 0:
        return 0.0
    return float(np.mean(np.abs(th) <= tau))
