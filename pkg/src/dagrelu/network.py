"""Forward evaluation, losses and exact reverse-mode gradients.

Hidden nodes sum their weighted inputs and apply a homogeneous activation;
output nodes are linear accumulators. Parameters are a dense vector aligned
with ``dag.edge_ids``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from . import kernels
from .dag import Dag
from .errors import InvalidDataset, InvalidTarget

LossKind = Literal["mse", "logistic"]
_LOSS_CODES = {"mse": 0, "logistic": 1}


@dataclass(frozen=True)
class Activation:
    """ReLU (``gamma=0``) or leaky ReLU with slope ``gamma`` on the negative side.

    The derivative at 0 is taken from the left (``gamma``), which keeps
    ``sigma(x) == sigma'(x) * x`` exact everywhere.
    """

    kind: str = "relu"
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("relu", "leaky_relu"):
            raise ValueError(f"unknown activation {self.kind!r}")
        if self.kind == "relu" and self.gamma != 0.0:
            raise ValueError("relu has gamma = 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, x, self.gamma * x)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, 1.0, self.gamma)


RELU = Activation()


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.inputs, dtype=float)
        Y = np.ascontiguousarray(self.targets, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.shape[0] < 1 or X.shape[0] != Y.shape[0]:
            raise InvalidDataset(f"inputs {X.shape} and targets {Y.shape} disagree")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", Y)

    def __len__(self):
        return self.inputs.shape[0]

    def check(self, dag: Dag) -> "Dataset":
        if self.inputs.shape[1] != len(dag.inputs):
            raise InvalidDataset(
                f"{self.inputs.shape[1]} input columns for {len(dag.inputs)} input nodes"
            )
        if self.targets.shape[1] != len(dag.outputs):
            raise InvalidDataset(
                f"{self.targets.shape[1]} target columns for {len(dag.outputs)} output nodes"
            )
        return self

    def with_constant_column(self, value: float = 1.0) -> "Dataset":
        ones = np.full((len(self), 1), value)
        return Dataset(np.hstack([self.inputs, ones]), self.targets)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.targets[idx])


@dataclass(frozen=True, eq=False)
class Plan:
    """Flat arrays describing a Dag in topological-position space."""

    indptr: np.ndarray
    in_src: np.ndarray
    in_edge: np.ndarray
    kinds: np.ndarray
    input_pos: np.ndarray
    output_pos: np.ndarray
    hidden_pos: np.ndarray
    order: tuple


@lru_cache(maxsize=128)
def plan_for(dag: Dag) -> Plan:
    order = dag.topological_order
    pos = {n: i for i, n in enumerate(order)}
    code = {"input": 0, "hidden": 1, "output": 2}
    kinds = np.array([code[dag.role(n)] for n in order], dtype=np.int64)
    indptr = [0]
    src, eidx = [], []
    for n in order:
        for e in dag.in_edges(n):
            src.append(pos[dag.edge(e)[0]])
            eidx.append(dag.edge_index[e])
        indptr.append(len(src))
    i64 = lambda x: np.ascontiguousarray(x, dtype=np.int64)  # noqa: E731
    return Plan(
        indptr=i64(indptr),
        in_src=i64(src),
        in_edge=i64(eidx),
        kinds=kinds,
        input_pos=i64([pos[n] for n in dag.inputs]),
        output_pos=i64([pos[n] for n in dag.outputs]),
        hidden_pos=i64([pos[n] for n in dag.hidden]),
        order=order,
    )


def _theta(dag: Dag, theta) -> np.ndarray:
    th = np.ascontiguousarray(theta, dtype=float)
    if th.shape != (dag.n_edges,):
        raise ValueError(f"expected {dag.n_edges} parameters, got shape {th.shape}")
    return th


def forward_batch(dag: Dag, act: Activation, theta, X):
    """Returns (outputs N x |V_O|, activations N x |V|, preactivations N x |hidden|).

    Activation and preactivation columns follow ascending node id.
    """
    p = plan_for(dag)
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    A, Z = kernels.impl().forward_batch(
        p.indptr, p.in_src, p.in_edge, p.kinds, p.input_pos, _theta(dag, theta),
        X, float(act.gamma),
    )
    by_id = np.argsort(np.array(p.order))
    return A[:, p.output_pos], A[:, by_id], Z[:, p.hidden_pos]


def forward(dag: Dag, act: Activation, theta, x):
    """Single-sample forward pass; see :func:`forward_batch`."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if x.shape[1] != len(dag.inputs):
        raise ValueError(f"input has length {x.shape[1]}, expected {len(dag.inputs)}")
    out, a, z = forward_batch(dag, act, theta, x)
    return out[0], a[0], z[0]


def predict(dag: Dag, act: Activation, theta, X) -> np.ndarray:
    return forward_batch(dag, act, theta, X)[0]


def _check_targets(data: Dataset, kind: str):
    if kind not in _LOSS_CODES:
        raise ValueError(f"unknown loss {kind!r}")
    if kind == "logistic":
        t = data.targets
        if not np.all((t == 0.0) | (t == 1.0)):
            raise InvalidTarget("logistic loss needs targets in {0, 1}")


def loss_and_gradient(dag: Dag, act: Activation, theta, data: Dataset,
                      kind: LossKind = "mse") -> tuple[float, np.ndarray]:
    _check_targets(data, kind)
    data.check(dag)
    p = plan_for(dag)
    return kernels.impl().loss_grad(
        p.indptr, p.in_src, p.in_edge, p.kinds, p.input_pos, p.output_pos,
        _theta(dag, theta), data.inputs, data.targets, _LOSS_CODES[kind],
        float(act.gamma),
    )


def loss(dag: Dag, act: Activation, theta, data: Dataset, kind: LossKind = "mse") -> float:
    """Batch-averaged loss: 0.5*||y_hat - y||^2 (mse) or sigmoid cross-entropy."""
    _check_targets(data, kind)
    Yh = predict(dag, act, theta, data.check(dag).inputs)
    Y = data.targets
    if kind == "mse":
        return float(0.5 * np.sum((Yh - Y) ** 2) / len(data))
    return float(np.sum(np.logaddexp(0.0, Yh) - Y * Yh) / len(data))


def gradient(dag: Dag, act: Activation, theta, data: Dataset,
             kind: LossKind = "mse") -> np.ndarray:
    return loss_and_gradient(dag, act, theta, data, kind)[1]


def gf_step(theta, g, lr: float) -> np.ndarray:
    """One explicit Euler step of gradient flow."""
    if not lr > 0:
        raise ValueError("lr must be positive")
    return np.asarray(theta, dtype=float) - lr * np.asarray(g, dtype=float)


def with_bias(dag: Dag) -> tuple[Dag, int]:
    """Adds a virtual input node (id max+1) wired to every hidden node.

    Returns the new graph and the id of the bias node; the matching dataset
    needs a trailing constant-1 input column (``Dataset.with_constant_column``),
    which lines up because the new id is the largest.
    """
    b = max(dag.node_ids) + 1
    e0 = max(dag.edge_ids, default=-1) + 1
    nodes = dag.nodes + [(b, "input")]
    edges = dag.edges + [(e0 + k, b, v) for k, v in enumerate(dag.hidden)]
    return Dag(nodes, edges), b


def rescale(dag: Dag, theta, v: int, alpha: float) -> np.ndarray:
    """Scale in-edges of hidden node `v` by alpha and out-edges by 1/alpha."""
    th = np.array(theta, dtype=float)
    for e in dag.in_edges(v):
        th[dag.edge_index[e]] *= alpha
    for e in dag.out_edges(v):
        th[dag.edge_index[e]] /= alpha
    return th
