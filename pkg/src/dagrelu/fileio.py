"""Reading and writing graphs, parameter vectors, balance vectors and datasets."""
from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .dag import Dag
from .errors import InvalidDag, InvalidDataset
from .network import Dataset


class ParseError(InvalidDag):
    """Malformed JSON input; carries the line and column of the fault."""

    def __init__(self, path, err: json.JSONDecodeError):
        self.line, self.column = err.lineno, err.colno
        super().__init__(f"{path}:{err.lineno}:{err.colno}: {err.msg}")


def _load_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(path, err) from None


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def atomic_write_text(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj, path):
    """Writes JSON with round-trip float precision (Python's repr)."""
    atomic_write_text(path, json.dumps(obj, indent=1, allow_nan=False) + "\n")


# -- graphs ----------------------------------------------------------------


def load_dag(path) -> Dag:
    return Dag.from_dict(_load_json(path))


def save_dag(dag: Dag, path):
    atomic_write_text(path, dag.to_json() + "\n")


# -- per-edge and per-node vectors -----------------------------------------


def _keyed_vector(data, ids, what, path):
    if not isinstance(data, dict):
        raise InvalidDag(f"{path}: {what} file must be a JSON object")
    try:
        got = {int(k): float(v) for k, v in data.items()}
    except (TypeError, ValueError):
        raise InvalidDag(f"{path}: {what} keys must be integer ids, values numbers") from None
    missing = sorted(set(ids) - set(got))
    extra = sorted(set(got) - set(ids))
    if missing or extra:
        raise InvalidDag(f"{path}: {what} ids mismatch (missing {missing}, unknown {extra})")
    vec = np.array([got[i] for i in ids])
    if not np.all(np.isfinite(vec)):
        raise InvalidDag(f"{path}: {what} values must be finite")
    return vec


def load_params(path, dag: Dag) -> np.ndarray:
    """``{"edge-id": weight}`` -> vector aligned with ``dag.edge_ids``."""
    return _keyed_vector(_load_json(path), dag.edge_ids, "params", path)


def params_to_dict(dag: Dag, theta) -> dict:
    return {str(e): float(w) for e, w in zip(dag.edge_ids, np.asarray(theta, dtype=float))}


def save_params(dag: Dag, theta, path):
    dump_json(params_to_dict(dag, theta), path)


def load_balance(path, dag: Dag) -> np.ndarray:
    """``{"hidden-node-id": c_v}`` -> vector aligned with ``dag.hidden``."""
    return _keyed_vector(_load_json(path), dag.hidden, "balance", path)


# -- datasets --------------------------------------------------------------


def load_dataset(path, dag: Dag) -> Dataset:
    """CSV with columns ``x<input-id>`` and ``y<output-id>`` in any order."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidDataset(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    want = [f"x{n}" for n in dag.inputs] + [f"y{n}" for n in dag.outputs]
    if sorted(header) != sorted(want) or len(set(header)) != len(header):
        raise InvalidDataset(f"{path}: header {header} does not match expected columns {want}")
    col = {h: i for i, h in enumerate(header)}
    body = rows[1:]
    if not body:
        raise InvalidDataset(f"{path}: no data rows")
    try:
        M = np.array([[float(x) for x in r] for r in body])
    except ValueError as err:
        raise InvalidDataset(f"{path}: {err}") from None
    if M.shape[1] != len(header):
        raise InvalidDataset(f"{path}: ragged rows")
    if not np.all(np.isfinite(M)):
        raise InvalidDataset(f"{path}: non-finite values")
    X = M[:, [col[f"x{n}"] for n in dag.inputs]]
    Y = M[:, [col[f"y{n}"] for n in dag.outputs]]
    return Dataset(X, Y)


def save_dataset(dag: Dag, data: Dataset, path):
    data.check(dag)
    lines = [",".join([f"x{n}" for n in dag.inputs] + [f"y{n}" for n in dag.outputs])]
    for x, y in zip(data.inputs, data.targets):
        lines.append(",".join(format(float(v), ".17g") for v in (*x, *y)))
    atomic_write_text(path, "\n".join(lines) + "\n")
