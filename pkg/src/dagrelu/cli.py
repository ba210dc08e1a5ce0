"""Command-line interface.

Exit codes: 0 success (or connected), 2 disconnected, 1 any error.
Every command that writes files into ``--out-dir`` first writes
``manifest.json`` recording the inputs, their sha256, the configuration and
the output paths.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .dag import Dag, reduced_incidence
from .errors import DagReluError
from .fileio import (
    atomic_write_text, dump_json, load_balance, load_dag, load_dataset,
    load_params, save_dag, save_params, sha256,
)
from .invariants import balance, is_connected, zero_sum_subsets
from .network import Activation
from .nullmodel import null_model
from .pruning import prune_curve, prune_neurons
from .singularity import TAU_RANK, TAU_ZERO, singularity_report
from .trainer import REGULARIZERS, TrainConfig, estimate_edge_drop_rate, train

EXIT_OK, EXIT_ERROR, EXIT_DISCONNECTED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage errors must not collide with the "disconnected" exit code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be an integer >= 1")
    return v


def _probability(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return v


def _init_scheme(text):
    parts = text.split(":")
    try:
        if parts[0] == "uniform" and len(parts) == 3:
            return ("uniform", float(parts[1]), float(parts[2]))
        if parts[0] == "normal" and len(parts) == 2:
            return ("normal", float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError("expected uniform:A:B or normal:S")


def _activation(args) -> Activation:
    if args.activation == "relu":
        return Activation()
    return Activation("leaky_relu", args.gamma)


def _write_manifest(out_dir: Path, command: str, inputs: dict, config: dict, outputs: list):
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "version": __version__,
        "kernel_backend": kernels.backend(),
        "inputs": {k: {"path": str(p), "sha256": sha256(p)} for k, p in inputs.items() if p},
        "config": config,
        "outputs": [str(out_dir / o) for o in outputs],
    }
    dump_json(manifest, out_dir / "manifest.json")


def _emit(obj, out: Path | None):
    text = json.dumps(obj, indent=1, allow_nan=False) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def _csv(header, rows) -> str:
    def fmt(x):
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, (float, np.floating)):
            return format(float(x), ".17g")
        return str(x)
    lines = [",".join(header)] + [",".join(fmt(x) for x in r) for r in rows]
    return "\n".join(lines) + "\n"


# -- commands --------------------------------------------------------------


def cmd_analyze(args) -> int:
    dag = load_dag(args.graph)
    if args.params:
        c = balance_from_params(dag, load_params(args.params, dag))
    else:
        c = load_balance(args.c, dag)
    report = is_connected(dag, c, backend=args.backend, cap=args.cap)
    zs = zero_sum_subsets(c, labels=list(dag.hidden))
    doc = {
        "connected": report.connected,
        "backend": report.backend,
        "balance": {str(v): float(x) for v, x in zip(dag.hidden, c)},
        "witnesses": [w.to_dict() for w in report.witnesses],
        "zero_sum_subsets": {"count": len(zs), "subsets": [sorted(s) for s in zs]},
    }
    out = None
    if args.out_dir:
        out_dir = Path(args.out_dir)
        _write_manifest(out_dir, "analyze", {"graph": args.graph, "params": args.params, "c": args.c},
                        {"backend": args.backend, "cap": args.cap}, ["report.json"])
        out = out_dir / "report.json"
    _emit(doc, out)
    return EXIT_OK if report.connected else EXIT_DISCONNECTED


def balance_from_params(dag: Dag, theta):
    return balance(reduced_incidence(dag), theta)


def cmd_train(args) -> int:
    dag = load_dag(args.graph)
    data = load_dataset(args.data, dag)
    init = ("explicit", load_params(args.params, dag).tolist()) if args.params else args.init
    cfg = TrainConfig(lr=args.lr, steps=args.steps, loss=args.loss,
                      regularizer=args.regularizer, alpha=args.alpha, seed=args.seed,
                      init=init, log_every=args.log_every, batch_size=args.batch_size)
    out_dir = Path(args.out_dir)
    outputs = ["record.csv", "record.columns.json", "record.long.csv", "record.json", "params.json"]
    config = cfg.to_dict()
    if args.params:
        config["init"] = ["explicit", str(args.params)]
    config["activation"] = {"kind": args.activation, "gamma": args.gamma}
    _write_manifest(out_dir, "train", {"graph": args.graph, "data": args.data, "params": args.params},
                    config, outputs)
    theta, rec = train(dag, _activation(args), data, cfg)
    rec.write_csv(out_dir / "record.csv")
    dump_json({"columns": rec.columns(), "description": rec.column_manifest()},
              out_dir / "record.columns.json")
    rec.write_long_csv(out_dir / "record.long.csv")
    rec.write_json(out_dir / "record.json")
    save_params(dag, theta, out_dir / "params.json")
    return EXIT_OK


def cmd_prune(args) -> int:
    dag = load_dag(args.graph)
    data = load_dataset(args.data, dag)
    theta = load_params(args.params, dag)
    n = len(dag.hidden)
    if args.k == "all":
        kmax = n
    else:
        try:
            kmax = int(args.k)
        except ValueError:
            raise DagReluError(f"--k must be an integer or 'all', got {args.k!r}") from None
        if not 0 <= kmax <= n:
            raise DagReluError(f"--k must lie in [0, {n}]")
    act = _activation(args)
    curve = prune_curve(dag, theta, data, args.order, args.loss, act, range(kmax + 1))
    text = _csv(["k", "loss"], curve)
    if args.out_dir is None:
        sys.stdout.write(text)
        return EXIT_OK
    out_dir = Path(args.out_dir)
    _write_manifest(out_dir, "prune",
                    {"graph": args.graph, "data": args.data, "params": args.params},
                    {"order": args.order, "k": kmax, "loss": args.loss,
                     "activation": {"kind": args.activation, "gamma": args.gamma}},
                    ["curve.csv", "pruned_graph.json", "pruned_params.json"])
    atomic_write_text(out_dir / "curve.csv", text)
    d2, th2, _ = prune_neurons(dag, theta, args.order, kmax)
    save_dag(d2, out_dir / "pruned_graph.json")
    save_params(d2, th2, out_dir / "pruned_params.json")
    return EXIT_OK


def cmd_singularity(args) -> int:
    dag = load_dag(args.graph)
    theta = load_params(args.params, dag)
    rep = singularity_report(dag, theta, args.tau_zero, args.tau_rank)
    out = None
    if args.out_dir:
        out_dir = Path(args.out_dir)
        _write_manifest(out_dir, "singularity", {"graph": args.graph, "params": args.params},
                        {"tau_zero": args.tau_zero, "tau_rank": args.tau_rank}, ["singularity.json"])
        out = out_dir / "singularity.json"
    _emit(rep.to_dict(), out)
    return EXIT_OK


def cmd_nullmodel(args) -> int:
    dag = load_dag(args.graph)
    if args.p is not None:
        p = args.p
    else:
        p = estimate_edge_drop_rate(load_params(args.params, dag), args.tau)
    res = null_model(dag, p, args.mode, n=args.n, seed=args.seed, criterion=args.criterion)
    if res.stderr is None:
        text = _csv(["k", "p_at_least_k"], res.rows())
    else:
        text = _csv(["k", "p_at_least_k", "stderr"],
                    [(k, t, s) for (k, t), s in zip(res.rows(), res.stderr.tolist())])
    if args.out_dir is None:
        sys.stdout.write(text)
        return EXIT_OK
    out_dir = Path(args.out_dir)
    _write_manifest(out_dir, "nullmodel", {"graph": args.graph, "params": args.params},
                    {"p": p, "mode": res.mode, "n": args.n, "seed": args.seed,
                     "criterion": args.criterion, "tau": args.tau},
                    ["nullmodel.csv"])
    atomic_write_text(out_dir / "nullmodel.csv", text)
    return EXIT_OK


def cmd_verify(args) -> int:
    """Re-hashes the inputs recorded in a manifest."""
    manifest = json.loads(Path(args.manifest).read_text())
    bad = []
    for name, item in manifest.get("inputs", {}).items():
        path = Path(item["path"])
        if not path.exists() or sha256(path) != item["sha256"]:
            bad.append(name)
    if bad:
        sys.stderr.write(f"input changed or missing: {', '.join(bad)}\n")
        return EXIT_ERROR
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def _add_activation(p):
    p.add_argument("--activation", choices=("relu", "leaky_relu"), default="relu",
                   help="hidden-node activation (default relu)")
    p.add_argument("--gamma", type=float, default=0.01,
                   help="negative-side slope for leaky_relu (default 0.01)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dagrelu", description="Invariant-set analysis and training for ReLU DAG networks.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--kernels", choices=("auto", "compiled", "python"), default="auto",
                    help="numerical kernel backend (default: compiled if built)")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="decide connectedness of the invariant set")
    p.add_argument("graph", help="graph JSON file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--params", help='parameter JSON {"edge-id": weight}; c is computed from it')
    src.add_argument("--c", help='balance JSON {"hidden-node-id": value}')
    p.add_argument("--backend", choices=("flow", "enumerate", "both"), default="flow",
                   help="flow: circulation feasibility; enumerate: stable-set scan; both: cross-check")
    p.add_argument("--cap", type=_positive_int, default=20,
                   help="largest pure-ancestor set the enumerate backend accepts (default 20)")
    p.add_argument("--out-dir", help="write manifest.json and report.json here instead of stdout")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="gradient descent with an optional regularizer")
    p.add_argument("graph", help="graph JSON file")
    p.add_argument("data", help="dataset CSV with x<id> and y<id> columns")
    p.add_argument("--out-dir", required=True, help="directory for manifest, records and params")
    p.add_argument("--regularizer", choices=REGULARIZERS, default="none")
    p.add_argument("--alpha", type=float, default=None,
                   help="regularizer weight (default: 10 for l1, 20 for l2, 0.05 for nuclear)")
    p.add_argument("--lr", type=float, default=1e-3, help="step size (default 1e-3)")
    p.add_argument("--steps", type=_positive_int, default=1000, help="number of updates, >= 1")
    p.add_argument("--seed", type=int, default=0, help="seed for initialization and batching")
    p.add_argument("--log-every", type=_positive_int, default=10, help="snapshot interval in steps")
    p.add_argument("--loss", choices=("mse", "logistic"), default="mse")
    p.add_argument("--init", type=_init_scheme, default=("uniform", -1.0, 1.0),
                   help="uniform:A:B or normal:S (default uniform:-1:1)")
    p.add_argument("--params", help="explicit initial parameters; overrides --init")
    p.add_argument("--batch-size", type=_positive_int, default=None,
                   help="minibatch size; full batch when omitted")
    _add_activation(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("prune", help="loss after removing the lowest-scoring neurons")
    p.add_argument("graph")
    p.add_argument("data")
    p.add_argument("--params", required=True)
    p.add_argument("--order", choices=("s", "s_max"), default="s",
                   help="s: product of squared in/out norms; s_max: their maximum")
    p.add_argument("--k", default="all", help="largest number of neurons removed, or 'all'")
    p.add_argument("--loss", choices=("mse", "logistic"), default="mse")
    p.add_argument("--out-dir", help="write curve.csv and the pruned network here instead of stdout")
    _add_activation(p)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("singularity", help="Jacobian rank and detached neuron groups")
    p.add_argument("graph")
    p.add_argument("--params", required=True)
    p.add_argument("--tau-zero", type=float, default=TAU_ZERO,
                   help=f"edges with |weight| <= this count as zero (default {TAU_ZERO})")
    p.add_argument("--tau-rank", type=float, default=TAU_RANK,
                   help=f"relative singular-value cutoff for numerical rank (default {TAU_RANK})")
    p.add_argument("--out-dir", help="write singularity.json here instead of stdout")
    p.set_defaults(func=cmd_singularity)

    p = sub.add_parser("nullmodel", help="detached-neuron counts under random edge dropping")
    p.add_argument("graph")
    rate = p.add_mutually_exclusive_group(required=True)
    rate.add_argument("--p", type=_probability, help="edge drop probability")
    rate.add_argument("--params", help="estimate p as the fraction of |weight| <= --tau")
    p.add_argument("--tau", type=float, default=1e-3, help="zero threshold with --params")
    p.add_argument("--mode", choices=("exact", "mc"), default="exact",
                   help="exact enumeration (<= 22 edges) or Monte Carlo")
    p.add_argument("--n", type=_positive_int, default=100_000, help="Monte Carlo samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--criterion", choices=("path", "quotient"), default="path",
                   help="path: on no live input-output path; quotient: cut from the glued boundary")
    p.add_argument("--out-dir", help="write nullmodel.csv here instead of stdout")
    p.set_defaults(func=cmd_nullmodel)

    p = sub.add_parser("verify", help="check that a manifest's inputs are unchanged")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.kernels != "auto":
            kernels.use(args.kernels)
        return args.func(args)
    except (DagReluError, ValueError, OSError, KeyError) as err:
        sys.stderr.write(f"dagrelu: error: {err}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
