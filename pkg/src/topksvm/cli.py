"""Command line front end: train, predict, evaluate, bench-proj.

Machine-readable output goes to stdout (JSON for train, CSV elsewhere);
human-oriented progress goes to stderr.  Every subcommand exits nonzero with
a single-line diagnostic on error.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import bench, io, plotting
from .losses import LossSpec, topk_error
from .solver import SolverConfig, predict_scores, train


def _parse_int_list(text, flag):
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"{flag} expects a comma-separated integer list, got {text!r}")
    if not values:
        raise ValueError(f"{flag} must name at least one value")
    return values


def _align_labels(dataset, model):
    """Map dataset examples onto the model's class indexing (1..m)."""
    lookup = {int(orig): j + 1 for j, orig in enumerate(model.labels)}
    y = np.empty(dataset.n, dtype=np.int64)
    for i in range(dataset.n):
        orig = int(dataset.labels[dataset.y[i] - 1])
        if orig not in lookup:
            raise ValueError(f"label {orig} not present in the model")
        y[i] = lookup[orig]
    return y


def _features_for(dataset, model):
    """Dataset features padded with zero rows up to the model's dimension."""
    d = dataset.feature_dim
    if d > model.feature_dim:
        raise ValueError(
            f"data has {d} features but the model was trained with "
            f"{model.feature_dim}"
        )
    if d == model.feature_dim:
        return dataset.X
    X = np.zeros((model.feature_dim, dataset.n), order="F")
    X[:d, :] = dataset.X
    return X


def cmd_train(args):
    dataset = io.read_libsvm(args.data)
    config = SolverConfig(
        loss=LossSpec(variant=args.loss, k=args.k),
        lam=getattr(args, "lambda"),
        epsilon=args.epsilon,
        max_epochs=args.max_epochs,
        seed=args.seed,
    )
    print(
        f"training on {args.data}: n={dataset.n} d={dataset.feature_dim} "
        f"m={dataset.m} loss={args.loss} k={args.k}",
        file=sys.stderr,
    )
    model, report = train(dataset, config)
    io.write_model(model, args.model)
    print(f"model written to {args.model}", file=sys.stderr)
    print(json.dumps({
        "epochs": report.epochs_run,
        "primal_objective": report.primal_objective,
        "dual_objective": report.dual_objective,
        "relative_gap": report.relative_gap,
        "seconds": report.wall_time,
    }))
    return 0


def cmd_predict(args):
    model = io.read_model(args.model)
    dataset = io.read_libsvm(args.data)
    scores = predict_scores(model, _features_for(dataset, model))
    top = min(args.top, model.num_classes)
    order = np.argsort(-scores, axis=0, kind="stable")[:top, :]
    with open(args.out, "w") as fh:
        fh.write("example," + ",".join(f"rank_{r + 1}" for r in range(top)) + "\n")
        for i in range(dataset.n):
            ranked = (str(int(model.labels[c])) for c in order[:, i])
            fh.write(f"{i + 1}," + ",".join(ranked) + "\n")
    print(f"wrote top-{top} rankings for {dataset.n} examples to {args.out}",
          file=sys.stderr)
    return 0


def cmd_evaluate(args):
    model = io.read_model(args.model)
    dataset = io.read_libsvm(args.data)
    ks = _parse_int_list(args.topk, "--topk")
    if any(k < 1 or k > model.num_classes for k in ks):
        raise ValueError(f"--topk values must lie in [1, {model.num_classes}]")
    y = _align_labels(dataset, model)
    scores = predict_scores(model, _features_for(dataset, model))
    accuracies = []
    print("k,accuracy")
    for k in ks:
        errs = sum(topk_error(scores[:, i], int(y[i]), k) for i in range(dataset.n))
        acc = 100.0 * (1.0 - errs / dataset.n)
        accuracies.append(acc)
        print(f"{k},{acc:.4f}")
    if args.plot:
        plotting.save_accuracy_plot(ks, accuracies, args.plot)
        print(f"accuracy plot written to {args.plot}", file=sys.stderr)
    return 0


def cmd_bench_proj(args):
    dims = _parse_int_list(args.dims, "--dims")
    ks = _parse_int_list(args.k, "--k")
    rows = bench.run_projection_benchmark(
        dims, ks, args.samples, args.seed,
        progress=lambda msg: print(msg, file=sys.stderr),
    )
    csv_text = bench.rows_to_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
        print(f"benchmark CSV written to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(csv_text)
    if args.plot:
        plotting.save_benchmark_plot(rows, args.plot)
        print(f"scaling plot written to {args.plot}", file=sys.stderr)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="topksvm",
        description="Top-k multiclass SVM: train, predict, evaluate, "
                    "and projection benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on LIBSVM-format data")
    p.add_argument("--data", required=True, help="training data (LIBSVM text)")
    p.add_argument("--k", type=int, required=True, help="rank cutoff of the loss")
    p.add_argument("--lambda", type=float, required=True, dest="lambda",
                   help="L2 regularisation weight")
    p.add_argument("--loss", choices=("alpha", "beta"), default="alpha",
                   help="loss variant (default alpha)")
    p.add_argument("--epsilon", type=float, default=1e-3,
                   help="relative duality gap threshold (default 1e-3)")
    p.add_argument("--max-epochs", type=int, default=300,
                   help="epoch budget (default 300)")
    p.add_argument("--seed", type=int, default=42,
                   help="shuffling seed (default 42)")
    p.add_argument("--model", required=True, help="output model path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="rank labels for each example")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--top", type=int, default=10,
                   help="ranks to emit per example (default 10)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="top-k accuracy on labelled data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--topk", required=True,
                   help="comma-separated list of k values, e.g. 1,5,10")
    p.add_argument("--plot", default=None,
                   help="optional path for an accuracy-vs-k figure")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench-proj", help="projection scaling benchmark")
    p.add_argument("--dims", default="1000,10000,100000,1000000",
                   help="comma-separated dimensions")
    p.add_argument("--k", default="1,5,10", help="comma-separated k values")
    p.add_argument("--samples", type=int, default=1000,
                   help="samples per configuration (default 1000)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default=None, help="CSV output path (default stdout)")
    p.add_argument("--plot", default=None,
                   help="optional path for the scaling figure")
    p.set_defaults(func=cmd_bench_proj)
    return parser


def main(argv=None):
    threads = os.environ.get("TOPKSVM_THREADS", "1")
    if not threads.isdigit() or int(threads) < 1:
        print(f"warning: ignoring invalid TOPKSVM_THREADS={threads!r}",
              file=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
