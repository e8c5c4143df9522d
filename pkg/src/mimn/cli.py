"""Command-line front end.

Exit codes: 0 success, 1 selfcheck failure, 2 usage, 3 data/model, 4 training.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys

from .core import MimnError
from .data import DataFormatError, SynthParams, read_mil_csv, synthesize, write_mil_csv
from .evaluation import (
    cross_validate_baseline,
    evaluate,
    grid_search,
    predict_bags,
    report_csv,
    report_rows,
    report_text,
)
from .core import Gmimn, Rmimn
from .learning import TrainConfig, TrainingError, fit
from .modelio import ModelFileError, load_model, parse_feature_map, parse_potential, save_model

EXIT_OK, EXIT_SELFCHECK, EXIT_USAGE, EXIT_DATA, EXIT_TRAIN = 0, 1, 2, 3, 4

class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _arg(fn):
    """Wrap a parser so library errors surface as argparse usage errors."""
    def wrapped(text):
        try:
            return fn(text)
        except (MimnError, ValueError) as e:
            raise argparse.ArgumentTypeError(str(e)) from None
    wrapped.__name__ = fn.__name__
    return wrapped


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise ValueError(f"expected a positive number, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise ValueError(f"expected a positive integer, got {text}")
    return v


def _bag_counts(text: str) -> tuple[int, int]:
    p, _, n = text.partition(",")
    return int(p), int(n)


def _load_data(path):
    try:
        return read_mil_csv(path)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None
    except MimnError as e:
        raise DataError(f"{path}: {e}") from None


def _load_model(path):
    try:
        return load_model(path)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None
    except MimnError as e:
        raise DataError(f"{path}: {e}") from None


def _write_text(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def _config(args, lam=None) -> TrainConfig:
    return TrainConfig(lam=args.lam if lam is None else lam, max_iters=args.iters,
                       seed=args.seed, append_bias=args.bias)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_train(args) -> int:
    data = _load_data(args.data)
    result = fit(data, args.potential, args.map, _config(args))
    for t, val in enumerate(result.history):
        print(f"iter {t} objective {val!r}", file=sys.stderr)
    print(f"best iteration {result.best_iter} objective {result.best_objective!r}",
          file=sys.stderr)
    save_model(result.model, args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = _load_model(args.model)
    data = _load_data(args.data)
    try:
        preds = predict_bags(model, data)
    except MimnError as e:
        raise DataError(str(e)) from None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bag_id", "predicted", "margin", "k_star"])
    for bag, p in zip(data, preds):
        w.writerow([bag.id, p.label, repr(p.margin), p.labeling.positive_count])
    _write_text(args.out, buf.getvalue())
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    data = _load_data(args.data)
    try:
        metrics = evaluate(model, data)
    except MimnError as e:
        raise DataError(str(e)) from None
    c = metrics.confusion
    print(f"accuracy {metrics.accuracy:.6f} ({int(c.trace())}/{metrics.n})")
    print("confusion (rows true -1,+1; cols predicted -1,+1)")
    print(f"  {c[0, 0]} {c[0, 1]}")
    print(f"  {c[1, 0]} {c[1, 1]}")
    return EXIT_OK


def cmd_cv(args) -> int:
    data = _load_data(args.data)
    if not 2 <= args.folds <= len(data):
        raise UsageError(f"--folds must be in [2, {len(data)}]")
    if args.baseline:
        mean, folds = cross_validate_baseline(data, args.baseline, args.map, _config(args),
                                              args.folds, args.seed)
        print(f"baseline {args.baseline} mean accuracy {100 * mean:.2f}")
        records = [{"baseline": args.baseline, "feature_map": str(args.map), "fold": f.fold,
                    "accuracy": f.metrics.accuracy} for f in folds]
        if args.csv:
            _write_text(args.csv, report_csv(records))
        return EXIT_OK
    specs = []
    if args.rho_grid:
        specs += [Rmimn(r) for r in args.rho_grid]
    if args.k_grid:
        specs += [Gmimn(k) for k in args.k_grid]
    if not specs:
        specs = [args.potential]
    lambdas = args.lambda_grid or [args.lam]
    result = grid_search(data, specs, lambdas, args.folds, args.seed, args.map, _config(args))
    sys.stdout.write(report_text(result.rows, result.best))
    print(f"best {result.best.spec} lambda {result.best.lam:g} "
          f"mean accuracy {100 * result.best.mean_accuracy:.2f}")
    if args.csv:
        _write_text(args.csv, report_csv(report_rows(result.rows, args.map)))
    return EXIT_OK


def cmd_synth(args) -> int:
    p, n = args.bags
    try:
        params = SynthParams(p, n, args.bag_size, args.dim, args.witness, args.contam,
                             args.sep, args.noise)
    except MimnError as e:
        raise UsageError(str(e)) from None
    _write_text(args.out, write_mil_csv(synthesize(params, args.seed)))
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    from .selfcheck import check_gradient, check_inference

    if args.cases < 1 or args.max_bag < 1 or args.max_bag > 20 or args.grad_cases < 0:
        raise UsageError("--cases must be >= 1, --max-bag in [1, 20], --grad-cases >= 0")
    inf = check_inference(args.cases, args.max_bag, args.seed)
    reports = [inf]
    if args.grad_cases:
        reports.append(check_gradient(args.grad_cases, args.seed))
    print(", ".join(str(r) for r in reports))
    ok = True
    for r in reports:
        if not r.ok:
            ok = False
            for s in r.failures:
                print(f"FAIL {r.name} case seed {s}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_SELFCHECK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _add_model_flags(p, need_potential=True):
    if need_potential:
        p.add_argument("--potential", type=_arg(parse_potential), default=parse_potential("mimn"),
                       help="mimn | rmimn:<rho> | gmimn:<K> (default mimn)")
    p.add_argument("--map", type=_arg(parse_feature_map), default=parse_feature_map("linear"),
                   help="linear | quad | hom:<intersection|chi2|js>[:<n>[:<L>]]")
    p.add_argument("--lambda", dest="lam", type=_arg(_positive_float), default=1.0)
    p.add_argument("--iters", type=_arg(_positive_int), default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bias", action="store_true", help="append a constant-1 feature")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimn", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="log to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a MIL-CSV file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict bag labels")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="bag accuracy of a model on a data file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="k-fold cross-validation and grid search")
    p.add_argument("--data", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--rho-grid", type=_arg(_float_list))
    p.add_argument("--k-grid", type=_arg(_int_list))
    p.add_argument("--lambda-grid", type=_arg(_float_list))
    p.add_argument("--baseline", choices=("at_least_one", "majority"),
                   help="evaluate an instance-level classifier with bag voting instead")
    p.add_argument("--csv", help="write per-fold results as CSV")
    _add_model_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("synth", help="generate synthetic MIL-CSV data")
    p.add_argument("--bags", type=_arg(_bag_counts), default=(100, 100), metavar="P,N")
    p.add_argument("--bag-size", type=int, default=10)
    p.add_argument("--witness", type=float, default=0.3)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--sep", type=float, default=4.0)
    p.add_argument("--contam", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("selfcheck", help="run the inference and gradient oracle checks")
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument("--max-bag", type=int, default=12)
    p.add_argument("--grad-cases", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"mimn {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DataFormatError, ModelFileError) as e:
        print(f"mimn {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as e:
        print(f"mimn {args.command}: training failed: {e}", file=sys.stderr)
        return EXIT_TRAIN
    except MimnError as e:
        print(f"mimn {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
