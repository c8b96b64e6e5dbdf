"""Command-line entry point: ``bmnet <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 size guard tripped.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import io
from .errors import GuardError, NetworkError
from .estimation import PriorSpec, conventional_subsets, em_fit
from .experiments import (
    default_true_network,
    experiment_seeds,
    run_bmn_experiment,
    run_sweep,
    sample_train_test,
    sweep_summary,
    verify_mbn_equivalence,
)
from .inference import observed_score
from .mixture import collapse
from .network import dataset_score

log = logging.getLogger("bmnet")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _caps(text: str):
    values = _int_list(text)
    return values[0] if len(values) == 1 else values


def _priors(args) -> PriorSpec:
    return PriorSpec(family_pseudocount=args.prior_count, weight_pseudocount=args.alpha)


def _true_network(args):
    if args.network:
        return io.read_network(args.network)
    return default_true_network(experiment_seeds(args.seed)[0])


def _emit(obj, out):
    text = io.dumps(obj)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_generate(args):
    net = _true_network(args)
    train, test = sample_train_test(net, args.n_train, args.n_test, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_network(out / "true_network.json", net)
    io.write_dataset(out / "train.csv", train)
    io.write_dataset(out / "test.csv", test)
    log.info("wrote %s", out)


def cmd_fit(args):
    skeleton = io.read_network(args.network)
    data = io.read_dataset(args.data)
    subsets = conventional_subsets(skeleton) if args.conventional else None
    report = em_fit(
        skeleton,
        data,
        _priors(args),
        caps=None if args.conventional else args.caps,
        subsets=subsets,
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
    )
    _emit(report.to_dict(), args.out)


def cmd_score(args):
    obj = io.read_json(args.model)
    if "mixture" in obj:  # a fit report
        obj = obj["mixture"]
    net = collapse(io.mixture_from_dict(obj)) if io.is_mixture_dict(obj) else io.network_from_dict(obj)
    data = io.read_dataset(args.data)
    score = dataset_score(net, data) if data.is_complete else observed_score(net, data)
    _emit({"n_cases": len(data), "score": io._float(score)}, args.out)


def _write_sweep_csv(path, net, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ordering", "bitmask", "train_score", "test_score", "tags"])
        for r in records:
            writer.writerow(
                [">".join(net.names[i] for i in r.ordering), r.mask, repr(r.train_score), repr(r.test_score), ";".join(r.tags)]
            )


def cmd_sweep(args):
    net = _true_network(args)
    train, test = sample_train_test(net, args.n_train, args.n_test, args.seed)
    records = run_sweep(net, priors=_priors(args), train=train, test=test)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_sweep_csv(out / "sweep.csv", net, records)
    summary = sweep_summary(records, generator_test_score=dataset_score(net, test))
    summary.update({"seed": args.seed, "n_train": args.n_train, "n_test": args.n_test, "prior_count": args.prior_count})
    io.write_json(out / "sweep_summary.json", summary)
    log.info("wrote %d records to %s", len(records), out)


def cmd_bmn_exp(args):
    net = _true_network(args)
    ordering = args.ordering.split(",") if args.ordering else None
    exp = run_bmn_experiment(
        net,
        ordering=ordering,
        caps=args.caps,
        n_train=args.n_train,
        n_test=args.n_test,
        seed=args.seed,
        priors=_priors(args),
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bmn_trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "train_score", "test_score", "objective"])
        for rec, tr, te in zip(exp.report.iterations, exp.train_scores, exp.test_scores):
            writer.writerow([rec.iteration, repr(tr), repr(te), repr(rec.objective)])
    report = exp.report.to_dict()
    report["caps"] = exp.caps
    report["reference_test_scores"] = exp.reference
    report["seed"] = args.seed
    io.write_json(out / "bmn_report.json", report)
    log.info("wrote %s", out)


def cmd_verify_mbn(args):
    cards = args.cards if args.cards else None
    _emit(verify_mbn_equivalence(args.nodes, cards, args.seed, args.cases), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bmnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int, default=0)

    def priors(p, alpha=1.0):
        p.add_argument("--prior-count", type=float, default=0.5, help="pseudocount per family-table cell")
        p.add_argument("--alpha", type=float, default=alpha, help="pseudocount per submodel weight")

    def em(p):
        p.add_argument("--caps", type=_caps, default=None, help="max parents per submodel: one int or one per node")
        p.add_argument("--max-iters", type=int, default=200)
        p.add_argument("--rel-tol", type=float, default=1e-6)

    p = sub.add_parser("generate", help="write a true network and sampled train/test sets")
    common(p)
    p.add_argument("--network", help="true network JSON (default: built-in 4-node network)")
    p.add_argument("--n-train", type=int, default=100)
    p.add_argument("--n-test", type=int, default=2000)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit a BMN (or a conventional BN) to a dataset")
    common(p)
    p.add_argument("--network", required=True, help="network or skeleton JSON giving candidate parents")
    p.add_argument("--data", required=True)
    p.add_argument("--conventional", action="store_true", help="one full-parent submodel per node")
    em(p)
    priors(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="per-case log-likelihood of a dataset")
    common(p)
    p.add_argument("--model", required=True, help="network or mixture JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sweep", help="score every ordering x structure model")
    common(p)
    p.add_argument("--network")
    p.add_argument("--n-train", type=int, default=100)
    p.add_argument("--n-test", type=int, default=2000)
    priors(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bmn-exp", help="BMN on the full structure with parent caps, traced per iteration")
    common(p)
    p.add_argument("--network")
    p.add_argument("--ordering", help="comma-separated node names")
    p.add_argument("--n-train", type=int, default=100)
    p.add_argument("--n-test", type=int, default=2000)
    em(p)
    priors(p, alpha=0.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_bmn_exp)

    p = sub.add_parser("verify-mbn", help="check BMN against the restricted-order MBN")
    common(p)
    p.add_argument("--nodes", type=int, default=4)
    p.add_argument("--cards", type=_int_list, default=None)
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_mbn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except GuardError as exc:
        print(f"bmnet: guard tripped: {exc}", file=sys.stderr)
        return 2
    except (NetworkError, OSError, ValueError) as exc:
        print(f"bmnet: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
