"""Command-line surface: one subcommand per pipeline stage.

Every run resolves a seed (random but logged when omitted), writes its
configuration next to its outputs, and never writes outside the chosen
output directory.  Exit codes: 0 success, 2 usage, 3 data validation,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from pathlib import Path

from . import __version__
from .averaging import average_network
from .clg import fit_parameters, model_from_json, model_to_json
from .corrnet import correlation_network, graph_to_dot
from .dataset import (
    TableSchema,
    adjust_with_atlas,
    compute_deltas,
    load_atlas,
    load_table,
    write_table,
)
from .errors import (
    CollinearityError,
    ConstraintError,
    DataError,
    DeltaBnError,
    InfeasibleEvidenceError,
    InsufficientDataError,
    SearchOverflowError,
    UndefinedCorrelationError,
)
from .graph import dag_from_json, dag_to_json, default_constraints, to_dot
from .inference import expectation, intervene, parse_evidence, query, simulate
from .search import hill_climb
from .validation import cross_validate, subgroup_networks

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

_NUMERICAL = (
    CollinearityError,
    InsufficientDataError,
    UndefinedCorrelationError,
    InfeasibleEvidenceError,
    SearchOverflowError,
)


def _add_input_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, help="longitudinal CSV file")
    parser.add_argument("--sep", default=",", help="field delimiter (default comma)")
    parser.add_argument(
        "--treatment-coding",
        choices=["binary", "three_level"],
        default="binary",
        help="binary merges TB and TG into 'treated'",
    )


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out-dir", default=".", help="directory for all outputs")
    parser.add_argument("--seed", type=int, default=None, help="master RNG seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deltabn",
        description="Learn and query conditional linear-Gaussian networks "
        "from two-timepoint difference data.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrnet", help="Pearson correlation matrix and network")
    _add_input_options(p)
    _add_common(p)
    p.add_argument("--threshold", type=float, default=0.4)

    p = sub.add_parser("learn", help="single hill-climbing structure search")
    _add_input_options(p)
    _add_common(p)
    p.add_argument("--no-reversals", action="store_true")
    p.add_argument("--no-default-constraints", action="store_true")

    p = sub.add_parser("average", help="bootstrap model averaging to a consensus DAG")
    _add_input_options(p)
    _add_common(p)
    p.add_argument("--B", type=int, default=200, dest="replicates")
    p.add_argument("--threshold", default="auto", help="'auto' or a number in [0,1]")
    p.add_argument("--no-default-constraints", action="store_true")

    p = sub.add_parser("fit", help="fit parameters for a given structure")
    _add_input_options(p)
    _add_common(p)
    p.add_argument("--structure", required=True, help="structure JSON from learn/average")

    p = sub.add_parser("query", help="logic-sampling conditional query on a model")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--event", default=None, help='e.g. "Growth=Good"')
    p.add_argument("--target", default=None, help="continuous variable for an expectation")
    p.add_argument("--evidence", default=None, help='e.g. "Treatment=treated,dT in [5,7]"')
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--epsilon", type=float, default=0.5, help="half-width for ~= conditions")

    p = sub.add_parser("intervene", help="fix a node and cut its incoming arcs")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--node", required=True)
    p.add_argument("--value", required=True)
    p.add_argument("--output", default="model_intervened.json")

    p = sub.add_parser("simulate", help="draw samples from a fitted model")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("-n", type=int, default=100, dest="samples")

    p = sub.add_parser("cv", help="k-fold cross-validation of the pipeline")
    _add_input_options(p)
    _add_common(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--learner", choices=["single", "averaged"], default="averaged")
    p.add_argument("--B", type=int, default=50, dest="replicates")
    p.add_argument("--threshold", default="auto")

    p = sub.add_parser("subgroups", help="per-level consensus networks")
    _add_input_options(p)
    _add_common(p)
    p.add_argument("--by", default="Treatment")
    p.add_argument("--B", type=int, default=200, dest="replicates")
    p.add_argument("--threshold", default="auto")

    p = sub.add_parser("adjust", help="subtract atlas reference values")
    _add_input_options(p)
    _add_common(p)
    p.add_argument("--atlas", required=True)
    p.add_argument("--output", default="adjusted.csv")
    return parser


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is None:
        args.seed = secrets.randbits(32)
        print(f"seed not supplied; using {args.seed}", file=sys.stderr)
    return args.seed


def _write_config(args, out: Path) -> None:
    payload = {k: v for k, v in vars(args).items() if k != "command"}
    payload["version"] = __version__
    path = out / f"{args.command}_config.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _load_deltas(args):
    table = load_table(args.input, TableSchema(delimiter=args.sep))
    return compute_deltas(table, treatment_coding=args.treatment_coding)


def _threshold_arg(raw):
    if raw == "auto":
        return "auto"
    try:
        value = float(raw)
    except ValueError:
        raise DataError(f"threshold must be 'auto' or a number, got {raw!r}") from None
    return value


def _constraints_for(args, d):
    if getattr(args, "no_default_constraints", False):
        from .graph import ArcConstraints

        return ArcConstraints()
    return default_constraints(d.order)


def _cmd_corrnet(args) -> int:
    out = _out_dir(args)
    d = _load_deltas(args)
    graph, matrix = correlation_network(d, threshold=args.threshold)
    with open(out / "correlation_matrix.csv", "w") as fh:
        matrix.write_csv(fh)
    (out / "correlation_network.dot").write_text(graph_to_dot(graph))
    _write_config(args, out)
    return EXIT_OK


def _cmd_learn(args) -> int:
    out = _out_dir(args)
    d = _load_deltas(args)
    c = _constraints_for(args, d)
    dag, trace = hill_climb(d, c, allow_reversals=not args.no_reversals)
    (out / "structure.json").write_text(dag_to_json(dag))
    (out / "structure.dot").write_text(to_dot(dag, whitelist=c.whitelist))
    (out / "search_trace.jsonl").write_text(trace.to_jsonl())
    _write_config(args, out)
    return EXIT_OK


def _cmd_average(args) -> int:
    out = _out_dir(args)
    _resolve_seed(args)
    d = _load_deltas(args)
    c = _constraints_for(args, d)
    result = average_network(
        d,
        c,
        replicates=args.replicates,
        seed=args.seed,
        threshold=_threshold_arg(args.threshold),
    )
    strengths = result.strengths.arc_strength_map()
    (out / "consensus.json").write_text(
        dag_to_json(result.consensus, strengths={
            a: strengths.get(a, result.strengths.skeleton_strength(*a))
            for a in result.consensus.arcs
        })
    )
    (out / "consensus.dot").write_text(
        to_dot(
            result.consensus,
            strengths={
                a: result.strengths.skeleton_strength(*a) for a in result.consensus.arcs
            },
            whitelist=c.whitelist,
        )
    )
    with open(out / "arc_strengths.csv", "w") as fh:
        result.strengths.write_csv(fh)
    meta = {
        "threshold": result.threshold,
        "threshold_rule": "auto (empirical-CDF L1 split)" if args.threshold == "auto" else "fixed",
        "replicates_requested": result.requested,
        "replicates_used": result.strengths.replicates,
        "failed_replicates": [list(f) for f in result.failures],
    }
    (out / "averaging_meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    _write_config(args, out)
    return EXIT_OK


def _cmd_fit(args) -> int:
    out = _out_dir(args)
    d = _load_deltas(args)
    dag = dag_from_json(Path(args.structure).read_text())
    model = fit_parameters(dag, d)
    (out / "model.json").write_text(model_to_json(model))
    _write_config(args, out)
    return EXIT_OK


def _cmd_query(args) -> int:
    out = _out_dir(args)
    _resolve_seed(args)
    model = model_from_json(Path(args.model).read_text())
    evidence = parse_evidence(args.evidence, args.epsilon) if args.evidence else None
    if (args.event is None) == (args.target is None):
        raise DataError("provide exactly one of --event or --target")
    if args.event is not None:
        result = query(
            model,
            event=parse_evidence(args.event, args.epsilon),
            evidence=evidence,
            n=args.samples,
            seed=args.seed,
        )
    else:
        result = expectation(
            model, target=args.target, evidence=evidence, n=args.samples, seed=args.seed
        )
    (out / "query.json").write_text(result.to_json())
    print(result.to_json(), end="")
    _write_config(args, out)
    return EXIT_OK


def _cmd_intervene(args) -> int:
    out = _out_dir(args)
    model = model_from_json(Path(args.model).read_text())
    try:
        value = float(args.value) if not model.is_discrete(args.node) else args.value
    except ValueError:
        raise DataError(f"value {args.value!r} is not numeric") from None
    mutilated = intervene(model, args.node, value)
    (out / Path(args.output).name).write_text(model_to_json(mutilated))
    _write_config(args, out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    out = _out_dir(args)
    _resolve_seed(args)
    model = model_from_json(Path(args.model).read_text())
    samples = simulate(model, args.samples, seed=args.seed)
    with open(out / "samples.csv", "w") as fh:
        samples.write_csv(fh)
    _write_config(args, out)
    return EXIT_OK


def _cmd_cv(args) -> int:
    out = _out_dir(args)
    _resolve_seed(args)
    d = _load_deltas(args)
    c = default_constraints(d.order)
    report = cross_validate(
        d,
        c,
        k=args.k,
        learner=args.learner,
        replicates=args.replicates,
        threshold=_threshold_arg(args.threshold),
        seed=args.seed,
    )
    (out / "cv_report.json").write_text(report.to_json())
    with open(out / "cv_summary.csv", "w") as fh:
        report.write_summary_csv(fh)
    _write_config(args, out)
    return EXIT_OK


def _cmd_subgroups(args) -> int:
    out = _out_dir(args)
    _resolve_seed(args)
    d = _load_deltas(args)
    results = subgroup_networks(
        d,
        by=args.by,
        replicates=args.replicates,
        threshold=_threshold_arg(args.threshold),
        seed=args.seed,
    )
    constraints = default_constraints(d.order).without_node(args.by)
    for level, res in results.items():
        (out / f"consensus_{level}.json").write_text(dag_to_json(res.consensus))
        (out / f"consensus_{level}.dot").write_text(
            to_dot(
                res.consensus,
                strengths={
                    a: res.strengths.skeleton_strength(*a) for a in res.consensus.arcs
                },
                whitelist=constraints.whitelist,
            )
        )
        with open(out / f"arc_strengths_{level}.csv", "w") as fh:
            res.strengths.write_csv(fh)
    _write_config(args, out)
    return EXIT_OK


def _cmd_adjust(args) -> int:
    out = _out_dir(args)
    table = load_table(args.input, TableSchema(delimiter=args.sep))
    atlas = load_atlas(args.atlas, delimiter=args.sep)
    adjusted = adjust_with_atlas(table, atlas)
    with open(out / Path(args.output).name, "w") as fh:
        write_table(adjusted, fh, TableSchema(delimiter=args.sep))
    _write_config(args, out)
    return EXIT_OK


_HANDLERS = {
    "corrnet": _cmd_corrnet,
    "learn": _cmd_learn,
    "average": _cmd_average,
    "fit": _cmd_fit,
    "query": _cmd_query,
    "intervene": _cmd_intervene,
    "simulate": _cmd_simulate,
    "cv": _cmd_cv,
    "subgroups": _cmd_subgroups,
    "adjust": _cmd_adjust,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except _NUMERICAL as exc:
        print(f"deltabn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, ConstraintError, FileNotFoundError) as exc:
        print(f"deltabn: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DeltaBnError as exc:
        print(f"deltabn: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
