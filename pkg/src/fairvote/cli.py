"""Command-line interface.

Subcommands: simulate (generate scores), fit (fit an ensemble), predict,
diagnose (competence and improvement diagnostics), fairauc (constrained vs
unconstrained frontier comparison), samplesize (evaluation-size planner).

Every command that writes files also writes a manifest JSON recording the
tool version, parameters, and sha256 digests of inputs and outputs, with no
timestamps, so identical invocations produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import inspect
import json
import os
import sys

import numpy as np

from . import errors as _errors
from . import __version__
from .competence import (
    curve_from_counts,
    improvement_report,
    standard_restrictions,
    wrong_counts,
)
from .dataio import (
    SynthConfig,
    load_score_table,
    save_folds,
    save_score_table,
    stratified_kfold,
    synthesize,
)
from .ensemble import (
    build_ensemble,
    load_ensemble,
    member_predictions,
    predict,
    save_ensemble,
)
from .errors import FairvoteError, FoldMemberMismatch, ZeroMemberError
from .evaluation import (
    CONSTANT_POSITIVE,
    Frontier,
    bootstrap_ci,
    build_frontier,
    config_label,
    fair_auc,
    fair_auc_selected,
    frontier_from_predictions,
    save_frontier,
)
from .fairfit import FairnessConstraint, GridSpec
from .theory import min_observed_recall


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return "sha256:" + digest.hexdigest()


def _write_manifest(path, command, parameters, inputs, outputs, seed=None):
    payload = {
        "tool": "fairvote",
        "version": __version__,
        "command": command,
        "seed": seed,
        "parameters": parameters,
        "inputs": {str(p): _sha256(str(p)) for p in inputs},
        "outputs": {str(p): _sha256(str(p)) for p in outputs},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise ValueError(f"expected a comma-separated float list, got {text!r}")


def _constraint_from_args(kind: str, bound: float) -> FairnessConstraint:
    if kind == "none":
        return FairnessConstraint.none()
    return FairnessConstraint(kind=kind, bound=bound)


def _grid_from_args(args) -> GridSpec:
    return GridSpec(resolution=args.grid_resolution, w_max=args.grid_range)


def _sanitize(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


# -- subcommands --------------------------------------------------------------

def cmd_simulate(args) -> int:
    groups = [g for g in args.groups.split(",") if g]
    positives = [int(v) for v in args.positives.split(",")]
    negatives = [int(v) for v in args.negatives.split(",")]
    if len(positives) != len(groups) or len(negatives) != len(groups):
        raise ValueError("--positives/--negatives must list one count per group")

    def per_group(text: str, what: str):
        vals = _parse_floats(text)
        if len(vals) == 1:
            return vals[0]
        if len(vals) != len(groups):
            raise ValueError(f"--{what} must be one value or one per group")
        return dict(zip(groups, vals))

    config = SynthConfig(
        group_names=tuple(groups),
        n_members=args.members,
        positives=dict(zip(groups, positives)),
        negatives=dict(zip(groups, negatives)),
        recall=per_group(args.recall, "recall"),
        specificity=per_group(args.specificity, "specificity"),
        mode=args.mode,
        sigma=args.sigma,
        correlation=args.correlation,
        group_score_mix=args.group_score_mix,
        test_fraction=args.test_fraction,
        seed=args.seed,
    )
    table = synthesize(config)
    save_score_table(table, args.out)
    _write_manifest(
        str(args.out) + ".manifest.json", "simulate",
        {
            "groups": groups, "positives": positives, "negatives": negatives,
            "members": args.members, "recall": args.recall,
            "specificity": args.specificity, "mode": args.mode,
            "sigma": args.sigma, "correlation": args.correlation,
            "group_score_mix": args.group_score_mix,
            "test_fraction": args.test_fraction, "out": str(args.out),
        },
        inputs=[], outputs=[args.out], seed=args.seed,
    )
    print(f"wrote {table.n_samples} samples x {table.n_members} members "
          f"to {args.out}")
    return 0


def cmd_fit(args) -> int:
    table = load_score_table(args.scores)
    k = args.folds if args.folds is not None else table.n_members
    if k != table.n_members:
        raise FoldMemberMismatch(
            f"--folds {k} but the table has {table.n_members} members; "
            "one fold per member is required"
        )
    folds = stratified_kfold(table, k, args.seed)
    constraint = _constraint_from_args(args.constraint, args.bound)
    ensemble = build_ensemble(
        table, folds, constraint, _grid_from_args(args),
        tie_break=args.tie_break, workers=args.workers)
    save_ensemble(ensemble, args.out)
    outputs = [args.out]
    if args.folds_out:
        save_folds(folds, args.folds_out)
        outputs.append(args.folds_out)
    _write_manifest(
        str(args.out) + ".manifest.json", "fit",
        {
            "scores": str(args.scores), "constraint": args.constraint,
            "bound": args.bound, "folds": k,
            "grid_resolution": args.grid_resolution,
            "grid_range": args.grid_range, "tie_break": args.tie_break,
            "workers": args.workers, "out": str(args.out),
            "folds_out": str(args.folds_out) if args.folds_out else None,
        },
        inputs=[args.scores], outputs=outputs, seed=args.seed,
    )
    diags = ensemble.diagnostics or ()
    n_feasible = sum(1 for d in diags if d is not None and d.feasible)
    print(f"fitted {ensemble.n_members} members "
          f"({n_feasible} feasible) -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    table = load_score_table(args.scores)
    ensemble = load_ensemble(args.ensemble)
    _, record = predict(ensemble, table, args.split)
    with open(args.out, "w", newline="") as fh:
        fh.write("sample_id,votes,prediction\n")
        for sid, votes, pred in zip(record.sample_ids, record.votes,
                                    record.predictions):
            fh.write(f"{sid},{votes},{pred}\n")
    _write_manifest(
        str(args.out) + ".manifest.json", "predict",
        {
            "scores": str(args.scores), "ensemble": str(args.ensemble),
            "split": args.split, "out": str(args.out),
        },
        inputs=[args.scores, args.ensemble], outputs=[args.out],
    )
    print(f"wrote {len(record.sample_ids)} predictions to {args.out}")
    return 0


def cmd_diagnose(args) -> int:
    table = load_score_table(args.scores)
    ensemble = load_ensemble(args.ensemble)
    idx = table.split_indices(args.split)
    sub = table.subset(idx)
    if not sub.fully_labeled or sub.n_samples == 0:
        raise _errors.InvariantViolation(
            f"split {args.split!r} must be non-empty and fully labeled "
            "for diagnosis"
        )
    mp = member_predictions(ensemble, sub)
    from .ensemble import majority_vote

    ens_preds = majority_vote(mp, ensemble.tie_break)
    labels = sub.labels
    groups = sub.group_name_array()
    counts = wrong_counts(mp, labels)

    os.makedirs(args.out, exist_ok=True)
    entries = []
    curve_files = []
    for restriction in standard_restrictions(table.group_names):
        mask = restriction.mask(labels, groups)
        if not mask.any():
            entries.append({"restriction": restriction.name,
                            "status": "empty"})
            continue
        curve = curve_from_counts(counts[mask], ensemble.n_members,
                                  restriction=restriction)
        fname = f"curve_{_sanitize(restriction.name)}.csv"
        with open(os.path.join(args.out, fname), "w", newline="") as fh:
            fh.write("t,c_value\n")
            for t, c in zip(curve.t_grid, curve.c_values):
                fh.write(f"{t!r},{c!r}\n")
        curve_files.append(fname)
        entry = {
            "restriction": restriction.name,
            "status": "ok",
            "n_samples": curve.n_samples,
            "violation": curve.violation,
            "competent": curve.competent,
            "curve_file": fname,
        }
        try:
            report = improvement_report(mp, ens_preds, labels, groups,
                                        restriction)
            entry.update({
                "mean_member_error": report.mean_member_error,
                "ensemble_error": report.ensemble_error,
                "eir": report.eir,
                "der": report.der,
                "lower_bound": report.lower_bound,
                "upper_bound": report.upper_bound,
                "certified_lower_bound": report.certified_lower_bound,
                "bounds_hold": report.bounds_hold,
            })
        except ZeroMemberError:
            ens_err = float((ens_preds[mask] != labels[mask]).mean())
            entry.update({"status": "zero-member-error",
                          "ensemble_error": ens_err})
        entries.append(entry)

    gp_curves = [e for e in entries
                 if e["restriction"].startswith("group-positives")
                 and e["status"] != "empty"]
    summary = {
        "split": args.split,
        "n_members": ensemble.n_members,
        "n_samples": sub.n_samples,
        "groupwise_competent": all(e["competent"] for e in gp_curves),
        "restrictions": entries,
    }
    _write_json(os.path.join(args.out, "summary.json"), summary)
    _write_manifest(
        os.path.join(args.out, "manifest.json"), "diagnose",
        {
            "scores": str(args.scores), "ensemble": str(args.ensemble),
            "split": args.split, "out": str(args.out),
        },
        inputs=[args.scores, args.ensemble],
        outputs=[os.path.join(args.out, f)
                 for f in ["summary.json"] + curve_files],
    )
    print(f"diagnosis for split {args.split!r} -> {args.out}")
    return 0


def _sub_frontier(frontier: Frontier, keep: set[str]) -> Frontier:
    points = tuple(p for p in frontier.points
                   if p.config in keep or p.source == CONSTANT_POSITIVE)
    return Frontier(kind=frontier.kind, points=points)


def cmd_fairauc(args) -> int:
    table = load_score_table(args.scores)
    folds = stratified_kfold(table, table.n_members, args.seed)
    sweep = _parse_floats(args.sweep)
    if not sweep:
        raise ValueError("--sweep must list at least one bound")
    constraints = [FairnessConstraint(kind=args.constraint, bound=b)
                   for b in sweep]
    constraints.append(FairnessConstraint.none())
    build = build_frontier(
        table, folds, constraints, _grid_from_args(args),
        kind=args.constraint, tie_break=args.tie_break, workers=args.workers)

    t_grid = _parse_floats(args.t_grid) if args.t_grid else None
    sweep_configs = {config_label(c) for c in constraints[:-1]}
    unc_configs = {"unconstrained"}

    def auc_pair(select_frontier: Frontier, eval_frontier: Frontier):
        if args.select == "validation":
            con = fair_auc_selected(_sub_frontier(select_frontier, sweep_configs),
                                    _sub_frontier(eval_frontier, sweep_configs),
                                    t_grid)
            unc = fair_auc_selected(_sub_frontier(select_frontier, unc_configs),
                                    _sub_frontier(eval_frontier, unc_configs),
                                    t_grid)
        else:
            con = fair_auc(_sub_frontier(eval_frontier, sweep_configs), t_grid)
            unc = fair_auc(_sub_frontier(eval_frontier, unc_configs), t_grid)
        return con, unc

    con, unc = auc_pair(build.select_frontier, build.eval_frontier)
    difference = con.value - unc.value

    def diff_metric(idx: np.ndarray) -> float:
        eval_frontier = frontier_from_predictions(
            build.eval_predictions, build.eval_labels, build.eval_groups,
            build.kind, build.group_names, idx)
        c, u = auc_pair(build.select_frontier, eval_frontier)
        return c.value - u.value

    ci = bootstrap_ci(
        diff_metric, len(build.eval_labels),
        n_replicates=args.bootstrap_n, level=args.bootstrap_level,
        seed=args.seed)

    os.makedirs(args.out, exist_ok=True)
    save_frontier(build.eval_frontier, os.path.join(args.out, "frontier.csv"))
    outputs = ["frontier.csv", "fairauc.json"]
    if args.select == "validation":
        save_frontier(build.select_frontier,
                      os.path.join(args.out, "frontier_select.csv"))
        outputs.append("frontier_select.csv")
    _write_json(os.path.join(args.out, "fairauc.json"), {
        "kind": build.kind,
        "select": args.select,
        "sweep": sweep,
        "constrained_fairauc": con.value,
        "unconstrained_fairauc": unc.value,
        "difference": difference,
        "ci_low": ci.low,
        "ci_high": ci.high,
        "bootstrap_n": args.bootstrap_n,
        "bootstrap_level": args.bootstrap_level,
        "t_grid": list(con.t_grid),
    })
    _write_manifest(
        os.path.join(args.out, "manifest.json"), "fairauc",
        {
            "scores": str(args.scores), "constraint": args.constraint,
            "sweep": args.sweep, "grid_resolution": args.grid_resolution,
            "grid_range": args.grid_range, "tie_break": args.tie_break,
            "workers": args.workers, "select": args.select,
            "t_grid": args.t_grid, "bootstrap_n": args.bootstrap_n,
            "bootstrap_level": args.bootstrap_level, "out": str(args.out),
        },
        inputs=[args.scores],
        outputs=[os.path.join(args.out, f) for f in outputs],
        seed=args.seed,
    )
    print(f"fairauc constrained={con.value!r} unconstrained={unc.value!r} "
          f"difference={difference!r} ci=[{ci.low!r}, {ci.high!r}]")
    return 0


def cmd_samplesize(args) -> int:
    req = min_observed_recall(args.m, args.n, args.alpha, args.base_rate)
    text = req.to_text()
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        _write_manifest(
            str(args.out) + ".manifest.json", "samplesize",
            {"m": args.m, "n": args.n, "alpha": args.alpha,
             "base_rate": args.base_rate, "out": str(args.out)},
            inputs=[], outputs=[args.out],
        )
    return 0


# -- parser -------------------------------------------------------------------

def _exit_code_epilog() -> str:
    rows = []
    for _, obj in sorted(vars(_errors).items()):
        if (inspect.isclass(obj) and issubclass(obj, FairvoteError)
                and obj is not FairvoteError):
            rows.append((obj.exit_code, obj.__name__))
    rows.sort()
    lines = ["exit codes:", "  2   usage error"]
    lines += [f"  {code:<3d} {name}" for code, name in rows]
    return "\n".join(lines)


def _add_grid_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid-resolution", type=int, default=101,
                   help="odd number of grid points per group (default 101)")
    p.add_argument("--grid-range", type=float, default=1.0,
                   help="weights span [-R, +R] (default 1.0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairvote",
        description="Fairness-constrained majority-vote ensembles over "
                    "per-member prediction scores.",
        epilog=_exit_code_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version",
                        version=f"fairvote {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic score table")
    p.add_argument("--out", required=True)
    p.add_argument("--groups", default="a,b",
                   help="comma-separated group names (default a,b)")
    p.add_argument("--positives", default="100,100",
                   help="positives per group (default 100,100)")
    p.add_argument("--negatives", default="100,100",
                   help="negatives per group (default 100,100)")
    p.add_argument("--members", type=int, default=21)
    p.add_argument("--recall", default="0.8",
                   help="planted member recall, scalar or one per group")
    p.add_argument("--specificity", default="0.8")
    p.add_argument("--mode", choices=["latent", "bernoulli"], default="latent")
    p.add_argument("--sigma", type=float, default=0.15)
    p.add_argument("--correlation", type=float, default=0.0)
    p.add_argument("--group-score-mix", type=float, default=0.0)
    p.add_argument("--test-fraction", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a fairness-constrained ensemble")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--constraint",
                   choices=["min-recall", "equal-opportunity", "none"],
                   default="none")
    p.add_argument("--bound", type=float, default=0.0)
    p.add_argument("--folds", type=int, default=None,
                   help="fold count; must equal the member count "
                        "(default: member count)")
    _add_grid_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tie-break", choices=["positive", "negative"],
                   default="positive")
    p.add_argument("--folds-out", default=None,
                   help="also export the fold assignment CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict a split with a fitted ensemble")
    p.add_argument("--scores", required=True)
    p.add_argument("--ensemble", required=True)
    p.add_argument("--split",
                   choices=["train", "validation", "test", "all"],
                   default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("diagnose",
                       help="competence curves and improvement bounds")
    p.add_argument("--scores", required=True)
    p.add_argument("--ensemble", required=True)
    p.add_argument("--split",
                   choices=["train", "validation", "test", "all"],
                   default="test")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("fairauc",
                       help="constrained-vs-unconstrained frontier areas")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--constraint",
                   choices=["min-recall", "equal-opportunity"],
                   default="min-recall")
    p.add_argument("--sweep", default="0.5,0.6,0.7,0.8,0.9",
                   help="constraint bounds to sweep (default 0.5..0.9)")
    _add_grid_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tie-break", choices=["positive", "negative"],
                   default="positive")
    p.add_argument("--t-grid", default=None,
                   help="fairness levels for the area "
                        "(default 0.50,0.51,...,1.00)")
    p.add_argument("--bootstrap-n", type=int, default=200)
    p.add_argument("--bootstrap-level", type=float, default=0.95)
    p.add_argument("--select", choices=["validation", "test"],
                   default="validation",
                   help="split that picks per-level configurations")
    p.set_defaults(func=cmd_fairauc)

    p = sub.add_parser("samplesize",
                       help="minimum trustworthy observed recall")
    p.add_argument("--m", type=int, required=True,
                   help="positives in the first evaluation split")
    p.add_argument("--n", type=int, required=True,
                   help="positives in the second evaluation split")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--base-rate", type=float, default=0.5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_samplesize)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FairvoteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
