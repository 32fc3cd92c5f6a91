"""driftlens command line: match, partition, diff, context, prompt, baseline,
predict, debate, evaluate, and run."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__, pipeline
from .errors import DriftlensError
from .matching import match_files, partition
from .metrics import evaluate_predictions, render_text
from .prompting import build_method_prompt, build_role_prompt


def _add_dataset_args(parser):
    parser.add_argument("--dataset", default="", help="dataset name for reports")
    parser.add_argument("--old", required=True, help="old-version CSV")
    parser.add_argument("--new", required=True, help="new-version CSV")
    parser.add_argument("--path-column", default="")
    parser.add_argument("--label-column", default="")
    parser.add_argument("--source-column", default="")


def _add_match_args(parser):
    parser.add_argument("-T", "--threshold", type=float, default=0.7)
    parser.add_argument("-c", "--gap-multiplier", type=float, default=1.0)


def _config_from_args(args, **overrides) -> pipeline.RunConfig:
    config = pipeline.RunConfig(
        dataset=args.dataset, old_csv=args.old, new_csv=args.new,
        path_column=args.path_column, label_column=args.label_column,
        source_column=args.source_column,
        threshold=getattr(args, "threshold", 0.7),
        gap_multiplier=getattr(args, "gap_multiplier", 1.0),
    )
    for key, value in overrides.items():
        setattr(config, key, value)
    return config


def _load_matched(args):
    config = _config_from_args(args)
    old_set, new_set = pipeline.load_sets(config)
    matches = match_files(old_set, new_set, config.match_params())
    return config, old_set, new_set, matches


def _find_record(records, path: str):
    for record in records:
        if record.record_id == path:
            return record
    raise DriftlensError(f"no record for path {path!r}")


def cmd_match(args) -> int:
    _, old_set, new_set, matches = _load_matched(args)
    records, _ = partition(old_set, new_set, matches)
    pipeline.write_matches_csv(records, args.out)
    print(f"wrote {args.out} ({len(records)} records)")
    return 0


def cmd_partition(args) -> int:
    config, old_set, new_set, matches = _load_matched(args)
    _, stats = partition(old_set, new_set, matches)
    name = config.dataset or Path(args.new).stem
    header = f"{'dataset':<16}{'R':>8}{'A':>8}{'d=0':>8}{'B00':>8}{'B10':>8}{'D11':>8}{'D01':>8}"
    row = (f"{name:<16}{stats.pct_removed:>8.2f}{stats.pct_added:>8.2f}"
           f"{stats.pct_same_source:>8.2f}{stats.pct_b00:>8.2f}{stats.pct_b10:>8.2f}"
           f"{stats.pct_d11:>8.2f}{stats.pct_d01:>8.2f}")
    print(header)
    print(row)
    print(f"sum = {stats.total():.2f} over {stats.counts['union']} file events")
    return 0


def cmd_diff(args) -> int:
    config, old_set, new_set, matches = _load_matched(args)
    config.diff_context = args.diff_context
    records, _ = partition(old_set, new_set, matches)
    record = _find_record(records, args.record)
    if record.old_file is None:
        raise DriftlensError(f"{args.record} is an added file; nothing to diff")
    cs, _ = pipeline.record_materials(record, config, need_context=False)
    sys.stdout.write(cs.unified)
    return 0


def cmd_context(args) -> int:
    config, old_set, new_set, matches = _load_matched(args)
    config.depth = args.depth
    config.max_lines = args.max_lines
    records, _ = partition(old_set, new_set, matches)
    record = _find_record(records, args.record)
    if record.old_file is None:
        raise DriftlensError(f"{args.record} is an added file; no change to anchor on")
    _, ctx = pipeline.record_materials(record, config, need_context=True)
    print(ctx.snippet)
    if ctx.truncated:
        print(f"# truncated to {ctx.line_budget} lines", file=sys.stderr)
    return 0


def cmd_prompt(args) -> int:
    config, old_set, new_set, matches = _load_matched(args)
    config.depth = args.depth
    config.max_lines = args.max_lines
    records, _ = partition(old_set, new_set, matches)
    record = _find_record(records, args.record)
    cs, ctx = pipeline.record_materials(record, config, need_context=True)
    if args.method in ("analyzer",):
        bundle = build_role_prompt(args.method, record, cs, ctx)
    else:
        exemplars = None
        if args.method == "M7":
            exemplars = pipeline.pick_exemplars(old_set, config.exemplar_count, config.seed)
        bundle = build_method_prompt(args.method, record, cs, ctx=ctx, exemplars=exemplars)
    print("=== system ===")
    print(bundle.system)
    print("=== user ===")
    print(bundle.user)
    return 0


def cmd_baseline(args) -> int:
    config = _config_from_args(args, baseline=args.kind.replace("-", "_"),
                               out_dir=str(Path(args.out).parent or "."))
    old_set, new_set = pipeline.load_sets(config)
    matches = match_files(old_set, new_set, config.match_params())
    records, _ = partition(old_set, new_set, matches)
    rows = pipeline.baseline_rows(records, config.baseline)
    pipeline.write_predictions_csv(rows, args.out)
    if args.records_out:
        pipeline.write_records_csv(records, args.records_out)
    preds = {row.record_id: row.pred_label for row in rows}
    report = evaluate_predictions(records, preds, method=config.baseline)
    print(render_text(report))
    print(f"wrote {args.out}")
    return 0


def _predict_like_config(args, **overrides) -> pipeline.RunConfig:
    config = _config_from_args(args, **overrides)
    config.stub = args.stub
    config.model = args.model
    config.base_url = args.base_url
    config.seed = args.seed
    config.caps = args.caps
    config.out_dir = args.out_dir
    config.diff_context = args.diff_context
    config.depth = args.depth
    config.max_lines = args.max_lines
    config.max_in_flight = args.max_in_flight
    return config


def cmd_predict(args) -> int:
    config = _predict_like_config(args, method=args.method)
    report, artifacts = pipeline.run(config)
    print(render_text(report))
    print(f"artifacts in {artifacts['out_dir']}")
    return 0


def cmd_debate(args) -> int:
    config = _predict_like_config(args, debate=True)
    config.rounds = args.rounds
    config.roles = args.roles
    report, artifacts = pipeline.run(config)
    print(render_text(report))
    print(f"artifacts in {artifacts['out_dir']}")
    return 0


def cmd_evaluate(args) -> int:
    records = pipeline.read_records_csv(args.records)
    preds = pipeline.read_predictions_csv(args.preds)
    evaluated = [r for r in records if r.record_id in preds]
    report = evaluate_predictions(evaluated, preds, method=args.method)
    print(render_text(report))
    return 0


def cmd_run(args) -> int:
    config = pipeline.load_config(args.config)
    for name in ("out_dir", "method", "baseline", "seed", "caps"):
        value = getattr(args, name)
        if value not in (None, ""):
            setattr(config, name, value)
    if args.stub:
        config.stub = True
    if args.debate:
        config.debate = True
    report, artifacts = pipeline.run(config)
    print(render_text(report))
    print(f"artifacts in {artifacts['out_dir']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlens",
        description="Change-aware file-level defect prediction pipeline")
    parser.add_argument("--version", action="version", version=f"driftlens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="match new files to old-version predecessors")
    _add_dataset_args(p)
    _add_match_args(p)
    p.add_argument("--out", default="matches.csv")
    p.set_defaults(fn=cmd_match)

    p = sub.add_parser("partition", help="print the file-evolution partition table")
    _add_dataset_args(p)
    _add_match_args(p)
    p.set_defaults(fn=cmd_partition)

    p = sub.add_parser("diff", help="print the unified diff for one matched record")
    _add_dataset_args(p)
    _add_match_args(p)
    p.add_argument("--record", required=True)
    p.add_argument("--context", dest="diff_context", type=int, default=3)
    p.set_defaults(fn=cmd_diff)

    p = sub.add_parser("context", help="print the expanded context snippet for one record")
    _add_dataset_args(p)
    _add_match_args(p)
    p.add_argument("--record", required=True)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--max-lines", type=int, default=600)
    p.set_defaults(fn=cmd_context)

    p = sub.add_parser("prompt", help="render a prompt bundle for audit")
    _add_dataset_args(p)
    _add_match_args(p)
    p.add_argument("--record", required=True)
    p.add_argument("--method", required=True, help="M0..M8 or analyzer")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--max-lines", type=int, default=400)
    p.set_defaults(fn=cmd_prompt)

    p = sub.add_parser("baseline", help="emit naive predictions and report")
    _add_dataset_args(p)
    _add_match_args(p)
    p.add_argument("--kind", default="label-persistent",
                   choices=["label-persistent", "label_persistent", "all-benign", "all_benign"])
    p.add_argument("--out", default="preds.csv")
    p.add_argument("--records-out", default="", help="also write the records CSV here")
    p.set_defaults(fn=cmd_baseline)

    for name, help_text in (("predict", "run one M0-M8 method over changed files"),
                            ("debate", "run the multi-agent debate over changed files")):
        p = sub.add_parser(name, help=help_text)
        _add_dataset_args(p)
        _add_match_args(p)
        if name == "predict":
            p.add_argument("--method", required=True)
        else:
            p.add_argument("--rounds", type=int, default=1)
            p.add_argument("--roles", default="",
                           help="analyzer=...,proposer=...,skeptic=...,judge=...")
        p.add_argument("--model", default="gpt-5-mini")
        p.add_argument("--base-url", default="")
        p.add_argument("--stub", action="store_true", help="offline scripted agents")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--caps", default="", help="per-subset caps, e.g. B00=100")
        p.add_argument("--out-dir", default="runs/latest")
        p.add_argument("--diff-context", type=int, default=3)
        p.add_argument("--depth", type=int, default=3)
        p.add_argument("--max-lines", type=int, default=400)
        p.add_argument("--max-in-flight", type=int, default=4)
        p.set_defaults(fn=cmd_predict if name == "predict" else cmd_debate)

    p = sub.add_parser("evaluate", help="recompute a report from saved artifacts")
    p.add_argument("--preds", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--method", default="saved")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline from a flat key=value config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", dest="out_dir", default="")
    p.add_argument("--method", default="")
    p.add_argument("--baseline", default="")
    p.add_argument("--debate", action="store_true")
    p.add_argument("--stub", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--caps", default="")
    p.set_defaults(fn=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except DriftlensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
