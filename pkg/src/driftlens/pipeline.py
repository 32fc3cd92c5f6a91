"""End-to-end run wiring: corpus -> matching -> diff/context -> predictor -> metrics.

A run is described by a flat key=value config (RunConfig), selects exactly
one predictor (a naive baseline, one of M0-M8, or the debate), and persists
matches, records, predictions, transcripts, the evaluation report, and a
manifest that reproduces the run byte-for-byte in stub mode.
"""

from __future__ import annotations

import csv
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import __version__
from .baselines import BASELINE_KINDS, predict_naive
from .context import extract_context
from .corpus import load_version, normalize_lines
from .debate import DebateConfig, run_debate, save_transcript
from .diffing import diff
from .errors import ConfigurationError, PipelineStageError
from .llm import HttpChatClient, ChatRequest, ScriptedChatClient, parse_prediction
from .matching import SUBSETS, MatchParams, match_files, partition
from .metrics import evaluate_predictions, render_text, report_csv_rows
from .prompting import build_method_prompt

TRANSITION_SUBSETS = tuple(sorted(SUBSETS))


@dataclass
class RunConfig:
    dataset: str = ""
    old_csv: str = ""
    new_csv: str = ""
    path_column: str = ""
    label_column: str = ""
    source_column: str = ""
    threshold: float = 0.7
    gap_multiplier: float = 1.0
    diff_context: int = 3
    depth: int = 3
    max_lines: int = 400
    baseline: str = ""            # label_persistent | all_benign
    method: str = ""              # M0..M8
    debate: bool = False
    rounds: int = 1
    roles: str = ""               # analyzer=a,proposer=b,skeptic=c,judge=d
    model: str = "gpt-5-mini"
    base_url: str = ""
    stub: bool = False
    caps: str = ""                # e.g. B00=100,D01=50
    seed: int = 42
    out_dir: str = "runs/latest"
    max_in_flight: int = 4
    exemplar_count: int = 3

    def selector(self) -> str:
        chosen = [name for name, active in (
            ("baseline", bool(self.baseline)),
            ("method", bool(self.method)),
            ("debate", self.debate),
        ) if active]
        if len(chosen) != 1:
            raise ConfigurationError(
                f"exactly one of baseline/method/debate must be set, got {chosen or 'none'}")
        return chosen[0]

    def validate(self) -> None:
        self.selector()
        if self.baseline and self.baseline not in BASELINE_KINDS:
            raise ConfigurationError(f"unknown baseline {self.baseline!r}")
        if self.method and self.method not in {f"M{i}" for i in range(9)}:
            raise ConfigurationError(f"unknown method {self.method!r}")

    def match_params(self) -> MatchParams:
        return MatchParams(threshold=self.threshold, gap_multiplier=self.gap_multiplier)

    def role_models(self) -> dict:
        models = dict(DebateConfig().role_models)
        if self.roles:
            for item in self.roles.split(","):
                role, _, model = item.partition("=")
                if not model:
                    raise ConfigurationError(f"bad roles entry {item!r}")
                models[role.strip()] = model.strip()
        return models

    def debate_config(self) -> DebateConfig:
        return DebateConfig(rounds=self.rounds, role_models=self.role_models(),
                            depth=self.depth, max_lines=self.max_lines)

    def subset_caps(self) -> dict[str, int]:
        caps: dict[str, int] = {}
        if self.caps:
            for item in self.caps.split(","):
                subset, _, limit = item.partition("=")
                if subset.strip() not in SUBSETS or not limit.strip().isdigit():
                    raise ConfigurationError(f"bad caps entry {item!r}")
                caps[subset.strip()] = int(limit)
        return caps


def _coerce(raw: str, kind):
    if kind is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"bad boolean value {raw!r}")
    return kind(raw.strip())


def config_from_lines(lines) -> RunConfig:
    """Parse the flat key=value config format (# starts a comment)."""
    kinds = {f.name: f.type for f in fields(RunConfig)}
    types = {"str": str, "int": int, "float": float, "bool": bool}
    values = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, raw = stripped.partition("=")
        if not sep:
            raise ConfigurationError(f"config line {lineno} is not key=value: {line!r}")
        key = key.strip()
        if key not in kinds:
            raise ConfigurationError(f"unknown config key {key!r} at line {lineno}")
        values[key] = _coerce(raw, types[kinds[key]])
    return RunConfig(**values)


def load_config(path: str | Path) -> RunConfig:
    return config_from_lines(Path(path).read_text(encoding="utf-8").splitlines())


def config_lines(config: RunConfig) -> list[str]:
    out = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        rendered = str(value).lower() if isinstance(value, bool) else str(value)
        out.append(f"{f.name} = {rendered}")
    return out


def write_manifest(config: RunConfig, path: str | Path) -> None:
    lines = [f"# driftlens manifest (tool version {__version__})",
             "# re-run with: driftlens run --config <this file>"]
    lines.extend(config_lines(config))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def make_client(config: RunConfig, transport=None, sleep=time.sleep, script=None):
    if config.stub:
        return ScriptedChatClient(script)
    return HttpChatClient(base_url=config.base_url or None,
                          max_in_flight=config.max_in_flight,
                          transport=transport, sleep=sleep)


def load_sets(config: RunConfig):
    kwargs = {}
    if config.path_column:
        kwargs["path_column"] = config.path_column
    if config.label_column:
        kwargs["label_column"] = config.label_column
    if config.source_column:
        kwargs["source_column"] = config.source_column
    old_set = load_version(config.old_csv, dataset_name=config.dataset, **kwargs)
    new_set = load_version(config.new_csv, dataset_name=config.dataset, **kwargs)
    return old_set, new_set


def sample_records(records, caps: dict[str, int], seed: int):
    """Transition-subset records, capped per subset with seeded sampling."""
    population = [r for r in records if r.subset in SUBSETS]
    if not caps:
        return population
    keep: set[str] = set()
    rng = random.Random(seed)
    for subset in TRANSITION_SUBSETS:
        members = sorted((r.record_id for r in population if r.subset == subset))
        cap = caps.get(subset)
        if cap is not None and len(members) > cap:
            members = rng.sample(members, cap)
        keep.update(members)
    return [r for r in population if r.record_id in keep]


def pick_exemplars(old_set, count: int, seed: int) -> list[str]:
    """Short snippets from the old version's defective files (seeded)."""
    defective = sorted((f for f in old_set.files if f.label == 1), key=lambda f: f.path)
    if not defective:
        return []
    rng = random.Random(seed)
    chosen = defective if len(defective) <= count else rng.sample(defective, count)
    snippets = []
    for f in sorted(chosen, key=lambda x: x.path):
        lines = [ln for ln in normalize_lines(f.source) if ln.strip()]
        snippets.append("\n".join(lines[:5]))
    return snippets


def record_materials(record, config: RunConfig, need_context: bool):
    cs = diff(record.old_file.source, record.new_file.source,
              context_lines=config.diff_context, path=record.record_id)
    ctx = None
    if need_context:
        ctx = extract_context(cs, record.new_file.source,
                              depth=config.depth, max_lines=config.max_lines)
    return cs, ctx


@dataclass
class PredictionRow:
    record_id: str
    subset: str
    old_label: int | None
    new_label: int
    pred_label: int | None
    confidence: float | None
    parse_path: str
    method: str


def predict_with_method(records, config: RunConfig, client, exemplars) -> list[PredictionRow]:
    need_context = config.method == "M6"

    def one(record) -> PredictionRow:
        cs, ctx = record_materials(record, config, need_context)
        bundle = build_method_prompt(config.method, record, cs, ctx=ctx, exemplars=exemplars)
        request = ChatRequest.single_turn(config.model, bundle.system, bundle.user,
                                          tag=config.method, record_id=record.record_id)
        parsed = parse_prediction(client.complete(request), "json_shape")
        return PredictionRow(record.record_id, record.subset, record.old_file.label,
                             record.new_file.label, parsed.label, parsed.confidence,
                             parsed.parse_path, config.method)

    return _map_records(one, records, config, client)


def predict_with_debate(records, config: RunConfig, client,
                        transcripts_dir: Path | None) -> list[PredictionRow]:
    cfg = config.debate_config()

    def one(record) -> PredictionRow:
        cs, ctx = record_materials(record, config, need_context=True)
        transcript = run_debate(record, cs, ctx, cfg, client)
        if transcripts_dir is not None:
            save_transcript(transcript, transcripts_dir)
        verdict = transcript.verdict
        return PredictionRow(record.record_id, record.subset, record.old_file.label,
                             record.new_file.label, verdict.label, verdict.confidence,
                             verdict.parse_path, "debate")

    return _map_records(one, records, config, client)


def _map_records(fn, records, config: RunConfig, client) -> list[PredictionRow]:
    # stub runs stay sequential so scripted replies are consumed deterministically
    if isinstance(client, ScriptedChatClient) or config.max_in_flight <= 1:
        rows = [fn(r) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            rows = list(pool.map(fn, records))
    return rows


def baseline_rows(records, kind: str) -> list[PredictionRow]:
    preds = predict_naive(records, kind)
    return [PredictionRow(r.record_id, r.subset,
                          r.old_file.label if r.old_file else None,
                          r.new_file.label, preds[r.record_id], None, "exact", kind)
            for r in records]


def write_records_csv(records, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["new_path", "old_path", "match_kind", "similarity",
                         "subset", "old_label", "new_label"])
        for r in records:
            writer.writerow([
                r.new_file.path,
                r.old_file.path if r.old_file else "",
                r.match_kind,
                f"{r.similarity:.6f}" if r.similarity is not None else "",
                r.subset,
                r.old_file.label if r.old_file else "",
                r.new_file.label,
            ])


def write_matches_csv(records, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["new_path", "old_path", "match_kind", "similarity", "subset"])
        for r in records:
            writer.writerow([
                r.new_file.path,
                r.old_file.path if r.old_file else "",
                r.match_kind,
                f"{r.similarity:.6f}" if r.similarity is not None else "",
                r.subset,
            ])


def write_predictions_csv(rows: list[PredictionRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "subset", "old_label", "new_label",
                         "pred_label", "confidence", "parse_path", "method"])
        for row in rows:
            writer.writerow([
                row.record_id, row.subset,
                "" if row.old_label is None else row.old_label,
                row.new_label,
                "" if row.pred_label is None else row.pred_label,
                "" if row.confidence is None else f"{row.confidence:.4f}",
                row.parse_path, row.method,
            ])


def read_predictions_csv(path: str | Path) -> dict[str, int | None]:
    preds: dict[str, int | None] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            raw = row["pred_label"]
            preds[row["record_id"]] = int(raw) if raw != "" else None
    return preds


def read_records_csv(path: str | Path):
    """Rebuild lightweight evolution records (labels and subsets only)."""
    from .corpus import VersionedFile
    from .matching import EvolutionRecord

    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            new = VersionedFile(path=row["new_path"], source="<new>",
                                label=int(row["new_label"]), version_id="new")
            old = None
            if row["subset"] != "added":
                old_source = "<new>" if row["subset"] == "unchanged_source" else "<old>"
                old = VersionedFile(path=row["old_path"] or row["new_path"], source=old_source,
                                    label=int(row["old_label"]), version_id="old")
            similarity = float(row["similarity"]) if row.get("similarity") else None
            records.append(EvolutionRecord(new_file=new, old_file=old,
                                           match_kind=row["match_kind"],
                                           subset=row["subset"], similarity=similarity))
    return records


def _stage(name: str):
    class _StageGuard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineStageError):
                raise PipelineStageError(name, exc) from exc
            return False

    return _StageGuard()


def run(config: RunConfig, client=None):
    """Execute a full configured run; returns (report, artifact paths)."""
    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = {"out_dir": out_dir}
    started = time.monotonic()

    with _stage("load"):
        old_set, new_set = load_sets(config)

    with _stage("match"):
        matches = match_files(old_set, new_set, config.match_params())

    with _stage("partition"):
        records, stats = partition(old_set, new_set, matches)
        write_matches_csv(records, out_dir / "matches.csv")
        write_records_csv(records, out_dir / "records.csv")
        artifacts["matches"] = out_dir / "matches.csv"
        artifacts["records"] = out_dir / "records.csv"
        artifacts["stats"] = stats

    selector = config.selector()
    with _stage("predict"):
        if selector == "baseline":
            evaluated = records
            rows = baseline_rows(records, config.baseline)
        else:
            evaluated = sample_records(records, config.subset_caps(), config.seed)
            if client is None:
                client = make_client(config)
            if selector == "method":
                exemplars = None
                if config.method == "M7":
                    exemplars = pick_exemplars(old_set, config.exemplar_count, config.seed)
                rows = predict_with_method(evaluated, config, client, exemplars)
            else:
                transcripts_dir = out_dir / "transcripts"
                rows = predict_with_debate(evaluated, config, client, transcripts_dir)
                artifacts["transcripts"] = transcripts_dir
        write_predictions_csv(rows, out_dir / "predictions.csv")
        artifacts["predictions"] = out_dir / "predictions.csv"

    with _stage("evaluate"):
        preds = {row.record_id: row.pred_label for row in rows}
        method_name = config.baseline or config.method or "debate"
        report = evaluate_predictions(evaluated, preds, method=method_name,
                                      elapsed_seconds=time.monotonic() - started)
        (out_dir / "report.txt").write_text(render_text(report) + "\n", encoding="utf-8")
        with open(out_dir / "report.csv", "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(report_csv_rows(report))
        artifacts["report_txt"] = out_dir / "report.txt"
        artifacts["report_csv"] = out_dir / "report.csv"

    with _stage("manifest"):
        write_manifest(config, out_dir / "manifest.txt")
        artifacts["manifest"] = out_dir / "manifest.txt"

    return report, artifacts


def rerun_from_manifest(manifest_path: str | Path, out_dir: str | Path | None = None,
                        client=None):
    config = load_config(manifest_path)
    if out_dir is not None:
        config = replace(config, out_dir=str(out_dir))
    return run(config, client=client)
