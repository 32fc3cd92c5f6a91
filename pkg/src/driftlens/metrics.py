"""Standard and change-aware evaluation metrics.

Macro precision/recall/F1 use the 0/0 -> 0 convention per class. AUC is the
rank-based Mann-Whitney statistic (ties get half credit), so on binary
predictions it equals balanced accuracy. Change-aware metrics report
per-subset accuracies and their harmonic means HMB (benign-prior subsets
B00/D01) and HMD (defective-prior subsets B10/D11); empty subsets are
reported as absent rather than zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SUBSET_ORDER = ("B00", "B10", "D11", "D01")
CHANGED_SUBSETS = frozenset({"B10", "D01"})
UNCHANGED_SUBSETS = frozenset({"B00", "D11"})


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts with defective (1) as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_labels(cls, labels, preds) -> "ConfusionCounts":
        labels = np.asarray(labels)
        preds = np.asarray(preds)
        return cls(
            tp=int(np.sum((preds == 1) & (labels == 1))),
            fp=int(np.sum((preds == 1) & (labels == 0))),
            tn=int(np.sum((preds == 0) & (labels == 0))),
            fn=int(np.sum((preds == 0) & (labels == 1))),
        )


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def _class_prf(labels, preds, cls) -> tuple[float, float, float]:
    tp = float(np.sum((preds == cls) & (labels == cls)))
    fp = float(np.sum((preds == cls) & (labels != cls)))
    fn = float(np.sum((preds != cls) & (labels == cls)))
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return precision, recall, f1


def macro_prf(labels, preds) -> tuple[float, float, float]:
    """Macro-averaged precision/recall/F1 over the two classes."""
    labels = np.asarray(labels)
    preds = np.asarray(preds)
    if labels.size == 0 or labels.shape != preds.shape:
        raise ValueError("labels and preds must be equal-length and nonempty")
    per_class = [_class_prf(labels, preds, cls) for cls in (0, 1)]
    return tuple(float(np.mean([pc[k] for pc in per_class])) for k in range(3))


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # 1-based average rank
        i = j + 1
    return ranks


def auc_fpr_mcc(labels, preds_or_scores) -> tuple[float, float, float]:
    """Rank-based AUC, false positive rate, and Matthews correlation.

    Scores may be binary predictions; FPR and MCC binarize at 0.5 (identity
    for binary inputs). Degenerate populations yield 0.0.
    """
    labels = np.asarray(labels)
    scores = np.asarray(preds_or_scores, dtype=np.float64)
    if labels.size == 0 or labels.shape != scores.shape:
        raise ValueError("labels and scores must be equal-length and nonempty")

    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos and n_neg:
        ranks = _average_ranks(scores)
        auc = (float(np.sum(ranks[labels == 1])) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    else:
        auc = 0.0

    preds = (scores > 0.5).astype(np.int64)
    cc = ConfusionCounts.from_labels(labels, preds)
    fpr = _safe_div(cc.fp, cc.fp + cc.tn)
    mcc_den = np.sqrt(float(cc.tp + cc.fp) * float(cc.tp + cc.fn)
                      * float(cc.tn + cc.fp) * float(cc.tn + cc.fn))
    mcc = _safe_div(cc.tp * cc.tn - cc.fp * cc.fn, mcc_den)
    return float(auc), float(fpr), float(mcc)


def harmonic_mean(a: float | None, b: float | None) -> float | None:
    """Harmonic mean with the absent-subset rule.

    Both sides absent -> absent; one absent -> it counts as zero; a zero sum
    -> zero.
    """
    if a is None and b is None:
        return None
    a = a if a is not None else 0.0
    b = b if b is not None else 0.0
    return _safe_div(2.0 * a * b, a + b)


@dataclass(frozen=True)
class EvaluationReport:
    method: str
    subset_accuracy: dict                # subset -> accuracy or None
    hmb: float | None
    hmd: float | None
    populations: dict                    # total/changed/unchanged -> (P, R, F1) or None
    auc: float
    fpr: float
    mcc: float
    counts: dict                         # subset -> evaluated count
    excluded: int
    elapsed_seconds: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def total_f1(self) -> float | None:
        prf = self.populations.get("total")
        return prf[2] if prf else None


def subset_metrics(records, preds: dict) -> dict:
    """Change-aware fragment: per-subset accuracies, HMB/HMD, population F1s.

    Records whose id is missing from preds are excluded (and counted);
    subsets with no evaluated records report accuracy None.
    """
    evaluated = [r for r in records if preds.get(r.record_id) is not None]
    excluded = len(records) - len(evaluated)

    accuracy: dict[str, float | None] = {}
    counts: dict[str, int] = {}
    for subset in SUBSET_ORDER:
        members = [r for r in evaluated if r.subset == subset]
        counts[subset] = len(members)
        if members:
            hits = sum(1 for r in members if preds[r.record_id] == r.new_file.label)
            accuracy[subset] = hits / len(members)
        else:
            accuracy[subset] = None

    populations: dict[str, tuple | None] = {}
    for name, keep in (("total", None), ("changed", CHANGED_SUBSETS),
                       ("unchanged", UNCHANGED_SUBSETS)):
        members = [r for r in evaluated if keep is None or r.subset in keep]
        if members:
            labels = [r.new_file.label for r in members]
            guesses = [preds[r.record_id] for r in members]
            populations[name] = macro_prf(labels, guesses)
        else:
            populations[name] = None

    return {
        "subset_accuracy": accuracy,
        "hmb": harmonic_mean(accuracy["B00"], accuracy["D01"]),
        "hmd": harmonic_mean(accuracy["B10"], accuracy["D11"]),
        "populations": populations,
        "counts": counts,
        "excluded": excluded,
    }


def evaluate_predictions(records, preds: dict, method: str = "",
                         elapsed_seconds: float = 0.0) -> EvaluationReport:
    """Full report over whatever population `records` covers."""
    fragment = subset_metrics(records, preds)
    evaluated = [r for r in records if preds.get(r.record_id) is not None]
    if evaluated:
        labels = [r.new_file.label for r in evaluated]
        guesses = [preds[r.record_id] for r in evaluated]
        auc, fpr, mcc = auc_fpr_mcc(labels, guesses)
    else:
        auc = fpr = mcc = 0.0
    counts = dict(fragment["counts"])
    for r in evaluated:
        if r.subset not in SUBSET_ORDER:
            counts[r.subset] = counts.get(r.subset, 0) + 1
    return EvaluationReport(
        method=method,
        subset_accuracy=fragment["subset_accuracy"],
        hmb=fragment["hmb"],
        hmd=fragment["hmd"],
        populations=fragment["populations"],
        auc=auc,
        fpr=fpr,
        mcc=mcc,
        counts=counts,
        excluded=fragment["excluded"],
        elapsed_seconds=elapsed_seconds,
    )


def _fmt(value, width=9, digits=4):
    if value is None:
        return " " * (width - 1) + "-"
    return f"{value:{width}.{digits}f}"


def render_text(report: EvaluationReport) -> str:
    """Aligned report table: subset accuracies, harmonic means, F1s, standard metrics."""
    lines = []
    header = (f"{'method':<22}{'B00':>9}{'D01':>9}{'D11':>9}{'B10':>9}"
              f"{'HMB':>9}{'HMD':>9}{'Changed':>9}{'Unchangd':>9}{'Total':>9}")
    lines.append(header)
    acc = report.subset_accuracy
    pops = report.populations
    f1 = lambda name: pops[name][2] if pops.get(name) else None
    lines.append(
        f"{report.method:<22}"
        + _fmt(acc.get("B00")) + _fmt(acc.get("D01")) + _fmt(acc.get("D11"))
        + _fmt(acc.get("B10")) + _fmt(report.hmb) + _fmt(report.hmd)
        + _fmt(f1("changed")) + _fmt(f1("unchanged")) + _fmt(f1("total")))
    total = pops.get("total")
    if total:
        lines.append("")
        lines.append(f"{'':<22}{'Prec':>9}{'Rec':>9}{'F1':>9}{'AUC':>9}{'FPR':>9}{'MCC':>9}")
        lines.append(f"{'standard (total)':<22}" + _fmt(total[0]) + _fmt(total[1])
                     + _fmt(total[2]) + _fmt(report.auc) + _fmt(report.fpr) + _fmt(report.mcc))
    lines.append("")
    count_bits = [f"{k}={v}" for k, v in sorted(report.counts.items())]
    lines.append("counts: " + " ".join(count_bits) + f" excluded={report.excluded}")
    lines.append(f"elapsed_seconds: {report.elapsed_seconds:.3f}")
    return "\n".join(lines)


def report_csv_rows(report: EvaluationReport) -> list[list]:
    """Machine-readable key/value rows for the report CSV."""
    rows = [["metric", "value"]]
    rows.append(["method", report.method])
    for subset in SUBSET_ORDER:
        rows.append([f"acc_{subset}", report.subset_accuracy.get(subset)])
    rows.append(["hmb", report.hmb])
    rows.append(["hmd", report.hmd])
    for name in ("total", "changed", "unchanged"):
        prf = report.populations.get(name)
        for idx, metric in enumerate(("precision", "recall", "f1")):
            rows.append([f"{name}_{metric}", prf[idx] if prf else None])
    rows.append(["auc", report.auc])
    rows.append(["fpr", report.fpr])
    rows.append(["mcc", report.mcc])
    for key, value in sorted(report.counts.items()):
        rows.append([f"count_{key}", value])
    rows.append(["excluded", report.excluded])
    rows.append(["elapsed_seconds", report.elapsed_seconds])
    return rows
