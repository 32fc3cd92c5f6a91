"""Cross-version file matching and evolution partitioning.

New-version files are matched to predecessors by exact path first; the
remainder is matched by Dice similarity over distinct normalized lines with
a separation test on the sorted score gaps. Matched corpora are then
partitioned into removed/added/same-source files and the four
status-transition subsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corpus import VersionedFile, VersionSet, normalize_lines

SUBSET_ORDER = ("B00", "B10", "D11", "D01")
SUBSETS = frozenset(SUBSET_ORDER)


@dataclass(frozen=True)
class MatchParams:
    """Similarity acceptance parameters: score threshold and gap multiplier."""

    threshold: float = 0.7
    gap_multiplier: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0,1], got {self.threshold}")
        if self.gap_multiplier < 0.0:
            raise ValueError(f"gap_multiplier must be >= 0, got {self.gap_multiplier}")


@dataclass(frozen=True)
class EvolutionRecord:
    """One new-version file with its matched predecessor and subset tag."""

    new_file: VersionedFile
    old_file: VersionedFile | None
    match_kind: str                 # "path" | "similarity" | "none"
    subset: str                     # B00/B10/D01/D11/unchanged_source/added
    similarity: float | None = None

    def __post_init__(self):
        if (self.subset == "added") != (self.old_file is None):
            raise ValueError("subset 'added' must coincide with a missing old file")
        if self.subset in SUBSETS and self.old_file.source == self.new_file.source:
            raise ValueError("transition subsets require changed source")

    @property
    def record_id(self) -> str:
        return self.new_file.path


@dataclass(frozen=True)
class PartitionStats:
    """Partition percentages over the union of old and new file events."""

    pct_removed: float
    pct_added: float
    pct_same_source: float
    pct_b00: float
    pct_b10: float
    pct_d11: float
    pct_d01: float
    counts: dict = field(default_factory=dict)

    def as_row(self) -> tuple[float, ...]:
        """Column order of the partition table: R, A, d=0, B00, B10, D11, D01."""
        return (self.pct_removed, self.pct_added, self.pct_same_source,
                self.pct_b00, self.pct_b10, self.pct_d11, self.pct_d01)

    def total(self) -> float:
        return sum(self.as_row())


def similarity_lines(source: str) -> set[str]:
    """Distinct lines used for Dice similarity (trailing whitespace trimmed)."""
    return {ln.rstrip() for ln in normalize_lines(source)}


def dice_similarity(old: VersionedFile, new: VersionedFile) -> float:
    """2|L1∩L2| / (|L1|+|L2|) over distinct normalized lines; both empty -> 1."""
    l1 = similarity_lines(old.source)
    l2 = similarity_lines(new.source)
    denom = len(l1) + len(l2)
    if denom == 0:
        return 1.0
    return 2.0 * len(l1 & l2) / denom


def _gap_test_accept(scores: np.ndarray, params: MatchParams) -> bool:
    """Acceptance rule on descending scores: s1 >= T and a separated top gap.

    With a single candidate only the threshold applies (the gap list is
    empty); the gap standard deviation is the population deviation, so one
    gap yields sigma = 0 and the mean-gap test still applies.
    """
    s1 = scores[0]
    if s1 < params.threshold:
        return False
    if len(scores) == 1:
        return True
    gaps = scores[:-1] - scores[1:]
    mu = float(gaps.mean())
    sigma = float(gaps.std())
    return (s1 - scores[1]) >= mu + params.gap_multiplier * sigma


def match_files(old_set: VersionSet, new_set: VersionSet,
                params: MatchParams = MatchParams()) -> dict[str, str | None]:
    """Map every new path to its matched old path (or None).

    Exact-path matches win outright. Remaining new files score against old
    files that were not path-matched; a candidate is accepted when it passes
    the threshold and gap test, and accepted candidates are made one-to-one
    greedily in descending similarity order.
    """
    matches: dict[str, str | None] = {}
    for f in new_set.files:
        matches[f.path] = f.path if f.path in old_set else None

    pending = [f for f in new_set.files if matches[f.path] is None]
    candidates = [f for f in old_set.files if f.path not in new_set]
    if not pending or not candidates:
        return matches

    candidates.sort(key=lambda f: f.path)
    sets = [kernels.hashed_line_set(similarity_lines(f.source)) for f in candidates]
    flat, offsets = kernels.pack_line_sets(sets)

    accepted: list[tuple[float, str, str]] = []
    for f in sorted(pending, key=lambda f: f.path):
        query = kernels.hashed_line_set(similarity_lines(f.source))
        scores = kernels.dice_batch(query, flat, offsets)
        order = np.argsort(-scores, kind="stable")  # ties resolve by path order
        ranked = scores[order]
        if _gap_test_accept(ranked, params):
            accepted.append((float(ranked[0]), f.path, candidates[order[0]].path))

    taken: set[str] = set()
    for score, new_path, old_path in sorted(accepted, key=lambda t: (-t[0], t[1])):
        if old_path in taken:
            continue  # best predecessor already claimed by a closer file
        taken.add(old_path)
        matches[new_path] = old_path
    return matches


def _subset_for(old: VersionedFile, new: VersionedFile) -> str:
    if old.source == new.source:
        return "unchanged_source"
    return {(0, 0): "B00", (1, 0): "B10", (0, 1): "D01", (1, 1): "D11"}[(old.label, new.label)]


def partition(old_set: VersionSet, new_set: VersionSet,
              matches: dict[str, str | None]) -> tuple[list[EvolutionRecord], PartitionStats]:
    """Turn a match map into evolution records plus partition statistics."""
    records = []
    matched_old: set[str] = set()
    for f in new_set.files:
        old_path = matches.get(f.path)
        if old_path is None:
            records.append(EvolutionRecord(f, None, "none", "added"))
            continue
        old = old_set.get(old_path)
        matched_old.add(old_path)
        kind = "path" if old_path == f.path else "similarity"
        score = dice_similarity(old, f) if kind == "similarity" else None
        records.append(EvolutionRecord(f, old, kind, _subset_for(old, f), score))

    removed = len(old_set) - len(matched_old)
    tallies = {name: 0 for name in SUBSET_ORDER}
    same = added = 0
    for rec in records:
        if rec.subset == "added":
            added += 1
        elif rec.subset == "unchanged_source":
            same += 1
        else:
            tallies[rec.subset] += 1

    union = len(new_set) + removed
    pct = lambda n: 100.0 * n / union
    stats = PartitionStats(
        pct_removed=pct(removed),
        pct_added=pct(added),
        pct_same_source=pct(same),
        pct_b00=pct(tallies["B00"]),
        pct_b10=pct(tallies["B10"]),
        pct_d11=pct(tallies["D11"]),
        pct_d01=pct(tallies["D01"]),
        counts={"removed": removed, "added": added, "same_source": same,
                **tallies, "union": union},
    )
    return records, stats
