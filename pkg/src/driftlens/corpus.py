"""PROMISE-style version snapshot ingestion.

Each snapshot is a CSV with one row per source file carrying a path, a raw
bug count, and the full file contents. Loading normalizes nothing beyond
CSV unescaping and UTF-8 decoding; line-level views are produced lazily by
consumers via normalize_lines.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError, DataError

PATH_COLUMNS = ("name", "File")
LABEL_COLUMNS = ("bug", "Bug")
SOURCE_COLUMNS = ("src", "SRC")

# PROMISE sources routinely exceed the default csv field cap.
csv.field_size_limit(min(sys.maxsize, 2**31 - 1))


@dataclass(frozen=True)
class VersionedFile:
    """One source file in one project version with its binary defect label."""

    path: str
    source: str
    label: int
    version_id: str

    def __post_init__(self):
        if not self.path:
            raise DataError("file path must be non-empty")
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r} for {self.path}")


@dataclass(frozen=True)
class VersionSet:
    """An immutable collection of files from one version, unique by path."""

    version_id: str
    dataset_name: str
    files: tuple[VersionedFile, ...]
    _by_path: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.files:
            raise DataError(f"version set {self.version_id!r} has no files")
        by_path = {}
        duplicates = []
        for f in self.files:
            if f.path in by_path:
                duplicates.append(f.path)
            by_path[f.path] = f
        if duplicates:
            raise DataError(f"duplicate paths in {self.version_id!r}: {sorted(set(duplicates))}")
        object.__setattr__(self, "_by_path", by_path)

    def __len__(self) -> int:
        return len(self.files)

    def __contains__(self, path: str) -> bool:
        return path in self._by_path

    def get(self, path: str) -> VersionedFile:
        return self._by_path[path]

    @property
    def paths(self) -> tuple[str, ...]:
        return tuple(f.path for f in self.files)

    def defective_fraction(self) -> float:
        return sum(f.label for f in self.files) / len(self.files)


def _pick_column(header: list[str], explicit: str | None, candidates: tuple[str, ...],
                 role: str) -> str:
    if explicit is not None:
        if explicit not in header:
            raise ConfigurationError(f"{role} column {explicit!r} not in CSV header {header}")
        return explicit
    for cand in candidates:
        if cand in header:
            return cand
    raise ConfigurationError(
        f"no {role} column found; tried {candidates}, header is {header}")


def _parse_label(raw: str, row_number: int) -> int:
    text = raw.strip()
    try:
        count = float(text)
    except ValueError:
        raise DataError(f"unparseable label {raw!r} at row {row_number}") from None
    if count < 0:
        raise DataError(f"negative bug count {raw!r} at row {row_number}")
    return 1 if count > 0 else 0


def load_version(csv_path: str | Path, label_column: str | None = None,
                 source_column: str | None = None, path_column: str | None = None,
                 version_id: str | None = None, dataset_name: str = "") -> VersionSet:
    """Load one labeled snapshot CSV into a VersionSet.

    Bug counts threshold at >0 -> defective. Source text is kept exactly as
    stored (after CSV unescaping); invalid UTF-8 bytes are replaced.
    """
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise ConfigurationError(f"dataset file not found: {csv_path}")
    vid = version_id if version_id is not None else csv_path.stem

    with open(csv_path, newline="", encoding="utf-8", errors="replace") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{csv_path} is empty") from None
        path_col = _pick_column(header, path_column, PATH_COLUMNS, "path")
        label_col = _pick_column(header, label_column, LABEL_COLUMNS, "label")
        source_col = _pick_column(header, source_column, SOURCE_COLUMNS, "source")
        idx = {name: header.index(name) for name in (path_col, label_col, source_col)}

        files = []
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < len(header):
                raise DataError(f"row {row_number} has {len(row)} fields, expected {len(header)}")
            files.append(VersionedFile(
                path=row[idx[path_col]],
                source=row[idx[source_col]],
                label=_parse_label(row[idx[label_col]], row_number),
                version_id=vid,
            ))
    return VersionSet(version_id=vid, dataset_name=dataset_name, files=tuple(files))


def write_version(vset: VersionSet, csv_path: str | Path) -> None:
    """Serialize a VersionSet back to CSV (round-trips path/label/source)."""
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "bug", "src"])
        for f in vset.files:
            writer.writerow([f.path, f.label, f.source])


def normalize_lines(source: str) -> list[str]:
    """Split on line feeds, stripping one trailing carriage return per line."""
    if not source:
        return []
    lines = source.split("\n")
    if lines[-1] == "":
        lines.pop()
    return [ln[:-1] if ln.endswith("\r") else ln for ln in lines]
