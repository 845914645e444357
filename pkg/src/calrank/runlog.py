"""Append-only record of one review session.

File format, one record per line:
    iteration<TAB>doc_id<TAB>first_stage_score<TAB>final_score<TAB>{1|0}
Scores are written with repr so a round-trip is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class RunLogEntry:
    iteration: int
    doc_id: str
    first_stage_score: float
    final_score: float
    relevant: bool


class RunLog:
    """Ordered entries with strictly increasing iterations starting at 1."""

    def __init__(self, entries: list[RunLogEntry] | None = None):
        self.entries: list[RunLogEntry] = []
        self._seen: set[str] = set()
        for e in entries or []:
            self.append(e)

    def append(self, entry: RunLogEntry) -> None:
        if entry.iteration != len(self.entries) + 1:
            raise ValueError(
                f"iteration {entry.iteration} out of order (expected {len(self.entries) + 1})")
        if entry.doc_id in self._seen:
            raise ValueError(f"doc {entry.doc_id!r} already logged")
        self.entries.append(entry)
        self._seen.add(entry.doc_id)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]


def write_runlog(log: RunLog, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for e in log:
            fh.write(f"{e.iteration}\t{e.doc_id}\t{e.first_stage_score!r}"
                     f"\t{e.final_score!r}\t{1 if e.relevant else 0}\n")


def load_runlog(path: str | Path) -> RunLog:
    log = RunLog()
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
            iteration, doc_id, fs, final, rel = parts
            if rel not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: judgment must be 0 or 1")
            log.append(RunLogEntry(int(iteration), doc_id, float(fs), float(final), rel == "1"))
    return log
