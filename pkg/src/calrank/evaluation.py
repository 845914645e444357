"""Total-recall metrics over run logs.

Precision and recall here are per-iteration quantities (one document shown
per iteration), not rank-cutoff metrics: P@n divides by n even when the log
ran out of corpus, so an exhausted run is penalized for the unfilled budget;
R@n divides by the topic's count of relevant documents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .runlog import RunLog


@dataclass
class MetricsReport:
    topic_id: str
    r_t: int
    p_at: dict[int, float]
    r_at: dict[int, float]
    recall_at_4r_1000: float
    gain_curve: list[tuple[int, float]] = field(default_factory=list)
    vacuous_recall: bool = False


def _relevant_in_first(log: RunLog, n: int) -> int:
    count = 0
    for e in log.entries[:n]:
        if e.relevant:
            count += 1
    return count


def precision_at(log: RunLog, n: int) -> float:
    """Relevant among the first min(n, |log|) entries, divided by n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(log) == 0:
        return 0.0
    return _relevant_in_first(log, n) / n


def recall_at(log: RunLog, n: int, r_t: int) -> float:
    """Relevant among the first min(n, |log|) entries, divided by r_t.

    r_t = 0 is vacuous recall, defined as 1.0 (flag it in the report).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if r_t < 0:
        raise ValueError("r_t must be >= 0")
    if r_t == 0:
        return 1.0
    return _relevant_in_first(log, n) / r_t


def recall_at_4r_1000(log: RunLog, r_t: int) -> float:
    """Recall after 4*r_t + 1000 iterations, the total-recall budget metric."""
    if r_t == 0:
        return 1.0
    return recall_at(log, 4 * r_t + 1000, r_t)


def gain_curve(log: RunLog, r_t: int) -> list[tuple[int, float]]:
    """(iterations shown, recall) at every iteration; a monotone staircase."""
    points = []
    found = 0
    for e in log:
        if e.relevant:
            found += 1
        points.append((e.iteration, 1.0 if r_t == 0 else found / r_t))
    return points


def build_report(topic_id: str, log: RunLog, r_t: int,
                 ks: tuple[int, ...] = (10, 100)) -> MetricsReport:
    return MetricsReport(
        topic_id=topic_id,
        r_t=r_t,
        p_at={k: precision_at(log, k) for k in ks},
        r_at={k: recall_at(log, k, r_t) for k in ks},
        recall_at_4r_1000=recall_at_4r_1000(log, r_t),
        gain_curve=gain_curve(log, r_t),
        vacuous_recall=r_t == 0,
    )


def aggregate(reports: list[MetricsReport]) -> dict:
    """Arithmetic mean of every metric across topics."""
    if not reports:
        raise ValueError("no reports to aggregate")
    n = len(reports)
    ks = sorted(reports[0].p_at)
    return {
        "topics": n,
        "p_at": {k: sum(r.p_at[k] for r in reports) / n for k in ks},
        "r_at": {k: sum(r.r_at[k] for r in reports) / n for k in ks},
        "recall_at_4r_1000": sum(r.recall_at_4r_1000 for r in reports) / n,
    }


def format_percent(x: float) -> str:
    return f"{x * 100:.2f}"


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "topic_id": report.topic_id,
        "r_t": report.r_t,
        "p_at": {str(k): v for k, v in sorted(report.p_at.items())},
        "r_at": {str(k): v for k, v in sorted(report.r_at.items())},
        "recall_at_4r_1000": report.recall_at_4r_1000,
        "vacuous_recall": report.vacuous_recall,
        "gain_curve": [[i, r] for i, r in report.gain_curve],
    }


def report_from_dict(obj: dict) -> MetricsReport:
    return MetricsReport(
        topic_id=obj["topic_id"],
        r_t=obj["r_t"],
        p_at={int(k): v for k, v in obj["p_at"].items()},
        r_at={int(k): v for k, v in obj["r_at"].items()},
        recall_at_4r_1000=obj["recall_at_4r_1000"],
        gain_curve=[(int(i), float(r)) for i, r in obj["gain_curve"]],
        vacuous_recall=obj.get("vacuous_recall", False),
    )


def write_report(report: MetricsReport, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_report(path: str | Path) -> MetricsReport:
    with Path(path).open("r", encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def write_gain_csv(report: MetricsReport, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("iteration,recall\n")
        for i, r in report.gain_curve:
            fh.write(f"{i},{r!r}\n")
