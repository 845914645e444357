"""Shared loader for the 34-topic per-topic recall fixture.

The source table prints full recall as "1.00" in columns otherwise on a
percent scale; those entries are read as 100.00 (the column averages are only
consistent with that reading).
"""

from pathlib import Path

FIXTURE = Path(__file__).parent / "data" / "table2_recall.tsv"


def load_table2():
    """Returns (topic_ids, cal_percent, transformer_percent)."""
    topics, cal, transformer = [], [], []
    for line in FIXTURE.read_text().splitlines():
        topic_id, a, b = line.split("\t")
        topics.append(topic_id)
        cal.append(_fix(float(a)))
        transformer.append(_fix(float(b)))
    return topics, cal, transformer


def _fix(value: float) -> float:
    return 100.0 if value == 1.00 else value
