"""Post-hoc analysis of dialogue corpora.

Structural cross-tabulation (complete/linear/graph), belief-change binning
on the -3..3 scale, and average change statistics. Output is an aligned
text table plus a machine-readable summary; inferential statistics are out
of scope and raw change samples are exposed for external tooling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from aps.dialogue import Dialogue, classify

BELIEF_MIN, BELIEF_MAX = -3.0, 3.0

BIN_LABELS = ("++", "+", "x", "-", "--")


@dataclass(frozen=True)
class TrialRecord:
    """One finished dialogue with its before/after goal beliefs."""

    dialogue: Dialogue
    strategy: str
    belief_before: float
    belief_after: float
    graph_label: str

    def __post_init__(self):
        for value in (self.belief_before, self.belief_after):
            if not (BELIEF_MIN <= value <= BELIEF_MAX):
                raise ValueError(f"belief {value} outside [{BELIEF_MIN}, {BELIEF_MAX}]")
        if self.belief_before == 0:
            raise ValueError("a zero before-belief is not permitted")

    @property
    def change(self) -> float:
        """Signed change oriented toward the persuasion goal."""
        return self.belief_after - self.belief_before


def change_bin(change: float) -> str:
    """Bin a signed change: [1,3] '++', (0,1) '+', 0 'x', (-1,0) '-', [-3,-1] '--'."""
    if change >= 1:
        return "++"
    if change > 0:
        return "+"
    if change == 0:
        return "x"
    if change > -1:
        return "-"
    return "--"


def change_bins(records: list[TrialRecord]) -> dict[str, int]:
    counts = {label: 0 for label in BIN_LABELS}
    for record in records:
        counts[change_bin(record.change)] += 1
    return counts


def change_bin_percentages(records: list[TrialRecord]) -> dict[str, float]:
    counts = change_bins(records)
    total = len(records)
    if total == 0:
        return {label: 0.0 for label in BIN_LABELS}
    return {label: round(100.0 * count / total, 2) for label, count in counts.items()}


def average_changes(records: list[TrialRecord]) -> dict[str, float]:
    """Mean signed change and mean absolute change, 3-decimal convention."""
    if not records:
        raise ValueError("no records to average")
    changes = [r.change for r in records]
    mean = sum(changes) / len(changes)
    mean_absolute = sum(abs(c) for c in changes) / len(changes)
    return {"mean": round(mean, 3), "mean_absolute": round(mean_absolute, 3)}


@dataclass(frozen=True)
class StructuralRow:
    complete: bool
    linear: bool
    flagged_graph: bool
    count: int
    percentage: float


@dataclass(frozen=True)
class StructuralTable:
    rows: tuple[StructuralRow, ...]
    total: int
    complete_count: int
    linear_count: int
    flagged_count: int

    @property
    def complete_percentage(self) -> float:
        return round(100.0 * self.complete_count / self.total, 2) if self.total else 0.0

    @property
    def linear_percentage(self) -> float:
        return round(100.0 * self.linear_count / self.total, 2) if self.total else 0.0

    @property
    def flagged_percentage(self) -> float:
        return round(100.0 * self.flagged_count / self.total, 2) if self.total else 0.0


def structural_table(records: list[TrialRecord], flagged_graph: str) -> StructuralTable:
    """Cross-tabulate (complete, linear, graph==flagged) over the corpus.

    Produces the eight combination rows sorted by count plus the marginal
    counts; percentages are rounded to two decimals.
    """
    combos: dict[tuple[bool, bool, bool], int] = {}
    complete_count = linear_count = flagged_count = 0
    for record in records:
        structure = classify(record.dialogue)
        flag = record.graph_label == flagged_graph
        key = (structure.complete, structure.linear, flag)
        combos[key] = combos.get(key, 0) + 1
        complete_count += structure.complete
        linear_count += structure.linear
        flagged_count += flag
    total = len(records)
    rows = []
    for (complete, linear, flag), count in combos.items():
        rows.append(
            StructuralRow(
                complete=complete,
                linear=linear,
                flagged_graph=flag,
                count=count,
                percentage=round(100.0 * count / total, 2) if total else 0.0,
            )
        )
    rows.sort(key=lambda r: (-r.count, not r.complete, not r.linear, not r.flagged_graph))
    return StructuralTable(
        rows=tuple(rows),
        total=total,
        complete_count=complete_count,
        linear_count=linear_count,
        flagged_count=flagged_count,
    )


def render_structural_table(table: StructuralTable, flag_name: str = "Flagged Graph") -> str:
    mark = lambda b: "yes" if b else ""  # noqa: E731
    header = f"{'Complete':<10}{'Linear':<8}{flag_name:<16}{'# dialogues':>12}{'% dialogues':>13}"
    lines = [header, "-" * len(header)]
    for row in table.rows:
        lines.append(
            f"{mark(row.complete):<10}{mark(row.linear):<8}{mark(row.flagged_graph):<16}"
            f"{row.count:>12}{row.percentage:>12.2f}%"
        )
    lines.append("-" * len(header))
    lines.append(
        f"{'# of dialogues':<34}{table.complete_count:>6} complete, "
        f"{table.linear_count} linear, {table.flagged_count} flagged, {table.total} total"
    )
    lines.append(
        f"{'% of dialogues':<34}{table.complete_percentage:>6.2f}% complete, "
        f"{table.linear_percentage}% linear, {table.flagged_percentage}% flagged"
    )
    return "\n".join(lines)


def render_change_report(records: list[TrialRecord]) -> str:
    percentages = change_bin_percentages(records)
    averages = average_changes(records) if records else {"mean": 0.0, "mean_absolute": 0.0}
    lines = [
        "bin        " + "".join(f"{label:>9}" for label in BIN_LABELS),
        "interval   " + "".join(
            f"{interval:>9}" for interval in ("[1,3]", "(0,1)", "0", "(-1,0)", "[-3,-1]")
        ),
        "percent    " + "".join(f"{percentages[label]:>8.2f}%" for label in BIN_LABELS),
        "",
        f"average change: {averages['mean']:.3f}",
        f"average absolute change: {averages['mean_absolute']:.3f}",
    ]
    return "\n".join(lines)


def summary_record(
    records: list[TrialRecord], flagged_graph: str, *, strategy: str | None = None
) -> dict:
    """Machine-readable corpus summary, including the raw change samples."""
    chosen = [r for r in records if strategy is None or r.strategy == strategy]
    table = structural_table(chosen, flagged_graph)
    summary = {
        "v": 1,
        "strategy": strategy,
        "n": table.total,
        "complete_percent": table.complete_percentage,
        "linear_percent": table.linear_percentage,
        "flagged_percent": table.flagged_percentage,
        "rows": [
            {
                "complete": row.complete,
                "linear": row.linear,
                "flagged_graph": row.flagged_graph,
                "count": row.count,
                "percent": row.percentage,
            }
            for row in table.rows
        ],
        "change_bins": change_bin_percentages(chosen),
        "changes": [round(r.change, 6) for r in chosen],
    }
    if chosen:
        summary.update(average_changes(chosen))
    return summary


def save_summary(summary: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2) + "\n")
