"""Per-action aggregation of anticipation results and report rendering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Table-style label for what each phase measures.
MEASURED_QUANTITY = {"reach": "reach target", "transport": "object to target"}

CSV_HEADER = "action,quantity,n,mean_s,std_s,median_s"


@dataclass(frozen=True)
class ActionSummary:
    action_label: str
    measured_quantity: str
    n: int
    mean: float
    std: float
    median: float


def aggregate(results: Sequence) -> list[ActionSummary]:
    """Group anticipation results by (action_label, phase) and summarize.

    Accepts any objects exposing action_label, phase, and
    anticipation_seconds. Mean is arithmetic; std is the sample estimate
    (n-1 denominator, 0 for singletons); median averages the two middle
    values for even n. Output is sorted by (action_label, quantity), so
    the result is invariant to input permutation.
    """
    if not results:
        raise ValueError("nothing to aggregate")
    groups: dict[tuple[str, str], list[float]] = {}
    for r in results:
        quantity = MEASURED_QUANTITY.get(r.phase, r.phase)
        groups.setdefault((r.action_label, quantity), []).append(float(r.anticipation_seconds))

    summaries = []
    for (action, quantity), values in groups.items():
        arr = np.asarray(values)
        std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        summaries.append(
            ActionSummary(
                action_label=action,
                measured_quantity=quantity,
                n=len(arr),
                mean=float(arr.mean()),
                std=std,
                median=float(np.median(arr)),
            )
        )
    summaries.sort(key=lambda s: (s.action_label, s.measured_quantity))
    return summaries


def render_report(summaries: Sequence[ActionSummary], format: str = "text") -> str:
    """Render summaries as an aligned text table or CSV, in input order."""
    if not summaries:
        raise ValueError("nothing to render")
    if format == "csv":
        lines = [CSV_HEADER]
        for s in summaries:
            lines.append(
                f"{s.action_label},{s.measured_quantity},{s.n},"
                f"{s.mean:.4f},{s.std:.4f},{s.median:.4f}"
            )
        return "\n".join(lines) + "\n"
    if format != "text":
        raise ValueError(f"unknown report format: {format!r}")

    headers = ("action", "measured quantity", "mean [s]", "std [s]", "median [s]")
    rows = [
        (s.action_label, s.measured_quantity, f"{s.mean:.2f}", f"{s.std:.2f}", f"{s.median:.2f}")
        for s in summaries
    ]
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    out = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    out.append("  ".join("-" * w for w in widths))
    for r in rows:
        out.append("  ".join(r[i].ljust(widths[i]) for i in range(len(headers))))
    return "\n".join(out) + "\n"
