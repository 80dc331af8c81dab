"""Confusion counts, detection metrics, aggregation and report rendering."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import LengthMismatch, NoVulnerableClasses

METRIC_ORDER = ("FPR", "FNR", "Precision", "Recall", "F1")


@dataclass(frozen=True)
class ConfusionCounts:
    TP: int = 0
    FP: int = 0
    TN: int = 0
    FN: int = 0

    def __post_init__(self):
        if min(self.TP, self.FP, self.TN, self.FN) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.TP + self.FP + self.TN + self.FN

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.TP + other.TP, self.FP + other.FP,
                               self.TN + other.TN, self.FN + other.FN)


@dataclass(frozen=True)
class MetricValue:
    value: float
    defined: bool = True

    def render(self) -> str:
        return f"{100.0 * self.value:.2f}%" if self.defined else "n/a"


@dataclass(frozen=True)
class MetricSet:
    FPR: MetricValue
    FNR: MetricValue
    Precision: MetricValue
    Recall: MetricValue
    F1: MetricValue

    def items(self):
        return [(name, getattr(self, name)) for name in METRIC_ORDER]

    def as_dict(self) -> dict[str, float]:
        return {name: v.value for name, v in self.items()}


def _ratio(num: float, den: float) -> MetricValue:
    if den == 0:
        return MetricValue(0.0, False)
    return MetricValue(num / den)


def confusion(predictions: Sequence[int], labels: Sequence[int], positive: int = 1) -> ConfusionCounts:
    """One-vs-rest counts for class ``positive``."""
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(labels)} labels")
    tp = fp = tn = fn = 0
    for p, y in zip(predictions, labels):
        pp, yy = int(p) == positive, int(y) == positive
        if pp and yy:
            tp += 1
        elif pp:
            fp += 1
        elif yy:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def metrics(c: ConfusionCounts) -> MetricSet:
    p = _ratio(c.TP, c.TP + c.FP)
    r = _ratio(c.TP, c.TP + c.FN)
    if p.defined and r.defined:
        f1 = _ratio(2 * p.value * r.value, p.value + r.value)
    else:
        f1 = MetricValue(0.0, False)
    return MetricSet(_ratio(c.FP, c.FP + c.TN), _ratio(c.FN, c.FN + c.TP), p, r, f1)


def aggregate(per_class: Sequence[MetricSet], counts: Sequence[ConfusionCounts], mode: str = "global") -> MetricSet:
    """Combine vulnerable-class results.

    ``global`` recomputes metrics from summed confusions; ``macro`` averages
    precision, recall and F1 (undefined entries contribute 0 and make the
    mean undefined only when every entry is undefined).  Macro FPR/FNR are
    reported as undefined.
    """
    if not per_class:
        raise NoVulnerableClasses("aggregate needs at least one vulnerable class")
    if mode == "global":
        total = ConfusionCounts()
        for c in counts:
            total = total + c
        return metrics(total)
    if mode != "macro":
        raise ValueError(f"unknown aggregation mode {mode!r}")

    def mean(name):
        vals = [getattr(m, name) for m in per_class]
        # fsum is correctly rounded, so the mean does not depend on class order
        return MetricValue(math.fsum(v.value for v in vals) / len(vals), any(v.defined for v in vals))

    na = MetricValue(0.0, False)
    return MetricSet(na, na, mean("Precision"), mean("Recall"), mean("F1"))


def evaluate_predictions(predictions, labels, class_names: Sequence[str]) -> dict[str, MetricSet]:
    """Per vulnerable class plus ``global``/``macro`` rows (only per-class for binary)."""
    out: dict[str, MetricSet] = {}
    sets, counts = [], []
    for k in range(1, len(class_names)):
        c = confusion(predictions, labels, k)
        m = metrics(c)
        out[class_names[k]] = m
        sets.append(m)
        counts.append(c)
    if len(class_names) > 2:
        out["global"] = aggregate(sets, counts, "global")
        out["macro"] = aggregate(sets, counts, "macro")
    return out


def vulnerable_confusion(predictions, labels) -> ConfusionCounts:
    """Binary framing: any non-zero class counts as vulnerable."""
    return confusion([int(p) != 0 for p in predictions], [int(y) != 0 for y in labels], 1)


# -- reports -----------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    group: str
    model: str
    fold: str  # "test" or fold number as text
    cls: str
    metrics: MetricSet


def report_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "model", "fold", "class", "metric", "value", "defined"])
    for r in rows:
        for name, v in r.metrics.items():
            w.writerow([r.group, r.model, r.fold, r.cls, name, f"{v.value:.6f}", int(v.defined)])
    return buf.getvalue()


def read_report_csv(text: str) -> list[ResultRow]:
    table: dict[tuple, dict[str, MetricValue]] = {}
    for rec in csv.DictReader(io.StringIO(text)):
        key = (rec["group"], rec["model"], rec["fold"], rec["class"])
        table.setdefault(key, {})[rec["metric"]] = MetricValue(float(rec["value"]), rec["defined"] == "1")
    return [ResultRow(*k, MetricSet(**{n: v[n] for n in METRIC_ORDER})) for k, v in table.items()]


def _mean_metric(vals: list[MetricValue]) -> MetricValue:
    defined = [v.value for v in vals if v.defined]
    if not defined:
        return MetricValue(0.0, False)
    return MetricValue(sum(defined) / len(defined))


def _format_table(header: list[str], body: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
             for row in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def emit_report(rows: Sequence[ResultRow]) -> tuple[str, str]:
    """Return (csv, text).

    The text has one table per (group, class): metric rows, one column per
    model.  When a model has several numbered folds the per-fold columns are
    kept and an average column follows them.
    """
    if not rows:
        raise ValueError("no results to report")
    text_parts = []
    groups: dict[tuple[str, str], list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.group, r.cls), []).append(r)
    for (group, cls), members in groups.items():
        models: dict[str, list[ResultRow]] = {}
        for r in members:
            models.setdefault(r.model, []).append(r)
        header = ["metric"]
        columns: list[dict[str, MetricValue]] = []
        for model, mrows in models.items():
            mrows = sorted(mrows, key=lambda r: (not r.fold.isdigit(), int(r.fold) if r.fold.isdigit() else 0, r.fold))
            for r in mrows:
                header.append(model if len(mrows) == 1 else f"{model}[{r.fold}]")
                columns.append(dict(r.metrics.items()))
            if len(mrows) > 1:
                header.append(f"{model}[avg]")
                columns.append({n: _mean_metric([dict(r.metrics.items())[n] for r in mrows]) for n in METRIC_ORDER})
        body = [[name] + [col[name].render() for col in columns] for name in METRIC_ORDER]
        text_parts.append(f"{group} / {cls}\n" + _format_table(header, body))
    return report_csv(rows), "\n\n".join(text_parts) + "\n"
