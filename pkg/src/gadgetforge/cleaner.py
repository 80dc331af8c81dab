"""Duplicate and label-conflict removal by content hashing.

Removed records fall into three disjoint buckets:

* ``confliction``: the body appears with two or more labels and this
  record's (body, label) pair occurs once;
* ``both``: the body is conflicting and its (body, label) pair has copies;
* ``redundancy``: later copies of a non-conflicting body.

So ``original - cleaned == confliction + both + redundancy``.
"""

from __future__ import annotations

import csv
import hashlib
import io
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

from .corpus_io import GadgetRecord
from .errors import UnlabeledRecord


class GadgetDigest(NamedTuple):
    digest: str
    label: int | None


def canonicalize_body(record: GadgetRecord, *, strip_trailing: bool = True, drop_blank_edges: bool = True) -> str:
    lines = list(record.body)
    if strip_trailing:
        lines = [ln.rstrip() for ln in lines]
    if drop_blank_edges:
        while lines and not lines[0].strip():
            lines.pop(0)
        while lines and not lines[-1].strip():
            lines.pop()
    return "\n".join(lines)


def gadget_hash(record: GadgetRecord, **canon) -> GadgetDigest:
    text = canonicalize_body(record, **canon)
    return GadgetDigest(hashlib.sha256(text.encode("utf-8", errors="surrogateescape")).hexdigest(), record.label)


def class_name(record: GadgetRecord) -> str:
    """Reporting class: ``BE`` for vulnerable BE records, ``BE-NV`` for its clean ones."""
    if record.category is None:
        return f"label{record.label}"
    return record.category if record.label else f"{record.category}-NV"


@dataclass
class CleanReport:
    original: dict[str, int] = field(default_factory=dict)
    cleaned: dict[str, int] = field(default_factory=dict)
    confliction: int = 0
    redundancy: int = 0
    both: int = 0

    @property
    def removed(self) -> int:
        return sum(self.original.values()) - sum(self.cleaned.values())

    def to_kv(self) -> str:
        lines = [
            f"confliction = {self.confliction}",
            f"redundancy = {self.redundancy}",
            f"both = {self.both}",
            f"original = {sum(self.original.values())}",
            f"cleaned = {sum(self.cleaned.values())}",
        ]
        for cls in sorted(self.original):
            lines.append(f"original.{cls} = {self.original[cls]}")
            lines.append(f"cleaned.{cls} = {self.cleaned.get(cls, 0)}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "original", "cleaned", "removed"])
        for cls in sorted(self.original):
            o, c = self.original[cls], self.cleaned.get(cls, 0)
            w.writerow([cls, o, c, o - c])
        return buf.getvalue()


def clean_corpus(
    records: Sequence[GadgetRecord],
    *,
    strip_trailing: bool = True,
    drop_blank_edges: bool = True,
    classify: Callable[[GadgetRecord], str] = class_name,
) -> tuple[list[GadgetRecord], CleanReport]:
    """Drop every record of a conflicting body, then keep the first copy of each remaining body."""
    for r in records:
        if r.label is None:
            raise UnlabeledRecord(r.id)
    digests = [gadget_hash(r, strip_trailing=strip_trailing, drop_blank_edges=drop_blank_edges).digest
               for r in records]

    labels_of: dict[str, set[int]] = defaultdict(set)
    pair_count: Counter = Counter()
    for r, d in zip(records, digests):
        labels_of[d].add(r.label)
        pair_count[d, r.label] += 1

    report = CleanReport()
    kept: list[GadgetRecord] = []
    seen: set[str] = set()
    for r, d in zip(records, digests):
        cls = classify(r)
        report.original[cls] = report.original.get(cls, 0) + 1
        report.cleaned.setdefault(cls, 0)
        if len(labels_of[d]) > 1:
            if pair_count[d, r.label] > 1:
                report.both += 1
            else:
                report.confliction += 1
            continue
        if d in seen:
            report.redundancy += 1
            continue
        seen.add(d)
        kept.append(r)
        report.cleaned[cls] += 1
    return kept, report


def merge_reports(reports: Iterable[CleanReport]) -> CleanReport:
    out = CleanReport()
    for rep in reports:
        for k, v in rep.original.items():
            out.original[k] = out.original.get(k, 0) + v
        for k, v in rep.cleaned.items():
            out.cleaned[k] = out.cleaned.get(k, 0) + v
        out.confliction += rep.confliction
        out.redundancy += rep.redundancy
        out.both += rep.both
    return out
