"""Symbolic renaming, labeling, dataset groups and train/test/fold partitions.

Shuffles use ``numpy.random.default_rng(seed)`` (PCG64), whose streams are
specified bit-for-bit across platforms.
"""

from __future__ import annotations

import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .clex import STD_NAMES, is_type_name, tokenize_line
from .corpus_io import GadgetRecord, atomic_write, parse_kv
from .errors import EmptyGroup, TooFewRecords, UnknownCategory

log = logging.getLogger(__name__)

VULDEEPECKER = ("BE", "RME")
SEVC = ("AFC", "AE", "AU", "PU")
KNOWN_CATEGORIES = VULDEEPECKER + SEVC


@dataclass(frozen=True)
class LabelScheme:
    mode: str  # "binary" | "multiclass"
    class_names: tuple[str, ...]

    def __post_init__(self):
        if self.mode not in ("binary", "multiclass"):
            raise ValueError(f"unknown label mode {self.mode!r}")
        if len(set(self.class_names)) != len(self.class_names):
            raise ValueError("class names must be unique")
        if self.mode == "binary" and len(self.class_names) != 2:
            raise ValueError("binary scheme needs exactly two classes")
        if len(self.class_names) < 2:
            raise ValueError("a scheme needs at least two classes")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @classmethod
    def for_categories(cls, categories: Sequence[str], mode: str | None = None) -> "LabelScheme":
        """Index 0 is always non-vulnerable; categories follow in the given order."""
        mode = mode or ("binary" if len(categories) == 1 else "multiclass")
        if mode == "binary":
            return cls("binary", ("NV", "+".join(categories)))
        return cls("multiclass", ("NV",) + tuple(categories))

    @classmethod
    def parse(cls, text: str) -> "LabelScheme":
        """``binary``, ``multiclassN`` or an explicit ``NV,BE,RME`` list."""
        text = text.strip()
        if text == "binary":
            return cls("binary", ("NV", "V"))
        m = re.fullmatch(r"multiclass(\d+)", text)
        if m:
            k = int(m.group(1))
            return cls("multiclass", ("NV",) + tuple(f"C{i}" for i in range(1, k)))
        names = tuple(x.strip() for x in text.split(",") if x.strip())
        return cls("binary" if len(names) == 2 else "multiclass", names)


@dataclass
class DatasetGroup:
    name: str
    scheme: LabelScheme
    records: list[GadgetRecord]

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)


@dataclass
class Split:
    train: list[int] = field(default_factory=list)
    test: list[int] = field(default_factory=list)
    folds: list[list[int]] = field(default_factory=list)
    seed: int = 0

    def fold(self, i: int) -> tuple[list[int], list[int]]:
        """(train, test) for fold ``i``: test is the fold, train its complement."""
        test = self.folds[i]
        rest = [x for j, f in enumerate(self.folds) if j != i for x in f]
        return sorted(rest), sorted(test)


# -- symbolization ------------------------------------------------------------

_SYMBOL_RE = re.compile(r"(FUNC|VAR)_\d+")


def symbolize(record: GadgetRecord, api_list: Iterable[str] = ()) -> GadgetRecord:
    """Rename user functions to FUNC_n and variables to VAR_n, numbered by first occurrence.

    Keywords, API functions, literals and type names are left alone; an
    identifier directly followed by another identifier is taken to be a type.
    """
    api = set(api_list)
    lines = [tokenize_line(line, k + 1) for k, line in enumerate(record.body)]
    flat = [t for toks in lines for t in toks]

    is_func: dict[str, bool] = {}
    for i, t in enumerate(flat):
        if t.kind != "ident" or t.text in api or t.text in STD_NAMES or is_type_name(t.text):
            continue
        nxt = flat[i + 1] if i + 1 < len(flat) else None
        if nxt is not None and nxt.kind == "ident" and not _SYMBOL_RE.fullmatch(t.text):
            continue  # type position
        is_func[t.text] = is_func.get(t.text, False) or (nxt is not None and nxt.text == "(")

    mapping: dict[str, str] = {}
    counters = {"FUNC": 0, "VAR": 0}
    for t in flat:
        if t.text in is_func and t.text not in mapping:
            kind = "FUNC" if is_func[t.text] else "VAR"
            counters[kind] += 1
            mapping[t.text] = f"{kind}_{counters[kind]}"

    body = []
    for line, toks in zip(record.body, lines):
        parts, pos = [], 0
        for t in toks:
            if t.kind == "ident" and t.text in mapping:
                parts.append(line[pos:t.col])
                parts.append(mapping[t.text])
                pos = t.col + len(t.text)
        parts.append(line[pos:])
        body.append("".join(parts))
    return GadgetRecord(record.id, record.header, tuple(body), record.label, record.origin, record.category)


# -- labels and groups --------------------------------------------------------


def assign_labels(records: Sequence[GadgetRecord], scheme: LabelScheme) -> list[GadgetRecord]:
    """Map (category, vulnerable flag) to the scheme's class ids.

    The incoming label is the raw vulnerable flag (non-zero means vulnerable);
    the category is the record's vulnerability family.
    """
    out = []
    for r in records:
        vulnerable = bool(r.label)
        if not vulnerable:
            out.append(r.with_label(0))
            continue
        if scheme.mode == "binary":
            out.append(r.with_label(1))
            continue
        if r.category not in scheme.class_names[1:]:
            raise UnknownCategory(r.category)
        out.append(r.with_label(scheme.class_names.index(r.category)))
    return out


@dataclass(frozen=True)
class GroupSpec:
    name: str
    categories: tuple[str, ...]
    mode: str | None = None

    @property
    def scheme(self) -> LabelScheme:
        return LabelScheme.for_categories(self.categories, self.mode)


DEFAULT_GROUPS = (
    GroupSpec("group1", ("BE",)),
    GroupSpec("group2", ("RME",)),
    GroupSpec("group3", ("BE", "RME")),
    GroupSpec("group4", ("AFC",)),
    GroupSpec("group5", ("AE",)),
    GroupSpec("group6", ("AU",)),
    GroupSpec("group7", ("PU",)),
    GroupSpec("group8", ("AFC", "AE", "AU", "PU")),
)


def parse_group_specs(text: str) -> list[GroupSpec]:
    """``group3 = BE,RME`` lines, with optional ``group8.mode = binary`` overrides."""
    kv = parse_kv(text)
    modes = {k[: -len(".mode")]: v for k, v in kv.items() if k.endswith(".mode")}
    specs = []
    for k, v in kv.items():
        if k.endswith(".mode"):
            continue
        cats = tuple(c.strip() for c in v.split(",") if c.strip())
        specs.append(GroupSpec(k, cats, modes.get(k)))
    return specs


def build_groups(records: Sequence[GadgetRecord], specs: Sequence[GroupSpec] = DEFAULT_GROUPS,
                 *, allow_empty: bool = False) -> list[DatasetGroup]:
    groups = []
    for spec in specs:
        members = [r for r in records if r.category in spec.categories]
        if not members:
            if allow_empty:
                continue
            raise EmptyGroup(spec.name)
        scheme = spec.scheme
        labeled = assign_labels(members, scheme)
        groups.append(DatasetGroup(spec.name, scheme, labeled))
    return groups


# -- partitions ---------------------------------------------------------------


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _by_class(group: DatasetGroup, stratify: bool) -> dict[int, list[int]]:
    ids: dict[int, list[int]] = defaultdict(list)
    for r in group.records:
        ids[r.label if stratify else 0].append(r.id)
    return dict(sorted(ids.items()))


def split_train_test(group: DatasetGroup, ratio: tuple[int, int] = (80, 20), seed: int = 0,
                     *, stratify: bool = True) -> Split:
    """Seeded train/test split.

    The train total is round(N * ratio); per-class quotas come from
    largest-remainder allocation so each class is within one record of its
    exact share.
    """
    n = len(group.records)
    if n == 0:
        raise TooFewRecords("cannot split an empty group")
    frac = ratio[0] / (ratio[0] + ratio[1])
    rng = np.random.default_rng(seed)
    classes = _by_class(group, stratify)
    total_train = _round_half_up(n * frac)

    quotas = {c: int(math.floor(len(v) * frac)) for c, v in classes.items()}
    remainders = sorted(classes, key=lambda c: (-(len(classes[c]) * frac - quotas[c]), c))
    for c in remainders[: total_train - sum(quotas.values())]:
        quotas[c] += 1

    train, test = [], []
    for c, ids in classes.items():
        perm = [ids[k] for k in rng.permutation(len(ids))]
        train.extend(perm[: quotas[c]])
        test.extend(perm[quotas[c]:])
    if not test:
        log.warning("group %s: split of %d records leaves an empty test set", group.name, n)
    return Split(sorted(train), sorted(test), [], seed)


def make_folds(group: DatasetGroup, k: int = 3, seed: int = 0, *, stratify: bool = True) -> Split:
    """k near-equal stratified folds: classes are shuffled, concatenated, and dealt round-robin."""
    n = len(group.records)
    if n < k:
        raise TooFewRecords(f"{n} records cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    order: list[int] = []
    for ids in _by_class(group, stratify).values():
        order.extend(ids[j] for j in rng.permutation(len(ids)))
    folds: list[list[int]] = [[] for _ in range(k)]
    for pos, rid in enumerate(order):
        folds[pos % k].append(rid)
    return Split([], [], [sorted(f) for f in folds], seed)


def write_split(split: Split, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    files = {}
    if split.train or split.test:
        files["train.ids"] = split.train
        files["test.ids"] = split.test
    for i, f in enumerate(split.folds, 1):
        files[f"fold{i}.ids"] = f
    for name, ids in files.items():
        atomic_write(out_dir / name, "".join(f"{x}\n" for x in ids))
        written.append(out_dir / name)
    return written


def read_ids(path) -> list[int]:
    return [int(x) for x in Path(path).read_text().split()]
