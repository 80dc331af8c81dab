"""Reading and writing the gadget corpus format and its manifests.

A corpus file is a sequence of blocks::

    <id> <path> <function> <line>
    <body line>
    ...
    <decimal label>
    ---------------------------------

The header is kept verbatim; only its first token (the integer id) is
interpreted. An unlabeled record is written with an empty label line, which
stays unambiguous because the label is always the line right before the
delimiter.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .errors import IoFailure, MalformedRecord

log = logging.getLogger(__name__)

DELIMITER = "-" * 33
MIN_DELIMITER = 30
SOURCE_EXTENSIONS = (".c", ".cc", ".cpp", ".h", ".hpp")
ORIGINS = ("NVD", "SARD", "extracted", "synthetic")
STAGES = ("raw", "cleaned", "symbolized", "split")

_DELIM_RE = re.compile(r"^-{%d,}\s*$" % MIN_DELIMITER)


def is_delimiter(line: str) -> bool:
    return bool(_DELIM_RE.match(line))


@dataclass(frozen=True)
class GadgetRecord:
    """One code gadget.

    ``category`` is the vulnerability family of the corpus the record came
    from (e.g. ``"BE"``); it is not part of the on-disk block and is attached
    by whoever loads the file.
    """

    id: int
    header: str
    body: tuple[str, ...]
    label: int | None = None
    origin: str = "extracted"
    category: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"record id {self.id} is negative")
        if not self.body:
            raise ValueError(f"record {self.id}: empty body")
        if not isinstance(self.body, tuple):
            object.__setattr__(self, "body", tuple(self.body))
        for line in self.body:
            if "\n" in line or is_delimiter(line):
                raise ValueError(f"record {self.id}: body line contains a delimiter or newline")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")

    def with_label(self, label: int | None) -> "GadgetRecord":
        return replace(self, label=label)

    def with_id(self, new_id: int) -> "GadgetRecord":
        """Renumber, rewriting the id token at the front of the header."""
        rest = self.header.split(None, 1)
        tail = rest[1] if len(rest) > 1 else ""
        return replace(self, id=new_id, header=f"{new_id} {tail}".rstrip())


def parse_gadget_corpus(
    data: bytes | str,
    num_classes: int | None = 2,
    *,
    origin: str = "extracted",
    category: str | None = None,
    require_label: bool = False,
) -> list[GadgetRecord]:
    """Parse a whole corpus; raises ``MalformedRecord`` on the first bad block.

    ``num_classes`` is the size of the active label domain (``None`` skips the
    domain check).
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8", errors="surrogateescape")
    else:
        text = data
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    records: list[GadgetRecord] = []
    block: list[str] = []
    start = 0
    for lineno, line in enumerate(lines, 1):
        if not block and not line.strip() and not is_delimiter(line):
            continue
        if not block:
            start = lineno
        if is_delimiter(line):
            records.append(
                _parse_block(block, len(records), start, num_classes, origin, category, require_label)
            )
            block = []
            continue
        block.append(line)
    if block:
        raise MalformedRecord(len(records), "missing delimiter", start)
    return records


def _parse_block(block, index, start, num_classes, origin, category, require_label):
    if len(block) < 3:
        raise MalformedRecord(index, "block needs a header, a body and a label line", start)
    header = block[0]
    tokens = header.split()
    if len(tokens) < 4:
        raise MalformedRecord(index, f"header has {len(tokens)} tokens, expected at least 4", start)
    try:
        rec_id = int(tokens[0])
    except ValueError:
        raise MalformedRecord(index, f"header id {tokens[0]!r} is not an integer", start) from None
    if rec_id < 0:
        raise MalformedRecord(index, "negative id", start)

    label_text = block[-1].strip()
    if label_text == "":
        if require_label:
            raise MalformedRecord(index, "missing label line", start + len(block) - 1)
        label = None
    else:
        if not label_text.isdigit():
            raise MalformedRecord(index, f"label line {label_text!r} is not a decimal label", start + len(block) - 1)
        label = int(label_text)
        if num_classes is not None and label >= num_classes:
            raise MalformedRecord(index, f"label {label} out of domain [0, {num_classes})", start + len(block) - 1)
    return GadgetRecord(rec_id, header, tuple(block[1:-1]), label, origin, category)


def write_gadget_corpus(records: Iterable[GadgetRecord]) -> bytes:
    out: list[str] = []
    for r in records:
        out.append(r.header)
        out.extend(r.body)
        out.append("" if r.label is None else str(r.label))
        out.append(DELIMITER)
    if not out:
        return b""
    return ("\n".join(out) + "\n").encode("utf-8", errors="surrogateescape")


def read_corpus(path, num_classes: int | None = 2, **kw) -> list[GadgetRecord]:
    return parse_gadget_corpus(Path(path).read_bytes(), num_classes, **kw)


def atomic_write(path, data: bytes | str) -> None:
    """Write through a sibling temp file and rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_corpus(path, records: Iterable[GadgetRecord]) -> None:
    atomic_write(path, write_gadget_corpus(records))


# -- manifests ---------------------------------------------------------------


@dataclass
class CorpusManifest:
    name: str
    stage: str
    digest: str
    counts: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_text(self) -> str:
        lines = [f"name = {self.name}", f"stage = {self.stage}", f"digest = {self.digest}"]
        for key in sorted(self.counts):
            lines.append(f"count.{key} = {self.counts[key]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CorpusManifest":
        kv = parse_kv(text)
        counts = {k[len("count."):]: int(v) for k, v in kv.items() if k.startswith("count.")}
        return cls(kv["name"], kv["stage"], kv["digest"], counts)


def corpus_digest(records: Iterable[GadgetRecord]) -> str:
    return hashlib.sha256(write_gadget_corpus(records)).hexdigest()


def make_manifest(name: str, records: list[GadgetRecord], stage: str = "raw") -> CorpusManifest:
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    counts = Counter("none" if r.label is None else str(r.label) for r in records)
    return CorpusManifest(name, stage, corpus_digest(records), dict(counts))


def parse_kv(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment line."""
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"expected 'key = value', got {raw!r}")
        out[key.strip()] = value.strip()
    return out


# -- source trees ------------------------------------------------------------


def ingest_source_tree(root, *, permissive: bool = False) -> list[tuple[str, str]]:
    """Load every C/C++ file under ``root`` as ``(relative posix path, normalized text)``.

    Files are decoded byte-for-byte (latin-1) so that normalization can drop
    every byte >= 0x80.
    """
    from .extractor import normalize_source

    root = Path(root)
    if not root.is_dir():
        raise IoFailure(root, FileNotFoundError("not a directory"))
    paths = sorted(
        (p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in SOURCE_EXTENSIONS),
        key=lambda p: p.relative_to(root).as_posix(),
    )
    out = []
    for p in paths:
        rel = p.relative_to(root).as_posix()
        try:
            raw = p.read_bytes()
        except OSError as exc:
            if permissive:
                log.warning("skipping unreadable file %s: %s", rel, exc)
                continue
            raise IoFailure(rel, exc) from exc
        out.append((rel, normalize_source(raw.decode("latin-1"))))
    return out
