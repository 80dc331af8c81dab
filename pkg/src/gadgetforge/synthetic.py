"""Seeded toy gadget corpora whose classes are separated by a code motif.

Every record is a small C fragment: a function signature, filler
statements drawn from a class-independent distribution, and the class motif
placed last (where the sink call of a real gadget would sit).  One filler
line carries a literal derived from the record id, so no two bodies collide.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus_io import GadgetRecord, atomic_write

_NAMES = ("buf", "data", "dest", "str", "line", "name", "path", "tmp", "out", "msg",
          "input", "record", "field", "value", "block", "entry", "text", "token")
_SIZES = (8, 10, 16, 20, 32, 50, 64, 100, 128, 256)


def _overflow_copy(v):
    return [f"char {v['buf']}[{v['n']}];", f"strcpy({v['buf']}, {v['src']});"]


def _safe_copy(v):
    return [f"char {v['buf']}[{v['n']}];",
            f"strncpy({v['buf']}, {v['src']}, sizeof({v['buf']}) - 1);",
            f"{v['buf']}[sizeof({v['buf']}) - 1] = '\\0';"]


def _double_free(v):
    return [f"char *{v['buf']} = (char *)malloc({v['n']});",
            f"free({v['buf']});",
            f"free({v['buf']});"]


def _single_free(v):
    return [f"char *{v['buf']} = (char *)malloc({v['n']});",
            f"if ({v['buf']} != NULL) {{",
            f"free({v['buf']});",
            f"{v['buf']} = NULL;",
            "}"]


def _off_by_one(v):
    return [f"char {v['buf']}[{v['n']}];",
            f"for (i = 0; i <= {v['n']}; i++)",
            f"{v['buf']}[i] = {v['src']}[i];"]


MOTIFS = {
    "safe_copy": _safe_copy,
    "overflow_copy": _overflow_copy,
    "double_free": _double_free,
    "single_free": _single_free,
    "off_by_one": _off_by_one,
}
# category each vulnerable motif stands for
MOTIF_CATEGORY = {"overflow_copy": "BE", "off_by_one": "BE", "double_free": "RME"}
SINKS = {"safe_copy": "strncpy", "overflow_copy": "strcpy", "double_free": "free",
         "single_free": "free", "off_by_one": "strlen"}


@dataclass(frozen=True)
class GeneratorSpec:
    samples_per_class: int = 500
    motifs: tuple[str, ...] = ("safe_copy", "overflow_copy")  # index = label
    noise_lines: tuple[int, int] = (2, 5)
    seed: int = 0

    def __post_init__(self):
        if len(self.motifs) < 2:
            raise ValueError("need at least two classes")
        if len(set(self.motifs)) != len(self.motifs):
            raise ValueError("motifs must be pairwise distinct")
        unknown = [m for m in self.motifs if m not in MOTIFS]
        if unknown:
            raise ValueError(f"unknown motifs {unknown}")
        lo, hi = self.noise_lines
        if not 1 <= lo <= hi:
            raise ValueError("noise line range must satisfy 1 <= lo <= hi")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be positive")

    @property
    def class_count(self) -> int:
        return len(self.motifs)


def _filler(rng, names, src, unique: int | None):
    a = names[int(rng.integers(len(names)))]
    k = int(rng.integers(1, 100))
    choice = int(rng.integers(6)) if unique is None else -1
    if choice == -1:
        return [f"int {a}_id = {unique};"]
    if choice == 0:
        return [f"int {a}_len = {k};"]
    if choice == 1:
        return [f"size_t {a}_size = strlen({src});"]
    if choice == 2:
        return [f"char {a}_pad[{k}];", f"memset({a}_pad, 0, {k});"]
    if choice == 3:
        return [f"printf(\"%s\\n\", {src});"]
    if choice == 4:
        return [f"int {a}_count = {k};", f"if ({a}_count > {k // 2 + 1}) {a}_count = 0;"]
    return [f"long {a}_off = {k} * sizeof(int);"]


def _record_lines(rng, spec: GeneratorSpec, label: int, rid: int, ablate: bool):
    fn = f"handle_{_NAMES[int(rng.integers(len(_NAMES)))]}"
    src = _NAMES[int(rng.integers(len(_NAMES)))] + "_src"
    buf = _NAMES[int(rng.integers(len(_NAMES)))]
    if buf + "_src" == src:
        buf += "_buf"
    n = int(_SIZES[int(rng.integers(len(_SIZES)))])
    lines = [f"void {fn}(char *{src})"]
    lo, hi = spec.noise_lines
    count = int(rng.integers(lo, hi + 1))
    unique_at = int(rng.integers(count))
    for k in range(count):
        lines.extend(_filler(rng, _NAMES, src, rid if k == unique_at else None))
    motif = spec.motifs[label]
    if motif == "off_by_one":
        lines.append("int i;")
    if not ablate:
        lines.extend(MOTIFS[motif]({"buf": buf, "src": src, "n": n}))
    return lines, motif


def generate(spec: GeneratorSpec, *, ablate: bool = False, start_id: int = 1) -> list[GadgetRecord]:
    """Records ordered class by class; labels are motif indices.

    Safe-motif records take the category of the first vulnerable motif, the
    way non-vulnerable gadgets inherit the category of the file they ship in.

    ``ablate`` drops the motif lines, leaving only class-independent filler.
    """
    rng = np.random.default_rng(spec.seed)
    vulnerable = [MOTIF_CATEGORY[m] for m in spec.motifs if m in MOTIF_CATEGORY]
    default_cat = vulnerable[0] if vulnerable else None
    out = []
    rid = start_id
    for label in range(spec.class_count):
        for _ in range(spec.samples_per_class):
            lines, motif = _record_lines(rng, spec, label, rid, ablate)
            header = f"{rid} synthetic/{motif}/{rid:05d}.c {SINKS[motif]} {len(lines)}"
            out.append(GadgetRecord(rid, header, tuple(lines), label, "synthetic",
                                    MOTIF_CATEGORY.get(motif, default_cat)))
            rid += 1
    return out


def write_source_tree(spec: GeneratorSpec, root) -> dict[str, Path]:
    """Write one C file per record under ``root/<motif>/`` and return the motif directories."""
    root = Path(root)
    dirs = {}
    for r in generate(spec):
        motif = r.header.split()[1].split("/")[1]
        d = root / motif
        dirs[motif] = d
        sig, *stmts = r.body
        text = "#include <stdio.h>\n#include <stdlib.h>\n#include <string.h>\n\n"
        text += sig + "\n{\n" + "".join(f"    {s}\n" for s in stmts) + "}\n"
        atomic_write(d / f"{r.id:05d}.c", text)
    return dirs


def motif_of(record: GadgetRecord, motifs: Sequence[str] = tuple(MOTIFS)) -> str | None:
    parts = record.header.split()
    if len(parts) > 1 and parts[1].startswith("synthetic/"):
        m = parts[1].split("/")[1]
        return m if m in motifs else None
    return None
