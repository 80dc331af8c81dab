"""Regenerate clean200.cgd, a 200-record cleaning fixture with planned overlaps.

Layout by construction (label 1 = vulnerable):
    100 singleton bodies (40 vulnerable, 60 clean)
     10 bodies x 2 copies, vulnerable;  5 x 3, clean;  5 x 4, vulnerable
     10 bodies seen once with each label (conflicts)
      5 bodies seen twice vulnerable and once clean (conflicts with copies)
      5 clean bodies whose second copy differs only by trailing spaces and
        blank edge lines
"""

from __future__ import annotations

import random
from pathlib import Path

from gadgetforge.corpus_io import GadgetRecord, write_gadget_corpus


def body(tag: str, k: int) -> list[str]:
    return [f"char buf_{tag}{k}[{8 + k}];", f"int n_{tag}{k} = {k};", f"strcpy(buf_{tag}{k}, src);"]


def build() -> list[GadgetRecord]:
    items: list[tuple[list[str], int]] = []
    for k in range(100):
        items.append((body("u", k), 1 if k < 40 else 0))
    for k in range(10):
        items += [(body("d", k), 1)] * 2
    for k in range(10, 15):
        items += [(body("d", k), 0)] * 3
    for k in range(15, 20):
        items += [(body("d", k), 1)] * 4
    for k in range(10):
        items += [(body("c", k), 1), (body("c", k), 0)]
    for k in range(5):
        items += [(body("b", k), 1), (body("b", k), 1), (body("b", k), 0)]
    for k in range(5):
        b = body("w", k)
        items += [(b, 0), ([""] + [line + "  " for line in b] + [""], 0)]
    assert len(items) == 200
    random.Random(200).shuffle(items)
    return [GadgetRecord(i, f"{i} fixture/f{i:03d}.c strcpy {i}", tuple(b), lab)
            for i, (b, lab) in enumerate(items, 1)]


if __name__ == "__main__":
    out = Path(__file__).with_name("clean200.cgd")
    out.write_bytes(write_gadget_corpus(build()))
    print(f"wrote {out}")
