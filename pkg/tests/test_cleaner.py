from __future__ import annotations

import hashlib

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gadgetforge.cleaner import CleanReport, canonicalize_body, clean_corpus, gadget_hash, merge_reports
from gadgetforge.corpus_io import GadgetRecord, read_corpus
from gadgetforge.errors import UnlabeledRecord

from oracles import brute_force_counts


def rec(i, body, label, header=None):
    return GadgetRecord(i, header or f"{i} a.c f {i}", tuple(body), label)




def test_canonicalize_examples():
    assert canonicalize_body(rec(1, ["a; ", "b;"], 0)) == "a;\nb;"
    assert canonicalize_body(rec(1, ["x"], 0, "1 a.c f 1")) == canonicalize_body(rec(2, ["x"], 1, "2 z.c g 9"))
    assert canonicalize_body(rec(1, ["a b;"], 0)) != canonicalize_body(rec(1, ["a  b;"], 0))
    assert canonicalize_body(rec(1, ["", "x;", "  "], 0)) == "x;"
    assert canonicalize_body(rec(1, ["x; "], 0), strip_trailing=False) == "x; "


def test_hash_examples():
    assert gadget_hash(rec(1, ["", " "], 0)).digest == \
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    a, b = gadget_hash(rec(1, ["x;"], 0)), gadget_hash(rec(2, ["x;"], 1))
    assert a.digest == b.digest and a.label != b.label
    assert gadget_hash(rec(1, ["x;"], 0)).digest != gadget_hash(rec(1, ["y;"], 0)).digest
    assert a.digest == hashlib.sha256(b"x;").hexdigest()


def test_small_examples():
    A, B = ["a;"], ["b;"]
    kept, rep = clean_corpus([rec(1, A, 1), rec(2, A, 1), rec(3, B, 0)])
    assert [r.id for r in kept] == [1, 3]
    assert (rep.redundancy, rep.confliction, rep.both) == (1, 0, 0)
    kept, rep = clean_corpus([rec(1, A, 1), rec(2, A, 0)])
    assert kept == [] and rep.confliction == 2


def test_unlabeled_rejected():
    with pytest.raises(UnlabeledRecord):
        clean_corpus([rec(4, ["a;"], None)])


def test_fixture_matches_construction_and_brute_force(fixtures):
    records = read_corpus(fixtures / "clean200.cgd", category="BE")
    assert len(records) == 200
    kept, rep = clean_corpus(records)
    conf, red, both, kept_ids = brute_force_counts(records)
    assert (rep.confliction, rep.redundancy, rep.both) == (conf, red, both) == (25, 40, 10)
    assert [r.id for r in kept] == kept_ids
    assert rep.original == {"BE": 100, "BE-NV": 100}
    assert rep.cleaned == {"BE": 55, "BE-NV": 70}
    assert rep.removed == 75 == rep.confliction + rep.redundancy + rep.both


def test_fixture_whitespace_flags(fixtures):
    records = read_corpus(fixtures / "clean200.cgd", category="BE")
    kept, rep = clean_corpus(records, strip_trailing=False, drop_blank_edges=False)
    conf, red, both, _ = brute_force_counts(records, strip=False, edges=False)
    assert (rep.confliction, rep.redundancy, rep.both) == (conf, red, both) == (25, 35, 10)
    assert rep.cleaned["BE-NV"] == 75


def test_report_serializations():
    rep = CleanReport({"BE": 3, "BE-NV": 2}, {"BE": 1, "BE-NV": 2}, 1, 1, 0)
    assert "confliction = 1" in rep.to_kv()
    assert rep.to_csv().splitlines() == ["class,original,cleaned,removed", "BE,3,1,2", "BE-NV,2,2,0"]
    merged = merge_reports([rep, rep])
    assert merged.original["BE"] == 6 and merged.confliction == 2


_records = st.lists(
    st.tuples(st.sampled_from(["a;", "b;", "c;", "a; ", "d;"]), st.integers(0, 1)), max_size=25
).map(lambda xs: [rec(i, [b], lab) for i, (b, lab) in enumerate(xs, 1)])


@given(_records)
def test_clean_properties(records):
    kept, rep = clean_corpus(records)
    assert clean_corpus(kept)[0] == kept
    digests = [gadget_hash(r).digest for r in kept]
    assert len(set(digests)) == len(digests)
    labels_in = {}
    for r in records:
        labels_in.setdefault(gadget_hash(r).digest, set()).add(r.label)
    assert all(len(labels_in[d]) == 1 for d in digests)
    ids = [r.id for r in kept]
    assert ids == sorted(ids)
    for cls, n in rep.cleaned.items():
        assert n <= rep.original[cls]
    assert rep.removed == rep.confliction + rep.redundancy + rep.both
    assert brute_force_counts(records)[:3] == (rep.confliction, rep.redundancy, rep.both)


@given(_records, st.randoms(use_true_random=False))
def test_counts_order_invariant(records, rnd):
    shuffled = list(records)
    rnd.shuffle(shuffled)
    a, b = clean_corpus(records)[1], clean_corpus(shuffled)[1]
    assert (a.confliction, a.redundancy, a.both, a.cleaned) == (b.confliction, b.redundancy, b.both, b.cleaned)
