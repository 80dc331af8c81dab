"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed outside pytest's capture so they appear in the log.
"""

from __future__ import annotations

import itertools
import math
import os
import random
import time
from collections import Counter
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from gadgetforge.cleaner import clean_corpus
from gadgetforge.cli import load_inputs, main
from gadgetforge.corpus_io import GadgetRecord, read_corpus
from gadgetforge.evaluator import ConfusionCounts, metrics
from gadgetforge.extractor import SourceUnit, backtrack_slice, find_api_calls, normalize_source
from gadgetforge.nn import functional as F
from gadgetforge.nn.models import ModelConfig, build_model
from gadgetforge.preprocess import DatasetGroup, LabelScheme, make_folds, split_train_test
from gadgetforge.trainer import TrainConfig, lr_at, total_iterations, train

from desk import synthetic_split
from oracles import (INTERPROC, INTERPROC_GRAPH, attention_loops, brute_force_counts, dependence_closure,
                     gru_loops, lstm_loops, metrics_fractions, mha_loops, numeric_grad_check)

CORPUS_ENV = "GADGETFORGE_VULDEEPECKER_DIR"


@contextmanager
def criterion(capsys, number: int, title: str):
    notes: list[str] = []
    t0 = time.perf_counter()
    try:
        yield notes
    except BaseException as exc:
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} FAIL  {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        raise
    elapsed = time.perf_counter() - t0
    detail = "; ".join(notes)
    with capsys.disabled():
        print(f"\nACCEPTANCE {number} PASS  {title} [{elapsed:.1f}s]" + (f" {detail}" if detail else ""))


# 1 ---------------------------------------------------------------------------------------


def _real_corpus_dir():
    d = os.environ.get(CORPUS_ENV)
    if d and (Path(d) / "cwe119_cgd.txt").is_file() and (Path(d) / "cwe399_cgd.txt").is_file():
        return Path(d)
    return None


def test_1_cleaning_reproduction(capsys, fixtures):
    with criterion(capsys, 1, "cleaning reproduction") as notes:
        t0 = time.perf_counter()
        real = _real_corpus_dir()
        if real is not None:
            records = load_inputs([f"BE={real / 'cwe119_cgd.txt'}", f"RME={real / 'cwe399_cgd.txt'}"])
            kept, rep = clean_corpus(records)
            assert rep.cleaned == {"BE": 7649, "BE-NV": 12262, "RME": 2757, "RME-NV": 5010}, rep.cleaned
            vul = sum(1 for r in kept if r.label)
            assert (vul, len(kept) - vul) == (10395, 17197)
            assert (rep.confliction, rep.redundancy, rep.both) == (741, 33050, 257), rep.to_kv()
            notes.append(f"released corpus from {real}")
        else:
            records = read_corpus(fixtures / "clean200.cgd", category="BE")
            assert len(records) == 200
            kept, rep = clean_corpus(records)
            conf, red, both, kept_ids = brute_force_counts(records)
            assert (rep.confliction, rep.redundancy, rep.both) == (conf, red, both) == (25, 40, 10)
            assert [r.id for r in kept] == kept_ids
            assert rep.cleaned == {"BE": 55, "BE-NV": 70}
            notes.append(f"200-record fixture ({CORPUS_ENV} not set)")
        assert time.perf_counter() - t0 < 120


# 2 ---------------------------------------------------------------------------------------


def test_2_metric_oracle(capsys):
    with criterion(capsys, 2, "metric oracle over 1296 confusions") as notes:
        checked = 0
        for tp, fp, tn, fn in itertools.product(range(6), repeat=4):
            got = metrics(ConfusionCounts(tp, fp, tn, fn))
            for name, want in metrics_fractions(tp, fp, tn, fn).items():
                v = getattr(got, name)
                if want is None:
                    assert not v.defined and v.value == 0.0, (tp, fp, tn, fn, name)
                else:
                    assert v.defined and abs(v.value - float(want)) <= 1e-12, (tp, fp, tn, fn, name)
            checked += 1
        assert checked == 1296
        notes.append(f"{checked} matrices")


# 3 ---------------------------------------------------------------------------------------

GRAD_CONFIGS = {
    "bilstm": ModelConfig(arch="bilstm", vocab_size=5, embed_dim=3, hidden=4, max_len=3, head_dropout=0.0),
    "bigru": ModelConfig(arch="bigru", vocab_size=5, embed_dim=3, hidden=4, max_len=3, head_dropout=0.0),
    "transformer": ModelConfig(arch="transformer", vocab_size=5, embed_dim=8, heads=2, layers=1, max_len=6,
                               head_dropout=0.0),
}


def test_3_gradient_checks(capsys):
    with criterion(capsys, 3, "gradient checks, 20 seeds x 3 models") as notes:
        t0 = time.perf_counter()
        worst = {}
        for name, cfg in GRAD_CONFIGS.items():
            for seed in range(20):
                rng = np.random.default_rng(seed)
                model = build_model(cfg, seed=seed)
                ids = rng.integers(0, cfg.vocab_size, size=(2, cfg.max_len))
                mask = np.ones((2, cfg.max_len))
                mask[1, -1] = 0
                err = numeric_grad_check(model, ids, mask, rng.integers(0, 2, size=2), eps=1e-5)
                worst[name] = max(worst.get(name, 0.0), err)
                assert err < 1e-4, (name, seed, err)
        elapsed = time.perf_counter() - t0
        assert elapsed < 30, elapsed
        notes.append(", ".join(f"{k} max rel err {v:.1e}" for k, v in worst.items()))


# 4 ---------------------------------------------------------------------------------------


def test_4_attention_and_cell_oracles(capsys):
    with criterion(capsys, 4, "attention/cell oracles on 100 instances") as notes:
        worst = 0.0
        for k in range(100):
            rng = np.random.default_rng(1000 + k)
            n, m, dk, dv = (int(x) for x in rng.integers(1, 5, size=4))
            Q, K, V = rng.normal(size=(n, dk)), rng.normal(size=(m, dk)), rng.normal(size=(m, dv))
            worst = max(worst, np.abs(F.scaled_dot_attention(Q, K, V) - attention_loops(Q, K, V)).max())
            scores = rng.normal(scale=5.0, size=(n, m))
            assert np.all(np.abs(F.softmax(scores).sum(axis=1) - 1.0) <= 1e-12)

            d = 2 * int(rng.integers(1, 4))
            X = rng.normal(size=(int(rng.integers(1, 6)), d))
            p = F.AttentionParams(*(rng.normal(size=(2, d, d // 2)) for _ in range(3)), rng.normal(size=(d, d)))
            worst = max(worst, np.abs(F.multi_head_attention(X, p) - mha_loops(X, p.W_Q, p.W_K, p.W_V, p.W_O)).max())

            H, E = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            P = {f"W_{g}": rng.normal(size=(H, H + E)) for g in "fuoc"} | {f"b_{g}": rng.normal(size=H) for g in "fuoc"}
            x, a, c = rng.normal(size=E), rng.normal(size=H), rng.normal(size=H)
            st = F.lstm_step(x, F.LstmState(c, a), P)
            C, A = lstm_loops(x, a, c, P)
            worst = max(worst, np.abs(st.C - C).max(), np.abs(st.a - A).max())

            G = {f"{w}_{g}": rng.normal(size=(H, E if w == "W" else H)) for w in "WU" for g in "urh"}
            G |= {f"b_{g}": rng.normal(size=H) for g in "urh"}
            out = F.gru_step(x, c, G)
            ref, cand = gru_loops(x, c, G)
            worst = max(worst, np.abs(out - ref).max())
            lo, hi = np.minimum(c, cand), np.maximum(c, cand)
            assert np.all((lo - 1e-12 <= out) & (out <= hi + 1e-12)), k
        assert worst <= 1e-9, worst
        notes.append(f"max abs deviation {worst:.1e}")


# 5 ---------------------------------------------------------------------------------------

DESK_MODELS = {
    "transformer": (dict(embed_dim=32, layers=2, heads=2), 0.95),
    "bilstm": (dict(embed_dim=32, hidden=32), 0.90),
    "bigru": (dict(embed_dim=32, hidden=32), 0.90),
}


@pytest.mark.slow
def test_5_desk_scale_learning(capsys):
    with criterion(capsys, 5, "desk-scale learning on the synthetic corpus") as notes:
        t0 = time.perf_counter()
        tr, te, vocab = synthetic_split(500, seed=0, max_len=128)
        assert len(tr) == 800 and len(te) == 200 and np.bincount(te.labels).tolist() == [100, 100]
        for arch, (dims, floor) in DESK_MODELS.items():
            cfg = ModelConfig(arch=arch, vocab_size=len(vocab), max_len=128, head="bert", **dims)
            model = build_model(cfg, seed=0)
            tc = TrainConfig(learning_rate=1e-3, warmup_steps=50, weight_decay=0.06, batch_size=16, epochs=10,
                             optimizer="adamw", seed=0)
            res = train(model, tr, te, tc)
            f1 = res.final_eval.f1
            notes.append(f"{arch} F1 {f1:.4f}")
            assert f1 >= floor, (arch, f1)
        elapsed = time.perf_counter() - t0
        assert elapsed < 300, elapsed


# 6 ---------------------------------------------------------------------------------------


def _pipeline(root: Path) -> dict[str, bytes]:
    tree = root / "src"
    steps = [
        ["synth", "--tree", str(tree), "--per-class", "40", "--seed", "3"],
        ["extract", "--src", str(tree / "safe_copy"), "--out", str(root / "safe.cgd"), "--label", "0",
         "--category", "BE"],
        ["extract", "--src", str(tree / "overflow_copy"), "--out", str(root / "vuln.cgd"), "--label", "1",
         "--category", "BE"],
        ["clean", "--in", str(root / "safe.cgd"), "--in", str(root / "vuln.cgd"), "--out", str(root / "clean.cgd"),
         "--report", str(root / "clean.csv")],
        ["prepare", "--in", str(root / "clean.cgd"), "--group", "group1", "--seed", "3",
         "--out-dir", str(root / "prep")],
        ["tokenize", "--group-dir", str(root / "prep" / "group1"), "--max-len", "128"],
        ["train", "--group-dir", str(root / "prep" / "group1"), "--arch", "bigru", "--seed", "3", "--epochs", "2",
         "--embed-dim", "8", "--hidden", "8", "--optimizer", "adamw", "--learning-rate", "0.003",
         "--warmup-steps", "5", "--out-dir", str(root / "run")],
        ["eval", "--checkpoint", str(root / "run" / "best.ckpt"), "--group-dir", str(root / "prep" / "group1"),
         "--out", str(root / "report.csv"), "--text", str(root / "report.txt")],
    ]
    for argv in steps:
        assert main(argv) == 0, argv
    return {name: (root / name).read_bytes() for name in ("clean.csv", "report.csv", "report.txt")} | {
        "run_log.csv": (root / "run" / "run_log.csv").read_bytes()}


def test_6_pipeline_determinism(capsys, tmp_path):
    with criterion(capsys, 6, "pipeline determinism across two runs") as notes:
        first = _pipeline(tmp_path / "a")
        second = _pipeline(tmp_path / "b")
        for name in first:
            assert first[name] == second[name], name
        assert b"F1" in first["report.txt"]
        notes.append("byte-identical " + ", ".join(sorted(first)))


# 7 ---------------------------------------------------------------------------------------


def test_7_split_and_fold_properties(capsys):
    with criterion(capsys, 7, "split/fold properties over 50 corpora") as notes:
        for k in range(50):
            rng = np.random.default_rng(k)
            n_classes = int(rng.integers(2, 5))
            sizes = [int(s) for s in rng.integers(1, 60, size=n_classes)]
            labels = [c for c, s in enumerate(sizes) for _ in range(s)]
            rng.shuffle(labels)
            recs = [GadgetRecord(i + 1, f"{i + 1} a.c f 1", (f"x{i};",), int(y)) for i, y in enumerate(labels)]
            names = ("NV",) + tuple(f"C{c}" for c in range(1, n_classes))
            group = DatasetGroup("g", LabelScheme("binary" if n_classes == 2 else "multiclass", names), recs)
            label_of = {r.id: r.label for r in recs}
            n = len(recs)
            split = split_train_test(group, (80, 20), seed=k)
            assert abs(len(split.train) - 0.8 * n) <= 1 and abs(len(split.test) - 0.2 * n) <= 1
            for c, size in enumerate(sizes):
                got = sum(1 for i in split.train if label_of[i] == c)
                assert abs(got - 0.8 * size) <= 1, (k, c, got, size)
            assert sorted(split.train + split.test) == sorted(label_of)
            assert Counter(label_of[i] for i in split.train + split.test) == Counter(labels)
            if n >= 3:
                folds = make_folds(group, 3, seed=k).folds
                flat = [i for f in folds for i in f]
                assert sorted(flat) == sorted(label_of) and len(flat) == len(set(flat))
                assert Counter(label_of[i] for i in flat) == Counter(labels)
        notes.append("50 corpora")


# 8 ---------------------------------------------------------------------------------------


def _count_iterations(samples, epochs, batch):
    steps = 0
    for _ in range(epochs):
        start = 0
        while start < samples:
            start += batch
            steps += 1
    return steps


def test_8_schedule_accounting(capsys):
    with criterion(capsys, 8, "iteration accounting and schedule continuity") as notes:
        rnd = random.Random(8)
        for _ in range(100):
            n, e, b = rnd.randint(1, 5000), rnd.randint(1, 20), rnd.randint(1, 64)
            assert total_iterations(n, e, b) == _count_iterations(n, e, b), (n, e, b)
        for _ in range(100):
            total = rnd.randint(3, 20000)
            w = rnd.randint(1, total - 2)
            lr = 10 ** rnd.uniform(-6, 0)
            cfg = TrainConfig(learning_rate=lr, warmup_steps=w)
            eps = 1e-13 * min(w, total - 1 - w)
            left, at, right = lr_at(w - eps, cfg, total), lr_at(w, cfg, total), lr_at(w + eps, cfg, total)
            assert abs(at - left) < 1e-12 * lr and abs(right - at) < 1e-12 * lr
            assert at == lr and lr_at(total - 1, cfg, total) == 0.0
        notes.append("100 triples, 100 schedules")


# 9 ---------------------------------------------------------------------------------------

_CODE = ["int a = 1;", "x = y / z;", "p = *q;", " ", "\n", "f(a, b);", "c = 'x';", "d = '\\'';", "\t", "e = 2 * 3;"]


def _comment(rnd):
    chars = ["a", " ", "*", "/", '"', "'", "//"]
    if rnd.random() < 0.5:
        body = "".join(rnd.choice(chars + ["\n"]) for _ in range(rnd.randint(0, 6))).replace("*/", "* /")
        opener, closer = "/*", "*/"
    else:
        body = "".join(rnd.choice(chars) for _ in range(rnd.randint(0, 6)))
        opener, closer = "//", "\n"
    # non-ASCII noise goes in after the terminator check; stripping it cannot join a new "*/"
    at = rnd.randint(0, len(body))
    return opener + body[:at] + rnd.choice(["", "é"]) + body[at:] + closer


def _string(rnd):
    inner = "".join(rnd.choice(["a", "/*", "*/", "//", "\\\"", "\\\\", "'", " "]) for _ in range(rnd.randint(0, 5)))
    return '"' + inner + '"'


def test_9_extraction_fixtures(capsys):
    with criterion(capsys, 9, "extraction fixtures and normalization fuzz") as notes:
        unit = SourceUnit.from_text("a.c", normalize_source(INTERPROC))
        (site,) = find_api_calls(unit, {"strcpy"})
        got = {ln for _, ln in backtrack_slice(site, None, [unit])}
        assert got == dependence_closure(INTERPROC_GRAPH, 4), got
        rnd = random.Random(9)
        for _ in range(1000):
            parts = [rnd.choice([lambda: rnd.choice(_CODE), lambda: _comment(rnd), lambda: _string(rnd)])()
                     for _ in range(rnd.randint(1, 12))]
            text = "".join(parts)
            once = normalize_source(text)
            assert normalize_source(once) == once, text
            assert len(once) <= len(text) and once.isascii()
        notes.append(f"slice lines {sorted(got)}; 1000 interleavings")
