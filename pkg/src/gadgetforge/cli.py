"""Command-line pipeline: extract, clean, prepare, tokenize, train, eval, report.

Exit status: 0 success, 1 usage error, 2 data error, 3 internal error.
Every stage writes its outputs atomically and records a digest of its
inputs and settings in ``<first output>.stamp``; re-running with the same
inputs is a no-op unless ``--force`` is given.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cleaner import class_name, clean_corpus
from .config import Settings
from .corpus_io import (GadgetRecord, atomic_write, ingest_source_tree, make_manifest, parse_kv,
                        read_corpus, write_corpus)
from .errors import DataError, GadgetForgeError, LengthMismatch
from .evaluator import ResultRow, emit_report, evaluate_predictions, read_report_csv, report_csv
from .extractor import DEFAULT_MAX_DEPTH, extract_gadgets, load_api_list
from .preprocess import (DEFAULT_GROUPS, GroupSpec, LabelScheme, build_groups, make_folds, parse_group_specs,
                         read_ids, split_train_test, symbolize, write_split)

log = logging.getLogger("gadgetforge")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- helpers ------------------------------------------------------------------------


def _file_digest(path: Path, h) -> None:
    if path.is_dir():
        for p in sorted(q for q in path.rglob("*") if q.is_file() and not q.name.endswith(".stamp")):
            h.update(p.relative_to(path).as_posix().encode())
            h.update(hashlib.sha256(p.read_bytes()).digest())
    elif path.is_file():
        h.update(hashlib.sha256(path.read_bytes()).digest())
    else:
        h.update(b"<missing>")


class Memo:
    """Digest stamp guarding one stage's outputs."""

    def __init__(self, stage: str, outputs, inputs, params: dict, force: bool):
        self.outputs = [Path(p) for p in outputs]
        self.stamp = self.outputs[0].with_name(self.outputs[0].name + ".stamp")
        h = hashlib.sha256(f"gadgetforge {__version__} {stage}\n".encode())
        for k in sorted(params):
            h.update(f"{k}={params[k]}\n".encode())
        for p in inputs:
            h.update(str(p).encode())
            _file_digest(Path(p), h)
        self.digest = h.hexdigest()
        self.force = force

    def fresh(self) -> bool:
        if self.force or not self.stamp.is_file():
            return False
        if not all(p.exists() for p in self.outputs):
            return False
        return parse_kv(self.stamp.read_text()).get("inputs") == self.digest

    def done(self) -> None:
        atomic_write(self.stamp, f"inputs = {self.digest}\n")


def _skip(memo: Memo, stage: str) -> bool:
    if memo.fresh():
        print(f"{stage}: up to date ({memo.outputs[0]})")
        return True
    return False


def _split_in(spec: str) -> tuple[str | None, Path]:
    cat, sep, path = spec.partition("=")
    if sep and cat and "/" not in cat:
        return cat, Path(path)
    return None, Path(spec)


def _categories_path(path: Path) -> Path:
    return path.with_name(path.name + ".categories")


def _input_paths(specs) -> list[Path]:
    """Corpus files plus their category sidecars, for memo digests."""
    paths = [_split_in(x)[1] for x in specs]
    return paths + [_categories_path(p) for p in paths]


def load_inputs(specs, num_classes: int | None = 2) -> list[GadgetRecord]:
    """Read ``[CAT=]path`` corpora.

    Without an explicit category, a ``<path>.categories`` sidecar (``id
    category`` lines) is used when present.  Several inputs are renumbered
    1..N in input order so ids stay unique.
    """
    out: list[GadgetRecord] = []
    for spec in specs:
        cat, path = _split_in(spec)
        if not path.is_file():
            raise DataError(f"input corpus {path} does not exist")
        recs = read_corpus(path, num_classes, category=cat)
        side = _categories_path(path)
        if cat is None and side.is_file():
            cats = {}
            for line in side.read_text().splitlines():
                if line.strip():
                    rid, c = line.split()
                    cats[int(rid)] = c
            recs = [GadgetRecord(r.id, r.header, r.body, r.label, r.origin, cats.get(r.id)) for r in recs]
        out.extend(recs)
    if len(specs) > 1:
        out = [GadgetRecord(i, r.with_id(i).header, r.body, r.label, r.origin, r.category)
               for i, r in enumerate(out, 1)]
    ids = [r.id for r in out]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate record ids in input corpus")
    return out


def save_corpus(path: Path, records, stage: str) -> None:
    write_corpus(path, records)
    atomic_write(path.with_name(path.name + ".manifest"), make_manifest(path.name, list(records), stage).to_text())
    if any(r.category for r in records):
        atomic_write(_categories_path(path), "".join(f"{r.id} {r.category}\n" for r in records if r.category))


def _settings(args) -> Settings:
    return Settings(args.config)


# -- subcommands ----------------------------------------------------------------------


def cmd_extract(args) -> int:
    s = _settings(args)
    api_path = s.get("paths", "api_list", args.api_list, None)
    max_depth = s.get("extract", "max_depth", args.max_depth, DEFAULT_MAX_DEPTH, int)
    out = Path(args.out)
    memo = Memo("extract", [out], [Path(p) for p in args.src] + ([Path(api_path)] if api_path else []),
                {"label": args.label, "category": args.category, "max_depth": max_depth,
                 "permissive": args.permissive}, args.force)
    if _skip(memo, "extract"):
        return EXIT_OK
    sources = []
    for root in args.src:
        tree = ingest_source_tree(root, permissive=args.permissive)
        prefix = Path(root).name + "/" if len(args.src) > 1 else ""
        sources.extend((prefix + p, t) for p, t in tree)
    api = load_api_list(api_path)
    records = extract_gadgets(sources, api, label=args.label, category=args.category, max_depth=max_depth)
    save_corpus(out, records, "raw")
    memo.done()
    print(f"extract: {len(sources)} files -> {len(records)} gadgets in {out}")
    return EXIT_OK


def cmd_clean(args) -> int:
    s = _settings(args)
    strip = s.get("clean", "strip_trailing", False if args.no_strip_trailing else None, True, bool)
    edges = s.get("clean", "drop_blank_edges", False if args.keep_blank_edges else None, True, bool)
    out = Path(args.out)
    outputs = [out] + ([Path(args.report)] if args.report else [])
    memo = Memo("clean", outputs, _input_paths(args.inputs),
                {"in": args.inputs, "strip": strip, "edges": edges}, args.force)
    if _skip(memo, "clean"):
        return EXIT_OK
    records = load_inputs(args.inputs)
    kept, report = clean_corpus(records, strip_trailing=strip, drop_blank_edges=edges, classify=class_name)
    save_corpus(out, kept, "cleaned")
    atomic_write(out.with_name(out.name + ".report"), report.to_kv())
    if args.report:
        atomic_write(args.report, report.to_csv() + "\n" + _report_totals(report))
    memo.done()
    print(f"clean: {len(records)} -> {len(kept)} records "
          f"(confliction {report.confliction}, redundancy {report.redundancy}, both {report.both})")
    return EXIT_OK


def _report_totals(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["count", "value"])
    for k in ("confliction", "redundancy", "both"):
        w.writerow([k, getattr(report, k)])
    w.writerow(["removed", report.removed])
    return buf.getvalue()


def _group_specs(s: Settings, args) -> list[GroupSpec]:
    specs = list(DEFAULT_GROUPS)
    if args.groups_file:
        specs = parse_group_specs(Path(args.groups_file).read_text())
    elif s.section("groups"):
        specs = parse_group_specs("\n".join(f"{k} = {v}" for k, v in s.section("groups").items()))
    if args.group:
        wanted = set(args.group)
        unknown = wanted - {g.name for g in specs}
        if unknown:
            raise DataError(f"unknown groups: {', '.join(sorted(unknown))}")
        specs = [g for g in specs if g.name in wanted]
    if args.mode:
        specs = [GroupSpec(g.name, g.categories, args.mode) for g in specs]
    return specs


def _parse_ratio(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"--split expects A:B, got {text!r}") from None
    if a <= 0 or b < 0:
        raise UsageError("--split parts must be positive")
    return a, b


def cmd_prepare(args) -> int:
    s = _settings(args)
    seed = s.get("global", "seed", args.seed, 0, int)
    ratio = _parse_ratio(s.get("prepare", "split", args.split, "80:20"))
    folds = s.get("prepare", "folds", args.folds, 0, int)
    do_sym = s.get("prepare", "symbolize", False if args.no_symbolize else None, True, bool)
    api_path = s.get("paths", "api_list", args.api_list, None)
    out_dir = Path(s.get("paths", "prepared", args.out_dir, "prepared"))
    specs = _group_specs(s, args)
    memo = Memo("prepare", [out_dir / "prepare"],
                _input_paths(args.inputs) + ([Path(api_path)] if api_path else []),
                {"in": args.inputs, "seed": seed, "ratio": ratio, "folds": folds, "sym": do_sym,
                 "groups": [(g.name, g.categories, g.mode) for g in specs]}, args.force)
    if _skip(memo, "prepare"):
        return EXIT_OK
    records = load_inputs(args.inputs)
    if any(r.label is None for r in records):
        raise DataError("prepare needs labeled records")
    if do_sym:
        api = load_api_list(api_path)
        records = [symbolize(r, api) for r in records]
    groups = build_groups(records, specs, allow_empty=not args.group)
    for g in groups:
        gdir = out_dir / g.name
        save_corpus(gdir / "records.cgd", g.records, "symbolized" if do_sym else "cleaned")
        atomic_write(gdir / "scheme.txt", f"mode = {g.scheme.mode}\nclasses = {','.join(g.scheme.class_names)}\n")
        split = split_train_test(g, ratio, seed)
        if folds:
            split.folds = make_folds(g, folds, seed).folds
        write_split(split, gdir)
        counts = np.bincount(g.labels(), minlength=g.scheme.num_classes)
        print(f"prepare: {g.name}: {len(g.records)} records {dict(zip(g.scheme.class_names, counts.tolist()))}, "
              f"train {len(split.train)} / test {len(split.test)}" + (f", {folds} folds" if folds else ""))
    atomic_write(out_dir / "prepare", "".join(f"{g.name}\n" for g in groups))
    memo.done()
    return EXIT_OK


def read_scheme(group_dir: Path) -> LabelScheme:
    p = group_dir / "scheme.txt"
    if not p.is_file():
        raise DataError(f"{group_dir} has no scheme.txt; run prepare first")
    kv = parse_kv(p.read_text())
    return LabelScheme(kv["mode"], tuple(kv["classes"].split(",")))


def cmd_tokenize(args) -> int:
    from .tokenizer import DEFAULT_MERGES, Vocabulary, build_word_vocab, encode_batch, train_bpe

    s = _settings(args)
    gdir = Path(args.group_dir)
    kind = s.get("tokenizer", "kind", args.kind, "word")
    max_len = s.get("tokenizer", "max_len", args.max_len, 512, int)
    vocab_size = s.get("tokenizer", "vocab_size", args.vocab_size, 50000, int)
    min_freq = s.get("tokenizer", "min_freq", args.min_freq, 1, int)
    merges = s.get("tokenizer", "merges", args.merges, DEFAULT_MERGES, int)
    keep = s.get("tokenizer", "keep", args.keep, "head")
    if kind not in ("word", "bpe"):
        raise UsageError(f"unknown tokenizer kind {kind!r}")
    out_dir = Path(args.out_dir) if args.out_dir else gdir
    memo = Memo("tokenize", [out_dir / "tokens.npz", out_dir / "vocab.txt"], [gdir / "records.cgd", gdir / "train.ids"],
                {"kind": kind, "max_len": max_len, "vocab": vocab_size, "min_freq": min_freq,
                 "merges": merges, "keep": keep}, args.force)
    if _skip(memo, "tokenize"):
        return EXIT_OK
    scheme = read_scheme(gdir)
    records = read_corpus(gdir / "records.cgd", scheme.num_classes, require_label=True)
    texts = {r.id: "\n".join(r.body) for r in records}
    train_ids = read_ids(gdir / "train.ids") if (gdir / "train.ids").is_file() else sorted(texts)
    corpus = [texts[i] for i in train_ids if i in texts]
    if kind == "word":
        vocab = build_word_vocab(corpus, vocab_size, min_freq)
    else:
        vocab = train_bpe(corpus, merges)
    ids = np.array([r.id for r in records], dtype=np.int64)
    x, m = encode_batch([texts[i] for i in ids], vocab, max_len, keep=keep)
    labels = np.array([r.label for r in records], dtype=np.int64)
    vocab.save(out_dir / "vocab.txt")
    buf = io.BytesIO()
    np.savez(buf, ids=x, mask=m, labels=labels, record_ids=ids)
    atomic_write(out_dir / "tokens.npz", buf.getvalue())
    atomic_write(out_dir / "tokenizer.txt", f"kind = {kind}\nmax_len = {max_len}\nvocab_size = {len(vocab)}\n")
    memo.done()
    print(f"tokenize: {len(records)} records, vocab {len(vocab)} ({kind}), max_len {max_len}")
    return EXIT_OK


def _load_tokens(path: Path):
    from .trainer import TokenizedSet

    if not path.is_file():
        raise DataError(f"{path} does not exist; run tokenize first")
    z = np.load(path)
    data = TokenizedSet(z["ids"], z["mask"], z["labels"])
    return data, z["record_ids"]


def _select(data, record_ids, wanted):
    pos = {int(r): k for k, r in enumerate(record_ids)}
    missing = [i for i in wanted if i not in pos]
    if missing:
        raise DataError(f"{len(missing)} split ids are not in the tokenized set (first: {missing[0]})")
    return data.subset([pos[i] for i in wanted])


def _fold_ids(gdir: Path, fold: int) -> tuple[list[int], list[int]]:
    if fold == 0:
        return read_ids(gdir / "train.ids"), read_ids(gdir / "test.ids")
    folds = sorted(gdir.glob("fold*.ids"), key=lambda p: int(p.stem[4:]))
    if not 1 <= fold <= len(folds):
        raise DataError(f"fold {fold} not available in {gdir} ({len(folds)} folds)")
    test = read_ids(folds[fold - 1])
    train = sorted(i for k, p in enumerate(folds, 1) if k != fold for i in read_ids(p))
    return train, test


MODEL_FLAGS = ("embed_dim", "hidden", "layers", "heads", "pooling", "head", "head_width", "head_dropout")
TRAIN_FLAGS = ("learning_rate", "weight_decay", "warmup_steps", "batch_size", "epochs", "schedule",
               "optimizer", "beta1", "beta2", "adam_eps")


def cmd_train(args) -> int:
    from .nn.checkpoint import save_model
    from .nn.models import ModelConfig, build_model
    from .trainer import DEFAULT_EPOCHS, TrainConfig, train

    s = _settings(args)
    gdir = Path(args.group_dir)
    tokens = Path(args.tokens) if args.tokens else gdir / "tokens.npz"
    seed = s.get("global", "seed", args.seed, 0, int)
    arch = s.get("model", "arch", args.arch, "transformer")
    tag = arch + (f"-fold{args.fold}" if args.fold else "")
    out_dir = Path(args.out_dir) if args.out_dir else gdir / "runs" / tag
    tcfg = s.fill_dataclass(TrainConfig, "train", {k: getattr(args, k) for k in TRAIN_FLAGS} | {"seed": seed},
                            epochs=DEFAULT_EPOCHS.get(arch, 10))
    memo = Memo("train", [out_dir / "best.ckpt", out_dir / "final.ckpt", out_dir / "run_log.csv"],
                [tokens, gdir / "train.ids", gdir / "test.ids"] + sorted(gdir.glob("fold*.ids")),
                {"arch": arch, "fold": args.fold, "model": [getattr(args, k) for k in MODEL_FLAGS],
                 "train": sorted(tcfg.to_kv().items()), "cfg": _config_digest(args.config)}, args.force)
    if _skip(memo, "train"):
        return EXIT_OK
    data, record_ids = _load_tokens(tokens)
    scheme = read_scheme(gdir)
    train_ids, test_ids = _fold_ids(gdir, args.fold)
    tr, te = _select(data, record_ids, train_ids), _select(data, record_ids, test_ids)
    vocab_size = int(parse_kv((tokens.parent / "tokenizer.txt").read_text())["vocab_size"])
    mcfg = s.fill_dataclass(ModelConfig, "model", {k: getattr(args, k) for k in MODEL_FLAGS} | {
        "arch": arch, "vocab_size": vocab_size, "num_classes": scheme.num_classes, "max_len": data.ids.shape[1]})
    model = build_model(mcfg, seed)
    res = train(model, tr, te, tcfg, checkpoint_path=out_dir / "best.ckpt", log_path=out_dir / "run_log.csv")
    save_model(model, out_dir / "final.ckpt", {"train.epochs": str(tcfg.epochs)})
    atomic_write(out_dir / "train.txt", "".join(f"{k} = {v}\n" for k, v in sorted(tcfg.to_kv().items())))
    memo.done()
    print(f"train: {arch} {model.parameter_count()} params, {res.steps} steps, "
          f"best eval F1 {res.best_f1:.4f} at epoch {res.best_epoch}")
    return EXIT_OK


def _config_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest() if path else ""


def _read_id_table(path: Path, column: str) -> dict[int, int]:
    if not path.is_file():
        raise DataError(f"{path} does not exist")
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames or column not in reader.fieldnames:
            raise DataError(f"{path}: expected columns id,{column}")
        for line, rec in enumerate(reader, 2):
            try:
                out[int(rec["id"])] = int(rec[column])
            except ValueError:
                raise DataError(f"{path}:{line}: non-integer value") from None
    return out


def cmd_eval(args) -> int:
    s = _settings(args)
    group = args.group_name
    fold = str(args.fold) if args.fold else "test"
    if args.preds:
        if not args.labels:
            raise UsageError("--preds needs --labels")
        scheme = LabelScheme.parse(args.scheme or "binary")
        preds = _read_id_table(Path(args.preds), "prediction")
        gold = _read_id_table(Path(args.labels), "label")
        if set(preds) != set(gold):
            raise LengthMismatch(f"{len(preds)} predictions vs {len(gold)} labels with differing ids")
        ids = sorted(gold)
        for i in ids:
            if not 0 <= gold[i] < scheme.num_classes or not 0 <= preds[i] < scheme.num_classes:
                raise DataError(f"record {i}: label outside the {scheme.num_classes}-class scheme")
        p, y = [preds[i] for i in ids], [gold[i] for i in ids]
        model_name = args.model_name or "predictions"
        group = group or "-"
    else:
        if not (args.checkpoint and args.group_dir):
            raise UsageError("eval needs either --preds/--labels or --checkpoint/--group-dir")
        from .nn.checkpoint import load_model

        gdir = Path(args.group_dir)
        scheme = read_scheme(gdir)
        model, header = load_model(args.checkpoint)
        data, record_ids = _load_tokens(Path(args.tokens) if args.tokens else gdir / "tokens.npz")
        _, ids = _fold_ids(gdir, args.fold)
        te = _select(data, record_ids, ids)
        p = model.predict(te.ids, te.mask).tolist()
        y = te.labels.tolist()
        model_name = args.model_name or header.get("model.arch", "model")
        group = group or gdir.name
        if args.preds_out:
            atomic_write(args.preds_out, "id,prediction\n" + "".join(f"{i},{q}\n" for i, q in zip(ids, p)))
    results = evaluate_predictions(p, y, scheme.class_names)
    rows = [ResultRow(group, model_name, fold, cls, ms) for cls, ms in results.items()]
    csv_text, text = emit_report(rows)
    if args.out:
        atomic_write(args.out, csv_text)
    if args.text:
        atomic_write(args.text, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    rows = []
    for p in args.inputs:
        path = Path(p)
        if not path.is_file():
            raise DataError(f"{path} does not exist")
        rows.extend(read_report_csv(path.read_text()))
    if not rows:
        raise DataError("no result rows in the given inputs")
    csv_text, text = emit_report(rows)
    if args.out:
        atomic_write(args.out, csv_text)
    if args.text:
        atomic_write(args.text, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import GeneratorSpec, generate, write_source_tree

    s = _settings(args)
    seed = s.get("global", "seed", args.seed, 0, int)
    lo, _, hi = args.noise.partition(":")
    try:
        spec = GeneratorSpec(args.per_class, tuple(args.motifs.split(",")), (int(lo), int(hi or lo)), seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.tree:
        dirs = write_source_tree(spec, args.tree)
        print(f"synth: wrote source tree {args.tree} ({', '.join(sorted(dirs))})")
        return EXIT_OK
    if not args.out:
        raise UsageError("synth needs --out or --tree")
    records = generate(spec, ablate=args.ablate)
    save_corpus(Path(args.out), records, "raw")
    print(f"synth: {len(records)} records -> {args.out}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI-style settings file")
    common.add_argument("--seed", type=int, help="seed for every stochastic stage")
    common.add_argument("--force", action="store_true", help="ignore up-to-date stamps")
    common.add_argument("--jobs", type=int, default=1, help="worker cap (stages currently run single-threaded)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="gadgetforge", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gadgetforge {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    e = sub.add_parser("extract", parents=[common], help="slice gadgets out of C/C++ source trees")
    e.add_argument("--src", action="append", required=True, help="source tree root (repeatable)")
    e.add_argument("--out", required=True)
    e.add_argument("--api-list")
    e.add_argument("--label", type=int, help="label given to every gadget (omit for unlabeled)")
    e.add_argument("--category", help="category written to the .categories sidecar")
    e.add_argument("--max-depth", type=int)
    e.add_argument("--permissive", action="store_true", help="skip unreadable files instead of failing")
    e.set_defaults(func=cmd_extract)

    c = sub.add_parser("clean", parents=[common], help="drop conflicting and duplicate gadgets")
    c.add_argument("--in", dest="inputs", action="append", required=True, metavar="[CAT=]PATH")
    c.add_argument("--out", required=True)
    c.add_argument("--report", help="per-class CSV report")
    c.add_argument("--no-strip-trailing", action="store_true", help="hash bodies with trailing whitespace")
    c.add_argument("--keep-blank-edges", action="store_true", help="hash leading/trailing blank body lines")
    c.set_defaults(func=cmd_clean)

    pr = sub.add_parser("prepare", parents=[common], help="symbolize, label, group and split")
    pr.add_argument("--in", dest="inputs", action="append", required=True, metavar="[CAT=]PATH")
    pr.add_argument("--group", action="append", help="group name (repeatable; default all non-empty)")
    pr.add_argument("--groups-file", help="'name = CAT,CAT' definitions")
    pr.add_argument("--mode", choices=("binary", "multiclass"))
    pr.add_argument("--split", help="train:test ratio, default 80:20")
    pr.add_argument("--folds", type=int, help="also write k stratified folds")
    pr.add_argument("--no-symbolize", action="store_true")
    pr.add_argument("--api-list")
    pr.add_argument("--out-dir")
    pr.set_defaults(func=cmd_prepare)

    t = sub.add_parser("tokenize", parents=[common], help="build a vocabulary and encode a prepared group")
    t.add_argument("--group-dir", required=True)
    t.add_argument("--kind", choices=("word", "bpe"))
    t.add_argument("--max-len", type=int)
    t.add_argument("--vocab-size", type=int)
    t.add_argument("--min-freq", type=int)
    t.add_argument("--merges", type=int)
    t.add_argument("--keep", choices=("head", "tail"))
    t.add_argument("--out-dir")
    t.set_defaults(func=cmd_tokenize)

    tr = sub.add_parser("train", parents=[common], help="train a classifier on a tokenized group")
    tr.add_argument("--group-dir", required=True)
    tr.add_argument("--tokens")
    tr.add_argument("--fold", type=int, default=0, help="k-fold index (0 = train/test split)")
    tr.add_argument("--arch", choices=("transformer", "bilstm", "bigru"))
    tr.add_argument("--out-dir")
    for name, typ in (("embed_dim", int), ("hidden", int), ("layers", int), ("heads", int),
                      ("pooling", str), ("head", str), ("head_width", int), ("head_dropout", float),
                      ("learning_rate", float), ("weight_decay", float), ("warmup_steps", int),
                      ("batch_size", int), ("epochs", int), ("schedule", str), ("optimizer", str),
                      ("beta1", float), ("beta2", float), ("adam_eps", float)):
        tr.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", parents=[common], help="score predictions or a checkpoint")
    ev.add_argument("--preds", help="CSV with id,prediction")
    ev.add_argument("--labels", help="CSV with id,label")
    ev.add_argument("--scheme", help="binary, multiclassN or NV,BE,... (with --preds)")
    ev.add_argument("--checkpoint")
    ev.add_argument("--group-dir")
    ev.add_argument("--tokens")
    ev.add_argument("--fold", type=int, default=0)
    ev.add_argument("--group-name")
    ev.add_argument("--model-name")
    ev.add_argument("--preds-out")
    ev.add_argument("--out", help="results CSV")
    ev.add_argument("--text", help="aligned text table")
    ev.set_defaults(func=cmd_eval)

    rp = sub.add_parser("report", parents=[common], help="merge result CSVs into tables")
    rp.add_argument("--in", dest="inputs", action="append", required=True)
    rp.add_argument("--out")
    rp.add_argument("--text")
    rp.set_defaults(func=cmd_report)

    sy = sub.add_parser("synth", parents=[common], help="generate a synthetic motif corpus")
    sy.add_argument("--out")
    sy.add_argument("--tree", help="write C source files instead of a corpus")
    sy.add_argument("--per-class", type=int, default=500)
    sy.add_argument("--motifs", default="safe_copy,overflow_copy")
    sy.add_argument("--noise", default="2:5", help="filler line range lo:hi")
    sy.add_argument("--ablate", action="store_true", help="omit the motif lines")
    sy.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (GadgetForgeError, ValueError) as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.error("internal error", exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
