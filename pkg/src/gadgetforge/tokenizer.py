"""Word and byte-level BPE vocabularies and fixed-length id encoding."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus_io import atomic_write

PAD, UNK, BOS, EOS = 0, 1, 2, 3
SPECIALS = ("<pad>", "<unk>", "<bos>", "<eos>")
N_SPECIAL = len(SPECIALS)
DEFAULT_MERGES = 8000

_WORD_RE = re.compile(
    r"[A-Za-z_][A-Za-z0-9_]*|[0-9][A-Za-z0-9_.]*"
    r"|->|\+\+|--|<<=|>>=|<<|>>|<=|>=|==|!=|&&|\|\||::|[-+*/%&|^]="
    r"|[^\sA-Za-z0-9_]"
)
# a chunk is optional leading whitespace plus one non-whitespace run
_CHUNK_RE = re.compile(rb"\s*\S+|\s+")


def word_tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text)


@dataclass
class Vocabulary:
    kind: str  # "word" | "bpe"
    tokens: list  # id -> token (str for word, bytes for bpe); specials first
    merges: list[tuple[bytes, bytes]] = field(default_factory=list)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        self._ranks = {pair: r for r, pair in enumerate(self.merges)}
        self._cache: dict[bytes, list[int]] = {}

    def __len__(self) -> int:
        return len(self.tokens)

    # -- bpe -------------------------------------------------------------
    def _bpe_chunk(self, chunk: bytes) -> list[int]:
        hit = self._cache.get(chunk)
        if hit is not None:
            return hit
        parts = [bytes([b]) for b in chunk]
        while len(parts) > 1:
            best, rank = None, None
            for k in range(len(parts) - 1):
                r = self._ranks.get((parts[k], parts[k + 1]))
                if r is not None and (rank is None or r < rank):
                    best, rank = k, r
            if best is None:
                break
            pair = (parts[best], parts[best + 1])
            merged, k = [], 0
            while k < len(parts):
                if k + 1 < len(parts) and (parts[k], parts[k + 1]) == pair:
                    merged.append(parts[k] + parts[k + 1])
                    k += 2
                else:
                    merged.append(parts[k])
                    k += 1
            parts = merged
        ids = [self.index[p] for p in parts]
        self._cache[chunk] = ids
        return ids

    def token_ids(self, text: str) -> list[int]:
        if self.kind == "word":
            return [self.index.get(t, UNK) for t in word_tokens(text)]
        data = text.encode("utf-8", errors="surrogateescape")
        out: list[int] = []
        for chunk in _CHUNK_RE.findall(data):
            out.extend(self._bpe_chunk(chunk))
        return out

    def segment(self, text: str) -> list:
        return [self.tokens[i] for i in self.token_ids(text)]

    def decode(self, ids: Iterable[int]) -> bytes:
        """Byte-level inverse of encoding; specials are dropped."""
        if self.kind != "bpe":
            raise ValueError("decode is only defined for byte-level BPE vocabularies")
        return b"".join(self.tokens[i] for i in ids if i >= N_SPECIAL)

    # -- persistence ---------------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for i, t in enumerate(self.tokens):
            text = SPECIALS[i] if i < N_SPECIAL else (t if self.kind == "word" else _escape(t))
            lines.append(f"{text}\t{i}")
        return "\n".join(lines) + "\n"

    def merges_text(self) -> str:
        return "".join(f"{_escape(a)} {_escape(b)}\n" for a, b in self.merges)

    def save(self, path, merges_path=None) -> None:
        atomic_write(path, self.to_text())
        if self.kind == "bpe":
            atomic_write(merges_path or Path(str(path) + ".merges"), self.merges_text())

    @classmethod
    def load(cls, path, kind: str = "word", merges_path=None) -> "Vocabulary":
        rows = []
        for line in Path(path).read_text().splitlines():
            tok, _, idx = line.rpartition("\t")
            rows.append((int(idx), tok))
        rows.sort()
        if [i for i, _ in rows] != list(range(len(rows))):
            raise ValueError(f"{path}: ids are not dense")
        tokens: list = list(SPECIALS)
        for i, tok in rows[N_SPECIAL:]:
            tokens.append(tok if kind == "word" else _unescape(tok))
        merges = []
        if kind == "bpe":
            for line in Path(merges_path or Path(str(path) + ".merges")).read_text().splitlines():
                a, b = line.split(" ")
                merges.append((_unescape(a), _unescape(b)))
        return cls(kind, tokens, merges)


def _escape(b: bytes) -> str:
    return "".join(chr(c) if 0x21 <= c <= 0x7E and c != 0x5C else f"\\x{c:02x}" for c in b)


def _unescape(s: str) -> bytes:
    out = bytearray()
    i = 0
    while i < len(s):
        if s[i] == "\\":
            out.append(int(s[i + 2:i + 4], 16))
            i += 4
        else:
            out.append(ord(s[i]))
            i += 1
    return bytes(out)


# -- construction -----------------------------------------------------------------


def build_word_vocab(corpus: Iterable[str], max_size: int = 50000, min_freq: int = 1) -> Vocabulary:
    """Most frequent tokens first, ties broken lexicographically; ``max_size`` counts the specials."""
    counts: Counter = Counter()
    for text in corpus:
        counts.update(word_tokens(text))
    ranked = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    room = max(0, max_size - N_SPECIAL)
    return Vocabulary("word", list(SPECIALS) + ranked[:room])


def train_bpe(corpus: Sequence[str], merge_count: int = DEFAULT_MERGES) -> Vocabulary:
    """Greedy byte-level BPE.

    Each step merges the most frequent adjacent pair (overlapping occurrences
    counted), ties going to the pair that occurs earliest in the corpus.
    Merges never cross chunk boundaries (whitespace-led runs).
    """
    if not corpus:
        raise ValueError("empty corpus")
    freq: Counter = Counter()
    order: list[bytes] = []
    for text in corpus:
        for chunk in _CHUNK_RE.findall(text.encode("utf-8", errors="surrogateescape")):
            if chunk not in freq:
                order.append(chunk)
            freq[chunk] += 1
    words = [[bytes([b]) for b in w] for w in order]
    counts = [freq[w] for w in order]

    merges: list[tuple[bytes, bytes]] = []
    for _ in range(merge_count):
        pair_count: dict[tuple[bytes, bytes], int] = {}
        first: dict[tuple[bytes, bytes], int] = {}
        pos = 0
        for w, c in zip(words, counts):
            for k in range(len(w) - 1):
                p = (w[k], w[k + 1])
                pair_count[p] = pair_count.get(p, 0) + c
                if p not in first:
                    first[p] = pos + k
            pos += len(w)
        if not pair_count:
            break
        best = min(pair_count, key=lambda p: (-pair_count[p], first[p]))
        merges.append(best)
        joined = best[0] + best[1]
        for wi, w in enumerate(words):
            if len(w) < 2:
                continue
            out, k = [], 0
            changed = False
            while k < len(w):
                if k + 1 < len(w) and w[k] == best[0] and w[k + 1] == best[1]:
                    out.append(joined)
                    k += 2
                    changed = True
                else:
                    out.append(w[k])
                    k += 1
            if changed:
                words[wi] = out
    tokens: list = list(SPECIALS) + [bytes([b]) for b in range(256)]
    seen = set(tokens)
    for a, b in merges:
        if a + b not in seen:
            tokens.append(a + b)
            seen.add(a + b)
    return Vocabulary("bpe", tokens, merges)


# -- encoding -----------------------------------------------------------------------


@dataclass
class TokenSequence:
    ids: np.ndarray
    mask: np.ndarray

    @property
    def length(self) -> int:
        return len(self.ids)


def encode(text: str, vocab: Vocabulary, max_len: int = 512, *, keep: str = "head") -> TokenSequence:
    """BOS + ids + EOS, truncated (EOS kept last) and PAD-filled to exactly ``max_len``."""
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    body = vocab.token_ids(text)
    room = max_len - 2
    if len(body) > room:
        body = body[:room] if keep == "head" else body[len(body) - room:]
    seq = [BOS] + body + [EOS]
    ids = np.full(max_len, PAD, dtype=np.int64)
    ids[: len(seq)] = seq
    mask = np.zeros(max_len, dtype=np.int8)
    mask[: len(seq)] = 1
    return TokenSequence(ids, mask)


def encode_batch(texts: Sequence[str], vocab: Vocabulary, max_len: int = 512, *, keep: str = "head"):
    ids = np.full((len(texts), max_len), PAD, dtype=np.int64)
    mask = np.zeros((len(texts), max_len), dtype=np.int8)
    for k, t in enumerate(texts):
        s = encode(t, vocab, max_len, keep=keep)
        ids[k], mask[k] = s.ids, s.mask
    return ids, mask
