"""Code-gadget extraction from C/C++ sources.

Pipeline: normalize each file, scan tokens, index function and variable
definitions with brace-scope resolution, find library/API call sites, and
back-track from each call over declaration/assignment edges (into callers
when an argument is a parameter).  Only data dependencies are followed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .clex import ASSIGN_OPS, KEYWORDS, Token, is_type_name, tokenize
from .corpus_io import GadgetRecord
from .errors import RecursionLimit, UnterminatedComment

log = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 8


# -- normalization -----------------------------------------------------------


def normalize_source(text: str) -> str:
    """Strip comments and non-ASCII characters.

    String and character literals are copied untouched.  A block comment is
    replaced by the newlines it contained so line numbers survive.
    """
    text = "".join(ch for ch in text if ord(ch) < 0x80)
    out: list[str] = []
    i, n, line = 0, len(text), 1
    while i < n:
        c = text[i]
        nxt = text[i + 1] if i + 1 < n else ""
        if c == "/" and nxt == "/":
            j = text.find("\n", i)
            i = n if j == -1 else j
            continue
        if c == "/" and nxt == "*":
            j = text.find("*/", i + 2)
            if j == -1:
                raise UnterminatedComment(line)
            k = text.count("\n", i, j)
            out.append("\n" * k)
            line += k
            i = j + 2
            continue
        if c in "\"'":
            j = i + 1
            while j < n and text[j] != c and text[j] != "\n":
                j += 2 if text[j] == "\\" and j + 1 < n else 1
            if j < n and text[j] == c:
                j += 1
            out.append(text[i:j])
            line += text.count("\n", i, j)
            i = j
            continue
        if c == "\n":
            line += 1
        out.append(c)
        i += 1
    return "".join(out)


# -- domain types ------------------------------------------------------------


@dataclass
class SourceUnit:
    path: str
    lines: list[str]
    tokens: list[Token]

    @classmethod
    def from_text(cls, path: str, text: str) -> "SourceUnit":
        return cls(path, text.split("\n"), tokenize(text))

    def line_text(self, lineno: int) -> str:
        return self.lines[lineno - 1]


@dataclass
class Definition:
    name: str
    kind: str  # "function" | "variable"
    decl_line: int
    uses: list[int] = field(default_factory=list)
    # resolution detail, not part of the public record
    path: str = ""
    function: str | None = None
    scope: tuple[int, int] = (0, 0)
    decl_index: int = -1
    param_index: int | None = None


@dataclass
class CallSite:
    callee: str
    line: int
    arguments: list[str]
    function: str | None
    path: str = ""
    index: int = -1
    arg_groups: tuple[tuple[str, ...], ...] = ()


@dataclass
class _Function:
    name: str | None
    name_index: int
    decl_line: int
    body_open: int
    body_close: int
    params: list[Definition]


@dataclass
class _Analysis:
    unit: SourceUnit
    functions: list[_Function]
    defs: list[Definition]
    resolved: dict[int, Definition]  # token index -> variable definition
    match: dict[int, int]  # bracket partner indices

    def function_at(self, index: int) -> _Function | None:
        for f in self.functions:
            if f.body_open <= index <= f.body_close:
                return f
        return None


# -- scanning helpers --------------------------------------------------------

_OPEN = {"(": ")", "[": "]", "{": "}"}


def _match_brackets(tokens: Sequence[Token]) -> dict[int, int]:
    match: dict[int, int] = {}
    stack: list[int] = []
    for i, t in enumerate(tokens):
        if t.kind != "punct":
            continue
        if t.text in _OPEN:
            stack.append(i)
        elif t.text in (")", "]", "}"):
            # tolerate unbalanced input: pop to the nearest matching opener
            for depth in range(len(stack) - 1, -1, -1):
                if _OPEN[tokens[stack[depth]].text] == t.text:
                    j = stack[depth]
                    del stack[depth:]
                    match[i], match[j] = j, i
                    break
    return match


def _split_top_level(tokens: Sequence[Token], start: int, stop: int, match) -> list[tuple[int, int]]:
    """Split ``tokens[start:stop]`` at top-level commas."""
    parts = []
    i, seg = start, start
    while i < stop:
        t = tokens[i]
        if t.kind == "punct" and t.text in _OPEN and i in match:
            i = match[i] + 1
            continue
        if t.kind == "punct" and t.text == ",":
            parts.append((seg, i))
            seg = i + 1
        i += 1
    if seg < stop or parts:
        parts.append((seg, stop))
    return parts


def _is_member(tokens, i) -> bool:
    return i > 0 and tokens[i - 1].text in (".", "->")


def _is_call(tokens, i) -> bool:
    return i + 1 < len(tokens) and tokens[i + 1].text == "("


def _type_prefix_end(tokens: Sequence[Token], j: int, stop: int) -> int | None:
    """If a declaration's type starts at ``j``, return the index after it."""
    k = j
    saw_type = False
    while k < stop and tokens[k].kind in ("keyword", "ident") and is_type_name(tokens[k].text):
        saw_type = True
        if tokens[k].text in ("struct", "union", "enum", "class") and k + 1 < stop and tokens[k + 1].kind == "ident":
            k += 1
        k += 1
    if saw_type:
        # allow a trailing user type after qualifiers: "const Foo *p"
        if k + 1 < stop and tokens[k].kind == "ident" and tokens[k + 1].kind == "ident":
            k += 1
        return k
    t = tokens[j] if j < stop else None
    if t is None or t.kind != "ident":
        return None
    k = j + 1
    while k + 1 < stop and tokens[k].text == "::" and tokens[k + 1].kind == "ident":
        k += 2
    if k < stop and tokens[k].text == "<":
        depth = 0
        while k < stop:
            if tokens[k].text == "<":
                depth += 1
            elif tokens[k].text == ">":
                depth -= 1
                if depth == 0:
                    break
            elif tokens[k].text in (";", "{", "}"):
                return None
            k += 1
        k += 1
    m = k
    while m < stop and tokens[m].text in ("*", "&"):
        m += 1
    if m < stop and tokens[m].kind == "ident":
        after = tokens[m + 1].text if m + 1 < stop else ";"
        if m == k or after in (";", "=", ",", "[", ")"):
            return k
    return None


# -- analysis ----------------------------------------------------------------


def _analyze(unit: SourceUnit) -> _Analysis:
    toks = unit.tokens
    n = len(toks)
    match = _match_brackets(toks)
    functions: list[_Function] = []
    defs: list[Definition] = []
    # brace block containing each token: (open, close)
    blocks: list[tuple[int, int]] = sorted(
        (i, j) for i, j in match.items() if i < j and toks[i].text == "{"
    )

    def enclosing_block(i: int) -> tuple[int, int]:
        best = (0, n)
        for o, c in blocks:
            if o < i < c and o >= best[0]:
                best = (o, c)
        return best

    # function definitions: name ( ... ) [qualifiers] {
    depth = 0
    for i, t in enumerate(toks):
        if t.text == "{":
            depth += 1
        elif t.text == "}":
            depth -= 1
        if t.kind != "ident" or not _is_call(toks, i) or (i + 1) not in match:
            continue
        close = match[i + 1]
        k = close + 1
        while k < n and toks[k].kind in ("keyword", "ident") and toks[k].text in ("const", "override", "noexcept", "final"):
            k += 1
        if k >= n or toks[k].text != "{" or k not in match:
            continue
        if i > 0 and toks[i - 1].text in ("=", "return", ",", "(", "."):
            continue
        if toks[i].text in KEYWORDS:
            continue
        fn = _Function(t.text, i, t.line, k, match[k], [])
        for pos, (a, b) in enumerate(_split_top_level(toks, i + 2, close, match)):
            names = [m for m in range(a, b) if toks[m].kind == "ident" and not is_type_name(toks[m].text)]
            if b - a < 2 or not names:
                continue
            # the declarator name is the last identifier before any array suffix
            last = names[-1]
            for m in range(a, b):
                if toks[m].text == "[":
                    cands = [x for x in names if x < m]
                    last = cands[-1] if cands else last
                    break
            if last == a:
                continue
            d = Definition(toks[last].text, "variable", toks[last].line, path=unit.path,
                           function=fn.name, scope=(k, match[k]), decl_index=last, param_index=pos)
            fn.params.append(d)
            defs.append(d)
        functions.append(fn)
        defs.append(Definition(t.text, "function", t.line, path=unit.path, scope=(0, n), decl_index=i))

    param_spans = {(f.name_index + 1, match[f.name_index + 1]) for f in functions}

    def in_param_list(i: int) -> bool:
        return any(a < i < b for a, b in param_spans)

    # variable declarations, statement by statement
    i = 0
    stmt_start = True
    while i < n:
        t = toks[i]
        if in_param_list(i):
            i += 1
            continue
        if t.text in (";", "{", "}"):
            stmt_start = True
            i += 1
            continue
        if t.text == "(" and i > 0 and toks[i - 1].text == "for":
            stmt_start = True
            i += 1
            continue
        if not stmt_start:
            i += 1
            continue
        stmt_start = False
        if t.text == "typedef":
            i += 1
            continue
        end = _type_prefix_end(toks, i, n)
        if end is None:
            i += 1
            continue
        # declarators separated by top-level commas until ; or an unmatched )
        k = end
        while k < n:
            while k < n and toks[k].text in ("*", "&", "const"):
                k += 1
            if k >= n or toks[k].kind != "ident":
                break
            if _is_call(toks, k) and toks[k + 1:k + 2] and (k + 1) in match:
                # prototype or function definition, not a variable
                break
            func = None
            scope = enclosing_block(k)
            owner = next((f for f in functions if f.body_open <= k <= f.body_close), None)
            if owner is not None:
                func = owner.name
            defs.append(Definition(toks[k].text, "variable", toks[k].line, path=unit.path,
                                   function=func, scope=scope, decl_index=k))
            k += 1
            while k < n and toks[k].text not in (",", ";", ")", "{", "}"):
                if toks[k].text in _OPEN and k in match:
                    k = match[k]
                k += 1
            if k < n and toks[k].text == ",":
                k += 1
                continue
            break
        i = max(k, i + 1)
        stmt_start = False

    # resolve identifier uses to variable definitions (innermost scope wins)
    var_defs = [d for d in defs if d.kind == "variable"]
    by_name: dict[str, list[Definition]] = {}
    for d in var_defs:
        by_name.setdefault(d.name, []).append(d)
    decl_tokens = {d.decl_index for d in defs}
    resolved: dict[int, Definition] = {}
    for i, t in enumerate(toks):
        if t.kind != "ident" or _is_member(toks, i):
            continue
        if i in decl_tokens:
            d = next(d for d in defs if d.decl_index == i)
            if d.kind == "variable":
                resolved[i] = d
            continue
        best = None
        for d in by_name.get(t.text, ()):
            lo, hi = d.scope
            if d.decl_index < i and lo <= i <= hi:
                if best is None or d.scope[0] > best.scope[0] or (
                    d.scope[0] == best.scope[0] and d.decl_index > best.decl_index
                ):
                    best = d
        if best is not None:
            resolved[i] = best
            if t.line not in best.uses:
                best.uses.append(t.line)

    func_defs = {d.name: d for d in defs if d.kind == "function"}
    for i, t in enumerate(toks):
        d = func_defs.get(t.text)
        if d is not None and i != d.decl_index and t.kind == "ident" and not _is_member(toks, i):
            if t.line >= d.decl_line and t.line not in d.uses and i > d.decl_index:
                d.uses.append(t.line)
    for d in defs:
        d.uses.sort()
    defs.sort(key=lambda d: (d.decl_index, d.kind))
    return _Analysis(unit, functions, defs, resolved, match)


def extract_definitions(unit: SourceUnit) -> list[Definition]:
    """Function and variable definitions of a normalized unit, in source order."""
    return _analyze(unit).defs


# -- call sites --------------------------------------------------------------


def _calls(analysis: _Analysis, names: set[str] | None) -> list[CallSite]:
    toks = analysis.unit.tokens
    match = analysis.match
    out = []
    fn_names = {f.name_index for f in analysis.functions}
    for i, t in enumerate(toks):
        if t.kind != "ident" or not _is_call(toks, i) or i in fn_names:
            continue
        if names is not None and t.text not in names:
            continue
        if (i + 1) not in match:
            continue
        close = match[i + 1]
        groups = []
        for a, b in _split_top_level(toks, i + 2, close, match):
            ids = []
            for m in range(a, b):
                tm = toks[m]
                if tm.kind == "ident" and not _is_member(toks, m) and not _is_call(toks, m):
                    if tm.text not in ids:
                        ids.append(tm.text)
            groups.append(tuple(ids))
        flat: list[str] = []
        for g in groups:
            flat.extend(x for x in g if x not in flat)
        owner = analysis.function_at(i)
        out.append(CallSite(t.text, t.line, flat, owner.name if owner else None,
                            analysis.unit.path, i, tuple(groups)))
    return out


def find_api_calls(unit: SourceUnit, api_list: Iterable[str]) -> list[CallSite]:
    """Call sites whose callee is in ``api_list``, in token (hence line) order."""
    api = set(api_list)
    if not api:
        raise ValueError("api list is empty")
    return _calls(_analyze(unit), api)


# -- slicing -----------------------------------------------------------------


class _Index:
    def __init__(self, units: Sequence[SourceUnit]):
        self.order = {u.path: k for k, u in enumerate(units)}
        self.analyses = {u.path: _analyze(u) for u in units}
        self.callers: dict[str, list[CallSite]] = {}
        for u in units:
            for c in _calls(self.analyses[u.path], None):
                self.callers.setdefault(c.callee, []).append(c)


def _line_facts(an: _Analysis, fn: _Function, upto_line: int):
    """Per line in ``fn`` up to ``upto_line``: (defs declared/assigned there, defs referenced there)."""
    toks = an.unit.tokens
    written: dict[int, set[int]] = {}
    read: dict[int, set[int]] = {}
    lo = fn.name_index
    for i in range(lo, fn.body_close + 1):
        t = toks[i]
        if t.line > upto_line:
            break
        d = an.resolved.get(i)
        if d is None or d.function != fn.name:
            continue
        read.setdefault(t.line, set()).add(id(d))
        if d.decl_index == i:
            written.setdefault(t.line, set()).add(id(d))
    # assignment targets: first resolved variable left of an assignment operator
    for i in range(max(fn.body_open, 0), fn.body_close + 1):
        t = toks[i]
        if t.line > upto_line:
            break
        if t.kind != "punct":
            continue
        if t.text in ASSIGN_OPS:
            j = i - 1
            target = None
            while j > fn.body_open and toks[j].text not in (";", "{", "}", ",", "(") and toks[j].text not in ASSIGN_OPS:
                if j in an.resolved:
                    target = j
                if toks[j].text in (")", "]") and j in an.match:
                    j = an.match[j]
                j -= 1
            if target is not None:
                written.setdefault(toks[target].line, set()).add(id(an.resolved[target]))
        elif t.text in ("++", "--"):
            for j in (i - 1, i + 1):
                if j in an.resolved:
                    written.setdefault(toks[j].line, set()).add(id(an.resolved[j]))
    return written, read


def _slice_function(idx: _Index, an: _Analysis, fn: _Function, seed_tokens: list[int],
                    upto_line: int, include_line: int, depth: int, max_depth: int,
                    stack: tuple[str, ...]) -> list[tuple[str, int]]:
    written, read = _line_facts(an, fn, upto_line)
    by_id = {id(d): d for d in an.resolved.values()}
    work = [id(an.resolved[i]) for i in seed_tokens if i in an.resolved and an.resolved[i].function == fn.name]
    seen: set[int] = set()
    lines: set[int] = {include_line}
    while work:
        did = work.pop()
        if did in seen:
            continue
        seen.add(did)
        for line, ws in written.items():
            if did in ws:
                lines.add(line)
                for other in read.get(line, ()):
                    if other not in seen:
                        work.append(other)

    own = [(an.unit.path, ln) for ln in sorted(lines)]
    params = sorted({by_id[d].param_index for d in seen if by_id[d].param_index is not None})
    if not params or fn.name is None:
        return own

    prefix: list[tuple[str, int]] = []
    sites = sorted(idx.callers.get(fn.name, ()), key=lambda c: (idx.order[c.path], c.index))
    for site in sites:
        if site.function is None or site.function in stack:
            continue
        if depth >= max_depth:
            raise RecursionLimit(fn.name, max_depth)
        can = idx.analyses[site.path]
        caller = next((f for f in can.functions if f.name == site.function and f.body_open <= site.index <= f.body_close), None)
        if caller is None:
            continue
        seeds = _arg_tokens(can, site, params)
        prefix.extend(_slice_function(idx, can, caller, seeds, site.line, site.line,
                                      depth + 1, max_depth, stack + (fn.name,)))
    return prefix + own


def _arg_tokens(an: _Analysis, site: CallSite, positions: Sequence[int]) -> list[int]:
    toks = an.unit.tokens
    close = an.match[site.index + 1]
    parts = _split_top_level(toks, site.index + 2, close, an.match)
    out = []
    for p in positions:
        if p < len(parts):
            a, b = parts[p]
            out.extend(m for m in range(a, b) if m in an.resolved and not _is_call(toks, m))
    return out


def backtrack_slice(site: CallSite, defs=None, units: Sequence[SourceUnit] = (), *,
                    max_depth: int = DEFAULT_MAX_DEPTH, index: _Index | None = None) -> list[tuple[str, int]]:
    """Backward data slice for an API call site as ``(path, line)`` pairs.

    Caller slices come first (outermost caller first), then the lines of the
    call's own function in program order ending with the call line.  ``defs``
    is accepted for interface symmetry; resolution is recomputed from
    ``units`` (or reused from ``index``).
    """
    idx = index or _Index(units)
    an = idx.analyses[site.path]
    fn = next((f for f in an.functions if f.body_open <= site.index <= f.body_close), None)
    if fn is None:
        # top-level code: slice over file scope
        fn = _Function(None, 0, 1, -1, len(an.unit.tokens) - 1, [])
    seeds = _arg_tokens(an, site, range(len(site.arg_groups)))
    raw = _slice_function(idx, an, fn, seeds, site.line, site.line, 0, max_depth, (fn.name,))
    seen = set()
    out = []
    for item in raw:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


# -- gadgets -----------------------------------------------------------------


def assemble_gadget(slice_lines: Sequence[tuple[str, int]], site: CallSite,
                    units: Sequence[SourceUnit], gadget_id: int = 1, *,
                    label: int | None = None, category: str | None = None) -> GadgetRecord:
    if not slice_lines:
        raise ValueError("empty slice")
    by_path = {u.path: u for u in units}
    body: list[str] = []
    for path, line in slice_lines:
        text = by_path[path].line_text(line).strip()
        if text == "" and body and body[-1] == "":
            continue
        body.append(text)
    while len(body) > 1 and body[-1] == "":
        body.pop()
    header = f"{gadget_id} {site.path} {site.callee} {site.line}"
    return GadgetRecord(gadget_id, header, tuple(body), label, "extracted", category)


def load_api_list(path=None) -> set[str]:
    """Read an API list (one identifier per line, ``#`` comments); default list when ``path`` is None."""
    if path is None:
        text = resources.files("gadgetforge").joinpath("data/api_functions.txt").read_text()
    else:
        text = Path(path).read_text()
    names = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            names.add(line)
    return names


def extract_gadgets(sources: Sequence[tuple[str, str]], api_list: Iterable[str], *,
                    label: int | None = None, category: str | None = None, start_id: int = 1,
                    max_depth: int = DEFAULT_MAX_DEPTH) -> list[GadgetRecord]:
    """Run the whole extraction over normalized ``(path, text)`` sources."""
    api = set(api_list)
    units = [SourceUnit.from_text(p, t) for p, t in sources]
    idx = _Index(units)
    records = []
    next_id = start_id
    for u in units:
        for site in _calls(idx.analyses[u.path], api):
            try:
                sl = backtrack_slice(site, None, units, max_depth=max_depth, index=idx)
            except RecursionLimit as exc:
                log.warning("%s:%d: %s; gadget skipped", site.path, site.line, exc)
                continue
            records.append(assemble_gadget(sl, site, units, next_id, label=label, category=category))
            next_id += 1
    return records
