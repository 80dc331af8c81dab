"""A small C/C++ token scanner.

Good enough for identifiers, calls and line relations; it does not expand
macros and drops preprocessor directives entirely.
"""

from __future__ import annotations

import re
from typing import NamedTuple

KEYWORDS = frozenset("""
    auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Bool _Complex bool true false class namespace template typename this new
    delete public private protected virtual operator friend using try catch
    throw nullptr const_cast static_cast dynamic_cast reinterpret_cast explicit
    mutable wchar_t
""".split())

TYPE_KEYWORDS = frozenset("""
    char double float int long short signed unsigned void _Bool bool wchar_t
    const volatile static extern register auto struct union enum class
    restrict inline mutable
""".split())

STD_TYPES = frozenset("""
    size_t ssize_t ptrdiff_t intptr_t uintptr_t off_t FILE wint_t
    int8_t int16_t int32_t int64_t uint8_t uint16_t uint32_t uint64_t
    string wstring va_list time_t pid_t DIR errno_t
""".split())

_PUNCT = sorted(
    """... <<= >>= -> ++ -- << >> <= >= == != && || += -= *= /= %= &= |= ^= ::
    ## { } [ ] ( ) ; : , . ? ~ ! + - * / % & | ^ = < > #""".split(),
    key=len,
    reverse=True,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>\.?[0-9](?:[eEpP][+-]|[A-Za-z0-9_.])*)
  | (?P<string>L?"(?:\\.|[^"\\\n])*"?)
  | (?P<char>L?'(?:\\.|[^'\\\n])*'?)
  | (?P<punct>"""
    + "|".join(re.escape(p) for p in _PUNCT)
    + r""")
  | (?P<other>\S)
    """,
    re.VERBOSE,
)

# library macros and objects that are never user-defined
STD_NAMES = frozenset("""
    NULL EOF stdin stdout stderr errno BUFSIZ FILENAME_MAX SIZE_MAX INT_MAX
    INT_MIN UINT_MAX LONG_MAX CHAR_BIT RAND_MAX EXIT_SUCCESS EXIT_FAILURE main
    std cout cin cerr endl
""".split())

ASSIGN_OPS = frozenset("= += -= *= /= %= &= |= ^= <<= >>=".split())


class Token(NamedTuple):
    kind: str  # ident | keyword | literal | punct
    text: str
    line: int  # 1-based
    col: int  # 0-based offset within the line


def _directive_lines(lines: list[str]) -> set[int]:
    skip = set()
    cont = False
    for i, line in enumerate(lines):
        if cont or line.lstrip().startswith("#"):
            skip.add(i)
            cont = line.rstrip().endswith("\\")
        else:
            cont = False
    return skip


def tokenize_line(line: str, lineno: int = 1) -> list[Token]:
    toks = []
    for m in _TOKEN_RE.finditer(line):
        kind = m.lastgroup
        text = m.group()
        if kind == "ident":
            kind = "keyword" if text in KEYWORDS else "ident"
        elif kind in ("number", "string", "char"):
            kind = "literal"
        else:
            kind = "punct"
        toks.append(Token(kind, text, lineno, m.start()))
    return toks


def tokenize(text: str, *, keep_directives: bool = False) -> list[Token]:
    lines = text.split("\n")
    skip = set() if keep_directives else _directive_lines(lines)
    out: list[Token] = []
    for i, line in enumerate(lines):
        if i not in skip:
            out.extend(tokenize_line(line, i + 1))
    return out


def is_type_name(text: str) -> bool:
    return text in TYPE_KEYWORDS or text in STD_TYPES or text.endswith("_t")
