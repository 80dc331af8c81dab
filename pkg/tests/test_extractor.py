from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gadgetforge.errors import RecursionLimit, UnterminatedComment
from gadgetforge.extractor import (SourceUnit, assemble_gadget, backtrack_slice, extract_definitions,
                                   extract_gadgets, find_api_calls, load_api_list, normalize_source)

from oracles import INTERPROC, INTERPROC_GRAPH, dependence_closure

SHADOW = """int g = 1;
void f(int y) {
    int x = y;
    x = x + g;
    {
        int x = 2;
        y = x;
    }
    y = x;
}"""


def unit(text, path="a.c"):
    return SourceUnit.from_text(path, normalize_source(text))


# -- normalization -------------------------------------------------------------


@pytest.mark.parametrize("src,want", [
    ("int a; // note", "int a; "),
    ("x = /*k*/ 1;", "x =  1;"),
    ('s = "/*not a comment*/";', 's = "/*not a comment*/";'),
    ("c = '/'; // x", "c = '/'; "),
    ("a = 1; /* two\nlines */ b = 2;", "a = 1; \n b = 2;"),
    ("café = 1;", "caf = 1;"),
    ('s = "a\\"//b"; // tail', 's = "a\\"//b"; '),
])
def test_normalize_examples(src, want):
    assert normalize_source(src) == want


def test_unterminated_comment_line():
    with pytest.raises(UnterminatedComment) as exc:
        normalize_source("int a;\nint b; /* open\n")
    assert exc.value.line == 2


_pieces = st.lists(st.sampled_from([
    "a", " ", "\n", "/", "*", '"', "'", "\\", "//", "/*", "*/", "x = 1;", '"s/*"', "'/'", "é", "\t",
]), max_size=30)


@settings(max_examples=300)
@given(_pieces)
def test_normalize_idempotent_and_shrinking(parts):
    text = "".join(parts)
    try:
        once = normalize_source(text)
    except UnterminatedComment:
        return
    assert normalize_source(once) == once
    assert len(once) <= len(text)
    assert all(ord(c) < 0x80 for c in once)


# -- definitions and calls -------------------------------------------------------


def test_simple_definition():
    (d,) = [d for d in extract_definitions(unit("int x;\nx = 1;")) if d.name == "x"]
    assert (d.kind, d.decl_line, d.uses) == ("variable", 1, [2])


def test_function_uses():
    defs = {d.name: d for d in extract_definitions(unit("void f(){}\nvoid g(){ f(); }"))}
    assert defs["f"].kind == "function" and defs["f"].uses == [2]


def test_shadowing_matches_hand_scope_table():
    # hand-resolved: name -> (decl line, use lines)
    oracle = {
        ("g", 1): [4],
        ("f", 2): [],
        ("y", 2): [3, 7, 9],
        ("x", 3): [4, 9],
        ("x", 6): [7],
    }
    defs = extract_definitions(unit(SHADOW))
    assert {(d.name, d.decl_line): d.uses for d in defs} == oracle
    for d in defs:
        assert all(d.decl_line <= u for u in d.uses)


def test_find_api_calls():
    (c,) = find_api_calls(unit("void f(char *src){ char buf[4];\nstrcpy(buf, src);\n}"), {"strcpy"})
    assert (c.callee, c.line, c.arguments) == ("strcpy", 2, ["buf", "src"])
    assert find_api_calls(unit("void f(){ memcpy(a,b,n); }"), {"strcpy"}) == []
    (n,) = find_api_calls(unit("void f(){ strcpy(buf, get(src)); }"), {"strcpy"})
    assert n.arguments == ["buf", "src"]


@given(st.lists(st.sampled_from(["strcpy", "memcpy", "foo", "free", "bar"]), max_size=8),
       st.sets(st.sampled_from(["strcpy", "memcpy", "free"]), min_size=1))
def test_calls_subset_of_api(callees, api):
    body = "\n".join(f"{c}(a, b);" for c in callees)
    calls = find_api_calls(unit("void f(char *a, char *b) {\n" + body + "\n}"), api)
    assert all(c.callee in api for c in calls)
    assert [c.callee for c in calls] == [c for c in callees if c in api]


# -- slicing -------------------------------------------------------------------------


def test_single_function_slice():
    u = unit("char b[8];\nchar*s=x;\nstrcpy(b,s);")
    (site,) = find_api_calls(u, {"strcpy"})
    assert [ln for _, ln in backtrack_slice(site, None, [u])] == [1, 2, 3]


def test_unrelated_line_excluded():
    u = unit("char b[8];\nchar*s=x;\nint k=0;\nstrcpy(b,s);")
    (site,) = find_api_calls(u, {"strcpy"})
    assert [ln for _, ln in backtrack_slice(site, None, [u])] == [1, 2, 4]


def test_interprocedural_slice_matches_dependence_graph():
    u = unit(INTERPROC)
    (site,) = find_api_calls(u, {"strcpy"})
    sl = backtrack_slice(site, None, [u])
    assert {ln for _, ln in sl} == dependence_closure(INTERPROC_GRAPH, 4)
    assert sl == [("a.c", n) for n in (7, 8, 10, 11, 1, 3, 4)]


def test_two_file_slice_orders_caller_file_first():
    callee = unit("void copy(char *dst, char *src) {\n    strcpy(dst, src);\n}\n", "lib.c")
    caller = unit("int main(void) {\n    char b[4];\n    char *s = \"x\";\n    copy(b, s);\n}\n", "main.c")
    (site,) = find_api_calls(callee, {"strcpy"})
    sl = backtrack_slice(site, None, [callee, caller])
    assert sl == [("main.c", 2), ("main.c", 3), ("main.c", 4), ("lib.c", 1), ("lib.c", 2)]
    g = assemble_gadget(sl, site, [callee, caller], 9)
    assert g.header == "9 lib.c strcpy 2"
    assert g.body[0] == "char b[4];" and g.body[-1] == "strcpy(dst, src);"
    assert g.label is None


def test_assemble_three_lines():
    u = unit("char b[8];\nchar*s=x;\nstrcpy(b,s);")
    (site,) = find_api_calls(u, {"strcpy"})
    g = assemble_gadget(backtrack_slice(site, None, [u]), site, [u], 1)
    assert g.header.endswith("strcpy 3") and len(g.body) == 3


def test_recursion_limit():
    src = "void r(char *s, int n) {\n    if (n) r(s, n - 1);\n    strcpy(buf, s);\n}\n"
    u = unit(src)
    site = find_api_calls(u, {"strcpy"})[0]
    # a self-recursive caller is a cycle, not unbounded depth
    backtrack_slice(site, None, [u])
    chain = "".join(f"void f{k}(char *s) {{ f{k + 1}(s); }}\n" for k in range(12))
    chain += "void f12(char *s) { strcpy(b, s); }\n"
    u2 = unit(chain)
    site2 = find_api_calls(u2, {"strcpy"})[0]
    with pytest.raises(RecursionLimit):
        backtrack_slice(site2, None, [u2], max_depth=8)
    assert backtrack_slice(site2, None, [u2], max_depth=20)


def test_extract_gadgets_deterministic():
    api = load_api_list()
    assert {"strcpy", "memcpy", "free"} <= api
    srcs = [("a.c", normalize_source(INTERPROC))]
    a = extract_gadgets(srcs, api, label=1, category="BE")
    b = extract_gadgets(srcs, api, label=1, category="BE")
    assert a == b and len(a) == 1
    assert a[0].category == "BE" and a[0].label == 1
