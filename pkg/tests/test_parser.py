import random

import pytest
from hypothesis import given, settings, strategies as st

import gen
from layerslang import ast
from layerslang.diagnostics import LexError, ParseError
from layerslang.lexer import TokenKind as K, tokenize
from layerslang.parser import dump_ast, parse, parse_source

DATA = 'data { D [filename="d.txt"] }'


def net(body, bind="data tr D"):
    return f"{DATA} network n {{ {bind} {body} }}"


def script(body):
    return f"{net('FI i FO o [classification] i -> o')} script {{ {body} }}"


# (production, accepted source, minimally mutated rejected source)
CASES = [
    ("const-batch", f"const {{ batch = 10 }} {DATA}", f"const {{ }} {DATA}"),
    ("const-threads", f"const {{ threads = 2 }} {DATA}", f'const {{ threads = "2" }} {DATA}'),
    ("const-log", f'const {{ log = "x.log" }} {DATA}', f"const {{ log = 5 }} {DATA}"),
    ("const-many", f'const {{ batch = 1 threads = 2 log = "l" }} {DATA}',
     f'const {{ batch 1 threads = 2 log = "l" }} {DATA}'),
    ("const-first", f"const {{ batch = 1 }} {DATA}", f"{DATA} const {{ batch = 1 }}"),
    ("experiment-defs", DATA, ""),
    ("experiment-const-only", f"const {{ batch = 1 }} {DATA}", "const { batch = 1 }"),
    ("datum-filename", 'data { D [filename="x"] }', 'data { D filename="x" }'),
    ("datum-format", 'data { D [filename="x", ascii] }', 'data { D [filename="x" ascii] }'),
    ("datum-binary-first", 'data { D [binary, filename="x"] }', 'data { D [binary,] }'),
    ("datum-many", 'data { D [filename="x"] E [filename="y"] }', "data { }"),
    ("datum-nfile", 'data { D [filename="x"] }', "data { D [filename=x] }"),
    ("datum-name", 'data { D [filename="x"] }', 'data { data [filename="x"] }'),
    ("datum-empty-params", 'data { D [filename="x"] }', "data { D [] }"),
    ("netdata-tr", net("FI i FO o [classification] i -> o"),
     net("FI i FO o [classification] i -> o", bind="")),
    ("netdata-va-ts", net("FI i FO o [classification] i -> o", "data tr D data va D data ts D"),
     net("FI i FO o [classification] i -> o", "data ts D data tr D")),
    ("netdata-id", net("FI i FO o [classification] i -> o"),
     net("FI i FO o [classification] i -> o", "data tr")),
    ("network-name", net("FI i"), f"{DATA} network {{ data tr D FI i }}"),
    ("network-statements", net("FI i"), f"{DATA} network n {{ data tr D }}"),
    ("network-brace", net("FI i"), f"{DATA} network n {{ data tr D FI i"),
    ("layer-FI", net("FI i"), net("FI i []")),
    ("layer-CI", net("CI i [nz=1, nr=2, nc=2]"), net("CI i [nz=1 nr=2, nc=2]")),
    ("layer-CI-crop", net("CI i [nz=1, nr=4, nc=4, cr=2, cc=2]"), net("CI i [nz=1, numnodes=4]")),
    ("layer-CI-empty", net("CI i [nz=1]"), net("CI i []")),
    ("layer-F-reshape", net("F f []"), net("F f")),
    ("layer-F-numnodes", net("F f [numnodes=3]"), net("F f [numnodes]")),
    ("layer-F-local", net("F f [local]"), net("F f [local, numnodes=3]")),
    ("layer-F-value", net("F f [numnodes=3]"), net("F f [numnodes=x]")),
    ("layer-FO-class", net("FO o [classification]"), net("FO o []")),
    ("layer-FO-auto", net("FO o [regression autoencoder]"), net("FO o [regression, autoencoder]")),
    ("layer-FO-param", net("FO o [regression]"), net("FO o [local]")),
    ("layer-C", net("C c [nk=1, kr=3, kc=3, rpad=1, cpad=1, stride=2]"),
     net("C c [nk=1, kr=3, kc=3, sizer=2]")),
    ("layer-C-comma", net("C c [nk=1, kr=3, kc=3]"), net("C c [nk=1, kr=3, kc=3,]")),
    ("layer-MP", net("MP p [sizer=2, sizec=2]"), net("MP p [sizer=2,]")),
    ("layer-MP-param", net("MP p [sizer=2]"), net("MP p [nk=2]")),
    ("layer-CA", net("CA cat"), net("CA cat []")),
    ("layer-name", net("FI i"), net("FI 3")),
    ("layer-kind-case", net("FI i"), net("fi i")),
    ("edge", net("FI i FO o [classification] i -> o"), net("FI i FO o [classification] i -> }")),
    ("edge-arrow", net("FI i FO o [classification] i -> o"), net("FI i FO o [classification] i o")),
    ("edge-qualified", net("FI i FO o [classification] n.i -> n.o"),
     net("FI i FO o [classification] n.i.x -> o")),
    ("edge-half-qualified", net("FI i FO o [classification] n.i -> o"),
     net("FI i FO o [classification] n. -> o")),
    ("amend-net", script("n.mu = 0.1"), script("n.mu 0.1")),
    ("amend-layer", script("n.o.lambda = 2"), script("n.o.lambda = x")),
    ("amend-data", 'data { D [filename="x"] } script { D.balance = 1 }',
     'data { D [filename="x"] } script { D.balance = }'),
    ("amend-param", script("n.o.mu = 1"), script("n.o.numnodes = 1")),
    ("printkernels", script('n.o.printkernels("k.txt")'), script('n.printkernels("k.txt")')),
    ("printkernels-arg", script('n.o.printkernels("k.txt")'), script("n.o.printkernels()")),
    ("jtrain", script("train(1, 2, n)"), script("train(1, n)")),
    ("jtrain-nets", script("train(1, 2, n, n)"), script("train(1, 2, )")),
    ("jtrain-empty", script("train(3, 2)"), script("train(3)")),
    ("train", script("n.train(5)"), script("n.train()")),
    ("test", script("n.test()"), script('n.test("x")')),
    ("test-data", script("n.test(D)"), script("n.test(D, D)")),
    ("save", script('n.save("m")'), script("n.save()")),
    ("load", script('n.load("m")'), script("n.load(D)")),
    ("testout", script('n.testout("o")'), script("n.testout(5)")),
    ("zscore", script("D.zscore()"), script("D.zscore(1)")),
    ("zscore-ref", script("D.zscore(D)"), script("D.zscore(D")),
    ("center", script("D.center()"), script("D.center")),
    ("yuv", script("D.yuv()"), script("D.yuv(D)")),
    ("div", script("D.div(255)"), script("D.div()")),
    ("script-nonempty", script("n.train(1)"), script("")),
    ("script-target", script("n.train(1)"), script("5.train(1)")),
    ("script-order", f"{DATA} script {{ n.train(1) }} network n {{ data tr D FI i }}",
     f"{DATA} script {{ n.train(1) }} network n {{ data tr D FI i }} const {{ batch = 1 }}"),
    ("comments", f"// head\n{DATA} // tail\n", f"// head\n{DATA} / tail\n"),
]


def test_fixture_count():
    assert 2 * len(CASES) >= 80


@pytest.mark.parametrize("name,good,bad", CASES, ids=[c[0] for c in CASES])
def test_accepted(name, good, bad):
    exp = parse_source(good)
    assert isinstance(exp, ast.Experiment)


@pytest.mark.parametrize("name,good,bad", CASES, ids=[c[0] for c in CASES])
def test_rejected(name, good, bad):
    with pytest.raises((ParseError, LexError)):
        parse_source(bad)


@pytest.mark.parametrize("name,good,bad", CASES, ids=[c[0] for c in CASES])
def test_dump_round_trip(name, good, bad):
    exp = parse_source(good)
    assert parse_source(dump_ast(exp)) == exp


def test_n1_verbatim_shape(fixtures):
    exp = parse_source((fixtures / "n1_verbatim.lyr").read_text())
    (network,) = exp.blocks(ast.NetworkDef)
    layers = [s for s in network.statements if isinstance(s, ast.LayerDecl)]
    edges = [s for s in network.statements if isinstance(s, ast.EdgeDecl)]
    assert len(layers) == 17
    assert len(edges) == 18
    cat_parents = [e.src.layer for e in edges if e.dst.layer == "cat"]
    assert cat_parents == ["c03", "c05", "c07"]
    byname = {l.name: l for l in layers}
    assert byname["f0"].params == []
    assert byname["fin"].params is None
    assert byname["c03"].params[0] == ast.LayerParam("nk", 16)


def test_parse_tree_details():
    exp = parse_source(script('n.o.lambda = 0.5 train(2, 3, n) D.div(255) n.test()'))
    acts = exp.blocks(ast.ScriptBlock)[0].actions
    assert acts[0] == ast.Amendment("n", "o", "lambda", 0.5)
    assert acts[1] == ast.JointTrain(2, 3, ["n"])
    assert acts[2] == ast.Div("D", 255)
    assert acts[3] == ast.Test("n", None)


def test_error_reports_expected_and_found():
    with pytest.raises(ParseError) as e:
        parse_source(net("CI i [nz=1 nr=2]"))
    err = e.value
    assert "']'" in err.expected
    assert err.found.lexeme == "nr"
    assert err.span.column == err.found.span.column


def test_error_at_end_of_input():
    with pytest.raises(ParseError) as e:
        parse_source("data { D [filename=\"x\"]")
    assert e.value.found.kind is K.EOF
    assert "end of input" in str(e.value)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_fuzzed_programs_parse_and_round_trip(seed):
    prog = gen.program(random.Random(seed))
    exp = parse_source(prog.render())
    text = dump_ast(exp)
    assert parse_source(text) == exp
    assert dump_ast(parse_source(text)) == text


PUNCT = {K.LBRACE, K.RBRACE, K.LBRACK, K.RBRACK, K.LPAREN, K.RPAREN,
         K.DOT, K.EQ, K.ARROW}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**9))
def test_deleting_punctuation_is_rejected(seed, pick):
    """Every required punctuation token matters: removing any one of them
    must produce a syntax error."""
    toks = tokenize(gen.program(random.Random(seed)).render())
    where = [i for i, t in enumerate(toks) if t.kind in PUNCT]
    i = where[pick % len(where)]
    with pytest.raises(ParseError):
        parse(toks[:i] + toks[i + 1:])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**9))
def test_truncation_is_rejected(seed, pick):
    toks = tokenize(gen.program(random.Random(seed)).render())
    cut = 1 + pick % (len(toks) - 2)
    truncated = toks[:cut] + [toks[-1]]
    try:
        exp = parse(truncated)
    except ParseError:
        return
    # a cut exactly between two top-level blocks leaves a valid prefix
    assert toks[cut - 1].kind is K.RBRACE
    assert isinstance(exp, ast.Experiment)
