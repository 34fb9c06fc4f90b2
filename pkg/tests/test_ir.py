import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

import gen
from layerslang import ir, sema
from layerslang.diagnostics import IRFormatError
from layerslang.parser import parse_source

GOLDEN = Path(__file__).parent / "golden" / "n1_fixed.lir"


def compile_fixture(fixtures, name="n1_fixed.lyr", extra=""):
    exp = parse_source((fixtures / name).read_text() + extra)
    return ir.lower(sema.analyze(exp, base_dir=fixtures))


def compile_generated(seed):
    prog = gen.program(random.Random(seed))
    return ir.lower(sema.analyze(parse_source(prog.render()), data_info=prog.data_info))


def test_empty_script_has_no_actions(fixtures):
    prog = compile_fixture(fixtures)
    assert prog.actions == []


def test_train_action(fixtures):
    prog = compile_fixture(fixtures, extra=" script { N1.train(10) }")
    assert prog.actions == [ir.IRAction("TRAIN", {"net": "N1", "epochs": 10})]


def test_n1_lowering(fixtures):
    prog = compile_fixture(fixtures)
    (net,) = prog.networks
    assert len(net.layers) == 17
    names = [prog.layers[i].name for i in net.order]
    assert set(names[:2]) == {"in", "fin"} and names[-1] == "out"
    # independent DFS: a node is finished only after all its parents
    seen, post = set(), []

    def visit(i):
        if i in seen:
            return
        seen.add(i)
        for p in prog.layers[i].parents:
            visit(p)
        post.append(i)
    for i in net.layers:
        visit(i)
    pos = {i: k for k, i in enumerate(net.order)}
    for i in post:
        assert all(pos[p] < pos[i] for p in prog.layers[i].parents)
    assert sorted(post) == sorted(net.order)


def test_golden_ir(fixtures):
    text = ir.serialize(compile_fixture(fixtures))
    assert text == GOLDEN.read_text()
    assert ir.serialize(compile_fixture(fixtures)) == text


def test_round_trip_n1(fixtures):
    prog = compile_fixture(fixtures, extra=' script { N1.mu = 0.05 N1.out.lambda = 2 '
                                           'N1.train(1) D1.zscore() D1.div(255) N1.test(D1) '
                                           'N1.save("m.lyrm") N1.c1.printkernels("k") '
                                           'train(2, 3, N1) D1.balance = 1 }')
    text = ir.serialize(prog)
    assert ir.deserialize(text) == prog
    assert ir.serialize(ir.deserialize(text)) == text


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_round_trip_fuzzed(seed):
    prog = compile_generated(seed)
    text = ir.serialize(prog)
    back = ir.deserialize(text)
    assert back == prog
    assert all(ch == "\n" or ch.isprintable() for ch in text)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_lowering_injective(a, b):
    pa, pb = gen.program(random.Random(a)), gen.program(random.Random(b))
    ea, eb = parse_source(pa.render()), parse_source(pb.render())
    la = ir.lower(sema.analyze(ea, data_info=pa.data_info))
    lb = ir.lower(sema.analyze(eb, data_info=pb.data_info))
    if la == lb:
        # equal IR only for programs that are the same modulo spans
        assert sema.analyze(ea, data_info=pa.data_info) == \
            sema.analyze(eb, data_info=pb.data_info)


def test_version_mismatch_rejected(fixtures):
    text = ir.serialize(compile_fixture(fixtures)).replace("LAYERS-IR 1", "LAYERS-IR 2", 1)
    with pytest.raises(IRFormatError) as e:
        ir.deserialize(text)
    assert e.value.line == 1


def test_missing_header_rejected():
    with pytest.raises(IRFormatError):
        ir.deserialize("const batch=1\n")


@pytest.mark.parametrize("bad,line", [
    ("layer index=oops", 5),
    ("action FROB net=\"x\"", 5),
    ("const batch=1", 5),
    ("mystery a=1", 5),
    ("data name=\"D\" file", 5),
])
def test_malformed_line_number(bad, line):
    text = "LAYERS-IR 1\n# c\nconst batch=1 threads=1 log=\"l\" log_explicit=false\n\n" + bad
    with pytest.raises(IRFormatError) as e:
        ir.deserialize(text)
    assert e.value.line == line
    assert f"line {line}" in str(e.value)


def test_value_encoding():
    prog = ir.IRProgram(ir.IRConstants(7, 2, "x.log", True))
    prog.actions.append(ir.IRAction("DIV", {"data": "D", "value": 0.1}))
    prog.actions.append(ir.IRAction("ZSCORE", {"data": "D", "ref": None}))
    prog.actions.append(ir.IRAction("JTRAIN", {"nets": [], "epochs": 0, "batches": 1}))
    text = ir.serialize(prog)
    assert "value=0.1\n" in text
    assert "ref=-" in text and "nets=[]" in text
    assert ir.deserialize(text) == prog
