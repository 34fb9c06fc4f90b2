import shutil
import subprocess
import sys

import numpy as np
import pytest

import synth
from layerslang import dataio, ir
from layerslang.cli import EXIT_COMPILE, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from layerslang.engine import model_io

PROGRAM = """\
const { batch = 25 threads = 1 }
data { G [filename="g.bin", binary] }
network g {
  data tr G data ts G
  FI i F h [numnodes=8] F h2 [numnodes=6] FO o [classification]
  i -> h h -> h2 h2 -> o
}
script {
  g.mu = 0.05 g.h.drop = 0.2 g.i.noisesd = 0.05
  g.train(4)
  g.test(G)
  g.testout("out.txt")
  g.save("model.lyrm")
}
"""


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    dataio.write(synth.gaussians(), tmp_path / "g.bin", "binary")
    (tmp_path / "exp.lyr").write_text(PROGRAM)
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("LAYERS_LOG", raising=False)
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def weights(path):
    return {f"{l}.{n}": v for l, ts in model_io.parse(path.read_bytes()) for n, v in ts}


def test_check_clean(workdir, fixtures, capsys):
    assert run("check", fixtures / "n1_fixed.lyr") == EXIT_OK
    out = capsys.readouterr()
    assert out.out == "" and out.err == ""


def test_check_reports_bad_edge(workdir, capsys):
    (workdir / "bad.lyr").write_text(PROGRAM.replace("h2 -> o", "h2 -> o h2 -> h"))
    assert run("check", "bad.lyr") == EXIT_COMPILE
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "E006" in err[0] and err[0].startswith("bad.lyr:")


def test_check_reports_second_parent_of_conv(workdir, capsys):
    (workdir / "bad_edge.lyr").write_text(
        'data { G [filename="g.bin", binary] } network n { data tr G '
        "CI a [nz=1, nr=1, nc=2] CI b [nz=1, nr=1, nc=2] C c [nk=2, kr=1, kc=1] "
        "F f [] FO o [classification] a -> c b -> c c -> f f -> o }")
    assert run("check", "bad_edge.lyr") == EXIT_COMPILE
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "error E006" in err[0]


def test_check_syntax_error(workdir, capsys):
    (workdir / "bad.lyr").write_text(PROGRAM.replace("FI i", "FI i ["))
    assert run("check", "bad.lyr") == EXIT_COMPILE
    assert "bad.lyr:5:" in capsys.readouterr().err


def test_check_prints_warnings(workdir, capsys):
    (workdir / "w.lyr").write_text(
        'data { G [filename="g.bin", binary] } network n { data tr G '
        "CI i [nz=1, nr=1, nc=2] F flat [local] FO o [classification] i -> flat flat -> o }")
    assert run("check", "w.lyr") == EXIT_OK
    assert "W001" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["frob", "x"], ["run"], ["compile", "exp.lyr"],
                                  ["run", "exp.lyr", "--seed", "x"],
                                  ["run", "exp.lyr", "--threads", "0"],
                                  ["check", "missing.lyr"]])
def test_usage_errors(workdir, argv, capsys):
    with pytest.raises(SystemExit) as e:
        sys.exit(main(argv))
    assert e.value.code == EXIT_USAGE


def test_runtime_error_exit(workdir, capsys):
    (workdir / "exp.lyr").write_text(PROGRAM.replace('g.save("model.lyrm")', 'g.load("none")'))
    assert run("run", "exp.lyr") == EXIT_RUNTIME
    assert "runtime error" in capsys.readouterr().err


def test_missing_data_is_compile_error(workdir, capsys):
    (workdir / "g.bin").unlink()
    assert run("run", "exp.lyr") == EXIT_COMPILE
    assert "E011" in capsys.readouterr().err


def test_changed_data_is_runtime_error(workdir, capsys):
    assert run("compile", "exp.lyr", "-o", "exp.lir") == EXIT_OK
    dataio.write(synth.patterns(10), workdir / "g.bin", "binary")
    assert run("run", "exp.lir") == EXIT_RUNTIME
    assert "changed since compilation" in capsys.readouterr().err


def test_malformed_ir(workdir, capsys):
    (workdir / "x.lir").write_text("LAYERS-IR 1\nbogus\n")
    assert run("run", "x.lir") == EXIT_COMPILE
    assert "line 2" in capsys.readouterr().err


def test_run_writes_artifacts(workdir, capsys):
    assert run("run", "exp.lyr") == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("test net g data G cost ")
    log = (workdir / "netparser.log").read_text().splitlines()
    assert log[0] == "# layers run seed 42 threads 1 batch 25"
    assert log[-1] == out.strip()
    assert np.loadtxt(workdir / "out.txt").shape == (200, 2)


def test_run_is_deterministic(workdir):
    for tag in ("a", "b"):
        assert run("run", "exp.lyr", "--seed", 42, "--threads", 1, "--log", f"{tag}.log") == 0
        shutil.move("out.txt", f"{tag}.out")
        shutil.move("model.lyrm", f"{tag}.lyrm")
    for ext in ("log", "out", "lyrm"):
        assert (workdir / f"a.{ext}").read_bytes() == (workdir / f"b.{ext}").read_bytes()


def test_seed_changes_run(workdir):
    run("run", "exp.lyr", "--seed", 1, "--log", "a.log")
    run("run", "exp.lyr", "--seed", 2, "--log", "b.log")
    a = (workdir / "a.log").read_text().splitlines()[1:]
    b = (workdir / "b.log").read_text().splitlines()[1:]
    assert a != b


def test_threads_agree(workdir):
    run("run", "exp.lyr", "--threads", 1, "--log", "t1.log")
    w1 = weights(workdir / "model.lyrm")
    run("run", "exp.lyr", "--threads", 4, "--log", "t4.log")
    w4 = weights(workdir / "model.lyrm")
    assert w1.keys() == w4.keys()
    assert max(np.abs(w1[k] - w4[k]).max() for k in w1) < 1e-9
    assert "threads 4" in (workdir / "t4.log").read_text().splitlines()[0]


def test_compile_then_run_equals_direct_run(workdir):
    sub = workdir / "build"
    sub.mkdir()
    assert run("compile", "exp.lyr", "-o", sub / "exp.lir") == EXIT_OK
    text = (sub / "exp.lir").read_text()
    assert text.startswith(ir.HEADER)
    assert 'file="../g.bin"' in text
    run("run", "exp.lyr", "--log", "direct.log")
    direct = [(workdir / f).read_bytes() for f in ("direct.log", "out.txt", "model.lyrm")]
    run("run", sub / "exp.lir", "--log", "ir.log")
    via_ir = [(workdir / f).read_bytes() for f in ("ir.log", "out.txt", "model.lyrm")]
    assert via_ir == direct


def test_log_precedence(workdir, monkeypatch):
    monkeypatch.setenv("LAYERS_LOG", "env.log")
    run("run", "exp.lyr")
    assert (workdir / "env.log").exists() and not (workdir / "netparser.log").exists()
    run("run", "exp.lyr", "--log", "flag.log")
    assert (workdir / "flag.log").exists()
    (workdir / "c.lyr").write_text(PROGRAM.replace("threads = 1", 'threads = 1 log = "const.log"'))
    run("run", "c.lyr")
    assert (workdir / "const.log").exists()
    run("run", "c.lyr", "--log", "flag2.log")
    assert (workdir / "flag2.log").exists()


def test_graph_dot(workdir, fixtures):
    assert run("graph", fixtures / "n1_fixed.lyr", "--dot", "n1.dot") == EXIT_OK
    dot = (workdir / "n1.dot").read_text()
    assert dot.startswith("digraph")
    assert 'subgraph "cluster_N1"' in dot
    assert dot.count("->") == 18
    assert '"N1.c03" -> "N1.cat"' in dot


def test_fmt_is_canonical(workdir, capsys):
    assert run("fmt", "exp.lyr") == EXIT_OK
    once = capsys.readouterr().out
    (workdir / "f.lyr").write_text(once)
    run("fmt", "f.lyr")
    assert capsys.readouterr().out == once


def test_console_script(workdir):
    exe = shutil.which("layers")
    if exe is None:
        pytest.skip("console script not installed")
    res = subprocess.run([exe, "check", "exp.lyr"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stderr == ""
