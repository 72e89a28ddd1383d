import json
import os
import subprocess
import sys

import pytest

import oracles
from conftest import PROGRAMS, ROOT
from pico.cli import main
from pico.io import LineServer

NEGATIVE = sorted((PROGRAMS / "negative").glob("*.pico"))


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_check_word_count(capsys):
    assert main(["check", str(PROGRAMS / "word_count.pico")]) == 0
    assert capsys.readouterr().out == "file-word-count : ∅ → ∅\n"


def test_check_all_lists_every_pipeline(capsys):
    assert main(["check", "--all", str(PROGRAMS / "word_count.pico")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "word-count : <str, σ> → <(str, int), σ>, ∀σ ∈ Σ" in out
    assert out[-1] == "file-word-count : ∅ → ∅"


def test_fragment_is_rejected(capsys):
    assert main(["check", str(PROGRAMS / "word_count_fragment.pico")]) == 2
    err = capsys.readouterr().err
    assert "top-level" in err and "word_count_fragment.pico" in err


@pytest.mark.parametrize("path", NEGATIVE, ids=lambda p: p.stem)
def test_negative_programs_exit_2(path, capsys):
    assert main(["check", str(path)]) == 2
    assert capsys.readouterr().err.startswith(str(path) + ":")


def test_syntax_error_exits_2(tmp_path, capsys):
    p = write(tmp_path, "bad.pico", "p = new map\n")
    assert main(["check", str(p)]) == 2
    assert "bad.pico:1:" in capsys.readouterr().err


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main([]) == 1
    assert main(["check", str(tmp_path / "missing.pico")]) == 1
    assert main(["run", str(PROGRAMS / "word_count.pico")]) == 1  # in/out never bound
    assert "not bound" in capsys.readouterr().err
    assert main(["run", str(PROGRAMS / "word_count.pico"), "--in", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 1
    assert main(["run", str(PROGRAMS / "word_count.pico"), "--file", "oops"]) == 1
    assert main(["graph", str(PROGRAMS / "word_count.pico"), "--pipeline", "nope"]) == 1
    assert main(["--help"]) == 0


def test_runtime_error_exits_3(tmp_path, capsys):
    prog = write(tmp_path, "div.pico", 'p = new from-file "x.txt" as list of int | new map (\\x. 1 / x) | new to-stdout as list of int\n')
    write(tmp_path, "x.txt", "1\n0\n")
    assert main(["run", str(prog)]) == 3
    err = capsys.readouterr().err
    assert err.startswith("%s: runtime error at map:" % prog)


def test_run_word_count(tmp_path):
    text = "the cat and the hat\nand the bat\n\n  spaced   out  \n"
    src = write(tmp_path, "in.txt", text)
    out, report = tmp_path / "counts.txt", tmp_path / "report.json"
    rc = main(["run", str(PROGRAMS / "word_count.pico"), "--in", str(src), "--out", str(out), "--emit-report", str(report)])
    assert rc == 0
    got = {}
    for line in out.read_text(encoding="utf-8").splitlines():
        w, n = line[1:-1].rsplit(",", 1)
        got[json.loads(w)] = int(n)
    assert got == oracles.word_count(text)
    rep = json.loads(report.read_text(encoding="utf-8"))
    assert rep["structure"] == "bag"
    assert rep["edges"]["keyed-sum -> file-write"] == len(got)
    assert rep["sinks"]["file-write"]["items"] == len(got)


def test_runs_are_byte_identical(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / ("o%d.replay" % i)
        assert main(["run", str(PROGRAMS / "stock_stats.pico"), "--replay", "min-out=%s" % out,
                     "--replay", "max-out=%s" % (tmp_path / "mx"), "--replay", "mean-out=%s" % (tmp_path / "mn")]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] and outs[0]


def test_graph_dot(tmp_path, capsys):
    assert main(["graph", str(PROGRAMS / "word_count.pico")]) == 0
    printed = capsys.readouterr().out
    dot = tmp_path / "g.dot"
    assert main(["graph", str(PROGRAMS / "word_count.pico"), "--dot", str(dot)]) == 0
    assert dot.read_text(encoding="utf-8") == printed
    assert printed.startswith('digraph "file-word-count" {')
    assert main(["graph", str(PROGRAMS / "word_count.pico"), "--pipeline", "word-count"]) == 0
    assert '"tokenize" -> "keyed-sum";' in capsys.readouterr().out


def test_sockets_end_to_end(tmp_path):
    prog = write(
        tmp_path,
        "sock.pico",
        "src = from-socket feed as stream of str\n"
        "dst = to-socket sink as stream of (str, int)\n"
        "count = p (fold-reduce (\\a w. (w, pi2 a + 1)) (\"\", 0) (\\a b. (pi1 a, pi2 a + pi2 b))) by (\\w. w)\n"
        "p = new src | new flatmap (\\l. split l) | new count | new dst\n",
    )
    with LineServer(["a b", "b c", "c c"]) as feed, LineServer() as sink:
        rc = main(["run", str(prog), "--socket", "feed=" + feed.address, "--socket", "sink=" + sink.address])
        sink.wait()
    assert rc == 0
    assert sorted(sink.received) == ['("a",1)', '("b",2)', '("c",3)']


def test_batch_flag_and_nondeterministic_merge(tmp_path):
    prog = write(
        tmp_path,
        "m.pico",
        'a = from-replay "a.replay" as stream of int\n'
        'b = from-replay "b.replay" as stream of int\n'
        "p = new a + new b | new map (\\x. x * 2) | new to-file out as stream of int\n",
    )
    write(tmp_path, "a.replay", "0\t1\n2\t3\n")
    write(tmp_path, "b.replay", "1\t2\n3\t4\n")
    out = tmp_path / "o.txt"
    assert main(["run", str(prog), "--out", str(out), "--batch", "1"]) == 0
    assert out.read_text() == "2\n4\n6\n8\n"
    assert main(["run", str(prog), "--out", str(out), "--nondeterministic-merge", "--batch", "3"]) == 0
    assert sorted(out.read_text().split()) == ["2", "4", "6", "8"]
    assert main(["run", str(prog), "--out", str(out), "--batch", "0"]) == 1


def test_module_entry_point():
    env = dict(os.environ, PYTHONPATH=str(ROOT / "src"))
    r = subprocess.run([sys.executable, "-m", "pico", "check", str(PROGRAMS / "word_count_fragment.pico")],
                       env=env, capture_output=True, text=True)
    assert r.returncode == 2
