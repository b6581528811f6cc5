import json
import shutil
import subprocess
import sys

import pytest

from era import corpus_path
from era.cli import main
from era.frontend import SourceProgram, load
from era.oracle import equivalent, input_sequences
from era.report import Report


@pytest.fixture
def copy(tmp_path):
    def _copy(name):
        dst = tmp_path / (name + ".imp")
        shutil.copy(corpus_path(name), dst)
        return str(dst)
    return _copy


def test_analyze_findings_exit_one(copy, capsys):
    path = copy("loop_findings")
    assert main(["analyze", path]) == 1
    out = capsys.readouterr().out
    assert "%s:14:7: [constant/-] expression y is constant: 1" % path in out
    assert "(*statement is inaccessible*)" in out


def test_analyze_clean_exit_zero(tmp_path, capsys):
    p = tmp_path / "clean.imp"
    p.write_text("VAR x: INTEGER;\nBEGIN\n  READ(x);\n  WRITE(x)\nEND.\n")
    assert main(["analyze", str(p)]) == 0


def test_parse_error_exit_two(tmp_path, capsys):
    p = tmp_path / "bad.imp"
    p.write_text("var x: integer;\nbegin\n  x := ;\nend.\n")
    assert main(["analyze", str(p)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("%s:3:8:" % p)


def test_missing_file_exit_two(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "nope.imp")]) == 2


def test_divergence_exit_three(copy, capsys):
    assert main(["analyze", copy("diverge"), "--no-widening", "--cap", "20"]) == 3
    cap = capsys.readouterr()
    assert cap.err.startswith("era: divergence")
    line = [ln for ln in cap.out.splitlines() if ln.startswith("head grammar sizes")][0]
    sizes = [int(v) for v in line.split(":")[1].split()]
    assert len(sizes) == 20 and sizes == sorted(set(sizes))


def test_divergence_widened_terminates(copy):
    assert main(["analyze", copy("diverge"), "--widening-threshold", "8"]) in (0, 1)


def test_analyze_json_round_trip(copy, capsys):
    main(["analyze", copy("branch_merge"), "--format", "json"])
    data = json.loads(capsys.readouterr().out)
    rep = Report.from_json(data)
    assert rep.to_json() == data
    assert {"id", "line", "col", "unit", "kind", "state"} <= set(data["points"][0])


def test_optimize_writes_file(copy, capsys):
    path = copy("loop_findings")
    assert main(["optimize", path]) == 0
    out_path = path[:-4] + ".opt.imp"
    assert "statements 14 -> 9" in capsys.readouterr().out
    opt = load(SourceProgram.read(out_path))
    orig = load(SourceProgram.read(path))
    assert equivalent(orig, opt, input_sequences(range(-2, 3), 3), cap=2000).ok


def test_optimize_clean_is_byte_identical(tmp_path, capsys):
    p = tmp_path / "clean.imp"
    text = "VAR x: INTEGER;\nBEGIN\n  READ(x);  (* keep me *)\n  WRITE(x)\nEND.\n"
    p.write_text(text)
    out = tmp_path / "o.imp"
    assert main(["optimize", str(p), "-o", str(out)]) == 0
    assert out.read_bytes() == p.read_bytes()


def test_query(copy, capsys):
    assert main(["query", copy("branch_merge"), "--point", "end", "--expr", "i",
                 "--depth", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "{j, a[1]}"
    assert "a[i] = 1" in out


def test_query_bad_point(copy, capsys):
    assert main(["query", copy("branch_merge"), "--point", "77:1", "--expr", "i"]) == 2


def test_dump_state(copy, capsys):
    assert main(["dump-state", copy("branch_merge"), "--point", "3:1:post"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("C1: ")
    assert all(ln[0] == "C" and ": " in ln for ln in out.splitlines())


def test_dump_all_points(copy, capsys):
    assert main(["dump-state", copy("branch_merge")]) == 0
    assert capsys.readouterr().out.startswith("point 0 ")


def test_selftest(capsys):
    assert main(["selftest", "--programs", "5"]) == 0
    assert capsys.readouterr().out.strip() == "5 programs, 0 unsound"


def test_bad_option_values():
    with pytest.raises(SystemExit):
        main(["analyze", "x.imp", "--strict-indefinite", "maybe"])
    with pytest.raises(SystemExit):
        main(["analyze", "x.imp", "--widening-threshold", "0"])


def test_module_entry_point(copy):
    r = subprocess.run([sys.executable, "-m", "era.cli", "analyze", copy("branch_merge")],
                       capture_output=True, text=True)
    assert r.returncode == 1 and "[constant/-]" in r.stdout
