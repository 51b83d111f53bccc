import io
import os
import random
import subprocess
import sys

import pytest

from allowseq.cli import (MAGIC, TraceParseError, iter_trace_file, main,
                          parse_trace, serialize_trace)
from allowseq.construction import shift, shift_instance
from allowseq.engine import FlipStep, new_trace, verify_stream, verify_trace
from allowseq.geom import PointSet, format_points
from allowseq.seqcore import CentredSequence, Flip, Window, identity_sequence
from conftest import five_element_steps, random_trace_material


def run_cli(*argv):
    return main(list(argv))


def five_example_text():
    tr = new_trace(identity_sequence(1, 5), Window(0))
    for step in five_element_steps():
        tr.emit_step(step)
    return serialize_trace(tr)


def test_serialize_parse_round_trip_small():
    text = five_example_text()
    tr = parse_trace(text)
    assert serialize_trace(tr) == text
    assert tr.steps[0] == FlipStep([Flip(1, 2), Flip(4, 5)])


def test_round_trip_with_annotations():
    rec, a, b, c = shift_instance(1, 9)
    shift(rec, a, b, c)
    text = serialize_trace(rec)
    tr = parse_trace(text)
    assert serialize_trace(tr) == text
    assert tr == rec.to_trace()


def test_round_trip_fuzzed(rng):
    for _ in range(60):
        initial, steps = random_trace_material(rng)
        tr = new_trace(initial, Window(0))
        ok_steps = []
        for step in steps:
            try:
                tr.emit_step(step)
                ok_steps.append(step)
            except Exception:
                break
        text = serialize_trace(tr)
        back = parse_trace(text)
        assert serialize_trace(back) == text
        assert back.steps == tuple(ok_steps)


def test_streaming_parse_matches_full_parse(tmp_path):
    text = five_example_text()
    p = tmp_path / "five.txt"
    p.write_text(text)
    with open(p) as fh:
        (window, initial), steps = iter_trace_file(fh)
        rep = verify_stream(initial, window, steps)
    assert rep.reaches_reversal and rep.min_deviation == 0


def test_parse_errors_carry_line_numbers():
    with pytest.raises(TraceParseError) as exc:
        parse_trace("BOGUS\n")
    assert "line 1" in str(exc.value)
    text = five_example_text().replace("S 1 2 4 5", "S 1 2 4", 1)
    with pytest.raises(TraceParseError) as exc:
        parse_trace(text)
    assert "line 4" in str(exc.value)


def test_cmd_verify_five_example(tmp_path, capsys):
    p = tmp_path / "five.txt"
    p.write_text(five_example_text())
    assert run_cli("verify", str(p)) == 0
    out = capsys.readouterr().out
    assert "reaches reversal: yes" in out
    assert "0/1" in out or "min deviation:    0/1" in out
    # strict requires min deviation > t = 0; the example sits at 0
    assert run_cli("verify", str(p), "--strict") == 1


def test_cmd_verify_missing_and_malformed(tmp_path):
    assert run_cli("verify", str(tmp_path / "nope.txt")) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("ALLOWSEQ v1\nt=0 lo=1 hi=3\n1 2\n")
    assert run_cli("verify", str(bad)) == 2
    cut = tmp_path / "cut.txt"
    cut.write_text("ALLOWSEQ v1\nt=0 lo=1 hi=3\n")
    assert run_cli("verify", str(cut)) == 2


def test_cmd_construct_then_verify(tmp_path, capsys):
    out = tmp_path / "tr.txt"
    for stage, extra in (("shift", []), ("reflect", []),
                         ("reflect-mirrored", []),
                         ("step", ["--d", "9", "--k", "1", "--lenient"])):
        code = run_cli("construct", "--stage", stage, "--t",
                       "1" if stage != "step" else "0", *extra,
                       "--out", str(out))
        assert code == 0, (stage, capsys.readouterr())
        assert run_cli("verify", str(out), "--strict") == 0
        capsys.readouterr()


def test_cmd_construct_full_failure(capsys):
    code = run_cli("construct", "--stage", "full", "--t", "0", "--d", "9",
                   "--k", "1", "--machine")
    assert code == 1
    out = capsys.readouterr().out
    assert "failure_stage=balance-gate" in out
    assert "achieved=3/38" in out


def test_cmd_construct_plan(capsys):
    code = run_cli("construct", "--stage", "full", "--t", "1", "--d", "72900",
                   "--k", "72900", "--plan")
    assert code == 0
    out = capsys.readouterr().out
    assert "gate_ok=True" in out


def test_cmd_construct_refusal(capsys):
    code = run_cli("construct", "--stage", "step", "--t", "0", "--d", "9",
                   "--k", "9")
    assert code == 3


def test_max_cells_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ALLOWSEQ_MAX_CELLS", "5")
    code = run_cli("construct", "--stage", "step", "--t", "0", "--d", "9",
                   "--k", "0")
    assert code == 3
    monkeypatch.delenv("ALLOWSEQ_MAX_CELLS")


def test_cmd_search(capsys):
    assert run_cli("search", "--n", "3") == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("3 1/2")
    assert run_cli("search", "--n", "9") == 3
    assert run_cli("search", "--n", "9", "--force") == 0


def test_cmd_points_and_render(tmp_path, capsys):
    pts = tmp_path / "square.pts"
    pts.write_text(format_points(PointSet([(0, 0), (1, 0), (0, 1), (1, 1)])))
    assert run_cli("points", str(pts), "--action", "imbalance") == 0
    out = capsys.readouterr().out
    assert "minimum imbalance: 0" in out

    gp = tmp_path / "gp.pts"
    gp.write_text("0 0\n4 0\n1 3\n3 7\n9 2\n")
    assert run_cli("points", str(gp), "--action", "link") == 0

    assert run_cli("points", str(gp), "--action", "sequence") == 0
    seq_text = capsys.readouterr().out.split("link holds")[-1]
    assert MAGIC in seq_text

    svg = tmp_path / "out.svg"
    assert run_cli("render", str(pts), "--points", "--lines",
                   "--out", str(svg)) == 0
    assert svg.read_text().startswith("<svg")

    tr = tmp_path / "tr.txt"
    tr.write_text(five_example_text())
    assert run_cli("render", str(tr), "--out", str(svg)) == 0
    assert "<polyline" in svg.read_text()

    collinear = tmp_path / "col.pts"
    collinear.write_text("0 0\n1 1\n2 2\n")
    assert run_cli("points", str(collinear), "--action", "link") == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "allowseq.cli", "search",
                           "--n", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("2 0/1")
