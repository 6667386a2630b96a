import io
import math
import subprocess
import sys
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import pytest

from shiftpressure.cli import main

DATA = Path(__file__).resolve().parent.parent / "data"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def header(text):
    h = {}
    for line in text.splitlines():
        if not line:
            break
        k, _, v = line.partition("=")
        h[k] = v
    return h


@pytest.fixture
def files(tmp_path):
    empty = tmp_path / "empty.sft"
    empty.write_text("dim 1\nalphabet 0 1\nforbidden\n(0):0\n(0):1\nend\n")
    ac = tmp_path / "ac.pat"
    ac.write_text("(0):a (1):c\n")
    two = tmp_path / "two.pat"
    two.write_text("(0):1\n(0):0\n")
    return {"empty": empty, "ac": ac, "two": two}


def test_entropy_golden_both_units():
    code, out, _ = run("entropy", "--sft", DATA / "golden.sft", "--precision", "12", "--deterministic")
    h = header(out)
    assert code == 0 and h["units"] == "nats"
    lo, hi = float(h["lo"]), float(h["hi"])
    assert lo <= math.log((1 + 5**0.5) / 2) <= hi
    code, out, _ = run("entropy", "--sft", DATA / "golden.sft", "--precision", "12", "--deterministic",
                       "--units", "bits")
    h = header(out)
    assert h["units"] == "bits"
    assert float(h["lo"]) <= math.log2((1 + 5**0.5) / 2) <= float(h["hi"])


def test_deterministic_reports_repeat():
    argv = ("pressure", "--sft", DATA / "golden.sft", "--potential", DATA / "count_ones_1d.pot",
            "--precision", "10", "--deterministic")
    first, second = run(*argv), run(*argv)
    assert first == second
    assert "elapsed" not in first[1]


def test_pressure_reports_method_and_params():
    code, out, _ = run("pressure", "--sft", DATA / "full2.sft", "--potential", DATA / "single_site_2d.pot",
                       "--precision", "8", "--method", "transfer")
    h = header(out)
    assert code == 0 and h["method"] == "TransferMatrix"
    assert "param.M" in h and "elapsed" in h
    assert float(h["lo"]) <= math.log(1 + math.e) <= float(h["hi"])


def test_hard_squares_sandwich_in_bits():
    code, out, _ = run("pressure", "--sft", DATA / "hard_squares.sft", "--method", "sandwich", "--box-side", "16",
                       "--units", "bits")
    h = header(out)
    assert code == 0 and h["conditional_on"] == "si_gap=1" and h["method"] == "BoxSandwich"
    assert float(h["lo"]) <= 0.5878911617753 <= float(h["hi"])


def test_certified_method_on_golden():
    code, out, _ = run("entropy", "--sft", DATA / "golden.sft", "--method", "certified", "--precision", "6")
    h = header(out)
    assert code == 0 and h["method"] == "BoxSandwich" and h["conditional_on"] == "si_gap=1"
    assert float(h["lo"]) <= math.log((1 + 5**0.5) / 2) <= float(h["hi"])
    assert float(h["width"]) <= 2.0**-6


def test_decide_verdicts(files):
    code, out, _ = run("decide", "--sft", DATA / "golden.sft", "--pattern", DATA / "p101.pat")
    assert code == 0 and header(out)["verdict"].startswith("IN")
    code, out, _ = run("decide", "--sft", DATA / "golden.sft", "--pattern", DATA / "p11.pat")
    assert code == 0 and header(out)["verdict"].startswith("OUT")
    code, out, _ = run("decide", "--sft", DATA / "golden.sft", "--pattern", DATA / "p101.pat",
                       "--max-patterns", "2")
    assert code == 4 and "UNDECIDED" in header(out)["verdict"]


def test_partition_command():
    code, out, _ = run("partition", "--sft", DATA / "hard_squares.sft", "--shape", "box(0..3,0..3)",
                       "--language", "local")
    h = header(out)
    assert code == 0 and float(h["lo"]) <= 1234 <= float(h["hi"])


def test_audit_identity_command():
    code, out, _ = run("audit-identity", "--potential", DATA / "domino_2d.pot", "--M", "1")
    h = header(out)
    assert code == 0 and h["intersect"] == "True"
    code, out, _ = run("pressure", "--sft", DATA / "full2.sft", "--potential", DATA / "single_site_2d.pot",
                       "--audit-identity", "0")
    assert code == 0 and header(out)["intersect"] == "True"


def test_sequence_commands():
    code, out, _ = run("pressure-upper", "--enumeration", DATA / "golden.sft", "--steps", "20")
    h = header(out)
    assert code == 0 and h["method"] == "UpperOnly" and h["lo"] == "-inf"
    assert float(h["hi"]) >= math.log((1 + 5**0.5) / 2)
    rows = out.split("\n\n", 1)[1].strip().splitlines()
    assert rows[0].split("\t")[0] == "step" and len(rows) > 1
    code, out, _ = run("energy-upper", "--sft", DATA / "golden.sft", "--potential", DATA / "count_ones_1d.pot",
                       "--steps", "6")
    assert code == 0 and float(header(out)["hi"]) >= 0.5
    code, out, _ = run("entropy-upper", "--sft", DATA / "golden.sft",
                       "--potential", DATA / "golden_embedding_1d.pot", "--steps", "4")
    assert code == 0 and float(header(out)["hi"]) >= math.log((1 + 5**0.5) / 2) - 1e-12


def test_energy_command():
    code, out, _ = run("energy", "--sft", DATA / "golden.sft", "--potential", DATA / "count_ones_1d.pot",
                       "--epsilon", "1/8")
    h = header(out)
    assert code == 0 and h["param.beta"] == "23"
    assert float(h["lo"]) >= 0.5 - 0.125 and float(h["hi"]) <= 0.5 + 0.125


def test_exit_codes(files):
    assert run("entropy", "--sft", "/nonexistent/x.sft")[0] == 2
    assert run("pressure", "--sft", DATA / "golden.sft", "--potential", DATA / "domino_2d.pot")[0] == 2
    assert run("decide", "--sft", DATA / "golden.sft", "--pattern", files["two"])[0] == 2
    # abc declares no si_gap, so decide refuses it as a usage error
    code, _, err = run("decide", "--sft", DATA / "abc.sft", "--pattern", files["ac"])
    assert code == 2 and "si_gap" in err
    code, _, err = run("partition", "--sft", DATA / "hard_squares.sft", "--shape", "box(0..9,0..9)",
                       "--max-patterns", "10", "--max-states", "2", "--max-edges", "2")
    assert code == 3 and "resource limit" in err
    code, _, err = run("entropy", "--sft", files["empty"])
    assert code == 5 and "empty" in err
    with pytest.raises(SystemExit) as exc:
        run("energy", "--sft", DATA / "golden.sft", "--potential", DATA / "count_ones_1d.pot", "--epsilon", "0")
    assert exc.value.code == 2


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "shiftpressure.cli", "entropy", "--sft", str(DATA / "full3.sft"),
                           "--precision", "6", "--deterministic"], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert header(proc.stdout)["command"] == "entropy"
