import subprocess
import sys

import pytest

from conftest import FIXTURES
from potsys.cli import main

GOLDEN = FIXTURES / "golden"


def _run(*args):
    return subprocess.run([sys.executable, "-m", "potsys.cli", *map(str, args)],
                          capture_output=True, text=True, check=False)


@pytest.mark.parametrize("name", ["wave", "diffusion", "convection"])
@pytest.mark.parametrize("kind", ["text", "machine"])
def test_golden_reports(name, kind, capsys):
    code = main(["all", str(FIXTURES / f"{name}.pot"), "--report", kind,
                 "--golden", str(GOLDEN / f"{name}.{kind}.txt")])
    assert code == 0, capsys.readouterr().err


@pytest.mark.parametrize("command", ["verify", "canonicalize", "generate", "symmetries"])
def test_subcommands_pass(command, capsys):
    assert main([command, str(FIXTURES / "diffusion.pot")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("potsys report format 1\n")


def test_verification_failure_exit_code(tmp_path, capsys):
    text = (FIXTURES / "diffusion.pot").read_text().replace('X = "-A(u)*u_x"', 'X = "0"')
    path = tmp_path / "bad.pot"
    path.write_text(text)
    assert main(["verify", str(path)]) == 1
    out = capsys.readouterr().out
    assert "mass.divergence  [FAIL]" in out and "residual" in out


def test_input_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.pot"
    path.write_text('format = 1\nname = "bad"\nequation {\n  lead = "u_t"\n  rhs = "B(u)"\n}\n')
    assert main(["verify", str(path)]) == 2
    assert "undeclared function B" in capsys.readouterr().err
    assert main(["verify", str(tmp_path / "missing.pot")]) == 2
    assert main(["bogus", str(path)]) == 2


def test_golden_mismatch(tmp_path, capsys):
    golden = tmp_path / "golden.txt"
    golden.write_text("something else\n")
    assert main(["verify", str(FIXTURES / "diffusion.pot"), "--golden", str(golden)]) == 1
    assert "---" in capsys.readouterr().err


def test_depth_flag(tmp_path, capsys):
    path = tmp_path / "deep.pot"
    path.write_text('format = 1\nname = "deep"\nequation {\n  lead = "u_tt"\n  rhs = "u_xx"\n}\n'
                    'conserved_vector {\n  name = "d"\n  T = "u_tt"\n  X = "-u_tx"\n}\n')
    assert main(["verify", str(path)]) == 0
    capsys.readouterr()
    assert main(["verify", str(path), "--depth", "0"]) == 1
    assert "exceeded depth bound 0" in capsys.readouterr().out


def test_claim_fields_are_flagged_not_failed(capsys):
    assert main(["symmetries", str(FIXTURES / "wave.pot"), "--report", "machine"]) == 0
    out = capsys.readouterr().out
    assert "g3.expect.status = flag" in out
    assert "summary.fail = 0" in out


def test_machine_report_is_byte_stable_across_processes():
    a = _run("all", FIXTURES / "diffusion.pot", "--report", "machine")
    b = _run("all", FIXTURES / "diffusion.pot", "--report", "machine")
    assert a.returncode == 0 and a.stdout == b.stdout
