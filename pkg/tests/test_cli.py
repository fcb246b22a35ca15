import subprocess
import sys
from pathlib import Path

import pytest

from conftest import FIXTURES
from hopdr.automata import parse_automaton
from hopdr.cli import EXIT_INPUT, EXIT_OK, EXIT_REJECTED, EXIT_UNSUPPORTED, main
from hopdr.stores import parse_configuration

GOLDEN = Path(__file__).parent / "golden"
F = str(FIXTURES)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_member_accepts(capsys):
    assert run(capsys, "member", f"{F}/allops_a0.aut", "p1 [[a b][a]]") == (EXIT_OK, "yes\n", "")


def test_member_rejects(capsys):
    assert run(capsys, "member", f"{F}/allops_a0.aut", "p1 [[a]]") == (EXIT_REJECTED, "no\n", "")


def test_member_undefined_store(capsys):
    assert run(capsys, "member", f"{F}/branch_case5.aut", "p5 UNDEF")[:2] == (EXIT_OK, "yes\n")
    assert run(capsys, "member", f"{F}/branch_case5.aut", "p4 UNDEF")[:2] == (EXIT_REJECTED, "no\n")


def test_prestar_golden_with_trace_and_dot(capsys, tmp_path):
    trace, dot = tmp_path / "trace.txt", tmp_path / "out.dot"
    code, out, _ = run(capsys, "prestar", "--system", f"{F}/allops_system.txt", "--targets", f"{F}/allops_a0.aut",
                       "--trace", str(trace), "--dot", str(dot))
    assert code == EXIT_OK
    assert out == (GOLDEN / "allops_prestar.aut").read_text()
    assert trace.read_text() == (GOLDEN / "allops_trace.txt").read_text()
    assert dot.read_text().startswith("digraph automaton {")


def test_prestar_output_file_round_trips(capsys, tmp_path):
    out = tmp_path / "a.aut"
    code, stdout, _ = run(capsys, "prestar", "--system", f"{F}/branch_system.txt",
                          "--targets", f"{F}/branch_case2.aut", "--out", str(out))
    assert code == EXIT_OK and stdout == ""
    A = parse_automaton(out.read_text())
    c = parse_configuration("p1 [[a]]", 2)
    assert A.accepts_config(c.control, c.store)


def test_game_reads_target_line(capsys):
    code, out, _ = run(capsys, "game", "--system", f"{F}/game_system.txt")
    assert code == EXIT_OK and out.startswith("order 2")


def test_dot_golden(capsys):
    assert run(capsys, "dot", f"{F}/allops_a0.aut")[1] == (GOLDEN / "allops_a0.dot").read_text()


def test_oracle_lists_members_and_poisoning(capsys):
    code, out, _ = run(capsys, "oracle", "--system", f"{F}/branch_system.txt",
                       "--targets", f"{F}/branch_case2.aut", "--bound", "1,1")
    assert code == EXIT_OK
    assert out == "p1 [[a]]\np2 [[b]]\np3 [[c]]\n# poisoned: 0\n"


def test_oracle_sample_is_seeded(capsys):
    args = ["oracle", "--system", f"{F}/allops_system.txt", "--targets", f"{F}/allops_a0.aut",
            "--bound", "2,2", "--sample", "3", "--seed", "9"]
    first = run(capsys, *args)[1]
    assert first == run(capsys, *args)[1]
    assert len(first.splitlines()) == 4


def test_oracle_forward_mode(capsys):
    code, out, _ = run(capsys, "oracle", "--system", f"{F}/branch_system.txt", "--mode", "forward",
                       "--depth", "1", "p1 [[a]]")
    assert code == EXIT_OK
    assert "{p2 [[b]], p3 [[c]]}" in out and out.endswith("# sets: 2\n")


@pytest.mark.parametrize("mode,extra", [
    ("buchi", []),
    ("game", []),
    ("mucheck", ["--formula", f"{F}/mu_ef.txt"]),
])
def test_oracle_application_modes(capsys, mode, extra):
    system = {"buchi": "buchi_system.txt", "game": "game_system.txt", "mucheck": "mu_system.txt"}[mode]
    code, out, _ = run(capsys, "oracle", "--system", f"{F}/{system}", "--mode", mode, "--bound", "2,2", *extra)
    assert code == EXIT_OK and "# poisoned:" in out


def test_buchi_and_complement(capsys):
    code, out, _ = run(capsys, "buchi", "--system", f"{F}/buchi_system.txt")
    assert code == EXIT_OK
    code, comp, _ = run(capsys, "buchi", "--system", f"{F}/buchi_system.txt", "--complement")
    assert code == EXIT_OK and comp != out


def test_mucheck_literal_formula(capsys):
    code, out, _ = run(capsys, "mucheck", "--system", f"{F}/mu_system.txt", "--formula", "(prop pi)")
    A = parse_automaton(out)
    assert code == EXIT_OK
    assert A.accepts_config("p1", parse_configuration("p1 [[a _bot]]", 2).store)
    assert not A.accepts_config("p2", parse_configuration("p2 [[a _bot]]", 2).store)


@pytest.mark.parametrize("argv", [
    ["prestar", "--system", "/no/such/file"],
    ["prestar", "--system", f"{F}/allops_system.txt"],
    ["member", f"{F}/allops_a0.aut", "o [[a"],
    ["oracle", "--system", f"{F}/allops_system.txt", "--targets", f"{F}/allops_a0.aut", "--bound", "x"],
    ["oracle", "--system", f"{F}/allops_system.txt", "--targets", f"{F}/allops_a0.aut", "--bound", "1,2,3"],
    ["mucheck", "--system", f"{F}/mu_system.txt", "--formula", "(mu X (not X))"],
    ["mucheck", "--system", f"{F}/mu_system.txt"],
    ["game", "--system", f"{F}/allops_system.txt", "--targets", f"{F}/allops_a0.aut"],
    ["oracle", "--system", f"{F}/branch_system.txt", "--mode", "forward"],
    ["dot"],
    ["frobnicate"],
])
def test_input_errors_exit_two(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_INPUT
    assert out == ""


def test_input_error_message_on_stderr(capsys):
    _, _, err = run(capsys, "member", f"{F}/allops_a0.aut", "o [[a")
    assert err.startswith("hopdr: error:")


def test_order_three_is_unsupported(capsys, tmp_path):
    sysfile = tmp_path / "s.txt"
    sysfile.write_text("order 3\nalphabet a\ncontrols p\np a : push3 -> p\n")
    aut = tmp_path / "a.aut"
    aut.write_text("order 3\nalphabet a\nlevel 1\nlevel 2\nlevel 3\nstate q\ntop\ninitial p=q\n")
    code, _, err = run(capsys, "prestar", "--system", str(sysfile), "--targets", str(aut))
    assert code == EXIT_UNSUPPORTED and "unsupported" in err


def test_installed_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hopdr.cli", "member", f"{F}/allops_a0.aut", "p1 [[a b][a]]"],
                          capture_output=True, text=True)
    assert (proc.returncode, proc.stdout) == (EXIT_OK, "yes\n")


@pytest.mark.parametrize("command,extra", [
    ("mucheck", ["--system", f"{F}/mu_system.txt", "--formula", f"{F}/mu_free.txt"]),
    ("game", ["--system", f"{F}/game_system.txt"]),
    ("buchi", ["--system", f"{F}/buchi_system.txt"]),
])
def test_application_outputs_parse_back(capsys, tmp_path, command, extra):
    out = tmp_path / "r.aut"
    assert run(capsys, command, *extra, "--out", str(out))[0] == EXIT_OK
    code, answer, _ = run(capsys, "member", str(out), "p2 [[_bot]]")
    assert code in (EXIT_OK, EXIT_REJECTED) and answer in ("yes\n", "no\n")
