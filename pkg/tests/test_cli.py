from pathlib import Path

import pytest

from detffsim import cli
from detffsim.netlist import parse_netlist

FIXTURES = Path(__file__).parent / "fixtures"


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_inverter_step(tmp_path, capsys):
    out = tmp_path / "inv.vcd"
    code, text, _ = run(["simulate", "--netlist", FIXTURES / "inverter.sp", "--stimulus", FIXTURES / "step.stim",
                         "--out", out, "--duration", "5ns"], capsys)
    assert code == 0
    vcd = out.read_text()
    q_id = [ln.split()[3] for ln in vcd.splitlines() if ln.endswith(" q $end")][0]
    changes = [ln for ln in vcd.split("$enddefinitions $end\n")[1].split("$end\n")[-1].splitlines()
               if ln[1:] == q_id]
    assert changes == [f"1{q_id}", f"0{q_id}"]  # X to 1 on the first input value, then the one step down
    assert "wrote" in text


def test_simulate_builtin_inverter(tmp_path, capsys):
    stim = tmp_path / "a.stim"
    stim.write_text("at 0ns a = 0\nat 1ns a = 1\n")
    code, text, _ = run(["simulate", "--cell", "inverter", "--stimulus", stim, "--out", tmp_path / "o.vcd",
                         "--duration", "2ns"], capsys)
    assert code == 0
    row = [ln.split() for ln in text.splitlines() if ln.startswith("y ")][0]
    assert row[1] == "1"


def test_simulate_uncovered_input(tmp_path, capsys):
    stim = tmp_path / "bad.stim"
    stim.write_text("at 0ns clk = 0\n")
    code, _, err = run(["simulate", "--cell", "detff_proposed", "--stimulus", stim,
                        "--out", tmp_path / "x.vcd"], capsys)
    assert code == 1
    assert "'d'" in err or " d" in err


def test_simulate_testbench_deterministic(tmp_path, capsys):
    outs = []
    for name in ("a.vcd", "b.vcd"):
        code, text, _ = run(["simulate", "--cell", "detff_proposed", "--testbench", "paper-sec3",
                             "--out", tmp_path / name], capsys)
        assert code == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    assert "26/26 settled edges match" in text


def test_characterize(tmp_path, capsys):
    csv = tmp_path / "row.csv"
    code, text, _ = run(["characterize", "--cell", "detff_proposed", "--testbench", "paper-sec3",
                         "--csv", csv], capsys)
    assert code == 0
    assert "clock network 4.0500 uW" in text
    assert "clk-to-Q: min 135 ps" in text
    assert csv.read_text().startswith("name,avg_power_uw")


def test_characterize_currents_add(capsys):
    _, base, _ = run(["characterize", "--cell", "detff_proposed"], capsys)
    _, more, _ = run(["characterize", "--cell", "detff_proposed", "--isc", "1uA", "--ileak", "0.5uA"], capsys)

    def total(text):
        return float([ln for ln in text.splitlines() if ln.startswith("total")][0].split()[-2])

    assert total(more) - total(base) == pytest.approx(2.7, abs=1e-3)


def test_characterize_constant_d_fails(capsys):
    code, text, err = run(["characterize", "--cell", "detff_proposed", "--testbench", "const1"], capsys)
    assert code == 1
    assert "data path 0.0000 uW" in text
    assert "never switches" in err


def test_verify_detff_passes(capsys):
    code, text, _ = run(["verify", "--cell", "detff_proposed", "--oracle", "detff", "--cycles", "2000"], capsys)
    assert code == 0 and text.startswith("PASS")


def test_verify_setff_fails_on_falling_edge(capsys):
    code, text, _ = run(["verify", "--cell", "detff_proposed", "--oracle", "setff", "--cycles", "100",
                         "--seed", "7"], capsys)
    assert code == 1
    assert "(falling," in text
    assert "$enddefinitions" in text


def test_verify_exhaustive(capsys):
    code, text, _ = run(["verify", "--cell", "detff_hier", "--exhaustive", "6"], capsys)
    assert code == 0
    assert "64 sequences" in text


def test_compare_published_table(capsys):
    code, text, _ = run(["compare", "--table", "paper"], capsys)
    assert code == 0
    assert "power improvement   SCDFF 48.18%, DEPFF 41.30%, SEDNIFF 36.85%" in text
    assert "PDP improvement     SCDFF 42.45%, DEPFF 33.88%, SEDNIFF 24.70%" in text


def test_compare_rows_one_row(tmp_path, capsys):
    rows = tmp_path / "rows.csv"
    rows.write_text("name,avg_power_uw,min_clk_to_q_ps,pdp_fj,transistors\nmine,10,135,1.35,18\n")
    code, text, _ = run(["compare", "--rows", rows], capsys)
    assert code == 0
    assert "versus" not in text


def test_compare_bad_rows(tmp_path, capsys):
    rows = tmp_path / "rows.csv"
    rows.write_text("name,avg_power_uw\nx,1\n")
    code, _, err = run(["compare", "--rows", rows], capsys)
    assert code == 1 and "lacks column" in err


def test_dump_cell_round_trips(tmp_path, capsys):
    out = tmp_path / "d.sp"
    assert run(["dump-cell", "detff_proposed", "--out", out], capsys)[0] == 0
    assert parse_netlist(out.read_text()) == parse_netlist((FIXTURES / "detff_proposed.sp").read_text())


def test_sizing_flag(tmp_path, capsys):
    bad = tmp_path / "bad.sp"
    bad.write_text("M1 q d vdd vdd PMOS W=300n L=180n\nM2 q d gnd gnd NMOS W=600n L=180n\n")
    code, _, err = run(["simulate", "--netlist", bad, "--stimulus", FIXTURES / "step.stim",
                        "--validate-sizing", "--out", tmp_path / "x.vcd"], capsys)
    assert code == 1 and "300" in err
