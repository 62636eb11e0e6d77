from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from detffsim.cells import PROPOSED_DETFF_CLOCKED, PROPOSED_DETFF_TRANSISTORS, build_inverter, get_cell
from detffsim.netlist import (
    BadSizing, DanglingNet, DeviceKind, NetlistBuilder, NetlistSyntaxError, RecursiveSubcircuit,
    Transistor, UnknownCard, count_clocked_transistors, expanded_device_count, flatten, parse_netlist,
    serialize_netlist,
)

FIXTURES = sorted((Path(__file__).parent / "fixtures").glob("*.sp"))
INVERTER = "M1 q d vdd vdd PMOS W=600n L=180n\nM2 q d gnd gnd NMOS W=600n L=180n"


def test_empty_netlist():
    n = parse_netlist("")
    assert n.transistors == () or len(n.transistors) == 0
    assert len(n.capacitors) == 0
    assert {x.name for x in n.nets} <= {"vdd", "gnd"}
    assert serialize_netlist(n).strip() == "* detffsim netlist"


def test_inverter_fields():
    n = parse_netlist(INVERTER)
    assert [t.name for t in n.transistors] == ["m1", "m2"]
    assert {x.name for x in n.nets} == {"vdd", "gnd", "q", "d"}
    m1 = n.transistor_map["m1"]
    assert (m1.kind, m1.drain, m1.gate, m1.source, m1.width, m1.length) == (
        DeviceKind.PMOS, "q", "d", "vdd", 600.0, 180.0)
    assert n.inputs == ["d"]


def test_serialize_orders_by_name():
    text = serialize_netlist(parse_netlist("M2 q d gnd gnd NMOS W=600n L=180n\nM1 q d vdd vdd PMOS W=600n L=180n"))
    cards = [ln.split()[0] for ln in text.splitlines() if ln.startswith("m")]
    assert cards == ["m1", "m2"]


@pytest.mark.parametrize("path", FIXTURES, ids=lambda p: p.name)
def test_fixture_round_trip(path):
    once = parse_netlist(path.read_text())
    assert parse_netlist(serialize_netlist(once)) == once


def test_fixture_units_and_case(fixtures):
    n = parse_netlist((fixtures / "mixed_units.sp").read_text())
    inv = n.subckt_map["inv"].body
    assert inv.transistor_map["mp"].width == pytest.approx(1200.0)
    assert inv.transistor_map["mp"].length == pytest.approx(180.0)
    assert n.capacitors[0].value == pytest.approx(21.0)
    assert expanded_device_count(n) == 6
    flat = flatten(n)
    assert len(flat.transistors) == 6
    assert "xb.mid" in flat.net_map


def test_sizing_rejects_300n_with_line():
    with pytest.raises(BadSizing) as e:
        parse_netlist("* c\nM1 q d vdd vdd PMOS W=300n L=180n", validate_sizing=True)
    assert e.value.line == 2


@pytest.mark.parametrize("w", ["599n", "1201n", "1.3u"])
def test_sizing_rejects_outside_range(w):
    with pytest.raises(BadSizing):
        parse_netlist(f"M1 q d vdd vdd PMOS W={w} L=180n", validate_sizing=True)


@pytest.mark.parametrize("w", ["600n", "0.9u", "1200n"])
def test_sizing_accepts_boundaries(w):
    parse_netlist(f"M1 q d vdd vdd PMOS W={w} L=180n", validate_sizing=True)


def test_sizing_rejects_other_length():
    with pytest.raises(BadSizing):
        parse_netlist("M1 q d vdd vdd PMOS W=600n L=350n", validate_sizing=True)


def test_sizing_off_by_default():
    parse_netlist("M1 q d vdd vdd PMOS W=300n L=180n")


def test_builtin_cells_pass_sizing():
    for name in ("detff_proposed", "detff_hier", "inverter", "tg_latch", "mux2", "tgate"):
        parse_netlist(serialize_netlist(get_cell(name).netlist), validate_sizing=True)


@pytest.mark.parametrize("text, exc", [
    ("M1 q d vdd vdd PMOS W=600n", NetlistSyntaxError),
    ("M1 q d vdd vdd BJT W=600n L=180n", NetlistSyntaxError),
    ("Q1 a b c npn", UnknownCard),
    (".foo", UnknownCard),
    ("X1 a b missing", DanglingNet),
    (".output nowhere", DanglingNet),
    (".subckt a p\nX1 p a\n.ends", RecursiveSubcircuit),
    (".subckt a p\nX1 p b\n.ends\n.subckt b p\nX1 p a\n.ends", RecursiveSubcircuit),
    (".subckt a p\nM1 p p gnd gnd NMOS W=600n L=180n", NetlistSyntaxError),
    ("M1 q d vdd vdd PMOS W=600n L=180n\nM1 q d gnd gnd NMOS W=600n L=180n", NetlistSyntaxError),
])
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse_netlist(text)


def test_error_carries_position():
    with pytest.raises(UnknownCard) as e:
        parse_netlist("M1 q d vdd vdd PMOS W=600n L=180n\n\n  Q1 a b c")
    assert e.value.line == 3
    assert e.value.column == 3


def test_flatten_without_instances_is_identity():
    n = parse_netlist(INVERTER)
    assert flatten(n) == n


def test_flatten_single_instance():
    n = parse_netlist(".subckt inv a y\nM1 y a vdd vdd PMOS W=600n L=180n\nM2 y a gnd gnd NMOS W=600n L=180n\n.ends\n"
                      "X1 in out inv\nX2 out z inv")
    flat = flatten(n)
    assert len(flat.transistors) == 4
    assert {"in", "out", "z"} <= set(flat.net_map)
    assert not any(name.startswith("x1.") for name in flat.net_map)  # ports map to outer nets
    x1 = [t for t in flat.transistors if t.name.endswith("x1.m1")][0]
    assert (x1.drain, x1.gate) == ("out", "in")


def test_hierarchical_detff_flattens_to_declared_total():
    hier = get_cell("detff_hier").netlist
    assert not hier.is_flat
    flat = flatten(hier)
    assert len(flat.transistors) == PROPOSED_DETFF_TRANSISTORS == expanded_device_count(hier)
    assert count_clocked_transistors(flat, {"clk", "clkb"}) == PROPOSED_DETFF_CLOCKED


def test_count_clocked():
    assert count_clocked_transistors(build_inverter("d", "q"), {"clk"}) == 0
    assert count_clocked_transistors(build_inverter("clk", "q"), {"clk"}) == 2
    # by inspection: clock inverter 2, both transmission gates 4, mux 2
    assert count_clocked_transistors(get_cell("detff_proposed").netlist, {"clk", "clkb"}) == 8


# generated flat netlists round-trip too
_net = st.sampled_from(["a", "b", "c", "n1", "n2", "vdd", "gnd"])


@st.composite
def _netlists(draw):
    b = NetlistBuilder(infer_inputs=False)
    for i in range(draw(st.integers(0, 6))):
        kind = draw(st.sampled_from(list(DeviceKind)))
        b.add_transistor(Transistor(
            f"m{i}", kind, draw(_net), draw(_net), draw(_net),
            "vdd" if kind is DeviceKind.PMOS else "gnd",
            float(draw(st.integers(6, 12)) * 100), 180.0, draw(st.booleans()),
        ))
    return b.build()


@settings(max_examples=60, deadline=None)
@given(_netlists())
def test_generated_round_trip(n):
    once = parse_netlist(serialize_netlist(n))
    assert once.transistors == n.transistors
    assert parse_netlist(serialize_netlist(once)) == once
