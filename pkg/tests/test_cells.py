import itertools

import pytest

from detffsim.cells import (
    NARRATIVE_LABELS, ON_WHEN_CLK_HIGH, ON_WHEN_CLK_LOW, PROPOSED_DETFF_CLOCKED, PROPOSED_DETFF_TRANSISTORS,
    CellError, PulseOverlap, behavioral_detff, behavioral_pulse_generator, behavioral_setff, build_inverter,
    build_mux2, build_transmission_gate, get_cell, waveform_value,
)
from detffsim.engine import Simulator, partition_components, solve_component
from detffsim.logic import Logic, SignalState, Strength
from detffsim.netlist import count_clocked_transistors
from detffsim.stimulus import ClockSpec, EdgeKind, SimConfig, Stimulus
from detffsim.testbench import get_testbench

L0, L1, X = Logic.ZERO, Logic.ONE, Logic.X
STRONG = {v: SignalState(v, Strength.STRONG) for v in (L0, L1)}

# bit k of the serial pattern holds on [7.5k, 7.5(k+1)) ns; sampled every 4 ns from t=0, by hand
SEC3_DUAL_EDGE_Q = "111111110011001110000110000000"
# same timeline sampled on rising edges only, every 8 ns
SEC3_SINGLE_EDGE_Q = "111101011001000"


def test_inverter_cell():
    n = build_inverter("a", "y")
    assert len(n.transistors) == 2
    comp = partition_components(n)[0]
    for v in (L0, L1):
        assert solve_component(comp, {"a": STRONG[v]}, {})["y"].value == Logic(1 - v)


def test_transmission_gate_passes_when_on():
    comp = partition_components(build_transmission_gate("a", "b", "en", "enb"), {"a"})[0]
    for v in (L0, L1):
        got = solve_component(comp, {"a": STRONG[v], "en": STRONG[L1], "enb": STRONG[L0]}, {})
        assert got["b"].value == v


def test_mux_truth_table():
    comp = partition_components(build_mux2("a", "b", "selb", "y"), {"a", "b"})[0]
    for a, b, s in itertools.product((L0, L1), repeat=3):
        got = solve_component(comp, {"a": STRONG[a], "b": STRONG[b], "selb": STRONG[s]}, {})
        assert got["y"].value == (a if s is L0 else b), (a, b, s)


def test_detff_counts_match_manifest():
    cell = get_cell("detff_proposed")
    assert len(cell.netlist.transistors) == PROPOSED_DETFF_TRANSISTORS
    assert len(cell.clocked_devices) == PROPOSED_DETFF_CLOCKED
    assert count_clocked_transistors(cell.netlist, cell.clock_nets) == len(cell.clocked_devices)
    assert set(NARRATIVE_LABELS) <= set(cell.netlist.transistor_map)


def _conducting_labels(clk_value):
    cell = get_cell("detff_proposed")
    stim = Stimulus([(0, "d", L1), (0, "clk", clk_value)])
    trace = Simulator(cell.netlist, SimConfig(duration=5000), driven=stim.nets).run(stim)
    on = set()
    for label in NARRATIVE_LABELS:
        t = cell.netlist.transistor_map[label]
        if t.conducts(trace.value_at(t.gate, 5000)):
            on.add(label)
    return on


def test_conduction_narrative_clock_low():
    assert _conducting_labels(L0) == ON_WHEN_CLK_LOW == {"m3", "m4", "m18"}


def test_conduction_narrative_clock_high():
    assert _conducting_labels(L1) == ON_WHEN_CLK_HIGH == {"m5", "m6", "m17"}


def test_q_unchanged_while_d_stable():
    cell = get_cell("detff_proposed")
    stim = Stimulus([(0, "d", L1)], [ClockSpec("clk", 8000, 50.0, 0)])
    trace = Simulator(cell.netlist, SimConfig(duration=64_000), driven=stim.nets).run(stim)
    assert [(t, new) for t, _, new in trace.value_changes("q") if t >= 16_000] == []
    assert trace.value_at("q", 64_000) == L1


def test_unknown_cell():
    with pytest.raises(CellError):
        get_cell("nope")


# -- behavioral models -----------------------------------------------------------

def _edges(period, stop, rising_only=False):
    edges = ClockSpec("clk", period, 50.0, 0).edges(0, stop)
    return [e for e in edges if e[1] is EdgeKind.RISING] if rising_only else edges


def test_setff_constant_one():
    out = behavioral_setff([(0, L1)], _edges(8000, 40_000))
    assert all(s.q_value == L1 for s in out)


def test_setff_x_propagates():
    out = behavioral_setff([(0, L1), (7000, X)], _edges(8000, 24_000))
    assert [s.q_value for s in out if s.edge is EdgeKind.RISING] == [L1, X, X]


def test_setff_sec3_pattern():
    tb = get_testbench("paper-sec3")
    out = behavioral_setff(tb.d_waveform(), _edges(8000, 120_000, rising_only=True))
    assert "".join(s.q_value.char for s in out) == SEC3_SINGLE_EDGE_Q


def test_detff_constant_zero():
    out = behavioral_detff([(0, L0)], _edges(8000, 40_000))
    assert all(s.q_value == L0 for s in out)


def test_detff_sec3_oracle():
    tb = get_testbench("paper-sec3")
    out = behavioral_detff(tb.d_waveform(), tb.clock_edges())
    assert len(out) == 30
    assert "".join(s.q_value.char for s in out) == SEC3_DUAL_EDGE_Q


def test_detff_half_frequency_equals_setff():
    pattern = [(k * 3000, Logic(k * 7 % 3 % 2)) for k in range(400)]
    detff = behavioral_detff(pattern, _edges(8000, 1_200_000))
    setff = behavioral_setff(pattern, _edges(4000, 1_200_000, rising_only=True))
    assert len(detff) == len(setff) == 300
    assert [(s.edge_time, s.q_value) for s in detff] == [(s.edge_time, s.q_value) for s in setff]


def test_edges_must_increase():
    with pytest.raises(ValueError):
        behavioral_detff([(0, L0)], [(10, EdgeKind.RISING), (10, EdgeKind.FALLING)])


def test_pulse_generator_definition():
    assert behavioral_pulse_generator([], 300) == [(0, L0)]
    wave = behavioral_pulse_generator([0, 4000], 300)
    assert wave == [(0, L1), (300, L0), (4000, L1), (4300, L0)]
    assert waveform_value(wave, 299) == L1 and waveform_value(wave, 300) == L0


def test_pulse_generator_125mhz():
    edges = [t for t, _ in _edges(8000, 120_000)]
    wave = behavioral_pulse_generator(edges, 300)
    assert sum(1 for _, v in wave if v == L1) == 30
    assert all(b[0] > a[0] for a, b in zip(wave, wave[1:]))


def test_pulse_generator_rejects_overlap():
    with pytest.raises(PulseOverlap):
        behavioral_pulse_generator([0, 4000], 2000)
