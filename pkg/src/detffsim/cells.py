"""Built-in transistor cells and behavioral flip-flop models.

The proposed dual-edge flip-flop is two transmission-gate latches in
parallel (one transparent while CLK is high, one while CLK is low), a
two-device multiplexer steered by CLKB and an output inverter:

    D --TG(M5,M6)-- pl_a --inv-- pl_b --M18 (NMOS)--+
                      \\--weak inv--/                 |
                                                   mux --inv-- Q
    D --TG(M3,M4)-- nl_a --inv-- nl_b --M17 (PMOS)--+
                      \\--weak inv--/

While CLK is low the negative latch tracks D and the mux shows the
positive latch, which holds the value taken at the falling edge; the roles
swap while CLK is high.  Latch outputs are inverted, the output inverter
restores the polarity of D.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

from .logic import Logic
from .netlist import (
    CHANNEL_LENGTH_NM, GROUND, MIN_WIDTH_NM, SUPPLY, DeviceKind, Instance, Netlist, NetlistBuilder,
    NetKind, Subcircuit, Transistor, subcircuit,
)
from .stimulus import EdgeKind

W_DEFAULT = MIN_WIDTH_NM
L_DEFAULT = CHANNEL_LENGTH_NM

# 2 (clock inverter) + 2 x (2 TG + 2 x 2 inverters) + 2 (mux) + 2 (output inverter)
PROPOSED_DETFF_TRANSISTORS = 18
# the published device count; the description above accounts for 18
PUBLISHED_DETFF_TRANSISTORS = 24
# clock inverter 2, latch TGs 4, mux 2
PROPOSED_DETFF_CLOCKED = 8
# labelled devices and the CLK level at which each conducts
NARRATIVE_LABELS = ("m3", "m4", "m5", "m6", "m17", "m18")
ON_WHEN_CLK_LOW = frozenset({"m3", "m4", "m18"})
ON_WHEN_CLK_HIGH = frozenset({"m5", "m6", "m17"})


class CellError(ValueError):
    pass


@dataclass(frozen=True)
class CellPorts:
    data_in: str = "d"
    clock: str = "clk"
    out: str = "q"
    supply: str = SUPPLY
    ground: str = GROUND

    def __post_init__(self):
        names = (self.data_in, self.clock, self.out, self.supply, self.ground)
        if len(set(names)) != len(names):
            raise CellError(f"cell ports must be distinct: {names}")


@dataclass(frozen=True)
class Cell:
    name: str
    netlist: Netlist
    ports: CellPorts | None = None
    clock_nets: frozenset[str] = frozenset()
    clocked_devices: tuple[str, ...] = ()


def _mos(name, kind, d, g, s, weak=False, w=W_DEFAULT, l=L_DEFAULT) -> Transistor:
    body = SUPPLY if kind is DeviceKind.PMOS else GROUND
    return Transistor(name, kind, d, g, s, body, w, l, weak)


def inverter_devices(inp: str, out: str, names=("mp", "mn"), weak: bool = False) -> list[Transistor]:
    if inp == out:
        raise CellError("inverter input and output must differ")
    return [
        _mos(names[0], DeviceKind.PMOS, out, inp, SUPPLY, weak),
        _mos(names[1], DeviceKind.NMOS, out, inp, GROUND, weak),
    ]


def transmission_gate_devices(a: str, b: str, ctrl: str, ctrl_bar: str, names=("mn", "mp")) -> list[Transistor]:
    """NMOS gated by ``ctrl`` in parallel with PMOS gated by ``ctrl_bar``."""
    if len({a, b, ctrl, ctrl_bar}) != 4:
        raise CellError("transmission gate needs four distinct nets")
    return [
        _mos(names[0], DeviceKind.NMOS, b, ctrl, a),
        _mos(names[1], DeviceKind.PMOS, b, ctrl_bar, a),
    ]


def mux2_devices(in_pmos: str, in_nmos: str, sel_bar: str, out: str, names=("mp", "mn")) -> list[Transistor]:
    """One PMOS and one NMOS pass device with gates tied to ``sel_bar``."""
    if len({in_pmos, in_nmos, sel_bar, out}) != 4:
        raise CellError("mux2 needs four distinct nets")
    return [
        _mos(names[0], DeviceKind.PMOS, out, sel_bar, in_pmos),
        _mos(names[1], DeviceKind.NMOS, out, sel_bar, in_nmos),
    ]


def _netlist(devices: Iterable[Transistor], inputs=(), outputs=()) -> Netlist:
    b = NetlistBuilder()
    for t in devices:
        b.add_transistor(t)
    for net in inputs:
        b.declare(net, NetKind.INPUT)
    for net in outputs:
        b.declare(net, NetKind.OUTPUT)
    return b.build()


def build_inverter(inp: str = "a", out: str = "y", weak: bool = False) -> Netlist:
    return _netlist(inverter_devices(inp, out, ("m1", "m2"), weak), [inp], [out])


def build_transmission_gate(a: str = "a", b: str = "b", ctrl: str = "en", ctrl_bar: str = "enb") -> Netlist:
    return _netlist(transmission_gate_devices(a, b, ctrl, ctrl_bar, ("m1", "m2")), [a, ctrl, ctrl_bar], [b])


def build_mux2(in_pmos: str = "a", in_nmos: str = "b", sel_bar: str = "selb", out: str = "y") -> Netlist:
    return _netlist(mux2_devices(in_pmos, in_nmos, sel_bar, out, ("m1", "m2")), [in_pmos, in_nmos, sel_bar], [out])


def tg_latch_devices(d: str, store: str, out: str, ctrl: str, ctrl_bar: str, names: Sequence[str]) -> list[Transistor]:
    """TG into ``store``, forward inverter to ``out`` (= not store), weak feedback back to ``store``."""
    tg = transmission_gate_devices(d, store, ctrl, ctrl_bar, names[0:2])
    fwd = inverter_devices(store, out, names[2:4])
    keeper = inverter_devices(out, store, names[4:6], weak=True)
    return tg + fwd + keeper


def build_tg_latch(d: str = "d", en: str = "en", enb: str = "enb", store: str = "s", out: str = "qb") -> Netlist:
    """Latch transparent while ``en`` is high; ``out`` is the inverted stored value."""
    names = [f"m{i}" for i in range(1, 7)]
    return _netlist(tg_latch_devices(d, store, out, en, enb, names), [d, en, enb], [out])


def build_proposed_detff(ports: CellPorts = CellPorts()) -> Cell:
    """Flat proposed dual-edge flip-flop with the labelled devices M3-M6, M17, M18."""
    d, clk, q = ports.data_in, ports.clock, ports.out
    clkb = f"{clk}b"
    devices = []
    devices += inverter_devices(clk, clkb, ("m1", "m2"))
    # negative latch: transparent while CLK is low
    devices += tg_latch_devices(d, "nl_a", "nl_b", clkb, clk, ("m3", "m4", "m7", "m8", "m9", "m10"))
    # positive latch: transparent while CLK is high
    devices += tg_latch_devices(d, "pl_a", "pl_b", clk, clkb, ("m5", "m6", "m11", "m12", "m13", "m14"))
    # CLKB high (CLK low) selects the positive latch through the NMOS
    devices += mux2_devices("nl_b", "pl_b", clkb, "mux", ("m17", "m18"))
    devices += inverter_devices("mux", q, ("m15", "m16"))
    n = _netlist(devices, [d, clk], [q])
    clock_nets = frozenset({clk, clkb})
    clocked = tuple(t.name for t in n.transistors if t.gate in clock_nets)
    return Cell("detff_proposed", n, ports, clock_nets, clocked)


def build_proposed_detff_hierarchical() -> Netlist:
    """The same flip-flop assembled from inverter, latch and mux subcircuits."""
    inv = subcircuit("inv", ("a", "y"), build_inverter("a", "y"))
    kinv = subcircuit("kinv", ("a", "y"), build_inverter("a", "y", weak=True))
    tg = subcircuit("tg", ("a", "b", "en", "enb"), build_transmission_gate())
    latch_body = NetlistBuilder(infer_inputs=False, top_level=False)
    latch_body.extra_nets.update(("d", "en", "enb", "qb"))
    latch_body.add_instance(Instance("x1", ("d", "s", "en", "enb"), "tg"))
    latch_body.add_instance(Instance("x2", ("s", "qb"), "inv"))
    latch_body.add_instance(Instance("x3", ("qb", "s"), "kinv"))
    latch = Subcircuit("latch", ("d", "en", "enb", "qb"), latch_body.build())
    mux = subcircuit("mux2", ("a", "b", "selb", "y"), build_mux2())

    top = NetlistBuilder()
    for sub in (inv, kinv, tg, latch, mux):
        top.add_subcircuit(sub)
    top.add_instance(Instance("xclk", ("clk", "clkb"), "inv"))
    top.add_instance(Instance("xneg", ("d", "clkb", "clk", "nl_b"), "latch"))
    top.add_instance(Instance("xpos", ("d", "clk", "clkb", "pl_b"), "latch"))
    top.add_instance(Instance("xmux", ("nl_b", "pl_b", "clkb", "mux"), "mux2"))
    top.add_instance(Instance("xout", ("mux", "q"), "inv"))
    top.declare("d", NetKind.INPUT)
    top.declare("clk", NetKind.INPUT)
    top.declare("q", NetKind.OUTPUT)
    return top.build()


BUILTIN_CELLS: dict[str, Callable[[], Cell]] = {
    "detff_proposed": build_proposed_detff,
    "inverter": lambda: Cell("inverter", build_inverter()),
    "tgate": lambda: Cell("tgate", build_transmission_gate()),
    "tg_latch": lambda: Cell("tg_latch", build_tg_latch()),
    "mux2": lambda: Cell("mux2", build_mux2()),
    "detff_hier": lambda: Cell(
        "detff_hier", build_proposed_detff_hierarchical(), CellPorts(), frozenset({"clk", "clkb"})
    ),
}


def get_cell(name: str) -> Cell:
    try:
        return BUILTIN_CELLS[name.lower()]()
    except KeyError:
        raise CellError(f"unknown cell {name!r}; choose from {', '.join(sorted(BUILTIN_CELLS))}") from None


# -- behavioral models ---------------------------------------------------------

class Sample(NamedTuple):
    edge_time: int
    edge: EdgeKind
    d_value: Logic
    q_value: Logic


Waveform = Sequence[tuple[int, Logic]]


class PulseOverlap(ValueError):
    pass


def waveform_value(wave: Waveform, t: int) -> Logic:
    """Value of a step waveform at ``t`` (changes at ``t`` applied); X before the first point."""
    value = Logic.X
    for wt, v in wave:
        if wt > t:
            break
        value = v
    return value


def _check_edges(clock_edges) -> None:
    times = [t for t, _ in clock_edges]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("clock edges must be strictly increasing")


def _sampler(d_waveform):
    if callable(d_waveform):
        return d_waveform
    points = sorted(d_waveform, key=lambda p: p[0])
    times = [t for t, _ in points]

    def value(t):
        i = bisect.bisect_right(times, t)
        return points[i - 1][1] if i else Logic.X

    return value


def behavioral_setff(d_waveform, clock_edges) -> list[Sample]:
    """Rising-edge flip-flop: q takes d at rising edges and starts unknown."""
    _check_edges(clock_edges)
    d_at = _sampler(d_waveform)
    q = Logic.X
    out = []
    for t, edge in clock_edges:
        d = d_at(t)
        if edge is EdgeKind.RISING:
            q = d
        out.append(Sample(t, edge, d, q))
    return out


def behavioral_detff(d_waveform, clock_edges) -> list[Sample]:
    """Dual-edge flip-flop: each edge's latch sample is steered to q."""
    _check_edges(clock_edges)
    d_at = _sampler(d_waveform)
    out = []
    held = {EdgeKind.RISING: Logic.X, EdgeKind.FALLING: Logic.X}
    for t, edge in clock_edges:
        d = d_at(t)
        held[edge] = d  # the latch that closes at this edge keeps d
        out.append(Sample(t, edge, d, held[edge]))
    return out


def behavioral_pulse_generator(edge_times: Sequence[int], pulse_width: int) -> list[tuple[int, Logic]]:
    """Narrow pulse after every clock edge, returned as a step waveform from t=0."""
    times = sorted(edge_times)
    if pulse_width <= 0:
        raise PulseOverlap("pulse width must be positive")
    gaps = [b - a for a, b in zip(times, times[1:])]
    if gaps and pulse_width * 2 >= min(gaps):
        raise PulseOverlap(f"pulse width {pulse_width} ps is not below half the edge spacing {min(gaps)} ps")
    wave = [(0, Logic.ZERO)]
    for t in times:
        if wave[-1][0] == t:
            wave[-1] = (t, Logic.ONE)
        else:
            wave.append((t, Logic.ONE))
        wave.append((t + pulse_width, Logic.ZERO))
    return wave
