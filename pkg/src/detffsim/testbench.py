"""Built-in testbenches and the netlist-versus-oracle verification harness."""

from __future__ import annotations

import dataclasses
import itertools
import random
from dataclasses import dataclass, field

from .cells import Cell, CellPorts, Sample, behavioral_detff, behavioral_setff
from .engine import Simulator, Trace
from .logic import Logic
from .netlist import attach_load
from .stimulus import ClockSpec, EdgeKind, SimConfig, Stimulus

SETTLE_PERIODS = 2


@dataclass(frozen=True)
class BuiltinTestbench:
    """Serial data pattern against a free-running clock; the last bit is held."""

    name: str
    pattern: str = "1111010110010000"
    bit_time: int = 7500  # ps
    clock_freq: float = 125e6  # Hz
    duty: float = 50.0
    duration: int = 120_000  # ps
    load_ff: float = 21.0
    vdd: float = 1.8

    @property
    def period(self) -> int:
        return int(round(1e12 / self.clock_freq))

    @property
    def settle_time(self) -> int:
        return SETTLE_PERIODS * self.period

    def with_frequency(self, freq: float) -> BuiltinTestbench:
        return dataclasses.replace(self, clock_freq=freq)

    def d_waveform(self) -> list[tuple[int, Logic]]:
        wave: list[tuple[int, Logic]] = []
        for k, bit in enumerate(self.pattern):
            t = k * self.bit_time
            if t > self.duration:
                break
            value = Logic.parse(bit)
            if not wave or wave[-1][1] != value:
                wave.append((t, value))
        return wave

    def clock(self, net: str = "clk") -> ClockSpec:
        return ClockSpec(net, self.period, self.duty, 0)

    def clock_edges(self) -> list[tuple[int, EdgeKind]]:
        return self.clock().edges(0, self.duration)

    def stimulus(self, ports: CellPorts = CellPorts()) -> Stimulus:
        events = [(t, ports.data_in, v) for t, v in self.d_waveform()]
        return Stimulus(events, [self.clock(ports.clock)])

    def config(self, base: SimConfig | None = None) -> SimConfig:
        return (base or SimConfig()).replace(vdd=self.vdd, duration=self.duration)


TESTBENCHES = {
    "paper-sec3": BuiltinTestbench("paper-sec3"),
    "const0": BuiltinTestbench("const0", pattern="0"),
    "const1": BuiltinTestbench("const1", pattern="1"),
}


def get_testbench(name: str) -> BuiltinTestbench:
    try:
        return TESTBENCHES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown testbench {name!r}; choose from {', '.join(sorted(TESTBENCHES))}") from None


# -- verification --------------------------------------------------------------

ORACLES = {"detff": behavioral_detff, "setff": behavioral_setff}


@dataclass(frozen=True)
class Mismatch:
    index: int
    time: int
    edge: EdgeKind
    expected: Logic
    got: Logic


@dataclass
class VerifyResult:
    edges_checked: int
    mismatches: list[Mismatch] = field(default_factory=list)
    runs: int = 1
    trace: Trace | None = None  # the run holding the first mismatch, if any

    @property
    def passed(self) -> bool:
        return not self.mismatches


def settled_q(trace: Trace, q_net: str, edges, stop: int) -> list[Logic]:
    """Q just before the following edge (or at ``stop`` for the last one)."""
    times = [t for t, _ in edges] + [stop + 1]
    return [trace.value_at(q_net, nxt - 1) for nxt in times[1:]]


def data_stimulus(bits, period: int, ports: CellPorts, preamble_bits=()) -> tuple[Stimulus, list, int]:
    """Clock from t=0 and one D bit per edge, each changed a quarter period before its edge.

    Returns the stimulus, the full edge list and the simulation stop time.
    """
    half = period // 2
    all_bits = list(preamble_bits) + list(bits)
    n_edges = len(all_bits)
    stop = n_edges * half
    events = []
    prev = None
    for k, bit in enumerate(all_bits):
        t = 0 if k == 0 else k * half - half // 2
        if bit != prev:
            events.append((t, ports.data_in, Logic(bit)))
            prev = bit
    clock = ClockSpec(ports.clock, period, 50.0, 0)
    stim = Stimulus(events, [clock])
    return stim, clock.edges(0, stop), stop


def compare_run(trace: Trace, stim: Stimulus, edges, stop: int, ports: CellPorts, oracle: str,
                skip_before: int) -> tuple[int, list[Mismatch]]:
    d_wave = sorted((t, v) for t, net, v in stim.events if net == ports.data_in)
    expected: list[Sample] = ORACLES[oracle](d_wave, edges)
    got = settled_q(trace, ports.out, edges, stop)
    checked = 0
    bad = []
    for i, (sample, q) in enumerate(zip(expected, got)):
        if sample.edge_time < skip_before:
            continue
        checked += 1
        if q != sample.q_value:
            bad.append(Mismatch(i, sample.edge_time, sample.edge, sample.q_value, q))
    return checked, bad


class Verifier:
    """Drives one flip-flop netlist repeatedly; reuses a compiled simulator."""

    def __init__(self, cell: Cell, period: int = 8000, load_ff: float = 21.0, cfg: SimConfig | None = None):
        if cell.ports is None:
            raise ValueError(f"{cell.name} is not a sequential cell")
        self.cell = cell
        self.ports = cell.ports
        self.period = period
        self.netlist = attach_load(cell.netlist, self.ports.out, load_ff)
        self.cfg = cfg or SimConfig()
        self.sim = Simulator(self.netlist, self.cfg, driven=(self.ports.data_in, self.ports.clock))
        self.preamble = [0] * (2 * SETTLE_PERIODS)

    def run_bits(self, bits, oracle: str = "detff") -> tuple[int, list[Mismatch], Trace]:
        stim, edges, stop = data_stimulus(bits, self.period, self.ports, self.preamble)
        trace = self.sim.run(stim, duration=stop)
        checked, bad = compare_run(
            trace, stim, edges, stop, self.ports, oracle, SETTLE_PERIODS * self.period
        )
        return checked, bad, trace

    def random(self, n_edges: int, seed: int, oracle: str = "detff") -> VerifyResult:
        rng = random.Random(seed)
        bits = [rng.randint(0, 1) for _ in range(n_edges)]
        checked, bad, trace = self.run_bits(bits, oracle)
        return VerifyResult(checked, bad, 1, trace if bad else None)

    def exhaustive(self, n_edges: int, oracle: str = "detff") -> VerifyResult:
        result = VerifyResult(0, [], 0)
        for bits in itertools.product((0, 1), repeat=n_edges):
            checked, bad, trace = self.run_bits(bits, oracle)
            result.edges_checked += checked
            result.runs += 1
            if bad and not result.mismatches:
                result.mismatches = bad
                result.trace = trace
        return result
