"""Run a testbench on a flip-flop and reduce the trace to a Table-II style row."""

from __future__ import annotations

from dataclasses import dataclass

from .cells import Cell
from .engine import Simulator, Trace
from .metrics import (
    CellMetrics, ClkToQ, NoTransitions, PowerParams, dynamic_power, measure_clk_to_q, total_power,
)
from .netlist import RAILS, Netlist, attach_load, count_clocked_transistors, flatten
from .stimulus import SimConfig
from .testbench import BuiltinTestbench


@dataclass
class Characterization:
    cell: str
    netlist: Netlist  # flat, load attached
    trace: Trace
    window: tuple[int, int]
    p_clock: float  # W, clock-network nets
    p_data: float  # W, every other net
    p_total: float  # W, switching plus constant terms
    delay: ClkToQ | None
    metrics: CellMetrics | None  # None when Q never switched

    @property
    def p_dynamic(self) -> float:
        return self.p_clock + self.p_data


def characterize(cell: Cell, tb: BuiltinTestbench, cfg: SimConfig | None = None,
                 params: PowerParams | None = None) -> Characterization:
    if cell.ports is None:
        raise ValueError(f"{cell.name} has no flip-flop ports to characterize")
    ports = cell.ports
    cfg = tb.config(cfg)
    params = params or PowerParams(vdd=cfg.vdd)
    if params.vdd != cfg.vdd:
        raise ValueError("power and simulation supplies differ")
    flat = attach_load(flatten(cell.netlist), ports.out, tb.load_ff)
    stim = tb.stimulus(ports)
    trace = Simulator(flat, cfg, driven=stim.nets).run(stim)

    start, stop = tb.settle_time, tb.duration
    clock_nets = sorted(cell.clock_nets or {ports.clock})
    data_nets = [n.name for n in flat.nets if n.name not in RAILS and n.name not in clock_nets]
    common = dict(cnode_default_ff=cfg.cnode_default_ff, activity=params.activity_overrides,
                  clock_period=tb.period)
    p_clock = dynamic_power(trace, flat, cfg.vdd, start, stop, nets=clock_nets, **common)
    p_data = dynamic_power(trace, flat, cfg.vdd, start, stop, nets=data_nets, **common)
    p_total = total_power(p_clock + p_data, params)

    transistors = len(flat.transistors)
    clocked = count_clocked_transistors(flat, clock_nets)
    try:
        delay = measure_clk_to_q(trace, ports.clock, ports.out, start)
    except NoTransitions:
        delay, metrics = None, None
    else:
        metrics = CellMetrics.from_measurement(p_total, delay.min, transistors, clocked)
    return Characterization(cell.name, flat, trace, (start, stop), p_clock, p_data, p_total, delay, metrics)
