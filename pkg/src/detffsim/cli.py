"""Command-line front end: simulate, characterize, verify, compare, dump-cell."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .cells import BUILTIN_CELLS, Cell, CellError, CellPorts, get_cell
from .characterize import characterize
from .engine import SimulationError, Simulator
from .metrics import (
    MetricsError, PowerParams, build_comparison, format_table, published_rows, read_rows_csv, to_csv,
)
from .netlist import NetlistError, attach_load, flatten, parse_netlist, serialize_netlist
from .stimulus import SimConfig, StimulusError, parse_config, parse_stimulus
from .testbench import TESTBENCHES, Verifier, compare_run, get_testbench, settled_q
from .units import parse_quantity, to_ps
from .vcd import write_vcd


def _quantity(unit: str):
    def conv(text: str) -> float:
        try:
            return parse_quantity(text, unit)
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from None
    conv.__name__ = f"quantity[{unit}]"
    return conv


def _time_ps(text: str) -> int:
    try:
        return to_ps(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _femtofarads(text: str) -> float:
    # a bare number is already in fF
    try:
        return float(text)
    except ValueError:
        return _quantity("F")(text) * 1e15


def _add_source(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--cell", help=f"built-in cell: {', '.join(sorted(BUILTIN_CELLS))}")
    g.add_argument("--netlist", type=Path, help="netlist file")
    p.add_argument("--validate-sizing", action="store_true",
                   help="reject W outside [600, 1200] nm or L != 180 nm")


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value simulator settings file")
    p.add_argument("--vdd", type=_quantity("V"), help="supply, e.g. 1.8V")
    p.add_argument("--resolution", type=_time_ps, help="time step, e.g. 1ps")
    p.add_argument("--r-on-nmos", type=_quantity("ohm"), help="NMOS on-resistance at W/L=1")
    p.add_argument("--r-on-pmos", type=_quantity("ohm"), help="PMOS on-resistance at W/L=1")
    p.add_argument("--cnode", type=_femtofarads, help="default capacitance per terminal in fF")


def _config(args) -> SimConfig:
    cfg = SimConfig()
    if args.config:
        cfg = parse_config(args.config.read_text(encoding="utf-8"))
    changes = {}
    for attr, key in (("vdd", "vdd"), ("resolution", "resolution"), ("r_on_nmos", "r_on_nmos"),
                      ("r_on_pmos", "r_on_pmos"), ("cnode", "cnode_default_ff")):
        value = getattr(args, attr, None)
        if value is not None:
            changes[key] = value
    if getattr(args, "duration", None) is not None:
        changes["duration"] = args.duration
    return cfg.replace(**changes)


def _load_cell(args) -> Cell:
    if args.cell:
        cell = get_cell(args.cell)
        if args.validate_sizing:
            # re-parse the canonical text so the sizing check sees every device
            parse_netlist(serialize_netlist(cell.netlist), validate_sizing=True)
        return cell
    try:
        text = args.netlist.read_text(encoding="utf-8")
    except OSError as e:
        raise CellError(f"{args.netlist}: {e.strerror}") from None
    try:
        n = parse_netlist(text, validate_sizing=args.validate_sizing)
    except NetlistError as e:
        raise NetlistError(f"{args.netlist}: {e}") from None
    flat = flatten(n)
    nets = set(flat.net_map)
    ports = CellPorts() if {"d", "clk", "q"} <= nets else None
    clock_nets = frozenset({"clk", "clkb"} & nets)
    return Cell(args.netlist.stem, n, ports, clock_nets)


def _testbench(args):
    tb = get_testbench(args.testbench)
    if getattr(args, "freq", None):
        tb = tb.with_frequency(args.freq)
    if getattr(args, "load", None) is not None:
        tb = replace(tb, load_ff=args.load)
    if getattr(args, "vdd", None) is not None:
        tb = replace(tb, vdd=args.vdd)
    if getattr(args, "duration", None) is not None:
        tb = replace(tb, duration=args.duration)
    return tb


# -- commands ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    cell = _load_cell(args)
    cfg = _config(args)
    flat = flatten(cell.netlist)
    tb = None
    if args.testbench:
        if cell.ports is None:
            raise CellError(f"testbench {args.testbench} needs a cell with d/clk/q ports")
        tb = _testbench(args)
        cfg = tb.config(cfg)
        flat = attach_load(flat, cell.ports.out, tb.load_ff)
        stim = tb.stimulus(cell.ports)
    else:
        try:
            stim = parse_stimulus(args.stimulus.read_text(encoding="utf-8"))
        except OSError as e:
            raise StimulusError(f"{args.stimulus}: {e.strerror}") from None
        except StimulusError as e:
            raise StimulusError(f"{args.stimulus}: {e}") from None
    trace = Simulator(flat, cfg, driven=stim.nets).run(stim)
    args.out.write_bytes(write_vcd(trace, flat))

    width = max(len(n.name) for n in flat.nets)
    print(f"{'net':<{width}}  toggles  final")
    for net in flat.nets:
        print(f"{net.name:<{width}}  {trace.toggle_counts[net.name]:>7}  {trace.final_states[net.name]}")
    if tb is not None:
        edges = tb.clock_edges()
        checked, bad = compare_run(trace, stim, edges, tb.duration, cell.ports, "detff", tb.settle_time)
        print(f"{cell.ports.out} vs dual-edge oracle: {checked - len(bad)}/{checked} settled edges match")
        got = settled_q(trace, cell.ports.out, edges, tb.duration)
        print(f"{cell.ports.out} after each edge: {''.join(v.char for v in got)}")
    print(f"wrote {args.out}")
    return 0


def cmd_characterize(args) -> int:
    cell = _load_cell(args)
    tb = _testbench(args)
    cfg = _config(args)
    vdd = args.vdd if args.vdd is not None else tb.vdd
    params = PowerParams(vdd=vdd, i_sc=args.isc or 0.0, i_leakage=args.ileak or 0.0)
    ch = characterize(cell, tb, cfg, params)
    print(f"testbench {tb.name}: {tb.clock_freq / 1e6:g} MHz, {tb.duration / 1000:g} ns, "
          f"load {tb.load_ff:g} fF, vdd {vdd:g} V; power window {ch.window[0]}-{ch.window[1]} ps")
    print(f"switching power: clock network {ch.p_clock * 1e6:.4f} uW, data path {ch.p_data * 1e6:.4f} uW")
    print(f"total average power: {ch.p_total * 1e6:.4f} uW")
    if ch.metrics is None:
        print(f"error: {cell.ports.out} never switches after the settling window; no clk-to-Q delay",
              file=sys.stderr)
        return 1
    print(f"clk-to-Q: min {ch.delay.min} ps, max {ch.delay.max} ps over {len(ch.delay.per_edge)} edges")
    table = build_comparison([(cell.name, ch.metrics)])
    print()
    print(format_table(table), end="")
    if args.csv:
        args.csv.write_text(to_csv(table), encoding="utf-8")
    return 0


def cmd_verify(args) -> int:
    cell = _load_cell(args)
    if cell.ports is None:
        raise CellError(f"{cell.name} has no d/clk/q ports to verify")
    period = int(round(1e12 / args.freq))
    if not cell.netlist.is_flat:
        cell = Cell(cell.name, flatten(cell.netlist), cell.ports, cell.clock_nets)
    v = Verifier(cell, period=period, cfg=_config(args))
    if args.exhaustive:
        result = v.exhaustive(args.exhaustive, args.oracle)
        what = f"{result.runs} sequences x {args.exhaustive} edges"
    else:
        result = v.random(args.cycles, args.seed, args.oracle)
        what = f"{args.cycles} random edges, seed {args.seed}"
    if result.passed:
        print(f"PASS {cell.name} vs {args.oracle}: {what}, {result.edges_checked} settled edges compared")
        return 0
    m = result.mismatches[0]
    print(f"FAIL {cell.name} vs {args.oracle}: {what}, {len(result.mismatches)} mismatching edge(s)")
    print(f"first mismatch at edge {m.index} ({m.edge.value}, t={m.time} ps): "
          f"expected {m.expected.char}, got {m.got.char}")
    p = cell.ports
    excerpt = write_vcd(result.trace, nets=[p.clock, p.data_in, p.out],
                        start=max(0, m.time - period), stop=m.time + period)
    print("VCD excerpt:")
    print(excerpt.decode(), end="")
    return 1


def cmd_compare(args) -> int:
    if args.table:
        rows = published_rows()
    else:
        try:
            rows = read_rows_csv(args.rows.read_text(encoding="utf-8"))
        except OSError as e:
            raise MetricsError(f"{args.rows}: {e.strerror}") from None
    table = build_comparison(rows, args.baseline or None)
    print(format_table(table), end="")
    if args.csv:
        args.csv.write_text(to_csv(table), encoding="utf-8")
    return 0


def cmd_dump_cell(args) -> int:
    cell = get_cell(args.name)
    text = serialize_netlist(cell.netlist)
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detffsim", description="Switch-level CMOS simulation and dual-edge flip-flop characterization"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the engine and write a VCD")
    _add_source(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--stimulus", type=Path, help="stimulus file")
    g.add_argument("--testbench", help=f"built-in testbench: {', '.join(sorted(TESTBENCHES))}")
    _add_config(p)
    p.add_argument("--duration", type=_time_ps, help="simulated time, e.g. 120ns")
    p.add_argument("--freq", type=_quantity("Hz"), help="testbench clock, e.g. 125MHz")
    p.add_argument("--load", type=_femtofarads, help="testbench load on Q, e.g. 21fF")
    p.add_argument("--out", type=Path, default=Path("sim.vcd"), help="VCD output path (default sim.vcd)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("characterize", help="power, clk-to-Q and PDP of a flip-flop")
    _add_source(p)
    p.add_argument("--testbench", default="paper-sec3", help="built-in testbench (default paper-sec3)")
    _add_config(p)
    p.add_argument("--duration", type=_time_ps, help="simulated time, e.g. 120ns")
    p.add_argument("--freq", type=_quantity("Hz"), help="clock frequency, e.g. 62.5MHz")
    p.add_argument("--load", type=_femtofarads, help="load on Q, e.g. 21fF")
    p.add_argument("--isc", type=_quantity("A"), help="short-circuit current, e.g. 1uA")
    p.add_argument("--ileak", type=_quantity("A"), help="leakage current, e.g. 0.5uA")
    p.add_argument("--csv", type=Path, help="also write the row as CSV")
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("verify", help="compare a flip-flop netlist with a behavioral model")
    _add_source(p)
    p.add_argument("--oracle", choices=("detff", "setff"), default="detff")
    p.add_argument("--cycles", type=int, default=1000, help="random clock edges (default 1000)")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--exhaustive", type=int, metavar="EDGES", help="every D sequence over EDGES edges")
    p.add_argument("--freq", type=_quantity("Hz"), default=125e6, help="clock frequency (default 125MHz)")
    _add_config(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="comparison table with improvement percentages")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--table", choices=("paper",), help="the published four-design table")
    g.add_argument("--rows", type=Path, help="CSV of measured rows; the last row is compared")
    p.add_argument("--baseline", action="append", help="baseline row name (repeatable; default all others)")
    p.add_argument("--csv", type=Path, help="also write the table as CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dump-cell", help="print a built-in cell as netlist text")
    p.add_argument("name", help=f"one of {', '.join(sorted(BUILTIN_CELLS))}")
    p.add_argument("--out", type=Path, help="write to a file instead of stdout")
    p.set_defaults(func=cmd_dump_cell)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NetlistError, StimulusError, SimulationError, MetricsError, CellError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
