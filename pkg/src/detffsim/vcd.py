"""Value Change Dump output for simulation traces."""

from __future__ import annotations

from .engine import Trace
from .logic import Logic
from .netlist import Netlist

TOOL = "detffsim"
DATE = "fixed"  # no wall-clock content, output must be reproducible


def _id_code(i: int) -> str:
    # printable ASCII 33..126, little-endian base 94
    chars = []
    while True:
        chars.append(chr(33 + i % 94))
        i //= 94
        if i == 0:
            return "".join(chars)
        i -= 1


def _timescale(resolution: int) -> tuple[str, int]:
    """Timescale string and divisor for times in ps."""
    for unit, ps in (("s", 10**12), ("ms", 10**9), ("us", 10**6), ("ns", 10**3), ("ps", 1)):
        for mult in (100, 10, 1):
            if resolution == mult * ps:
                return f"{mult}{unit}", resolution
    return "1ps", 1


def write_vcd(trace: Trace, netlist: Netlist | None = None, nets=None, start: int = 0, stop: int | None = None,
              scope: str = "top") -> bytes:
    """Scalar VCD of ``trace``, one var per net, values only (strength is dropped).

    ``nets`` restricts and orders the dumped nets; ``start``/``stop`` cut a
    window whose initial values are dumped at ``start``.
    """
    if nets is None:
        if netlist is not None:
            nets = [n.name for n in netlist.nets if n.name in trace.waveforms]
        else:
            nets = sorted(trace.waveforms)
    nets = list(nets)
    stop = trace.duration if stop is None else stop
    timescale, div = _timescale(trace.resolution)
    codes = {net: _id_code(i) for i, net in enumerate(nets)}

    out = [
        "$date",
        f"    {DATE}",
        "$end",
        "$version",
        f"    {TOOL}",
        "$end",
        f"$timescale {timescale} $end",
        f"$scope module {scope} $end",
    ]
    out += [f"$var wire 1 {codes[net]} {net} $end" for net in nets]
    out += ["$upscope $end", "$enddefinitions $end"]

    if not nets:
        out += ["$dumpvars", "$end"]
        return ("\n".join(out) + "\n").encode()

    out += [f"#{start // div}", "$dumpvars"]
    last: dict[str, Logic] = {}
    for net in nets:
        v = trace.value_at(net, start)
        last[net] = v
        out.append(f"{v.char}{codes[net]}")
    out.append("$end")

    changes: dict[int, list[tuple[int, str, Logic]]] = {}
    for order, net in enumerate(nets):
        for t, _old, new in trace.value_changes(net):
            if start < t <= stop:
                changes.setdefault(t, []).append((order, net, new))
    for t in sorted(changes):
        lines = []
        for _order, net, v in sorted(changes[t], key=lambda c: c[0]):
            if v != last[net]:
                last[net] = v
                lines.append(f"{v.char}{codes[net]}")
        if lines:
            out.append(f"#{t // div}")
            out += lines
    return ("\n".join(out) + "\n").encode()
