"""Input waveforms, clocks and simulator settings, plus their text formats.

Stimulus files::

    # comment
    at 7.5ns d = 0
    clock clk period 8ns duty 50 [phase 0ns]

Config files are ``key = value`` lines with keys vdd, duration, resolution,
r_on_nmos, r_on_pmos, cnode_default_fF, temperature.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

from .logic import Logic
from .units import parse_quantity, to_ps


class StimulusError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EdgeKind(Enum):
    RISING = "rising"
    FALLING = "falling"


@dataclass(frozen=True)
class ClockSpec:
    net: str
    period: int  # ps
    duty: float = 50.0  # percent high
    phase: int = 0  # ps, time of a rising edge

    def __post_init__(self):
        if self.period <= 0:
            raise StimulusError(f"clock {self.net}: period must be positive")
        if not 0 < self.duty < 100:
            raise StimulusError(f"clock {self.net}: duty must be in (0, 100)")
        if not 0 < self.high_time < self.period:
            raise StimulusError(f"clock {self.net}: period too short for duty {self.duty}%")

    @property
    def high_time(self) -> int:
        return int(round(self.period * self.duty / 100.0))

    def value_at(self, t: int) -> Logic:
        return Logic.ONE if (t - self.phase) % self.period < self.high_time else Logic.ZERO

    def edges(self, start: int, stop: int) -> list[tuple[int, EdgeKind]]:
        """Edges with start <= t < stop, in time order."""
        out = []
        k = (start - self.phase) // self.period
        while True:
            rise = self.phase + k * self.period
            fall = rise + self.high_time
            if rise >= stop:
                break
            if rise >= start:
                out.append((rise, EdgeKind.RISING))
            if start <= fall < stop:
                out.append((fall, EdgeKind.FALLING))
            k += 1
        return out


@dataclass
class Stimulus:
    events: list[tuple[int, str, Logic]] = field(default_factory=list)
    clocks: list[ClockSpec] = field(default_factory=list)

    def __post_init__(self):
        last: dict[str, int] = {}
        for t, net, _ in self.events:
            if t < 0:
                raise StimulusError(f"negative time {t} for {net}")
            if t < last.get(net, 0):
                raise StimulusError(f"events for {net} go back in time at {t} ps")
            last[net] = t
        clocked = [c.net for c in self.clocks]
        if len(set(clocked)) != len(clocked):
            raise StimulusError("a net has two clock specifications")
        both = set(clocked) & set(last)
        if both:
            raise StimulusError(f"{sorted(both)[0]} has both a clock and explicit events")

    @property
    def nets(self) -> set[str]:
        return {net for _, net, _ in self.events} | {c.net for c in self.clocks}

    @property
    def last_event_time(self) -> int:
        return max((t for t, _, _ in self.events), default=0)

    def expand(self, duration: int) -> list[tuple[int, str, Logic]]:
        """All input changes in [0, duration], clocks included, stably time-ordered."""
        out = list(self.events)
        for c in self.clocks:
            out.append((0, c.net, c.value_at(0)))
            out.extend(
                (t, c.net, Logic.ONE if kind is EdgeKind.RISING else Logic.ZERO)
                for t, kind in c.edges(1, duration + 1)
            )
        order = {id(e): i for i, e in enumerate(out)}
        return sorted(out, key=lambda e: (e[0], order[id(e)]))

    def value_at(self, net: str, t: int) -> Logic:
        """Input value at ``t`` with changes at ``t`` already applied."""
        for c in self.clocks:
            if c.net == net:
                return c.value_at(t)
        value = None
        for et, enet, ev in self.events:
            if enet != net:
                continue
            if value is None or et <= t:
                value = ev
            else:
                break
        return Logic.X if value is None else value


def parse_stimulus(text: str) -> Stimulus:
    events: list[tuple[int, str, Logic]] = []
    clocks: list[ClockSpec] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = raw.split("#", 1)[0].replace("=", " = ").split()
        if not toks:
            continue
        try:
            if toks[0].lower() == "at" and len(toks) == 5 and toks[3] == "=":
                events.append((to_ps(toks[1]), toks[2].lower(), Logic.parse(toks[4])))
            elif toks[0].lower() == "clock" and len(toks) in (6, 8):
                words = [w.lower() for w in toks[2::2]]
                if words[:2] != ["period", "duty"] or (len(toks) == 8 and words[2] != "phase"):
                    raise StimulusError("expected: clock <net> period <t> duty <pct> [phase <t>]", lineno)
                clocks.append(ClockSpec(
                    net=toks[1].lower(),
                    period=to_ps(toks[3]),
                    duty=float(toks[5].rstrip("%")),
                    phase=to_ps(toks[7]) if len(toks) == 8 else 0,
                ))
            else:
                raise StimulusError(f"cannot parse {raw.strip()!r}", lineno)
        except StimulusError as e:
            if e.line is None:
                raise StimulusError(str(e), lineno) from None
            raise
        except ValueError as e:
            raise StimulusError(str(e), lineno) from None
    try:
        return Stimulus(events, clocks)
    except StimulusError as e:
        raise StimulusError(str(e)) from None


def format_stimulus(stim: Stimulus) -> str:
    lines = [f"clock {c.net} period {c.period}ps duty {c.duty:g} phase {c.phase}ps" for c in stim.clocks]
    lines += [f"at {t}ps {net} = {v.char}" for t, net, v in stim.events]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SimConfig:
    vdd: float = 1.8  # V
    duration: int = 120_000  # ps
    resolution: int = 1  # ps per tick
    r_on_nmos: float = 10e3  # ohm at W/L = 1
    r_on_pmos: float = 20e3
    cnode_default_ff: float = 1.0
    temperature: float = 27.0  # metadata only
    oscillation_bound: int = 1000

    def __post_init__(self):
        if self.vdd <= 0:
            raise ValueError("vdd must be positive")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.r_on_nmos <= 0 or self.r_on_pmos <= 0:
            raise ValueError("on-resistances must be positive")
        if self.cnode_default_ff < 0:
            raise ValueError("cnode_default_fF must be non-negative")

    def replace(self, **changes) -> SimConfig:
        return dataclasses.replace(self, **changes)


def _femtofarads(text: str) -> float:
    # bare numbers are already fF here
    try:
        return float(text)
    except ValueError:
        return parse_quantity(text, "F") * 1e15


_CONFIG_KEYS = {
    "vdd": ("vdd", lambda v: parse_quantity(v, "V")),
    "duration": ("duration", to_ps),
    "resolution": ("resolution", to_ps),
    "r_on_nmos": ("r_on_nmos", lambda v: parse_quantity(v, "ohm")),
    "r_on_pmos": ("r_on_pmos", lambda v: parse_quantity(v, "ohm")),
    "cnode_default_ff": ("cnode_default_ff", lambda v: _femtofarads(v)),
    "temperature": ("temperature", float),
}


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key = key.strip().lower()
        if not eq or key not in _CONFIG_KEYS:
            raise StimulusError(f"unknown config line {raw.strip()!r}", lineno)
        attr, conv = _CONFIG_KEYS[key]
        try:
            changes[attr] = conv(value.strip())
        except ValueError as e:
            raise StimulusError(str(e), lineno) from None
    return (base or SimConfig()).replace(**changes)
