"""SPICE-subset transistor netlists: data model, parser, serializer, flattener.

Card grammar (one card per line, case-insensitive, ``*`` starts a comment)::

    M<name> <drain> <gate> <source> <body> <NMOS|PMOS> W=<len> L=<len> [DRIVE=weak|strong]
    C<name> <net_a> <net_b> <cap>
    X<name> <net> ... <subckt>
    .subckt <name> <port> ...
    .ends [<name>]
    .input <net> ...
    .output <net> ...
    .end

Lengths are stored in nanometers and capacitances in femtofarads.  Values
take the SPICE suffixes f, p, n, u (a bare number is SI).  ``vdd`` and
``gnd`` are global rails and exist in every netlist.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

from .units import format_number, parse_quantity

SUPPLY = "vdd"
GROUND = "gnd"
RAILS = (SUPPLY, GROUND)

MIN_WIDTH_NM = 600.0
MAX_WIDTH_NM = 1200.0
CHANNEL_LENGTH_NM = 180.0


class NetlistError(ValueError):
    """Base class for netlist problems; ``line``/``column`` are 1-based when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class NetlistSyntaxError(NetlistError):
    pass


class UnknownCard(NetlistError):
    pass


class DanglingNet(NetlistError):
    pass


class RecursiveSubcircuit(NetlistError):
    pass


class BadSizing(NetlistError):
    pass


class DeviceKind(Enum):
    NMOS = "nmos"
    PMOS = "pmos"


class NetKind(Enum):
    SUPPLY = "supply"
    GROUND = "ground"
    INPUT = "input"
    OUTPUT = "output"
    INTERNAL = "internal"


@dataclass(frozen=True)
class Transistor:
    name: str
    kind: DeviceKind
    drain: str
    gate: str
    source: str
    body: str
    width: float  # nm
    length: float  # nm
    weak: bool = False

    @property
    def terminals(self) -> tuple[str, str, str, str]:
        return (self.drain, self.gate, self.source, self.body)

    def conducts(self, gate_value: int) -> bool:
        """Switch predicate for a settled 0/1 gate."""
        return gate_value == (1 if self.kind is DeviceKind.NMOS else 0)


@dataclass(frozen=True)
class Capacitor:
    name: str
    net_a: str
    net_b: str
    value: float  # fF


@dataclass(frozen=True)
class Net:
    name: str
    kind: NetKind = NetKind.INTERNAL


@dataclass(frozen=True)
class Instance:
    name: str
    nets: tuple[str, ...]
    subckt: str


@dataclass(frozen=True)
class Subcircuit:
    name: str
    ports: tuple[str, ...]
    body: Netlist


def _natural_key(name: str):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", name)]


@dataclass(frozen=True)
class Netlist:
    nets: tuple[Net, ...] = ()
    transistors: tuple[Transistor, ...] = ()
    capacitors: tuple[Capacitor, ...] = ()
    instances: tuple[Instance, ...] = ()
    subcircuits: tuple[Subcircuit, ...] = ()

    @cached_property
    def net_map(self) -> dict[str, Net]:
        return {n.name: n for n in self.nets}

    @cached_property
    def subckt_map(self) -> dict[str, Subcircuit]:
        return {s.name: s for s in self.subcircuits}

    @cached_property
    def transistor_map(self) -> dict[str, Transistor]:
        return {t.name: t for t in self.transistors}

    def nets_of_kind(self, kind: NetKind) -> list[str]:
        return [n.name for n in self.nets if n.kind is kind]

    @property
    def inputs(self) -> list[str]:
        return self.nets_of_kind(NetKind.INPUT)

    @property
    def outputs(self) -> list[str]:
        return self.nets_of_kind(NetKind.OUTPUT)

    @property
    def is_flat(self) -> bool:
        return not self.instances

    def lumped_capacitance(self, cnode_default_ff: float = 1.0) -> dict[str, float]:
        """Per-net capacitance in fF.

        Each transistor terminal (body excluded) adds ``cnode_default_ff`` to
        its net, every net gets at least one default share, and explicit
        capacitors add their value to both ends.
        """
        terms = {n.name: 0 for n in self.nets}
        for t in self.transistors:
            for net in (t.drain, t.gate, t.source):
                terms[net] += 1
        cap = {name: max(count, 1) * cnode_default_ff for name, count in terms.items()}
        for c in self.capacitors:
            cap[c.net_a] += c.value
            cap[c.net_b] += c.value
        return cap


class NetlistBuilder:
    """Accumulates cards and produces a validated, canonically ordered Netlist."""

    def __init__(self, validate_sizing: bool = False, infer_inputs: bool = True, top_level: bool = True):
        self.validate_sizing = validate_sizing
        self.infer_inputs = infer_inputs
        # subcircuit bodies resolve their instances against the enclosing file
        self.top_level = top_level
        self.transistors: list[Transistor] = []
        self.capacitors: list[Capacitor] = []
        self.instances: list[Instance] = []
        self.subcircuits: dict[str, Subcircuit] = {}
        self.extra_nets: set[str] = set()
        self.declared: dict[str, NetKind] = {}
        self._names: dict[str, int | None] = {}
        self._lines: dict[str, int | None] = {}

    def _claim(self, name: str, line: int | None) -> None:
        if name in self._names:
            raise NetlistSyntaxError(f"duplicate element name {name!r}", line)
        self._names[name] = line

    def add_transistor(self, t: Transistor, line: int | None = None) -> Transistor:
        self._claim(t.name, line)
        if t.width <= 0 or t.length <= 0:
            raise BadSizing(f"{t.name}: width and length must be positive", line)
        if self.validate_sizing:
            if not MIN_WIDTH_NM <= t.width <= MAX_WIDTH_NM:
                raise BadSizing(
                    f"{t.name}: W={format_number(t.width)}nm outside "
                    f"[{MIN_WIDTH_NM:g}, {MAX_WIDTH_NM:g}] nm",
                    line,
                )
            if t.length != CHANNEL_LENGTH_NM:
                raise BadSizing(
                    f"{t.name}: L={format_number(t.length)}nm, expected {CHANNEL_LENGTH_NM:g}nm",
                    line,
                )
        self.transistors.append(t)
        return t

    def add_capacitor(self, c: Capacitor, line: int | None = None) -> Capacitor:
        self._claim(c.name, line)
        if c.value < 0:
            raise NetlistSyntaxError(f"{c.name}: negative capacitance", line)
        self.capacitors.append(c)
        return c

    def add_instance(self, inst: Instance, line: int | None = None) -> Instance:
        self._claim(inst.name, line)
        self.instances.append(inst)
        self._lines[inst.name] = line
        return inst

    def add_subcircuit(self, sub: Subcircuit, line: int | None = None) -> None:
        if sub.name in self.subcircuits:
            raise NetlistSyntaxError(f"duplicate subcircuit {sub.name!r}", line)
        self.subcircuits[sub.name] = sub
        self._lines[f".subckt {sub.name}"] = line

    def declare(self, net: str, kind: NetKind, line: int | None = None) -> None:
        if net in RAILS:
            raise NetlistSyntaxError(f"rail {net!r} cannot be declared {kind.value}", line)
        prev = self.declared.get(net)
        if prev is not None and prev is not kind:
            raise NetlistSyntaxError(f"net {net!r} declared both {prev.value} and {kind.value}", line)
        self.declared[net] = kind
        self._lines[f"net {net}"] = line

    def _referenced(self) -> set[str]:
        nets = set(RAILS) | self.extra_nets
        for t in self.transistors:
            nets.update(t.terminals)
        for c in self.capacitors:
            nets.update((c.net_a, c.net_b))
        for i in self.instances:
            nets.update(i.nets)
        return nets

    def build(self) -> Netlist:
        for inst in self.instances if self.top_level else ():
            line = self._lines.get(inst.name)
            sub = self.subcircuits.get(inst.subckt)
            if sub is None:
                raise DanglingNet(f"{inst.name}: unknown subcircuit {inst.subckt!r}", line)
            if len(inst.nets) != len(sub.ports):
                raise NetlistSyntaxError(
                    f"{inst.name}: {len(inst.nets)} nets for {len(sub.ports)}-port {sub.name!r}",
                    line,
                )
        _check_recursion(self.subcircuits, self.instances, self._lines)

        referenced = self._referenced()
        for net, kind in self.declared.items():
            if net not in referenced:
                raise DanglingNet(
                    f".{kind.value} names {net!r}, which no element connects to",
                    self._lines.get(f"net {net}"),
                )

        kinds = {name: NetKind.INTERNAL for name in referenced}
        kinds[SUPPLY] = NetKind.SUPPLY
        kinds[GROUND] = NetKind.GROUND
        kinds.update(self.declared)
        if self.infer_inputs:
            for name in _gate_only_nets(self.transistors, self.capacitors, self.instances):
                if kinds[name] is NetKind.INTERNAL:
                    kinds[name] = NetKind.INPUT

        return Netlist(
            nets=tuple(Net(n, kinds[n]) for n in sorted(kinds, key=_natural_key)),
            transistors=tuple(sorted(self.transistors, key=lambda t: _natural_key(t.name))),
            capacitors=tuple(sorted(self.capacitors, key=lambda c: _natural_key(c.name))),
            instances=tuple(sorted(self.instances, key=lambda i: _natural_key(i.name))),
            subcircuits=tuple(self.subcircuits[k] for k in sorted(self.subcircuits, key=_natural_key)),
        )


def _gate_only_nets(transistors, capacitors, instances) -> set[str]:
    """Non-rail nets that only ever appear on gate terminals (and capacitors)."""
    gates = {t.gate for t in transistors}
    channel = set()
    for t in transistors:
        channel.update((t.drain, t.source, t.body))
    for i in instances:
        channel.update(i.nets)
    return {g for g in gates - channel if g not in RAILS}


def _check_recursion(subcircuits: dict[str, Subcircuit], instances, lines) -> None:
    done: set[str] = set()

    def visit(name: str, stack: tuple[str, ...]) -> None:
        if name in stack:
            cycle = " -> ".join(stack[stack.index(name):] + (name,))
            raise RecursiveSubcircuit(f"recursive subcircuit: {cycle}", lines.get(f".subckt {name}"))
        if name in done or name not in subcircuits:
            return
        for inst in subcircuits[name].body.instances:
            visit(inst.subckt, stack + (name,))
        done.add(name)

    for inst in instances:
        visit(inst.subckt, ())
    for name in subcircuits:
        visit(name, ())


def subcircuit(name: str, ports, body: Netlist) -> Subcircuit:
    """Wrap a netlist as a subcircuit; port/IO kinds do not survive inside a body."""
    b = NetlistBuilder(infer_inputs=False, top_level=False)
    b.extra_nets.update(ports)
    for t in body.transistors:
        b.add_transistor(t)
    for c in body.capacitors:
        b.add_capacitor(c)
    for i in body.instances:
        b.add_instance(i)
    missing = set(ports) - set(body.net_map)
    if missing:
        raise DanglingNet(f"subcircuit {name}: port {sorted(missing)[0]!r} is not in the body")
    return Subcircuit(name, tuple(ports), b.build())


def attach_load(n: Netlist, net: str, value_ff: float, name: str = "cload") -> Netlist:
    """Copy of ``n`` with a capacitor from ``net`` to ground."""
    if value_ff <= 0:
        return n
    b = NetlistBuilder(infer_inputs=False)
    for x in n.nets:
        b.extra_nets.add(x.name)
        if x.kind in (NetKind.INPUT, NetKind.OUTPUT):
            b.declare(x.name, x.kind)
    for t in n.transistors:
        b.add_transistor(t)
    for c in n.capacitors:
        b.add_capacitor(c)
    b.add_capacitor(Capacitor(name, net.lower(), GROUND, value_ff))
    for i in n.instances:
        b.add_instance(i)
    for s in n.subcircuits:
        b.add_subcircuit(s)
    return b.build()


# -- parsing ---------------------------------------------------------------

_TOKEN = re.compile(r"\S+")


def _length_nm(text: str, line: int, col: int) -> float:
    try:
        return round(parse_quantity(text) * 1e9, 6)
    except ValueError:
        raise NetlistSyntaxError(f"bad length {text!r}", line, col) from None


def _cap_ff(text: str, line: int, col: int) -> float:
    try:
        return round(parse_quantity(text, "F") * 1e15, 9)
    except ValueError:
        raise NetlistSyntaxError(f"bad capacitance {text!r}", line, col) from None


def _parse_mos(toks, lineno: int) -> Transistor:
    if len(toks) < 6:
        col = toks[-1][1] + len(toks[-1][0])
        raise NetlistSyntaxError("transistor card needs drain gate source body model", lineno, col)
    name = toks[0][0]
    d, g, s, b = (tok for tok, _ in toks[1:5])
    model, mcol = toks[5]
    try:
        kind = DeviceKind(model)
    except ValueError:
        raise NetlistSyntaxError(f"model must be NMOS or PMOS, got {model!r}", lineno, mcol) from None
    params: dict[str, tuple[str, int]] = {}
    for tok, col in toks[6:]:
        key, eq, value = tok.partition("=")
        if not eq or not value or key not in ("w", "l", "drive"):
            raise NetlistSyntaxError(f"unexpected parameter {tok!r}", lineno, col)
        params[key] = (value, col)
    for key in ("w", "l"):
        if key not in params:
            raise NetlistSyntaxError(f"{name}: missing {key.upper()}=", lineno, toks[5][1])
    weak = False
    if "drive" in params:
        value, col = params["drive"]
        if value not in ("weak", "strong"):
            raise NetlistSyntaxError(f"DRIVE must be weak or strong, got {value!r}", lineno, col)
        weak = value == "weak"
    return Transistor(
        name=name, kind=kind, drain=d, gate=g, source=s, body=b,
        width=_length_nm(params["w"][0], lineno, params["w"][1]),
        length=_length_nm(params["l"][0], lineno, params["l"][1]),
        weak=weak,
    )


def parse_netlist(text: str, validate_sizing: bool = False) -> Netlist:
    """Parse netlist text into a validated flat-or-hierarchical Netlist."""
    top = NetlistBuilder(validate_sizing)
    cur = top
    sub_head: tuple[str, tuple[str, ...], int] | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = [(m.group().lower(), m.start() + 1) for m in _TOKEN.finditer(raw)]
        if not toks or toks[0][0].startswith("*"):
            continue
        head, col = toks[0]
        if head.startswith("m"):
            cur.add_transistor(_parse_mos(toks, lineno), lineno)
        elif head.startswith("c"):
            if len(toks) != 4:
                raise NetlistSyntaxError("capacitor card is C<name> <net_a> <net_b> <value>", lineno, col)
            cur.add_capacitor(
                Capacitor(head, toks[1][0], toks[2][0], _cap_ff(toks[3][0], lineno, toks[3][1])),
                lineno,
            )
        elif head.startswith("x"):
            if len(toks) < 2:
                raise NetlistSyntaxError("instance card needs a subcircuit name", lineno, col)
            cur.add_instance(Instance(head, tuple(t for t, _ in toks[1:-1]), toks[-1][0]), lineno)
        elif head == ".subckt":
            if sub_head is not None:
                raise NetlistSyntaxError("nested .subckt definitions are not supported", lineno, col)
            if len(toks) < 2:
                raise NetlistSyntaxError(".subckt needs a name", lineno, col)
            ports = tuple(t for t, _ in toks[2:])
            for p, pcol in toks[2:]:
                if p in RAILS:
                    raise NetlistSyntaxError(f"rail {p!r} cannot be a port", lineno, pcol)
            if len(set(ports)) != len(ports):
                raise NetlistSyntaxError("duplicate port name", lineno, col)
            sub_head = (toks[1][0], ports, lineno)
            cur = NetlistBuilder(validate_sizing, infer_inputs=False, top_level=False)
            cur.extra_nets.update(ports)
        elif head == ".ends":
            if sub_head is None:
                raise NetlistSyntaxError(".ends without .subckt", lineno, col)
            name, ports, start = sub_head
            if len(toks) > 1 and toks[1][0] != name:
                raise NetlistSyntaxError(f".ends {toks[1][0]} closes .subckt {name}", lineno, toks[1][1])
            top.add_subcircuit(Subcircuit(name, ports, cur.build()), start)
            cur, sub_head = top, None
        elif head in (".input", ".output"):
            if cur is not top:
                raise NetlistSyntaxError(f"{head} is only allowed at top level", lineno, col)
            kind = NetKind.INPUT if head == ".input" else NetKind.OUTPUT
            for net, _ in toks[1:]:
                top.declare(net, kind, lineno)
        elif head == ".end":
            break
        else:
            raise UnknownCard(f"unknown card {toks[0][0]!r}", lineno, col)

    if sub_head is not None:
        raise NetlistSyntaxError(f".subckt {sub_head[0]} is missing .ends", sub_head[2])
    # subcircuit bodies may instantiate subcircuits defined after them
    for sub in top.subcircuits.values():
        for inst in sub.body.instances:
            callee = top.subcircuits.get(inst.subckt)
            if callee is None:
                raise DanglingNet(f"{inst.name}: unknown subcircuit {inst.subckt!r}")
            if len(inst.nets) != len(callee.ports):
                raise NetlistSyntaxError(
                    f"{sub.name}/{inst.name}: {len(inst.nets)} nets for {len(callee.ports)}-port {callee.name!r}"
                )
    return top.build()


# -- serialization ---------------------------------------------------------

HEADER = "* detffsim netlist"


def _mos_card(t: Transistor) -> str:
    card = (
        f"{t.name} {t.drain} {t.gate} {t.source} {t.body} {t.kind.name} "
        f"W={format_number(t.width)}n L={format_number(t.length)}n"
    )
    return card + (" DRIVE=weak" if t.weak else "")


def _body_cards(n: Netlist) -> list[str]:
    lines = [_mos_card(t) for t in n.transistors]
    lines += [f"{c.name} {c.net_a} {c.net_b} {format_number(c.value)}f" for c in n.capacitors]
    lines += [" ".join((i.name, *i.nets, i.subckt)) for i in n.instances]
    return lines


def serialize_netlist(n: Netlist) -> str:
    """Canonical card text; byte-deterministic and re-parseable to an equal Netlist."""
    lines = [HEADER]
    for sub in n.subcircuits:
        lines.append(" ".join((".subckt", sub.name, *sub.ports)))
        lines += _body_cards(sub.body)
        lines.append(f".ends {sub.name}")
    if n.inputs:
        lines.append(" ".join([".input", *n.inputs]))
    if n.outputs:
        lines.append(" ".join([".output", *n.outputs]))
    lines += _body_cards(n)
    return "\n".join(lines) + "\n"


# -- flattening ------------------------------------------------------------

def _prefixed_name(name: str, path: str) -> str:
    # m1 -> m.x1.m1 ; m.x2.m1 -> m.x1.x2.m1
    letter, rest = name[0], name
    if len(name) > 1 and name[1] == ".":
        rest = name[2:]
    return f"{letter}.{path}.{rest}"


def flatten(n: Netlist) -> Netlist:
    """Expand every subcircuit instance; internal nets become ``<instance>.<net>``."""
    if n.is_flat:
        return n
    _check_recursion(n.subckt_map, n.instances, {})
    b = NetlistBuilder(infer_inputs=True)
    for net in n.nets:
        if net.kind in (NetKind.INPUT, NetKind.OUTPUT):
            b.declare(net.name, net.kind)
        b.extra_nets.add(net.name)
    for t in n.transistors:
        b.add_transistor(t)
    for c in n.capacitors:
        b.add_capacitor(c)
    for inst in n.instances:
        _expand(inst, "", {}, n.subckt_map, b)
    return b.build()


def _expand(inst: Instance, parent_path: str, parent_map: dict[str, str], subs, b: NetlistBuilder) -> None:
    sub = subs[inst.subckt]
    path = f"{parent_path}.{inst.name}" if parent_path else inst.name

    def outer(net: str) -> str:
        if net in RAILS:
            return net
        return parent_map.get(net, f"{parent_path}.{net}" if parent_path else net)

    port_map = {p: outer(net) for p, net in zip(sub.ports, inst.nets)}

    def inner(net: str) -> str:
        if net in RAILS:
            return net
        return port_map.get(net, f"{path}.{net}")

    for t in sub.body.transistors:
        b.add_transistor(Transistor(
            _prefixed_name(t.name, path), t.kind, inner(t.drain), inner(t.gate),
            inner(t.source), inner(t.body), t.width, t.length, t.weak,
        ))
    for c in sub.body.capacitors:
        b.add_capacitor(Capacitor(_prefixed_name(c.name, path), inner(c.net_a), inner(c.net_b), c.value))
    for net in sub.body.nets:
        if net.name not in RAILS:
            b.extra_nets.add(inner(net.name))
    for child in sub.body.instances:
        child_map = {net: inner(net) for net in sub.ports}
        child_map.update({net.name: inner(net.name) for net in sub.body.nets})
        _expand(child, path, child_map, subs, b)


def expanded_device_count(n: Netlist) -> int:
    """Transistor count of the fully expanded hierarchy, without flattening."""
    subs = n.subckt_map

    def count(body: Netlist) -> int:
        return len(body.transistors) + sum(count(subs[i.subckt].body) for i in body.instances)

    return count(n)


def count_clocked_transistors(n: Netlist, clock_nets) -> int:
    """Number of transistors whose gate sits on one of ``clock_nets``."""
    clock_nets = {c.lower() for c in clock_nets}
    return sum(1 for t in n.transistors if t.gate in clock_nets)
