"""Event-driven switch-level simulation of flat transistor netlists.

Nets are grouped into channel-connected components.  A component is solved
to steady state from the rails, the stimulus-driven inputs and the charge
stored on its own nets; the results reach the nets after an RC delay, and
a changed net wakes every component whose transistors it gates.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .logic import UNKNOWN, Logic, SignalState, Strength, is_full_swing
from .netlist import GROUND, RAILS, SUPPLY, DeviceKind, Netlist, NetKind, Transistor
from .stimulus import SimConfig, Stimulus, StimulusError


class SimulationError(RuntimeError):
    pass


class UncoveredInput(SimulationError):
    def __init__(self, net: str):
        self.net = net
        super().__init__(f"input net {net!r} has no stimulus")


class OscillationDetected(SimulationError):
    pass


class NoConvergence(SimulationError):
    pass


@dataclass(frozen=True)
class Component:
    index: int
    nets: tuple[str, ...]  # internal nets solved by this component
    devices: tuple[Transistor, ...]  # transistors with a channel terminal on one of ``nets``
    boundary: tuple[str, ...]  # rails and inputs touching the devices' channels

    @property
    def gate_nets(self) -> tuple[str, ...]:
        return tuple(sorted({t.gate for t in self.devices}))


def _find(parent: dict[str, str], x: str) -> str:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def partition_components(n: Netlist, boundary=None) -> list[Component]:
    """Channel-connected components of a flat netlist.

    ``boundary`` adds driven nets (stimulus inputs) to the rails and declared
    inputs; boundary nets never merge components and belong to none.
    """
    if not n.is_flat:
        raise ValueError("partition_components needs a flat netlist")
    fixed = set(RAILS) | set(n.inputs) | set(boundary or ())
    order = {net.name: i for i, net in enumerate(n.nets)}
    parent = {net.name: net.name for net in n.nets if net.name not in fixed}
    for t in n.transistors:
        a, b = t.drain, t.source
        if a in parent and b in parent:
            ra, rb = _find(parent, a), _find(parent, b)
            if ra != rb:
                # keep the lowest-ordered net as root for deterministic numbering
                if order[ra] < order[rb]:
                    parent[rb] = ra
                else:
                    parent[ra] = rb
    groups: dict[str, list[str]] = {}
    for net in parent:
        groups.setdefault(_find(parent, net), []).append(net)
    roots = sorted(groups, key=order.__getitem__)
    comps = []
    for i, root in enumerate(roots):
        nets = tuple(sorted(groups[root], key=order.__getitem__))
        members = set(nets)
        devices = tuple(t for t in n.transistors if t.drain in members or t.source in members)
        bound = sorted(
            {x for t in devices for x in (t.drain, t.source) if x in fixed}, key=order.__getitem__
        )
        comps.append(Component(i, nets, devices, tuple(bound)))
    return comps


def device_resistance(t: Transistor, cfg: SimConfig) -> float:
    r = cfg.r_on_nmos if t.kind is DeviceKind.NMOS else cfg.r_on_pmos
    return r * t.length / t.width


class _CompiledComponent:
    """Index-based form of a Component for the solver's inner loop."""

    def __init__(self, comp: Component, cfg: SimConfig):
        self.comp = comp
        self.nets = comp.nets
        self.boundary = comp.boundary
        local = {net: i for i, net in enumerate(comp.nets)}
        nb = len(comp.nets)
        for j, net in enumerate(comp.boundary):
            local[net] = nb + j
        self.gate_nets = comp.gate_nets
        gidx = {g: i for i, g in enumerate(self.gate_nets)}
        # (u, v, gate index, on-value, strength cap, resistance)
        self.edges = tuple(
            (
                local[t.drain],
                local[t.source],
                gidx[t.gate],
                Logic.ONE if t.kind is DeviceKind.NMOS else Logic.ZERO,
                Strength.WEAK if t.weak else Strength.STRONG,
                device_resistance(t, cfg),
            )
            for t in comp.devices
        )
        self.cache: dict = {}


def _propagate(cc: _CompiledComponent, on_edges, seeds) -> tuple[list[dict], int]:
    """Max-strength reachability of each value over conducting edges.

    Returns per-node {value: strength} maps (boundary nodes included) and
    the number of relaxation passes that changed something.
    """
    nb = len(cc.nets)
    labels = [dict(s) for s in seeds]
    passes = 0
    limit = nb + 1
    while True:
        changed = False
        for u, v, _, _, cap, _ in on_edges:
            for a, b in ((u, v), (v, u)):
                if b >= nb:
                    continue
                lb = labels[b]
                for value, s in labels[a].items():
                    s = min(s, cap)
                    if s > lb.get(value, -1):
                        lb[value] = s
                        changed = True
        if not changed:
            return labels, passes
        passes += 1
        if passes > limit:
            raise NoConvergence(f"component {cc.comp.index} did not settle in {limit} passes")


def _path_resistance(cc: _CompiledComponent, on_edges, seeds, node: int, value, strength) -> float:
    """Least series resistance from a qualifying driver to ``node``.

    Only paths whose every device and driver are at least ``strength`` count.
    Drivers are seeds carrying ``value`` (any value when value is X).
    """
    nb = len(cc.nets)
    dist: dict[int, float] = {}
    heap: list[tuple[float, int]] = []
    for i, seed in enumerate(seeds):
        for sv, s in seed.items():
            if s >= strength and (value == Logic.X or sv == value):
                if i == node:
                    return 0.0
                dist[i] = 0.0
                heap.append((0.0, i))
    heapq.heapify(heap)
    adj: dict[int, list[tuple[int, float]]] = {}
    for u, v, _, _, cap, r in on_edges:
        if cap >= strength:
            adj.setdefault(u, []).append((v, r))
            adj.setdefault(v, []).append((u, r))
    while heap:
        d, u = heapq.heappop(heap)
        if u == node:
            return d
        if d > dist.get(u, float("inf")):
            continue
        if u >= nb and d > 0:
            continue  # never route through a driven boundary net
        for v, r in adj.get(u, ()):
            nd = d + r
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return 0.0


def _solve_edges(cc: _CompiledComponent, on_edges, boundary_states, prev_values):
    seeds = [{v: Strength.STORED} for v in prev_values]
    seeds += [{st.value: st.strength} for st in boundary_states]
    labels, passes = _propagate(cc, on_edges, seeds)
    out = []
    for i in range(len(cc.nets)):
        lab = labels[i]
        top = max(lab.values())
        winners = [v for v, s in lab.items() if s == top]
        value = winners[0] if len(winners) == 1 else Logic.X
        r = 0.0
        if top > Strength.STORED:
            r = _path_resistance(cc, on_edges, seeds, i, value, top)
        out.append((SignalState(value, Strength(top)), r))
    return out, passes


def _solve(cc: _CompiledComponent, gate_values, boundary_states, prev_values):
    """Memoized steady state: ((state, path resistance) per net, passes)."""
    key = (gate_values, boundary_states, prev_values)
    hit = cc.cache.get(key)
    if hit is not None:
        return hit
    if Logic.X not in gate_values:
        on_edges = [e for e in cc.edges if gate_values[e[2]] == e[3]]
        result, passes = _solve_edges(cc, on_edges, boundary_states, prev_values)
    else:
        # X-gated switches: the conducting and non-conducting assumptions must agree
        sure = [e for e in cc.edges if gate_values[e[2]] == e[3]]
        maybe = [e for e in cc.edges if gate_values[e[2]] == Logic.X]
        res_on, p_on = _solve_edges(cc, sure + maybe, boundary_states, prev_values)
        res_off, p_off = _solve_edges(cc, sure, boundary_states, prev_values)
        passes = max(p_on, p_off)
        result = []
        for (s_on, r_on), (s_off, r_off) in zip(res_on, res_off):
            if s_on.value == s_off.value and s_on.value != Logic.X:
                result.append((s_on, r_on) if s_on.strength <= s_off.strength else (s_off, r_off))
            else:
                strength = max(s_on.strength, s_off.strength)
                result.append((SignalState(Logic.X, strength), min(r_on, r_off)))
    hit = (tuple(result), passes)
    cc.cache[key] = hit
    return hit


def _boundary_state(net: str, states) -> SignalState:
    if net == SUPPLY:
        return SignalState(Logic.ONE, Strength.STRONG)
    if net == GROUND:
        return SignalState(Logic.ZERO, Strength.STRONG)
    return states.get(net, UNKNOWN)


@dataclass(frozen=True)
class Solution:
    states: dict[str, SignalState]
    resistance: dict[str, float]  # ohms along the winning drive path, 0 when undriven
    passes: int


def settle_component(comp: Component, gate_states, prev_states, cfg: SimConfig | None = None) -> Solution:
    """Steady state of one component with its resistances and relaxation count.

    ``gate_states`` supplies every gate net and every non-rail boundary net;
    ``prev_states`` supplies the component's own nets (missing ones are X).
    """
    cc = _CompiledComponent(comp, cfg or SimConfig())
    gate_values = tuple(gate_states[g].value if g not in RAILS else _boundary_state(g, {}).value
                        for g in cc.gate_nets)
    boundary = tuple(_boundary_state(b, gate_states) for b in cc.boundary)
    prev = tuple(prev_states.get(n, UNKNOWN).value for n in cc.nets)
    result, passes = _solve(cc, gate_values, boundary, prev)
    return Solution(
        states={n: st for n, (st, _) in zip(cc.nets, result)},
        resistance={n: r for n, (_, r) in zip(cc.nets, result)},
        passes=passes,
    )


def solve_component(comp: Component, gate_states, prev_states, cfg: SimConfig | None = None) -> dict[str, SignalState]:
    return settle_component(comp, gate_states, prev_states, cfg).states


# -- traces ------------------------------------------------------------------

@dataclass
class Trace:
    waveforms: dict[str, list[tuple[int, SignalState]]]
    duration: int
    resolution: int = 1
    toggle_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.toggle_counts:
            self.toggle_counts = {net: len(self.transitions(net)) for net in self.waveforms}

    @property
    def final_states(self) -> dict[str, SignalState]:
        return {net: wave[-1][1] for net, wave in self.waveforms.items() if wave}

    def state_at(self, net: str, t: int) -> SignalState:
        """State at ``t`` with changes at ``t`` applied."""
        wave = self.waveforms[net]
        lo, hi = 0, len(wave)
        while lo < hi:
            mid = (lo + hi) // 2
            if wave[mid][0] <= t:
                lo = mid + 1
            else:
                hi = mid
        return wave[lo - 1][1] if lo else UNKNOWN

    def value_at(self, net: str, t: int) -> Logic:
        return self.state_at(net, t).value

    def value_changes(self, net: str) -> list[tuple[int, Logic, Logic]]:
        """(time, old, new) for every logic-value change, X transitions included."""
        out = []
        prev = None
        for t, st in self.waveforms[net]:
            if prev is not None and st.value != prev:
                out.append((t, prev, st.value))
            prev = st.value
        return out

    def transitions(self, net: str) -> list[tuple[int, Logic, Logic]]:
        """Full-swing 0<->1 changes only."""
        return [c for c in self.value_changes(net) if is_full_swing(c[1], c[2])]

    def toggles_in(self, net: str, start: int, stop: int) -> int:
        """Full-swing toggles with start <= t < stop."""
        return sum(1 for t, _, _ in self.transitions(net) if start <= t < stop)


# -- simulator ---------------------------------------------------------------

class Simulator:
    """A flat netlist compiled for repeated runs; solve results are memoized."""

    def __init__(self, n: Netlist, cfg: SimConfig | None = None, driven=()):
        if not n.is_flat:
            raise ValueError("simulate a flattened netlist")
        self.netlist = n
        self.cfg = cfg or SimConfig()
        self.driven = set(n.inputs) | {d.lower() for d in driven}
        unknown = self.driven - set(n.net_map)
        if unknown:
            raise SimulationError(f"stimulus drives unknown net {sorted(unknown)[0]!r}")
        self.components = partition_components(n, self.driven)
        self.compiled = [_CompiledComponent(c, self.cfg) for c in self.components]
        self.net_order = {net.name: i for i, net in enumerate(n.nets)}
        self.capacitance = n.lumped_capacitance(self.cfg.cnode_default_ff)
        self.gate_fanout: dict[str, list[int]] = {}
        self.channel_fanout: dict[str, list[int]] = {}
        for c in self.components:
            for g in c.gate_nets:
                self.gate_fanout.setdefault(g, []).append(c.index)
            for b in c.boundary:
                self.channel_fanout.setdefault(b, []).append(c.index)

    def delay(self, net: str, resistance: float) -> int:
        """RC delay in ps, rounded to the tick grid and never below one tick."""
        res = self.cfg.resolution
        ticks = round(resistance * self.capacitance[net] * 1e-3 / res)
        return max(1, ticks) * res

    def run(self, stim: Stimulus, initial=None, duration: int | None = None) -> Trace:
        """Simulate from t=0; ``duration`` overrides the configured stop time."""
        cfg = self.cfg
        res = cfg.resolution
        duration = cfg.duration if duration is None else duration
        for net in self.netlist.inputs:
            if net not in stim.nets:
                raise UncoveredInput(net)
        extra = stim.nets - self.driven
        if extra:
            raise SimulationError(f"simulator was not compiled with {sorted(extra)[0]!r} as driven")
        if stim.last_event_time > duration:
            raise StimulusError(f"stimulus event at {stim.last_event_time} ps is past the duration")

        state: dict[str, SignalState] = {}
        for net in self.netlist.nets:
            if net.kind is NetKind.SUPPLY or net.kind is NetKind.GROUND:
                state[net.name] = _boundary_state(net.name, {})
            else:
                state[net.name] = UNKNOWN
        for net, st in (initial or {}).items():
            state[net.lower()] = st

        heap: list = []
        seq = 0
        first: set[str] = set()
        for t, net, value in stim.expand(duration):
            t = -(-t // res) * res  # onto the tick grid
            if net not in first:
                first.add(net)
                t = 0  # inputs start at their first value
            heapq.heappush(heap, (t, self.net_order[net], seq, net, SignalState(value, Strength.STRONG), True))
            seq += 1

        waves = {name: [(0, st)] for name, st in state.items()}
        pending: dict[str, tuple[int, SignalState]] = {}
        evals = [0] * len(self.components)

        def evaluate(ci: int, now: int) -> None:
            nonlocal seq
            evals[ci] += 1
            if evals[ci] > cfg.oscillation_bound:
                raise OscillationDetected(
                    f"component {ci} {list(self.components[ci].nets)} re-evaluated more than "
                    f"{cfg.oscillation_bound} times before {now} ps"
                )
            cc = self.compiled[ci]
            gate_values = tuple(state[g].value for g in cc.gate_nets)
            boundary = tuple(state[b] for b in cc.boundary)
            prev = tuple(state[n].value for n in cc.nets)
            result, _ = _solve(cc, gate_values, boundary, prev)
            for net, (new, r) in zip(cc.nets, result):
                p = pending.get(net)
                if p is not None and p[1] == new:
                    continue
                if new == state[net]:
                    pending.pop(net, None)
                    continue
                seq += 1
                pending[net] = (seq, new)
                heapq.heappush(heap, (now + self.delay(net, r), self.net_order[net], seq, net, new, False))

        def apply(now: int, net: str, new: SignalState, affected: set[int]) -> None:
            old = state[net]
            if new == old:
                return
            state[net] = new
            wave = waves[net]
            if wave[-1][0] == now:
                wave[-1] = (now, new)
            else:
                wave.append((now, new))
            if new.value != old.value:
                affected.update(self.gate_fanout.get(net, ()))
            affected.update(self.channel_fanout.get(net, ()))

        now = 0
        affected = set(range(len(self.components)))
        while heap and heap[0][0] == 0:
            _, _, _, net, new, _ = heapq.heappop(heap)
            apply(0, net, new, affected)
        for ci in sorted(affected):
            evaluate(ci, 0)

        while heap and heap[0][0] <= duration:
            now = heap[0][0]
            affected = set()
            stimulus_seen = False
            while heap and heap[0][0] == now:
                _, _, s, net, new, from_stim = heapq.heappop(heap)
                if from_stim:
                    stimulus_seen = True
                else:
                    p = pending.get(net)
                    if p is None or p[0] != s:
                        continue
                    del pending[net]
                apply(now, net, new, affected)
            if stimulus_seen:
                evals = [0] * len(self.components)
            for ci in sorted(affected):
                evaluate(ci, now)

        return Trace(waves, duration, res)


def run(n: Netlist, stim: Stimulus, cfg: SimConfig | None = None, initial=None) -> Trace:
    """Simulate ``n`` (flattened if needed) under ``stim``."""
    from .netlist import flatten

    flat = flatten(n)
    return Simulator(flat, cfg, driven=stim.nets).run(stim, initial)
