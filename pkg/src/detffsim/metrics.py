"""Power, clk-to-Q delay, power-delay product and comparison tables.

Average power follows the usual three-term CMOS budget: switching power
from the simulated toggles, plus constant short-circuit and leakage
currents times the supply.  Switching energy is 1/2*C*Vdd^2 per full-swing
transition, so the switching term is quadratic in the supply.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field, fields

from .engine import Trace
from .netlist import RAILS, Netlist


class MetricsError(ValueError):
    pass


class EmptyWindow(MetricsError):
    pass


class NoTransitions(MetricsError):
    pass


class ZeroBaseline(MetricsError):
    pass


@dataclass(frozen=True)
class PowerParams:
    vdd: float = 1.8  # V
    i_sc: float = 0.0  # A
    i_leakage: float = 0.0  # A
    activity_overrides: dict[str, float] | None = None  # full-swing transitions per clock period

    def __post_init__(self):
        if self.vdd <= 0:
            raise MetricsError("vdd must be positive")
        if self.i_sc < 0 or self.i_leakage < 0:
            raise MetricsError("currents must be non-negative")


def net_energy_per_toggle(cap_ff: float, vdd: float) -> float:
    """Joules for one full-swing transition of ``cap_ff`` femtofarads."""
    return 0.5 * cap_ff * 1e-15 * vdd * vdd


def dynamic_power(trace: Trace, netlist: Netlist, vdd: float, start: int, stop: int,
                  cnode_default_ff: float = 1.0, nets=None, activity: dict[str, float] | None = None,
                  clock_period: int | None = None) -> float:
    """Switching power in watts over [start, stop) ps.

    Sums toggles x 1/2 C Vdd^2 over ``nets`` (all non-rail nets by default)
    and divides by the window.  ``activity`` replaces a net's measured toggle
    count by transitions-per-period x periods in the window.
    """
    window = stop - start
    if window <= 0:
        raise EmptyWindow(f"empty power window [{start}, {stop})")
    caps = netlist.lumped_capacitance(cnode_default_ff)
    if nets is None:
        nets = [n.name for n in netlist.nets if n.name not in RAILS]
    activity = activity or {}
    energy = 0.0
    for net in nets:
        if net in activity:
            if not clock_period:
                raise MetricsError("activity overrides need the clock period")
            toggles = activity[net] * window / clock_period
        else:
            toggles = trace.toggles_in(net, start, stop)
        energy += toggles * net_energy_per_toggle(caps[net], vdd)
    return energy / (window * 1e-12)


def total_power(p_dyn: float, params: PowerParams) -> float:
    return p_dyn + params.i_sc * params.vdd + params.i_leakage * params.vdd


@dataclass(frozen=True)
class ClkToQ:
    min: int
    max: int
    per_edge: list[tuple[int, int]]  # (edge time, delay) in ps


def measure_clk_to_q(trace: Trace, clk_net: str, q_net: str, settle_exclusion: int = 0) -> ClkToQ:
    """Delay from each clock edge to the first full-swing Q change before the next edge."""
    edges = [t for t, _, _ in trace.transitions(clk_net)]
    q_times = [t for t, _, _ in trace.transitions(q_net) if t >= settle_exclusion]
    per_edge = []
    qi = 0
    for i, edge in enumerate(edges):
        if edge < settle_exclusion:
            continue
        nxt = edges[i + 1] if i + 1 < len(edges) else float("inf")
        while qi < len(q_times) and q_times[qi] <= edge:
            qi += 1
        if qi < len(q_times) and q_times[qi] < nxt:
            per_edge.append((edge, q_times[qi] - edge))
    if not per_edge:
        raise NoTransitions(f"{q_net} never switches after {settle_exclusion} ps")
    delays = [d for _, d in per_edge]
    return ClkToQ(min(delays), max(delays), per_edge)


def pdp(avg_power: float, delay: float) -> float:
    """Power-delay product in joules (watts x seconds)."""
    if avg_power < 0 or delay < 0:
        raise MetricsError("power and delay must be non-negative")
    return avg_power * delay


def improvement_pct(base: float, new: float, lower_is_better: bool = True) -> float:
    if base == 0:
        raise ZeroBaseline("improvement against a zero baseline")
    if lower_is_better:
        return (base - new) / base * 100.0
    return (new - base) / base * 100.0


@dataclass(frozen=True)
class CellMetrics:
    avg_power: float  # uW
    min_clk_to_q: float  # ps
    pdp: float  # fJ
    transistor_count: int
    clocked_transistor_count: int | None = None
    layout_area: float | None = None  # um^2, carried from published data only

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and v < 0:
                raise MetricsError(f"{f.name} must be non-negative")

    @classmethod
    def from_measurement(cls, avg_power_w: float, delay_ps: float, transistors: int,
                         clocked: int | None = None) -> CellMetrics:
        return cls(
            avg_power=avg_power_w * 1e6,
            min_clk_to_q=delay_ps,
            pdp=pdp(avg_power_w, delay_ps * 1e-12) * 1e15,
            transistor_count=transistors,
            clocked_transistor_count=clocked,
        )


# Published post-layout results (180 nm, 1.8 V, 125 MHz, 21 fF load).
PUBLISHED_TABLE: dict[str, CellMetrics] = {
    "SCDFF": CellMetrics(41.97, 234.5, 9.80, 29, layout_area=682.2),
    "DEPFF": CellMetrics(37.05, 230.2, 8.53, 29, layout_area=578.3),
    "SEDNIFF": CellMetrics(34.44, 217.7, 7.49, 29, layout_area=497.7),
    "Proposed DETFF": CellMetrics(21.75, 259.6, 5.64, 24, layout_area=183.06),
}

# metric -> (CellMetrics field, lower is better)
IMPROVEMENT_METRICS = {
    "power": ("avg_power", True),
    "pdp": ("pdp", True),
    "area": ("layout_area", True),
    "delay_increase": ("min_clk_to_q", False),
}


@dataclass
class ComparisonRow:
    name: str
    metrics: CellMetrics
    improvements: dict[str, dict[str, float]] = field(default_factory=dict)  # baseline -> metric -> %


def build_comparison(rows: list[tuple[str, CellMetrics]], baseline_names=None) -> list[ComparisonRow]:
    """Absolute rows plus the last row's improvement over each baseline."""
    if not rows:
        raise MetricsError("comparison needs at least one row")
    table = [ComparisonRow(name, m) for name, m in rows]
    if len(rows) == 1:
        return table
    subject = table[-1]
    if baseline_names is None:
        baseline_names = [name for name, _ in rows[:-1]]
    by_name = dict(rows)
    for base_name in baseline_names:
        if base_name not in by_name:
            raise MetricsError(f"unknown baseline {base_name!r}")
        base = by_name[base_name]
        per = {}
        for metric, (attr, lower) in IMPROVEMENT_METRICS.items():
            b, n = getattr(base, attr), getattr(subject.metrics, attr)
            if b is None or n is None:
                continue
            per[metric] = improvement_pct(b, n, lower)
        subject.improvements[base_name] = per
    return table


def published_rows() -> list[tuple[str, CellMetrics]]:
    return list(PUBLISHED_TABLE.items())


FOOTER = (
    "Power = 1/2*C*Vdd^2 per full-swing toggle / window + (I_sc + I_leak)*Vdd; the switching\n"
    "term is read as quadratic in Vdd (voltage swing = Vdd).  PDP = average power x minimum\n"
    "clk-to-Q.  Area and the reference designs' rows are published post-layout figures,\n"
    "not computed here; switch-level power/delay are not comparable to them in absolute terms."
)


def _fmt(v, spec: str) -> str:
    return "-" if v is None else format(v, spec)


def format_table(table: list[ComparisonRow], footer: bool = True) -> str:
    head = ["Design", "Area (um^2)", "Transistors", "Clocked", "Min Clk-to-Q (ps)", "Avg Power (uW)", "PDP (fJ)"]
    body = [
        [
            r.name,
            _fmt(r.metrics.layout_area, ".2f"),
            str(r.metrics.transistor_count),
            _fmt(r.metrics.clocked_transistor_count, "d"),
            _fmt(r.metrics.min_clk_to_q, ".1f"),
            _fmt(r.metrics.avg_power, ".2f"),
            _fmt(r.metrics.pdp, ".2f"),
        ]
        for r in table
    ]
    widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
             for row in [head] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))

    subject = table[-1]
    if subject.improvements:
        lines.append("")
        lines.append(f"{subject.name} versus:")
        labels = {"power": "power improvement", "pdp": "PDP improvement", "area": "area improvement",
                  "delay_increase": "clk-to-Q increase"}
        for metric, label in labels.items():
            parts = [f"{base} {per[metric]:.2f}%" for base, per in subject.improvements.items() if metric in per]
            if parts:
                lines.append(f"  {label:<19} " + ", ".join(parts))
    if footer:
        lines += ["", FOOTER]
    return "\n".join(lines) + "\n"


CSV_FIELDS = ["name", "avg_power_uw", "min_clk_to_q_ps", "pdp_fj", "transistors", "clocked", "area_um2"]


def to_csv(table: list[ComparisonRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    bases = list(table[-1].improvements)
    extra = [f"{m}_vs_{b}" for b in bases for m in IMPROVEMENT_METRICS if m in table[-1].improvements[b]]
    w.writerow(CSV_FIELDS + extra)
    for r in table:
        m = r.metrics
        row = [r.name, m.avg_power, m.min_clk_to_q, m.pdp, m.transistor_count,
               "" if m.clocked_transistor_count is None else m.clocked_transistor_count,
               "" if m.layout_area is None else m.layout_area]
        if r is table[-1]:
            row += [f"{r.improvements[b][mt]:.4f}" for b in bases for mt in IMPROVEMENT_METRICS
                    if mt in r.improvements[b]]
        else:
            row += [""] * len(extra)
        w.writerow(row)
    return buf.getvalue()


def read_rows_csv(text: str) -> list[tuple[str, CellMetrics]]:
    """Rows in the CSV_FIELDS layout; extra columns are ignored."""
    reader = csv.DictReader(io.StringIO(text))
    missing = [f for f in CSV_FIELDS[:5] if f not in (reader.fieldnames or [])]
    if missing:
        raise MetricsError(f"rows file lacks column(s): {', '.join(missing)}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        try:
            def opt(key, conv):
                v = (rec.get(key) or "").strip()
                return conv(v) if v else None

            rows.append((rec["name"].strip(), CellMetrics(
                avg_power=float(rec["avg_power_uw"]),
                min_clk_to_q=float(rec["min_clk_to_q_ps"]),
                pdp=float(rec["pdp_fj"]),
                transistor_count=int(rec["transistors"]),
                clocked_transistor_count=opt("clocked", int),
                layout_area=opt("area_um2", float),
            )))
        except (TypeError, ValueError) as e:
            raise MetricsError(f"rows file line {lineno}: {e}") from None
    if not rows:
        raise MetricsError("rows file has no data rows")
    return rows


def metrics_dict(m: CellMetrics) -> dict:
    return asdict(m)
