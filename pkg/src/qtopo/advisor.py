"""Per-edge assessment table for compiler consumers.

Each edge of a chain is evaluated over a handful of geometric knob variants.
Metrics (all percentages except LTD):

    avg_ltd      mean LTD over variants
    avg_eps2q    mean infidelity of the reference entangling pulse, x100
    worst_case   100 * max infidelity over every (variant, pulse) cell
    instability  100 * (max - min) over the same cells

Decisions come from a versioned ``DecisionRules`` table; alignment compares
the eps2q and worst-case orderings with a relative tie band.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import AggregationError, MissingCellError, ParameterError, StructuralError
from .geomsweep import BASELINE, NOMINAL, VALIDITY, GeometryKnobs, synthetic_capacitance
from .dynamics import DEFAULT_TRUNCATION, REGIMES, bench_pulses, final_state, relative_infidelity
from .hamiltonian import hamiltonian_from_network
from .topology import DEFAULT_TAU_MIN, analyze_topology
from ._parallel import ordered_map

DECISIONS = (
    "structural_hot_spot",
    "highly_geometry_sensitive",
    "marginal",
    "geometry_sensitive",
    "robust",
)
EPS2Q_PULSE = "medium_cr_gaussian_flattop"
VARIANT_SHIFT = 0.10  # fraction of each knob's validity span


@dataclass(frozen=True)
class DecisionRules:
    version: str = "rules-v1"
    hot_spot_ltd: float = 2.0
    hot_spot_instability: float = 1.0
    high_instability: float = 20.0
    mid_instability: float = 10.0
    marginal_worst_case: float = 14.0
    marginal_ltd: float = 0.8
    tie_band: float = 0.05

    @classmethod
    def from_dict(cls, data: Mapping) -> "DecisionRules":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown rule keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_RULES = DecisionRules()


def decision_rules(avg_ltd: float, instability: float, worst_case: float,
                   rules: DecisionRules = DEFAULT_RULES) -> str:
    """First matching rule wins; the final branch makes the table total."""
    if min(avg_ltd, instability, worst_case) < 0:
        raise ParameterError("decision inputs must be nonnegative")
    if avg_ltd > rules.hot_spot_ltd and instability < rules.hot_spot_instability:
        return "structural_hot_spot"
    if instability > rules.high_instability:
        return "highly_geometry_sensitive"
    if instability > rules.mid_instability:
        if worst_case > rules.marginal_worst_case and avg_ltd > rules.marginal_ltd:
            return "marginal"
        return "geometry_sensitive"
    return "robust"


def eps2q_proxy(values: Sequence[float]) -> float:
    values = [float(v) for v in values]
    if not values:
        raise AggregationError("eps2q proxy needs at least one variant result")
    return 100.0 * float(np.mean(values))


@dataclass
class EdgeAssessment:
    edge_id: str
    avg_ltd: float
    avg_eps2q: float
    worst_case_infidelity: float
    instability: float
    decision: str
    aligned: bool | None = None
    variants: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _value(cell) -> float:
    return float(getattr(cell, "relative_infidelity", cell))


def _ltd_value(item) -> float:
    return float(getattr(item, "ltd", item))


def assess_edge(
    edge_id: str,
    ltds: Mapping[str, object],
    infidelities: Mapping[str, Mapping[str, object]],
    eps2q_pulse: str = EPS2Q_PULSE,
    rules: DecisionRules = DEFAULT_RULES,
) -> EdgeAssessment:
    """Aggregate one edge; ``ltds`` maps variant -> LTD (or report), ``infidelities``
    maps variant -> pulse_id -> infidelity (or FidelityResult)."""
    if not ltds:
        raise AggregationError(f"{edge_id}: no variants")
    variants = sorted(set(ltds) | set(infidelities))
    pulses = sorted({p for cells in infidelities.values() for p in cells})
    if not pulses:
        raise AggregationError(f"{edge_id}: no pulse results")
    gaps = [f"{v}:ltd" for v in variants if v not in ltds]
    gaps += [f"{v}:{p}" for v in variants for p in pulses if p not in infidelities.get(v, {})]
    if eps2q_pulse not in pulses:
        gaps.append(f"*:{eps2q_pulse}")
    if gaps:
        raise MissingCellError(f"{edge_id}: incomplete variant/pulse grid, missing {', '.join(gaps)}")
    cells = np.array([[_value(infidelities[v][p]) for p in pulses] for v in variants])
    if np.any(cells < 0) or np.any(cells > 1):
        raise ParameterError(f"{edge_id}: infidelities must lie in [0, 1]")
    avg_ltd = float(np.mean([_ltd_value(ltds[v]) for v in variants]))
    worst = 100.0 * float(cells.max())
    instability = 100.0 * float(cells.max() - cells.min())
    eps = eps2q_proxy([_value(infidelities[v][eps2q_pulse]) for v in variants])
    return EdgeAssessment(edge_id, avg_ltd, eps, worst, instability,
                          decision_rules(avg_ltd, instability, worst, rules), None, variants)


def _cmp(a: float, b: float, band: float) -> int:
    if abs(a - b) <= band * max(abs(a), abs(b)):
        return 0
    return 1 if a > b else -1


def alignment_predicate(assessments: Sequence[EdgeAssessment], tie_band: float = DEFAULT_RULES.tie_band):
    """An edge is aligned unless some other edge is ordered oppositely by
    eps2q and by worst case, with both gaps outside the tie band."""
    n = len(assessments)
    if n < 2:
        return [None] * n
    out = []
    for i, a in enumerate(assessments):
        ok = True
        for j, b in enumerate(assessments):
            if i == j:
                continue
            if _cmp(a.avg_eps2q, b.avg_eps2q, tie_band) * _cmp(
                    a.worst_case_infidelity, b.worst_case_infidelity, tie_band) < 0:
                ok = False
                break
        out.append(ok)
    return out


def assess_table(edges: Sequence[Mapping], rules: DecisionRules = DEFAULT_RULES,
                 eps2q_pulse: str = EPS2Q_PULSE) -> list[EdgeAssessment]:
    """Injected mode: each edge is {"id", "variants": [{"name", "ltd", "infidelity": {...}}]}."""
    if not edges:
        raise StructuralError("chain has no edges")
    table = []
    for k, edge in enumerate(edges):
        try:
            edge_id = str(edge["id"])
            variants = edge["variants"]
            ltds = {str(v["name"]): float(v["ltd"]) for v in variants}
            inf = {str(v["name"]): {str(p): float(x) for p, x in v["infidelity"].items()} for v in variants}
        except (KeyError, TypeError, ValueError) as exc:
            raise StructuralError(f"edges[{k}]: malformed edge entry ({exc})") from None
        table.append(assess_edge(edge_id, ltds, inf, eps2q_pulse, rules))
    for row, flag in zip(table, alignment_predicate(table, rules.tie_band)):
        row.aligned = flag
    return table


def default_variants(knobs: GeometryKnobs) -> list[tuple[str, GeometryKnobs]]:
    """One variant per knob, shifted by a tenth of its span (reflected at the box edge)."""
    out = []
    for name, (lo, hi) in VALIDITY.items():
        step = VARIANT_SHIFT * (hi - lo)
        value = getattr(knobs, name) + step
        if value > hi:
            value = getattr(knobs, name) - step
        out.append((f"{name}+", replace(knobs, **{name: value})))
    return out


def _knobs_from(data: Mapping | None, base: GeometryKnobs, where: str) -> GeometryKnobs:
    if not data:
        return base
    unknown = set(data) - set(VALIDITY)
    if unknown:
        raise StructuralError(f"{where}: unknown knobs {sorted(unknown)}")
    knobs = replace(base, **{k: float(v) for k, v in data.items()})
    knobs.validate()
    return knobs


def _simulate_variant(job):
    knobs, pulses, refs, tau_min, d = job
    h = hamiltonian_from_network(synthetic_capacitance(knobs))
    ltd = analyze_topology(h, NOMINAL, tau_min).ltd
    inf = {p.pulse_id: relative_infidelity(h, refs[p.pulse_id][0], p, d=d,
                                           reference_state=refs[p.pulse_id][1]).relative_infidelity
           for p in pulses}
    return ltd, inf


def simulate_chain(spec: Mapping, tau_min: float = DEFAULT_TAU_MIN, d: int = DEFAULT_TRUNCATION,
                   jobs: int = 1) -> list[dict]:
    """Compute mode: turn knob-level edge specs into injected-mode edge entries.

    Each edge is a synthetic Q-C-Q module built from its ``knobs``; variants
    default to ``default_variants``. Infidelity is taken against ``reference``
    knobs (the calibrated baseline unless given).
    """
    edges = spec.get("edges") or []
    if not edges:
        raise StructuralError("chain has no edges")
    regimes = tuple(spec.get("regimes", REGIMES))
    bad = [r for r in regimes if r not in REGIMES]
    if bad:
        raise ParameterError(f"unknown regimes {bad}")
    pulses = bench_pulses(regimes)
    if EPS2Q_PULSE not in {p.pulse_id for p in pulses}:
        pulses = pulses + [p for p in bench_pulses(("medium",)) if p.pulse_id == EPS2Q_PULSE]
    reference = _knobs_from(spec.get("reference"), BASELINE, "reference")
    ref_h = hamiltonian_from_network(synthetic_capacitance(reference))
    refs = {p.pulse_id: (ref_h, final_state(ref_h, p, d=d)) for p in pulses}

    plan = []
    for k, edge in enumerate(edges):
        if "id" not in edge:
            raise StructuralError(f"edges[{k}]: missing id")
        knobs = _knobs_from(edge.get("knobs"), BASELINE, f"edges[{k}].knobs")
        if "variants" in edge:
            variants = [(str(v.get("name", f"v{m}")), _knobs_from(v.get("knobs"), knobs, f"edges[{k}].variants[{m}]"))
                        for m, v in enumerate(edge["variants"])]
        else:
            variants = default_variants(knobs)
        plan.extend((str(edge["id"]), name, kn) for name, kn in variants)

    results = ordered_map(_simulate_variant, [(kn, pulses, refs, tau_min, d) for _, _, kn in plan], jobs)
    out: dict[str, dict] = {}
    for (edge_id, name, _), (ltd, inf) in zip(plan, results):
        out.setdefault(edge_id, {"id": edge_id, "variants": []})["variants"].append(
            {"name": name, "ltd": ltd, "infidelity": inf})
    return list(out.values())


def advise(spec: Mapping, rules: DecisionRules | None = None, jobs: int = 1,
           tau_min: float = DEFAULT_TAU_MIN, d: int = DEFAULT_TRUNCATION) -> list[EdgeAssessment]:
    """Dispatch on the chain spec: edges carrying variant metrics are used as-is."""
    if rules is None:
        rules = DecisionRules.from_dict(spec.get("rules", {}))
    edges = spec.get("edges") or []
    if not edges:
        raise StructuralError("chain has no edges")
    injected = all("variants" in e and all("infidelity" in v for v in e["variants"]) for e in edges)
    if not injected:
        edges = simulate_chain(spec, tau_min, d, jobs)
    return assess_table(edges, rules)


def load_chain(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def table_json(table: Sequence[EdgeAssessment], rules: DecisionRules = DEFAULT_RULES) -> str:
    return json.dumps({"rules": rules.to_dict(), "edges": [row.to_dict() for row in table]},
                      indent=2, sort_keys=True)


TABLE_COLUMNS = ("edge", "avg_ltd", "avg_eps2q_pct", "worst_case_pct", "instability_pct", "aligned", "decision")


def table_csv(table: Sequence[EdgeAssessment]) -> str:
    """Fixed-width, comma separated; numbers at the table's display precision."""
    rows = [TABLE_COLUMNS]
    for r in table:
        aligned = "null" if r.aligned is None else ("yes" if r.aligned else "no")
        rows.append((r.edge_id, f"{r.avg_ltd:.3f}", f"{r.avg_eps2q:.2f}", f"{r.worst_case_infidelity:.2f}",
                     f"{r.instability:.2f}", aligned, r.decision))
    widths = [max(len(row[c]) for row in rows) for c in range(len(TABLE_COLUMNS))]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        last = len(row) - 1
        writer.writerow([cell if c == last else cell.ljust(w) if c == 0 else cell.rjust(w)
                         for c, (cell, w) in enumerate(zip(row, widths))])
    return buf.getvalue()
