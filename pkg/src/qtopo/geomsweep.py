"""Synthetic geometry model and the design-sweep / statistics harness.

The capacitance model stands in for finite-element extraction of a
Q0-coupler-Q1 module (node 0 = Q0, 1 = coupler, 2 = Q1):

    arm   = K_ARM * arm_length / gap                    (qubit-coupler mutual, fF)
    r     = 1 - (1 - r_w(width)) (1 - r_h(height))       (resonance window, in [0, 1))
    C_01  = arm * (1 - r)^2                              (Q0 arm screened inside a window)
    C_12  = arm
    C_02  = P0 * (width / 525) * (1 + GAIN * r)          (direct Q0-Q1 parasitic)
    C_c   = COUPLER_BASE + COUPLER_PER_NM * width        (coupler ground)

r_w and r_h are sums of flat-topped bumps h * exp(-((x - c) / w)^4). Inside a
window the direct parasitic grows and the Q0 arm collapses, so the realized
graph moves from the nominal chain (LTD 0) through an added Q0-Q1 edge
(LTD 0.5) to a rerouted topology with the Q0-coupler edge lost (LTD 1.0).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._parallel import ordered_map
from .capnet import CapacitanceNetwork, ConductorNode
from .dynamics import DEFAULT_TRUNCATION, REGIMES, PulseSpec, bench_pulses, final_state, relative_infidelity
from .errors import BucketingError, CollinearityError, ModelValidityError, ParameterError, QTopoError
from .hamiltonian import hamiltonian_from_network
from .sensitivity import DEFAULT_DELTA, si_report
from .topology import DEFAULT_TAU_MIN, InteractionGraph, analyze_topology

CALIBRATION_VERSION = "synthetic-qcq-v1"

VALIDITY = {
    "coupler_width": (400.0, 650.0),        # nm
    "island_height": (60.0, 300.0),         # um
    "coupler_qubit_gap": (10.0, 35.0),      # um
    "coupler_arm_length": (100.0, 200.0),   # um
}

QUBIT_GROUND_FF = 80.0
JOSEPHSON_GHZ = (16.0, 30.0, 17.0)  # Q0, coupler, Q1
K_ARM = 0.15                 # fF per (um/um); baseline arm/gap = 150/22.5 -> 1.0 fF
P0 = 0.005                   # fF, direct parasitic away from any window
GAIN = 60.0
COUPLER_BASE = 50.0          # fF
COUPLER_PER_NM = 10.0 / 525.0
WIDTH_WINDOWS = ((415.0, 35.0, 0.995), (640.0, 40.0, 0.70))   # (centre nm, width nm, height)
HEIGHT_WINDOWS = ((95.0, 15.0, 0.99), (150.0, 18.0, 0.998), (245.0, 15.0, 0.99), (290.0, 25.0, 0.50))

NOMINAL = InteractionGraph.nominal(3, [(0, 1), (1, 2)])
AXES = {"A": "coupler_width", "B": "island_height"}


@dataclass(frozen=True)
class GeometryKnobs:
    coupler_width: float = 525.0
    island_height: float = 180.0
    coupler_qubit_gap: float = 22.5
    coupler_arm_length: float = 150.0

    def validate(self) -> None:
        for name, (lo, hi) in VALIDITY.items():
            value = getattr(self, name)
            if not (lo <= value <= hi):
                raise ModelValidityError(f"{name} = {value} outside validity box [{lo}, {hi}]")

    def to_dict(self) -> dict:
        return asdict(self)


BASELINE = GeometryKnobs()


def _bumps(x: float, windows) -> float:
    return min(sum(h * math.exp(-(((x - c) / w) ** 4)) for c, w, h in windows), 0.999)


def resonance_term(knobs: GeometryKnobs) -> float:
    rw = _bumps(knobs.coupler_width, WIDTH_WINDOWS)
    rh = _bumps(knobs.island_height, HEIGHT_WINDOWS)
    return 1.0 - (1.0 - rw) * (1.0 - rh)


def synthetic_capacitance(knobs: GeometryKnobs, josephson=JOSEPHSON_GHZ,
                          qubit_ground: float = QUBIT_GROUND_FF) -> CapacitanceNetwork:
    knobs.validate()
    r = resonance_term(knobs)
    arm = K_ARM * knobs.coupler_arm_length / knobs.coupler_qubit_gap
    width = knobs.coupler_width
    nodes = (
        ConductorNode(0, "qubit", qubit_ground, josephson[0]),
        ConductorNode(1, "coupler", COUPLER_BASE + COUPLER_PER_NM * width, josephson[1]),
        ConductorNode(2, "qubit", qubit_ground, josephson[2]),
    )
    mutual = {
        (0, 1): arm * (1.0 - r) ** 2,
        (1, 2): arm,
        (0, 2): P0 * (width / 525.0) * (1.0 + GAIN * r),
    }
    return CapacitanceNetwork(nodes, mutual)


@dataclass
class SweepRecord:
    axis: str
    axis_value: float
    knobs: GeometryKnobs
    ltd: float = math.nan
    ltd_weighted: float = math.nan
    si_total: float = math.nan
    si_qubit: float = math.nan
    si_coupler: float = math.nan
    infidelity: dict = field(default_factory=dict)
    error: str | None = None

    def regime_mean(self, regime: str) -> float:
        values = [v for k, v in self.infidelity.items() if k.startswith(regime + "_")]
        if not values:
            raise ParameterError(f"record has no pulses in regime {regime!r}")
        return float(np.mean(values))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["knobs"] = self.knobs.to_dict()
        return out


@dataclass(frozen=True)
class RegressionResult:
    regime: str
    beta_qubit: float
    beta_coupler: float
    intercept: float
    r_squared: float
    residual_orthogonality: float

    def to_dict(self) -> dict:
        return asdict(self)


def sweep_values(axis: str, steps: int) -> list[float]:
    if axis not in AXES:
        raise ParameterError(f"axis must be one of {sorted(AXES)}, got {axis!r}")
    if steps < 3:
        raise ParameterError(f"sweeps need at least 3 steps, got {steps}")
    lo, hi = VALIDITY[AXES[axis]]
    start, stop = (hi, lo) if axis == "A" else (lo, hi)  # Sweep A runs wide -> narrow
    return [float(v) for v in np.linspace(start, stop, steps)]


def _evaluate_step(job) -> SweepRecord:
    axis, value, knobs, pulses, ref_states, tau_min, delta, d = job
    record = SweepRecord(axis, value, knobs)
    try:
        net = synthetic_capacitance(knobs)
        h = hamiltonian_from_network(net)
        report = analyze_topology(h, NOMINAL, tau_min)
        si = si_report(net, NOMINAL, tau_min, delta)
        kinds = {n.id: n.kind for n in net.nodes}
        si_by = dict(zip(si.node_ids, si.si))
        record.ltd = report.ltd
        record.ltd_weighted = report.ltd_weighted
        record.si_total = float(sum(si.si))
        record.si_qubit = float(np.mean([v for k, v in si_by.items() if kinds[k] == "qubit"]))
        record.si_coupler = float(np.mean([v for k, v in si_by.items() if kinds[k] == "coupler"]))
        record.infidelity = {
            p.pulse_id: relative_infidelity(h, ref_states[p.pulse_id][0], p, d=d,
                                            reference_state=ref_states[p.pulse_id][1]).relative_infidelity
            for p in pulses
        }
    except (QTopoError, np.linalg.LinAlgError) as exc:
        record.error = f"{type(exc).__name__}: {exc}"
        record.infidelity = {}
    return record


def run_sweep(
    axis: str,
    steps: int = 9,
    pulses: list[PulseSpec] | None = None,
    tau_min: float = DEFAULT_TAU_MIN,
    delta: float = DEFAULT_DELTA,
    d: int = DEFAULT_TRUNCATION,
    jobs: int = 1,
    values: list[float] | None = None,
    reference: GeometryKnobs = BASELINE,
) -> list[SweepRecord]:
    """Evaluate every sweep step against the baseline reference layout.

    ``values`` overrides the evenly spaced axis positions. Failed steps carry
    an ``error`` string and empty infidelities; the sweep continues.
    """
    if values is None:
        values = sweep_values(axis, steps)
    elif axis not in AXES:
        raise ParameterError(f"axis must be one of {sorted(AXES)}, got {axis!r}")
    pulses = bench_pulses() if pulses is None else list(pulses)
    ref_h = hamiltonian_from_network(synthetic_capacitance(reference))
    ref_states = {p.pulse_id: (ref_h, final_state(ref_h, p, d=d)) for p in pulses}
    jobs_list = [
        (axis, float(v), replace(reference, **{AXES[axis]: float(v)}), pulses, ref_states, tau_min, delta, d)
        for v in values
    ]
    return ordered_map(_evaluate_step, jobs_list, jobs)


def _regime_pulse_ids(records, regime):
    ids = sorted({k for r in records for k in r.infidelity if k.startswith(regime + "_")})
    if not ids:
        raise ParameterError(f"no pulses of regime {regime!r} in the records")
    return ids


def si_buckets(records: list[SweepRecord], regime: str) -> dict:
    """Low/mid/high SI terciles with mean and std of infidelity per bucket."""
    if regime not in REGIMES:
        raise ParameterError(f"unknown regime {regime!r}")
    usable = [r for r in records if r.error is None]
    if len(usable) < 3:
        raise BucketingError(f"need at least 3 valid records for 3 buckets, got {len(usable)}")
    ids = _regime_pulse_ids(usable, regime)
    order = sorted(range(len(usable)), key=lambda i: usable[i].si_total)  # stable on ties
    buckets = []
    for label, idx in zip(("low", "mid", "high"), np.array_split(np.array(order), 3)):
        members = [usable[i] for i in idx]
        means = [m.regime_mean(regime) for m in members]
        buckets.append({
            "label": label,
            "count": len(members),
            "axis_values": [m.axis_value for m in members],
            "si_range": [members[0].si_total, members[-1].si_total],
            "mean": float(np.mean(means)),
            "std": float(np.std(means)),
            "per_pulse_mean": {p: float(np.mean([m.infidelity[p] for m in members])) for p in ids},
        })
    return {"regime": regime, "pulses": ids, "buckets": buckets}


def sensitivity_regression(records: list[SweepRecord], regime: str) -> RegressionResult:
    """OLS of regime-mean infidelity on [1, si_qubit, si_coupler]."""
    usable = [r for r in records if r.error is None]
    if len(usable) < 4:
        raise ParameterError(f"regression needs at least 4 records, got {len(usable)}")
    x = np.array([[1.0, r.si_qubit, r.si_coupler] for r in usable])
    y = np.array([r.regime_mean(regime) for r in usable])
    if np.linalg.matrix_rank(x) < 3:
        raise CollinearityError("design matrix [1, si_qubit, si_coupler] is rank deficient")
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    ortho = float(np.max(np.abs(x.T @ resid)))
    return RegressionResult(regime, float(beta[1]), float(beta[2]), float(beta[0]),
                            min(max(r2, 0.0), 1.0), ortho)


def sweep_csv(records: list[SweepRecord]) -> str:
    pulse_ids = []
    for r in records:
        for k in r.infidelity:
            if k not in pulse_ids:
                pulse_ids.append(k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["axis_value", "ltd", "ltd_w", "si_total", "si_qubit", "si_coupler"]
                    + [f"inf_{p}" for p in pulse_ids])
    for r in records:
        writer.writerow([repr(r.axis_value), repr(r.ltd), repr(r.ltd_weighted), repr(r.si_total),
                         repr(r.si_qubit), repr(r.si_coupler)]
                        + [repr(r.infidelity.get(p, math.nan)) for p in pulse_ids])
    return buf.getvalue()


def sweep_json(records: list[SweepRecord], regimes=REGIMES) -> str:
    out = {"calibration": CALIBRATION_VERSION, "records": [r.to_dict() for r in records],
           "buckets": {}, "regression": {}}
    for regime in regimes:
        try:
            out["buckets"][regime] = si_buckets(records, regime)
        except QTopoError as exc:
            out["buckets"][regime] = {"error": str(exc)}
        try:
            out["regression"][regime] = sensitivity_regression(records, regime).to_dict()
        except QTopoError as exc:
            out["regression"][regime] = {"error": str(exc)}
    return json.dumps(out, indent=2, sort_keys=True, allow_nan=True)
