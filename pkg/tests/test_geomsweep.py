import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qtopo.dynamics import pulse_library
from qtopo.errors import BucketingError, CollinearityError, ModelValidityError, ParameterError
from qtopo.geomsweep import (
    BASELINE,
    NOMINAL,
    VALIDITY,
    GeometryKnobs,
    SweepRecord,
    resonance_term,
    run_sweep,
    sensitivity_regression,
    si_buckets,
    sweep_csv,
    sweep_values,
    synthetic_capacitance,
)
from qtopo.hamiltonian import hamiltonian_from_network
from qtopo.topology import analyze_topology

SHORT = pulse_library("short")


def record(value, si, inf, sq=None, sc=None):
    return SweepRecord("A", float(value), BASELINE, ltd=0.0, ltd_weighted=0.0, si_total=si,
                       si_qubit=si if sq is None else sq, si_coupler=0.0 if sc is None else sc,
                       infidelity={"short_x": inf})


def test_baseline_is_box_midpoint_and_robust():
    for name, (lo, hi) in VALIDITY.items():
        assert getattr(BASELINE, name) == 0.5 * (lo + hi)
    ltd = analyze_topology(hamiltonian_from_network(synthetic_capacitance(BASELINE)), NOMINAL).ltd
    assert ltd == 0.0  # pinned: baseline sits in the robust regime (< 0.15)


def test_validity_box():
    with pytest.raises(ModelValidityError):
        synthetic_capacitance(GeometryKnobs(coupler_width=700.0))
    with pytest.raises(ModelValidityError):
        synthetic_capacitance(GeometryKnobs(island_height=-1.0))


def test_gap_doubling_lowers_arm_mutuals():
    a = synthetic_capacitance(GeometryKnobs(coupler_qubit_gap=12.0))
    b = synthetic_capacitance(GeometryKnobs(coupler_qubit_gap=24.0))
    assert b.mutual(0, 1) < a.mutual(0, 1) and b.mutual(1, 2) < a.mutual(1, 2)


def test_deterministic_network():
    k = GeometryKnobs(coupler_width=431.25, island_height=97.0)
    assert synthetic_capacitance(k).to_dict() == synthetic_capacitance(k).to_dict()


@settings(max_examples=50, deadline=None)
@given(st.floats(400, 650), st.floats(60, 300))
def test_resonance_term_bounded(w, h):
    r = resonance_term(GeometryKnobs(coupler_width=w, island_height=h))
    assert 0.0 <= r < 1.0


def test_sweep_values():
    assert sweep_values("A", 9)[0] == 650.0 and sweep_values("A", 9)[-1] == 400.0
    assert sweep_values("B", 9) == [60.0 + 30.0 * k for k in range(9)]
    with pytest.raises(ParameterError):
        sweep_values("A", 2)
    with pytest.raises(ParameterError):
        sweep_values("C", 9)


def test_self_reference_sweep():
    recs = run_sweep("A", pulses=SHORT, values=[525.0, 525.0])
    assert len(recs) == 2
    for r in recs:
        assert r.error is None
        assert set(r.infidelity) == {p.pulse_id for p in SHORT}
        assert all(v == 0.0 for v in r.infidelity.values())


def test_sweep_a_regime_coverage_and_order():
    recs = run_sweep("A", 9, pulses=SHORT)
    assert [r.axis_value for r in recs] == sweep_values("A", 9)
    ltds = [r.ltd for r in recs]
    assert min(ltds) < 0.15 and max(ltds) > 0.8
    assert all(0 <= v <= 1 for r in recs for v in r.infidelity.values())


def test_sweep_failure_is_recorded():
    recs = run_sweep("B", pulses=SHORT, values=[180.0, 400.0])
    assert recs[0].error is None
    assert recs[1].error.startswith("ModelValidityError") and recs[1].infidelity == {}
    assert "nan" in sweep_csv(recs).splitlines()[2]


def test_sweep_parallel_identical():
    a = run_sweep("B", 3, pulses=SHORT, jobs=1)
    b = run_sweep("B", 3, pulses=SHORT, jobs=3)
    assert sweep_csv(a) == sweep_csv(b)


def test_csv_columns():
    recs = run_sweep("A", pulses=SHORT, values=[525.0])
    header = sweep_csv(recs).splitlines()[0].split(",")
    assert header[:6] == ["axis_value", "ltd", "ltd_w", "si_total", "si_qubit", "si_coupler"]
    assert header[6:] == [f"inf_{p.pulse_id}" for p in SHORT]


def test_buckets_degenerate():
    recs = [record(0, 0.3, 0.2), record(1, 0.1, 0.05), record(2, 0.2, 0.1)]
    out = si_buckets(recs, "short")
    assert [b["mean"] for b in out["buckets"]] == [0.05, 0.1, 0.2]
    assert all(b["std"] == 0 for b in out["buckets"])


def test_buckets_ties_keep_input_order():
    recs = [record(k, 0.5, 0.1 * k) for k in range(3)]
    out = si_buckets(recs, "short")
    assert [b["axis_values"] for b in out["buckets"]] == [[0.0], [1.0], [2.0]]
    with pytest.raises(BucketingError):
        si_buckets(recs[:2], "short")


def test_buckets_nine_record_oracle():
    si = [0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6]
    inf = [0.90, 0.05, 0.30, 0.20, 0.50, 0.10, 0.70, 0.25, 0.40]
    out = si_buckets([record(k, s, f) for k, (s, f) in enumerate(zip(si, inf))], "short")
    # by hand: low = {0.05, 0.10, 0.20}, mid = {0.25, 0.30, 0.40}, high = {0.50, 0.70, 0.90}
    expect = [(0.35 / 3, [0.05, 0.10, 0.20]), (0.95 / 3, [0.25, 0.30, 0.40]), (2.10 / 3, [0.50, 0.70, 0.90])]
    for bucket, (mean, vals) in zip(out["buckets"], expect):
        assert bucket["mean"] == pytest.approx(mean, abs=1e-15)
        pop_std = math.sqrt(sum((v - mean) ** 2 for v in vals) / 3)
        assert bucket["std"] == pytest.approx(pop_std, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=20))
def test_bucket_partition(sis):
    recs = [record(k, s, 0.5) for k, s in enumerate(sis)]
    sizes = [b["count"] for b in si_buckets(recs, "short")["buckets"]]
    assert sum(sizes) == len(recs) and max(sizes) - min(sizes) <= 1
    seen = sorted(v for b in si_buckets(recs, "short")["buckets"] for v in b["axis_values"])
    assert seen == [float(k) for k in range(len(recs))]


def test_regression_recovers_plane():
    rng = np.random.default_rng(7)
    x1, x2 = rng.uniform(0, 1, 12), rng.uniform(0, 1, 12)
    recs = [record(k, 0, 2 + 3 * a - 5 * b, a, b) for k, (a, b) in enumerate(zip(x1, x2))]
    res = sensitivity_regression(recs, "short")
    assert res.beta_qubit == pytest.approx(3, abs=1e-9)
    assert res.beta_coupler == pytest.approx(-5, abs=1e-9)
    assert res.intercept == pytest.approx(2, abs=1e-9)
    assert res.r_squared == pytest.approx(1, abs=1e-12)
    assert res.residual_orthogonality < 1e-9


def test_regression_constant_and_collinear():
    recs = [record(k, 0, 0.25, 0.1 * k, 0.3 * k * k) for k in range(5)]
    res = sensitivity_regression(recs, "short")
    assert abs(res.beta_qubit) < 1e-12 and abs(res.beta_coupler) < 1e-12
    assert res.intercept == pytest.approx(0.25, abs=1e-12)
    dup = [record(k, 0, 0.1 * k, 0.1 * k, 0.1 * k) for k in range(5)]
    with pytest.raises(CollinearityError):
        sensitivity_regression(dup, "short")
    with pytest.raises(ParameterError):
        sensitivity_regression(recs[:3], "short")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)), min_size=4, max_size=15))
def test_regression_residual_orthogonality(rows):
    recs = [record(k, 0, y, a, b) for k, (a, b, y) in enumerate(rows)]
    try:
        res = sensitivity_regression(recs, "short")
    except CollinearityError:
        return
    assert res.residual_orthogonality < 1e-9
    assert 0.0 <= res.r_squared <= 1.0
