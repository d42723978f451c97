"""Acceptance gate: one test per criterion, each with its runtime budget.

A summary line per criterion is printed at the end of the pytest run.
"""

import json
import time
from contextlib import contextmanager
from importlib import resources

import numpy as np
import pytest

from qtopo.advisor import advise
from qtopo.capnet import charging_constant, charging_energy_matrix, make_network, to_maxwell_matrix
from qtopo.cli import main
from qtopo.dynamics import (
    FAMILIES,
    REGIMES,
    PulseSpec,
    bench_pulses,
    build_duffing,
    default_time_step,
    evolve,
    final_state,
    relative_infidelity,
)
from qtopo.geomsweep import (
    BASELINE,
    GeometryKnobs,
    run_sweep,
    sensitivity_regression,
    synthetic_capacitance,
)
from qtopo.hamiltonian import EffectiveHamiltonian, hamiltonian_from_network
from qtopo.sensitivity import si_from_couplings, si_report
from qtopo.topology import InteractionGraph, ltd_report, normalize_couplings, reconstruct_physical_graph

from conftest import ACCEPTANCE, DATA
from oracles import brute_ltd

K = charging_constant()


@contextmanager
def criterion(num, title, budget, already=0.0):
    """``already`` is time spent in shared fixtures that counts toward the budget."""
    t0 = time.perf_counter() - already
    ok = False
    try:
        yield
        ok = True
    finally:
        secs = time.perf_counter() - t0
        ACCEPTANCE[(num, title)] = (ok and secs < budget, secs)
    assert secs < budget, f"criterion {num} took {secs:.1f} s (budget {budget} s)"


def test_c1_charging_energy_round_trip():
    rng = np.random.default_rng(2024)
    with criterion(1, "charging-energy round trip, 200 networks", 5.0):
        for _ in range(200):
            n = int(rng.integers(2, 11))
            pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
            mutual = {p: float(rng.uniform(0, 20)) if rng.random() < 0.6 else 0.0 for p in pairs}
            net = make_network(rng.uniform(10, 200, n), mutual)
            c = to_maxwell_matrix(net)
            ec = charging_energy_matrix(c)
            err = np.max(np.abs(ec @ c / K - np.eye(n)))
            assert err <= 1e-9, err


def test_c2_ltd_oracle_equivalence():
    rng = np.random.default_rng(7)
    with criterion(2, "LTD vs brute-force edge-set oracle, 500 triples", 10.0):
        for _ in range(500):
            n = int(rng.integers(2, 9))
            pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
            k = int(rng.integers(1, len(pairs) + 1))
            nominal = [pairs[m] for m in rng.choice(len(pairs), size=k, replace=False)]
            weights = {p: float(rng.uniform(1e-4, 5)) for p in pairs if rng.random() < 0.7}
            if not weights:
                weights = {pairs[0]: 1.0}
            tau = float(rng.uniform(0.001, 0.999))
            report = ltd_report(InteractionGraph.nominal(n, nominal),
                                reconstruct_physical_graph(normalize_couplings(weights), tau, n))
            plus, minus, ltd, ltd_w = brute_ltd(nominal, weights, tau, n)
            assert report.parasitic_edges == plus and report.missing_edges == minus
            assert abs(report.ltd - ltd) <= 1e-12
            assert abs(report.ltd_weighted - ltd_w) <= 1e-12


def _smooth_network(rng, n):
    kinds = ["qubit" if k % 2 == 0 else "coupler" for k in range(n)]
    ej = [float(rng.uniform(14, 18)) if kd == "qubit" else float(rng.uniform(26, 32)) for kd in kinds]
    grounds = [float(rng.uniform(70, 90)) if kd == "qubit" else float(rng.uniform(55, 65)) for kd in kinds]
    mutual = {(k, k + 1): float(rng.uniform(0.8, 1.5)) for k in range(n - 1)}
    for k in range(n - 2):
        mutual[(k, k + 2)] = float(rng.uniform(0.1, 0.4))
    nominal = InteractionGraph.nominal(n, [(k, k + 1) for k in range(n - 1)])
    return make_network(grounds, mutual, josephson=ej, kinds=kinds), nominal


def test_c3_si_correctness_and_linearity():
    rng = np.random.default_rng(11)
    with criterion(3, "SI fixture, linearity in delta, zero cases", 30.0):
        baseline = {(0, 1): 1.0, (1, 2): 0.8, (0, 2): 0.30}
        perturbed = {0: dict(baseline), 1: {**baseline, (0, 2): 0.33}, 2: dict(baseline)}
        fixture = si_from_couplings(baseline, perturbed, [(0, 2)], 1e-3)
        assert abs(fixture.si[1] - 0.03) <= 1e-15

        checked = 0
        for _ in range(12):
            net, nominal = _smooth_network(rng, int(rng.integers(3, 6)))
            a = si_report(net, nominal, delta=1e-3)
            b = si_report(net, nominal, delta=5e-4)
            assert a.parasitic_edges and a.parasitic_edges == b.parasitic_edges
            for k in a.node_ids:
                for e in a.parasitic_edges:
                    sa, sb = a.edge_sensitivities[k][e] / 1e-3, b.edge_sensitivities[k][e] / 5e-4
                    assert abs(sa - sb) <= 0.05 * max(sa, sb), (k, e, sa, sb)
                    checked += 1
        assert checked > 50

        clean = make_network([80, 60, 80], {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 0.001}, josephson=[16, 30, 17],
                             kinds=["qubit", "coupler", "qubit"])
        rep = si_report(clean, InteractionGraph.nominal(3, [(0, 1), (1, 2)]))
        assert rep.parasitic_edges == () and not rep.si.any()

        isolated = make_network([80, 60, 80, 75], {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 0.3},
                                josephson=[16, 30, 17, 15], kinds=["qubit", "coupler", "qubit", "qubit"])
        rep = si_report(isolated, InteractionGraph.nominal(4, [(0, 1), (1, 2)]))
        assert rep.parasitic_edges and rep.si[3] == 0.0 and not rep.deviations[3].any()


def test_c4_dynamics_oracles():
    with criterion(4, "Rabi, swap, bench norm, step halving", 120.0):
        single = EffectiveHamiltonian.from_params([5.0], [-0.2], [[0.0]])
        m = build_duffing(single, 2)
        for duration, amp in ((25.0, 0.01), (50.0, 0.01), (40.0, 0.004)):
            regime = "short" if duration <= 30 else "medium"
            psi = evolve(m, PulseSpec("cr_square", regime, duration, amp, 0, 0), m.basis_state([0]))
            assert abs(abs(psi[1]) ** 2 - np.sin(np.pi * amp * duration) ** 2) <= 1e-3

        g = 0.01
        pair = EffectiveHamiltonian.from_params([5.0, 5.0], [-0.2, -0.2], [[0, g], [g, 0]])
        m = build_duffing(pair, 3)
        psi = evolve(m, PulseSpec("cr_square", "short", 1 / (4 * g), 0.0, 0, 0), m.basis_state([1, 0]))
        assert abs(abs(psi[np.ravel_multi_index((0, 1), m.dims)]) ** 2 - 1.0) <= 1e-3

        layout = hamiltonian_from_network(synthetic_capacitance(GeometryKnobs(coupler_width=431.25)))
        reference = hamiltonian_from_network(synthetic_capacitance(BASELINE))
        model = build_duffing(layout, 3)
        for pulse in bench_pulses():
            res = relative_infidelity(layout, reference, pulse)
            assert res.norm_error <= 1e-6
            dt = min(default_time_step(model, pulse), default_time_step(build_duffing(reference, 3), pulse))
            fine = relative_infidelity(layout, reference, pulse, dt=dt / 2)
            coarse = relative_infidelity(layout, reference, pulse, dt=dt)
            assert abs(fine.relative_infidelity - coarse.relative_infidelity) < 1e-6, pulse.pulse_id


@pytest.fixture(scope="module")
def sweeps():
    t0 = time.perf_counter()
    out = {axis: run_sweep(axis, 9) for axis in "AB"}
    return out, time.perf_counter() - t0


def test_c5_regime_trend(sweeps):
    records, elapsed = sweeps
    with criterion(5, "regime trend on synthetic sweeps A and B", 300.0, already=elapsed):
        for axis, recs in records.items():
            assert all(r.error is None for r in recs)
            low = [r for r in recs if r.ltd < 0.15]
            high = [r for r in recs if r.ltd > 0.8]
            assert low and high, axis
            for fam in FAMILIES:
                def fam_mean(r):
                    return np.mean([v for k, v in r.infidelity.items() if k.endswith("_" + fam)])
                assert np.mean([fam_mean(r) for r in low]) < np.mean([fam_mean(r) for r in high]), (axis, fam)
            assert any(max(r.infidelity.values()) > 0.5 for r in high), axis


def test_c6_regression_recovery(sweeps):
    records, _ = sweeps
    from qtopo.geomsweep import SweepRecord

    with criterion(6, "regression recovery and residual orthogonality", 1.0):
        rng = np.random.default_rng(5)
        x1, x2 = rng.uniform(0, 1, 10), rng.uniform(0, 1, 10)
        recs = [SweepRecord("A", float(k), BASELINE, si_qubit=a, si_coupler=b,
                            infidelity={"long_x": 2 + 3 * a - 5 * b}) for k, (a, b) in enumerate(zip(x1, x2))]
        res = sensitivity_regression(recs, "long")
        assert abs(res.beta_qubit - 3) <= 1e-9 and abs(res.beta_coupler + 5) <= 1e-9
        assert abs(res.intercept - 2) <= 1e-9 and abs(res.r_squared - 1) <= 1e-9
        for recs in records.values():
            for regime in REGIMES:
                assert sensitivity_regression(recs, regime).residual_orthogonality <= 1e-9


def test_c7_reference_table_replay():
    spec = json.loads(resources.files("qtopo").joinpath("data/reference_chain.json").read_text())
    expected = ["structural_hot_spot", "geometry_sensitive", "marginal", "highly_geometry_sensitive"]
    with criterion(7, "reference assessment table replay", 1.0):
        table = advise(spec)
        assert [r.decision for r in table] == expected
        assert [r.aligned for r in table] == [True] * 4
        published = [(4.097, 5.64, 5.78, 0.30), (0.720, 10.69, 13.75, 11.20),
                     (0.833, 10.25, 15.31, 11.36), (1.071, 14.39, 23.34, 21.18)]
        for r, (ltd, eps, worst, inst) in zip(table, published):
            assert (round(r.avg_ltd, 3), round(r.avg_eps2q, 2)) == (ltd, eps)
            assert (round(r.worst_case_infidelity, 2), round(r.instability, 2)) == (worst, inst)


def test_c8_cli_determinism(tmp_path, capsys):
    reference = tmp_path / "reference.json"
    reference.write_text(resources.files("qtopo").joinpath("data/reference_chain.json").read_text())
    compute = tmp_path / "compute.json"
    compute.write_text(json.dumps({"regimes": ["short"], "edges": [{"id": "Q0-Q1"},
                                                                  {"id": "Q1-Q2", "knobs": {"island_height": 95}}]}))
    net, bad, nom, pulse = (str(DATA / f) for f in ("qcq.json", "qcq_distorted.json", "nominal.json", "pulse.json"))
    commands = {
        "ham": ["ham", net],
        "ltd": ["ltd", bad, nom],
        "si": ["si", bad, nom],
        "sweep": ["sweep", "--axis", "B", "--steps", "3", "--regime", "short"],
        "advise": ["advise", str(reference)],
        "advise_compute": ["advise", str(compute)],
        "dynamics": ["dynamics", bad, net, pulse],
    }
    with criterion(8, "CLI byte-identical outputs for --jobs 1 and --jobs 8", 60.0):
        for name, argv in commands.items():
            blobs = []
            for run, jobs in enumerate(("1", "1", "8", "8")):
                out = tmp_path / f"{name}_{run}"
                assert main(argv + ["--jobs", jobs, "-o", str(out)]) == 0, name
                if out.is_dir():
                    blobs.append([(f.name, f.read_bytes()) for f in sorted(out.iterdir())])
                else:
                    blobs.append([("", out.read_bytes())])
            assert all(b == blobs[0] for b in blobs), name
        capsys.readouterr()
