"""Per-node Sensitivity Index.

Each node is perturbed at its physical source (ground capacitance or
Josephson energy), the coupling landscape is rebuilt, and the shift of the
normalized couplings is summed over the parasitic edges. Perturbed
couplings are normalized by the *baseline* maximum so every node is
measured on the same scale.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

from .capnet import CapacitanceNetwork
from .errors import ChannelError, ParameterError
from .hamiltonian import hamiltonian_from_network
from .topology import (
    DEFAULT_TAU_MIN,
    InteractionGraph,
    Pair,
    extract_couplings,
    normalize_couplings,
    reconstruct_physical_graph,
)

CHANNELS = ("ground_capacitance", "josephson_energy")
DEFAULT_DELTA = 1e-3


@dataclass(frozen=True)
class PerturbationSpec:
    node: int
    delta: float = DEFAULT_DELTA
    channel: str = "ground_capacitance"

    def __post_init__(self):
        if not 0.0 < self.delta < 0.1:
            raise ParameterError(f"perturbation delta must lie in (0, 0.1), got {self.delta}")
        if self.channel not in CHANNELS:
            raise ParameterError(f"unknown perturbation channel {self.channel!r}")


@dataclass(frozen=True)
class SIReport:
    node_ids: tuple[int, ...]
    si: np.ndarray
    si_max: np.ndarray
    pairs: tuple[Pair, ...]
    deviations: np.ndarray  # (node, pair)
    edge_sensitivities: dict[int, dict[Pair, float]]
    parasitic_edges: tuple[Pair, ...]
    delta: float

    def to_dict(self) -> dict:
        sparse = []
        for a, k in enumerate(self.node_ids):
            for b, (i, j) in enumerate(self.pairs):
                value = float(self.deviations[a, b])
                if abs(value) > 1e-12:
                    sparse.append([k, i, j, value])
        return {
            "node_ids": list(self.node_ids),
            "delta": self.delta,
            "si": [float(x) for x in self.si],
            "si_max": [float(x) for x in self.si_max],
            "parasitic_edges": [list(e) for e in self.parasitic_edges],
            "deviations": sparse,
            "edge_sensitivities": [
                [k, i, j, s]
                for k in self.node_ids
                for (i, j), s in self.edge_sensitivities[k].items()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def perturb_network(net: CapacitanceNetwork, spec: PerturbationSpec) -> CapacitanceNetwork:
    node = net.node(spec.node)
    if spec.channel == "ground_capacitance":
        changed = replace(node, ground_cap=node.ground_cap * (1.0 + spec.delta))
    else:
        if not node.has_junction:
            raise ChannelError(f"node {spec.node} has no junction to perturb")
        changed = replace(node, josephson_energy=node.josephson_energy * (1.0 + spec.delta))
    return net.with_node(changed)


def coupling_magnitudes(net: CapacitanceNetwork) -> dict[Pair, float]:
    h = hamiltonian_from_network(net)
    # directed matrix is not needed here; pass the symmetric one to skip it
    return extract_couplings(h, directed=h.coupling).magnitudes


def aggregate_si(edge_sensitivities: Mapping[Pair, float], edges: Iterable[Pair]) -> float:
    return float(sum(edge_sensitivities[e] for e in sorted(edges)))


def si_from_couplings(
    baseline: Mapping[Pair, float],
    perturbed: Mapping[int, Mapping[Pair, float]],
    parasitic: Iterable[Pair],
    delta: float,
    scale: float | None = None,
) -> SIReport:
    """Aggregate deviations given baseline and per-node perturbed |g| maps."""
    if scale is None:
        scale = max(baseline.values())
    parasitic = tuple(sorted(parasitic))
    node_ids = tuple(sorted(perturbed))
    pairs = tuple(sorted(set(baseline).union(*[set(p) for p in perturbed.values()])))
    base_t = normalize_couplings(baseline, scale)
    deviations = np.zeros((len(node_ids), len(pairs)))
    si = np.zeros(len(node_ids))
    si_max = np.zeros(len(node_ids))
    edge_s: dict[int, dict[Pair, float]] = {}
    for a, k in enumerate(node_ids):
        pert_t = normalize_couplings(perturbed[k], scale)
        for b, pair in enumerate(pairs):
            deviations[a, b] = pert_t.get(pair, 0.0) - base_t.get(pair, 0.0)
        row = dict(zip(pairs, deviations[a]))
        edge_s[k] = {e: abs(float(row.get(e, 0.0))) for e in parasitic}
        si[a] = aggregate_si(edge_s[k], parasitic)
        si_max[a] = float(np.max(np.abs(deviations[a]))) / delta if pairs else 0.0
    return SIReport(node_ids, si, si_max, pairs, deviations, edge_s, parasitic, delta)


def si_report(
    net: CapacitanceNetwork,
    g_nom: InteractionGraph,
    tau_min: float = DEFAULT_TAU_MIN,
    delta: float = DEFAULT_DELTA,
    channel: str = "ground_capacitance",
    jobs: int = 1,
) -> SIReport:
    """Sensitivity Index of every node.

    Nodes without the perturbed parameter (Josephson channel on a spectator)
    get all-zero deviations. An empty parasitic set yields SI = 0 everywhere.
    """
    PerturbationSpec(net.ids[0], delta, channel)  # validates delta/channel
    baseline = coupling_magnitudes(net)
    scale = max(baseline.values(), default=0.0)
    gt = normalize_couplings(baseline)
    g_phys = reconstruct_physical_graph(gt, tau_min, g_nom.node_count)
    parasitic = g_phys.edge_set - g_nom.edge_set

    def perturbed_map(node_id: int) -> dict[Pair, float]:
        node = net.node(node_id)
        if channel == "josephson_energy" and not node.has_junction:
            return dict(baseline)
        return coupling_magnitudes(perturb_network(net, PerturbationSpec(node_id, delta, channel)))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            maps = list(pool.map(perturbed_map, net.ids))
    else:
        maps = [perturbed_map(k) for k in net.ids]
    return si_from_couplings(baseline, dict(zip(net.ids, maps)), parasitic, delta, scale)
