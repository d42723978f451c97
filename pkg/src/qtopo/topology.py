"""Physical interaction graph reconstruction and Logical Topology Distortion.

Pair keys are canonical ``(i, j)`` with ``i < j``; direction only appears in
the asymmetry profile, which uses ordered keys.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import NormalizationError, ParameterError, StructuralError, UndefinedLTDError
from .hamiltonian import EffectiveHamiltonian, directed_coupling_matrix

DEFAULT_TAU_MIN = 0.02

Pair = tuple[int, int]


def canonical(i: int, j: int) -> Pair:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class InteractionGraph:
    node_count: int
    edges: Mapping[Pair, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (i, j), w in self.edges.items():
            if i == j:
                raise StructuralError(f"self-loop on node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise StructuralError(f"edge ({i},{j}) outside {self.node_count} nodes")
            if not 0.0 <= w <= 1.0:
                raise StructuralError(f"edge ({i},{j}) weight {w} outside [0, 1]")
            clean[canonical(i, j)] = float(w)
        if clean and max(clean.values()) != 1.0:
            raise StructuralError("graph weights must be normalized (max weight 1)")
        object.__setattr__(self, "edges", dict(sorted(clean.items())))

    @property
    def edge_set(self) -> frozenset[Pair]:
        return frozenset(self.edges)

    @classmethod
    def nominal(cls, node_count: int, edges) -> "InteractionGraph":
        return cls(node_count, {canonical(int(i), int(j)): 1.0 for i, j in edges})

    def relabeled(self, perm) -> "InteractionGraph":
        return InteractionGraph(
            self.node_count, {canonical(perm[i], perm[j]): w for (i, j), w in self.edges.items()}
        )


@dataclass(frozen=True)
class Couplings:
    """|g_ij| per unordered pair and |g_{i->j}| per ordered pair, GHz."""

    magnitudes: dict[Pair, float]
    directed: dict[Pair, float]


@dataclass(frozen=True)
class LTDReport:
    physical_graph: InteractionGraph
    parasitic_edges: frozenset[Pair]
    missing_edges: frozenset[Pair]
    asymmetry: dict[Pair, float]
    asymmetry_summary: dict
    ltd: float
    ltd_weighted: float

    def to_dict(self) -> dict:
        return {
            "node_count": self.physical_graph.node_count,
            "physical_edges": [[i, j, w] for (i, j), w in self.physical_graph.edges.items()],
            "parasitic_edges": [list(e) for e in sorted(self.parasitic_edges)],
            "missing_edges": [list(e) for e in sorted(self.missing_edges)],
            "asymmetry": [[i, j, a] for (i, j), a in sorted(self.asymmetry.items())],
            "asymmetry_summary": self.asymmetry_summary,
            "ltd": self.ltd,
            "ltd_weighted": self.ltd_weighted,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def extract_couplings(
    h: EffectiveHamiltonian, directed: np.ndarray | None = None
) -> Couplings:
    if directed is None:
        directed = directed_coupling_matrix(h)
    ids = h.node_ids
    mags: dict[Pair, float] = {}
    dmags: dict[Pair, float] = {}
    n = h.size
    for a in range(n):
        for b in range(a + 1, n):
            g = abs(float(h.coupling[a, b]))
            if g > 0:
                mags[canonical(ids[a], ids[b])] = g
            for s, t in ((a, b), (b, a)):
                d = abs(float(directed[s, t]))
                if d > 0:
                    dmags[(ids[s], ids[t])] = d
    return Couplings(dict(sorted(mags.items())), dict(sorted(dmags.items())))


def normalize_couplings(g: Mapping, scale: float | None = None) -> dict:
    """Divide by ``max |g|`` (or by an explicit ``scale``)."""
    if scale is None:
        scale = max((abs(v) for v in g.values()), default=0.0)
        if scale == 0:
            raise NormalizationError("cannot normalize an all-zero coupling map")
    elif not scale > 0:
        raise NormalizationError(f"normalization scale must be positive, got {scale}")
    return {k: v / scale for k, v in g.items()}


def reconstruct_physical_graph(
    gt: Mapping[Pair, float], tau_min: float, node_count: int
) -> InteractionGraph:
    """Keep the candidate edges (g~ > 0) with g~ >= tau_min."""
    if not 0.0 < tau_min < 1.0:
        raise ParameterError(f"tau_min must lie in (0, 1), got {tau_min}")
    kept = {canonical(*k): w for k, w in gt.items() if w > 0 and w >= tau_min}
    return InteractionGraph(node_count, kept)


def ltd_report(
    g_nom: InteractionGraph,
    g_phys: InteractionGraph,
    directed: Mapping[Pair, float] | None = None,
) -> LTDReport:
    if g_nom.node_count != g_phys.node_count:
        raise StructuralError(
            f"nominal graph has {g_nom.node_count} nodes, physical graph {g_phys.node_count}"
        )
    nominal = g_nom.edge_set
    if not nominal:
        raise UndefinedLTDError("LTD undefined: nominal graph has no edges")
    physical = g_phys.edge_set
    missing = nominal - physical
    parasitic = physical - nominal
    n_nom = len(nominal)
    ltd = (len(parasitic) + len(missing)) / n_nom
    weighted = (math.fsum(g_phys.edges[e] for e in parasitic) + len(missing)) / n_nom

    asym: dict[Pair, float] = {}
    for i, j in sorted({canonical(*k) for k in (directed or {})}):
        asym[(i, j)] = abs(directed.get((i, j), 0.0) - directed.get((j, i), 0.0))
    if asym:
        argmax = max(asym, key=lambda k: (asym[k], -k[0], -k[1]))
        summary = {
            "max": asym[argmax],
            "mean": float(np.mean(list(asym.values()))),
            "argmax": list(argmax),
        }
    else:
        summary = {"max": 0.0, "mean": 0.0, "argmax": None}
    return LTDReport(g_phys, frozenset(parasitic), frozenset(missing), asym, summary, ltd, weighted)


def analyze_topology(
    h: EffectiveHamiltonian,
    g_nom: InteractionGraph,
    tau_min: float = DEFAULT_TAU_MIN,
    node_count: int | None = None,
) -> LTDReport:
    """Extract, normalize, threshold and compare against the nominal graph."""
    couplings = extract_couplings(h)
    scale = max(couplings.magnitudes.values(), default=0.0)
    gt = normalize_couplings(couplings.magnitudes)
    directed = normalize_couplings(couplings.directed, scale)
    g_phys = reconstruct_physical_graph(gt, tau_min, node_count or g_nom.node_count)
    return ltd_report(g_nom, g_phys, directed)


def nominal_from_dict(data: Mapping) -> InteractionGraph:
    try:
        count = int(data["node_count"])
        edges = [(int(e[0]), int(e[1])) for e in data["edges"]]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise StructuralError(f"nominal topology: malformed ({exc})") from None
    for pos, (i, j) in enumerate(edges):
        if i == j or not (0 <= i < count and 0 <= j < count):
            raise StructuralError(f"edges[{pos}]: invalid edge ({i},{j}) for {count} nodes")
    return InteractionGraph.nominal(count, edges)


def load_nominal(path: str | Path) -> InteractionGraph:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return nominal_from_dict(data)
