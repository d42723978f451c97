"""Capacitance networks, Maxwell matrices and charging-energy matrices.

Units: capacitances in femtofarads, energies in GHz (E/h). Ground is not a
node; it enters only through each node's ``ground_cap``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.constants as const
from scipy.linalg import lu_factor, lu_solve

from .errors import ChannelError, ConditioningError, StructuralError, ValidationError

KINDS = ("qubit", "coupler", "spectator")

# (2e)^2/2 in coulomb^2; multiplied by UNIT_SCALE it gives GHz*fF.
PAIR_CHARGE_SQ_HALF = (2.0 * const.e) ** 2 / 2.0
# 1/(4h) converts (2e)^2/2C to the e^2/2C transmon convention, 1e15 maps
# 1/fF -> 1/F and 1e-9 maps Hz -> GHz. 100 fF -> E_C = 0.1937 GHz.
DEFAULT_UNIT_SCALE = 1.0 / (4.0 * const.h) * 1e15 * 1e-9

MAX_CONDITION = 1e12


def charging_constant(unit_scale: float = DEFAULT_UNIT_SCALE) -> float:
    """k such that E_C = k * C^-1 with C in fF and E_C in GHz."""
    return PAIR_CHARGE_SQ_HALF * unit_scale


@dataclass(frozen=True)
class ConductorNode:
    id: int
    kind: str
    ground_cap: float
    josephson_energy: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"node {self.id}: unknown kind {self.kind!r}")
        if not np.isfinite(self.ground_cap) or self.ground_cap < 0:
            raise ValidationError(
                f"node {self.id}: ground capacitance must be >= 0, got {self.ground_cap}"
            )
        if self.josephson_energy is None:
            if self.kind in ("qubit", "coupler"):
                raise ChannelError(f"node {self.id}: {self.kind} node requires josephson_energy")
        elif not self.josephson_energy > 0:
            raise ValidationError(
                f"node {self.id}: josephson_energy must be > 0, got {self.josephson_energy}"
            )

    @property
    def has_junction(self) -> bool:
        return self.josephson_energy is not None


def _pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class CapacitanceNetwork:
    """Conductors plus symmetric mutual capacitances keyed by ``(i, j)``, ``i < j``."""

    nodes: tuple[ConductorNode, ...]
    mutual_caps: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        nodes = tuple(sorted(self.nodes, key=lambda n: n.id))
        if len(nodes) < 2:
            raise StructuralError(f"network needs at least 2 nodes, got {len(nodes)}")
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            raise StructuralError(f"duplicate node ids in {ids}")
        known = set(ids)
        caps: dict[tuple[int, int], float] = {}
        for (i, j), value in self.mutual_caps.items():
            if i == j:
                raise StructuralError(f"self-pair ({i},{i}) in mutual capacitances")
            if i not in known or j not in known:
                raise StructuralError(f"mutual capacitance ({i},{j}) references unknown node")
            if not np.isfinite(value) or value < 0:
                raise ValidationError(f"mutual capacitance ({i},{j}) must be >= 0, got {value}")
            key = _pair(i, j)
            if key in caps:
                raise StructuralError(f"mutual capacitance {key} given twice")
            caps[key] = float(value)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "mutual_caps", dict(sorted(caps.items())))

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def ids(self) -> list[int]:
        return [n.id for n in self.nodes]

    def index_of(self, node_id: int) -> int:
        for idx, node in enumerate(self.nodes):
            if node.id == node_id:
                return idx
        raise StructuralError(f"no node with id {node_id}")

    def node(self, node_id: int) -> ConductorNode:
        return self.nodes[self.index_of(node_id)]

    def mutual(self, i: int, j: int) -> float:
        return self.mutual_caps.get(_pair(i, j), 0.0)

    def with_node(self, node: ConductorNode) -> "CapacitanceNetwork":
        nodes = [node if n.id == node.id else n for n in self.nodes]
        return CapacitanceNetwork(tuple(nodes), dict(self.mutual_caps))

    def scaled(self, factor: float) -> "CapacitanceNetwork":
        """Every capacitance multiplied by ``factor``."""
        nodes = tuple(replace(n, ground_cap=n.ground_cap * factor) for n in self.nodes)
        return CapacitanceNetwork(nodes, {k: v * factor for k, v in self.mutual_caps.items()})

    def to_dict(self) -> dict:
        nodes = []
        for n in self.nodes:
            entry = {"id": n.id, "kind": n.kind, "ground_cap_fF": n.ground_cap}
            if n.josephson_energy is not None:
                entry["ej_ghz"] = n.josephson_energy
            nodes.append(entry)
        return {"nodes": nodes, "mutual_fF": [[i, j, c] for (i, j), c in self.mutual_caps.items()]}


def to_maxwell_matrix(net: CapacitanceNetwork) -> np.ndarray:
    """Maxwell matrix in fF, rows ordered by ascending node id."""
    n = net.size
    index = {node.id: k for k, node in enumerate(net.nodes)}
    cmat = np.zeros((n, n))
    terms = [[node.ground_cap] for node in net.nodes]
    for (i, j), c in net.mutual_caps.items():
        a, b = index[i], index[j]
        cmat[a, b] = cmat[b, a] = -c
        terms[a].append(c)
        terms[b].append(c)
    # fsum is correctly rounded, so the diagonal does not depend on node order
    for k, t in enumerate(terms):
        cmat[k, k] = math.fsum(t)
    return cmat


def condition_1norm(cmat: np.ndarray) -> float:
    """1-norm condition number estimate from an explicit LU inverse."""
    try:
        inv = lu_solve(lu_factor(cmat, check_finite=True), np.eye(cmat.shape[0]))
    except (ValueError, np.linalg.LinAlgError):
        return float("inf")
    return float(np.linalg.norm(cmat, 1) * np.linalg.norm(inv, 1))


def charging_energy_matrix(
    cmat: np.ndarray, unit_scale: float = DEFAULT_UNIT_SCALE
) -> np.ndarray:
    """E_C = (2e)^2/2 * C^-1, in GHz.

    Raises ConditioningError when C is singular or its 1-norm condition
    number reaches ``MAX_CONDITION``.
    """
    if not unit_scale > 0:
        raise ValidationError(f"unit_scale must be positive, got {unit_scale}")
    cmat = np.asarray(cmat, dtype=float)
    n = cmat.shape[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # singularity is reported below
        lu, piv = lu_factor(cmat, check_finite=True)
    if np.any(np.diag(lu) == 0):
        raise ConditioningError("capacitance matrix is singular", condition=float("inf"))
    inv = lu_solve((lu, piv), np.eye(n))
    cond = float(np.linalg.norm(cmat, 1) * np.linalg.norm(inv, 1))
    if not np.isfinite(cond) or cond >= MAX_CONDITION:
        raise ConditioningError(
            f"capacitance matrix is ill-conditioned (cond_1 ~ {cond:.3e})", condition=cond
        )
    ec = charging_constant(unit_scale) * inv
    return 0.5 * (ec + ec.T)


# -- file format ------------------------------------------------------------

def network_from_dict(data: Mapping) -> CapacitanceNetwork:
    """Parse the JSON network layout, reporting errors by position."""
    if not isinstance(data, Mapping) or "nodes" not in data:
        raise StructuralError("network: missing 'nodes' array")
    raw_nodes = data["nodes"]
    if not isinstance(raw_nodes, list):
        raise StructuralError("network: 'nodes' must be an array")
    nodes = []
    seen: dict[int, int] = {}
    for pos, entry in enumerate(raw_nodes):
        where = f"nodes[{pos}]"
        try:
            node_id = int(entry["id"])
            kind = entry.get("kind", "qubit")
            ground = float(entry["ground_cap_fF"])
        except (KeyError, TypeError, ValueError) as exc:
            raise StructuralError(f"{where}: malformed entry ({exc})") from None
        if node_id in seen:
            raise StructuralError(f"{where}.id: duplicate id {node_id} (first at nodes[{seen[node_id]}])")
        seen[node_id] = pos
        if ground < 0:
            raise ValidationError(f"{where}.ground_cap_fF: negative value {ground}")
        ej = entry.get("ej_ghz")
        if ej is not None:
            ej = float(ej)
            if ej <= 0:
                raise ValidationError(f"{where}.ej_ghz: must be > 0, got {ej}")
        try:
            nodes.append(ConductorNode(node_id, kind, ground, ej))
        except ChannelError as exc:
            raise ChannelError(f"{where}: {exc}") from None
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
    mutual: dict[tuple[int, int], float] = {}
    for pos, entry in enumerate(data.get("mutual_fF", [])):
        where = f"mutual_fF[{pos}]"
        try:
            i, j, c = int(entry[0]), int(entry[1]), float(entry[2])
        except (IndexError, TypeError, ValueError) as exc:
            raise StructuralError(f"{where}: expected [i, j, cap_fF] ({exc})") from None
        if c < 0:
            raise ValidationError(f"{where}: negative capacitance {c} for pair ({i},{j})")
        if i == j:
            raise StructuralError(f"{where}: self-pair ({i},{j})")
        if i not in seen or j not in seen:
            raise StructuralError(f"{where}: pair ({i},{j}) references an unknown node")
        key = _pair(i, j)
        if key in mutual:
            raise StructuralError(f"{where}: duplicate pair {key}")
        mutual[key] = c
    return CapacitanceNetwork(tuple(nodes), mutual)


def load_network(path: str | Path) -> CapacitanceNetwork:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{path}: invalid JSON at line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    return network_from_dict(data)


def make_network(
    ground_caps: Iterable[float],
    mutual: Mapping[tuple[int, int], float] | None = None,
    josephson: Iterable[float | None] | None = None,
    kinds: Iterable[str] | None = None,
) -> CapacitanceNetwork:
    """Convenience constructor with ids 0..N-1."""
    ground_caps = list(ground_caps)
    n = len(ground_caps)
    kinds = list(kinds) if kinds is not None else None
    josephson = list(josephson) if josephson is not None else [None] * n
    if kinds is None:
        kinds = ["qubit" if ej is not None else "spectator" for ej in josephson]
    nodes = tuple(
        ConductorNode(k, kinds[k], float(ground_caps[k]), josephson[k]) for k in range(n)
    )
    return CapacitanceNetwork(nodes, dict(mutual or {}))
