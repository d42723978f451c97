"""Transmon-mode effective Hamiltonian from a charging-energy matrix.

Each junction node becomes one weakly anharmonic mode:

    omega_i = sqrt(8 E_C,ii E_J,i) - E_C,ii,   alpha_i = -E_C,ii
    g_ij    = 8 E_C,ij n_zpf,i n_zpf,j,        n_zpf = (E_J / 32 E_C)^(1/4)

which is the second-order expansion of 4 n^T E_C n - sum E_J cos(phi).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .capnet import (
    DEFAULT_UNIT_SCALE,
    CapacitanceNetwork,
    charging_energy_matrix,
    to_maxwell_matrix,
)
from .errors import ChannelError, DomainError, NearResonanceError, RegimeError, ValidationError

REGIME_FLOOR = 20.0
RESONANCE_FLOOR = 1e-3  # GHz


@dataclass(frozen=True)
class ModeParams:
    frequency: float
    anharmonicity: float
    charging_energy: float
    josephson_energy: float

    @property
    def n_zpf(self) -> float:
        return (self.josephson_energy / (32.0 * self.charging_energy)) ** 0.25


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """Modes are ordered like the junction nodes of the source network."""

    node_ids: tuple[int, ...]
    kinds: tuple[str, ...]
    modes: tuple[ModeParams, ...]
    coupling: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.coupling, dtype=float)
        n = len(self.modes)
        if g.shape != (n, n):
            raise ValidationError(f"coupling matrix shape {g.shape} does not match {n} modes")
        if not np.allclose(g, g.T, rtol=0, atol=1e-12):
            raise ValidationError("coupling matrix must be symmetric")
        g = 0.5 * (g + g.T)
        np.fill_diagonal(g, 0.0)
        g.setflags(write=False)
        object.__setattr__(self, "coupling", g)
        for node_id, mode in zip(self.node_ids, self.modes):
            if not mode.frequency > 0:
                raise ValidationError(f"node {node_id}: mode frequency must be > 0")

    @property
    def size(self) -> int:
        return len(self.modes)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([m.frequency for m in self.modes])

    @property
    def anharmonicities(self) -> np.ndarray:
        return np.array([m.anharmonicity for m in self.modes])

    def index_of(self, node_id: int) -> int:
        try:
            return self.node_ids.index(node_id)
        except ValueError:
            raise ValidationError(f"node {node_id} hosts no mode") from None

    @property
    def coupler_indices(self) -> list[int]:
        return [k for k, kind in enumerate(self.kinds) if kind == "coupler"]

    @property
    def qubit_indices(self) -> list[int]:
        return [k for k, kind in enumerate(self.kinds) if kind == "qubit"]

    @classmethod
    def from_params(cls, frequencies, anharmonicities, coupling, kinds=None, node_ids=None):
        """Build directly from mode parameters (charging/Josephson energies inferred)."""
        freqs = [float(f) for f in frequencies]
        alphas = [float(a) for a in anharmonicities]
        modes = []
        for f, a in zip(freqs, alphas):
            ec = -a if a < 0 else 0.2
            ej = (f + ec) ** 2 / (8 * ec)
            modes.append(ModeParams(f, a, ec, ej))
        n = len(modes)
        return cls(
            tuple(node_ids if node_ids is not None else range(n)),
            tuple(kinds if kinds is not None else ["qubit"] * n),
            tuple(modes),
            np.array(coupling, dtype=float),
        )

    def to_dict(self) -> dict:
        return {
            "node_ids": list(self.node_ids),
            "kinds": list(self.kinds),
            "modes": [
                {
                    "frequency_ghz": m.frequency,
                    "anharmonicity_ghz": m.anharmonicity,
                    "charging_energy_ghz": m.charging_energy,
                    "josephson_energy_ghz": m.josephson_energy,
                }
                for m in self.modes
            ],
            "coupling_ghz": self.coupling.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EffectiveHamiltonian":
        modes = tuple(
            ModeParams(
                m["frequency_ghz"], m["anharmonicity_ghz"],
                m["charging_energy_ghz"], m["josephson_energy_ghz"],
            )
            for m in data["modes"]
        )
        return cls(tuple(data["node_ids"]), tuple(data["kinds"]), modes,
                   np.array(data["coupling_ghz"], dtype=float))


def build_effective_hamiltonian(
    ec: np.ndarray,
    net: CapacitanceNetwork,
    regime_floor: float = REGIME_FLOOR,
) -> EffectiveHamiltonian:
    ec = np.asarray(ec, dtype=float)
    if ec.shape != (net.size, net.size):
        raise ValidationError(f"E_C shape {ec.shape} does not match {net.size}-node network")
    junction = [k for k, node in enumerate(net.nodes) if node.has_junction]
    for node in net.nodes:
        if node.kind in ("qubit", "coupler") and not node.has_junction:
            raise ChannelError(f"node {node.id}: {node.kind} has no josephson_energy")
    modes = []
    for k in junction:
        node = net.nodes[k]
        ec_ii = ec[k, k]
        ej = node.josephson_energy
        if ej / ec_ii < regime_floor:
            raise RegimeError(
                f"node {node.id}: E_J/E_C = {ej / ec_ii:.2f} below transmon floor {regime_floor}"
            )
        modes.append(ModeParams(np.sqrt(8.0 * ec_ii * ej) - ec_ii, -ec_ii, ec_ii, ej))
    zpf = np.array([m.n_zpf for m in modes])
    sub = ec[np.ix_(junction, junction)]
    g = 8.0 * sub * np.outer(zpf, zpf)
    np.fill_diagonal(g, 0.0)
    return EffectiveHamiltonian(
        tuple(net.nodes[k].id for k in junction),
        tuple(net.nodes[k].kind for k in junction),
        tuple(modes),
        g,
    )


def hamiltonian_from_network(
    net: CapacitanceNetwork,
    unit_scale: float = DEFAULT_UNIT_SCALE,
    regime_floor: float = REGIME_FLOOR,
) -> EffectiveHamiltonian:
    """capnet -> hamiltonian in one call."""
    ec = charging_energy_matrix(to_maxwell_matrix(net), unit_scale)
    return build_effective_hamiltonian(ec, net, regime_floor)


def mediated_coupling(g1: float, g2: float, g12: float, delta: float) -> float:
    """Effective qubit-qubit exchange through a coupler: g1*g2/delta + g12."""
    if delta == 0:
        raise DomainError("mediated coupling undefined at zero qubit-coupler detuning")
    return g1 * g2 / delta + g12


def directed_coupling_matrix(
    h: EffectiveHamiltonian, resonance_floor: float = RESONANCE_FLOOR
) -> np.ndarray:
    """g_{i->j} = g_ij + sum over couplers k of g_ik g_kj / (omega_i - omega_k).

    The source-mode detuning makes the matrix asymmetric whenever the two
    endpoints sit at different frequencies.
    """
    g = h.coupling
    omega = h.frequencies
    out = g.copy()
    n = h.size
    for k in h.coupler_indices:
        for i in range(n):
            if i == k or g[i, k] == 0:
                continue
            detuning = omega[i] - omega[k]
            for j in range(n):
                if j == i or j == k or g[k, j] == 0:
                    continue
                if abs(detuning) < resonance_floor:
                    raise NearResonanceError(
                        f"modes {h.node_ids[i]} and {h.node_ids[k]} within "
                        f"{resonance_floor * 1e3:.3g} MHz (|detuning| = {abs(detuning):.3e} GHz)"
                    )
                out[i, j] += g[i, k] * g[k, j] / detuning
    np.fill_diagonal(out, 0.0)
    return out


def dump_hamiltonian(h: EffectiveHamiltonian, directed: np.ndarray | None = None) -> str:
    data = h.to_dict()
    if directed is not None:
        data["directed_coupling_ghz"] = np.asarray(directed).tolist()
    return json.dumps(data, indent=2, sort_keys=True)
