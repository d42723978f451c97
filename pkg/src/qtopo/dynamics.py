"""Duffing-model pulse simulation and relative infidelity.

Time is in ns and frequencies in GHz; the Schrodinger equation reads
d psi/dt = -2 pi i H psi. The solver works in the lab frame (no rotating-wave
approximation); only the final comparison between two layouts is taken in
each layout's own rotating frame (see ``relative_infidelity``).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import reduce
from pathlib import Path
from typing import Mapping

import numpy as np

from . import _kernels
from .errors import CapacityError, ComparabilityError, IntegrationError, ParameterError, ValidationError
from .hamiltonian import EffectiveHamiltonian

FAMILIES = ("cr_square", "cr_gaussian_flattop", "coupler_mod")
REGIMES = ("short", "medium", "long", "overdrive")
REGIME_BANDS = {
    "short": (20.0, 30.0),
    "medium": (40.0, 60.0),
    "long": (80.0, 120.0),
    "overdrive": (150.0, 220.0),
}
MAX_HILBERT_DIM = 4096
DEFAULT_TRUNCATION = 3
NORM_TOLERANCE = 1e-6
STEPS_PER_PERIOD = 50
DRIVE_ELEMENT_CUTOFF = 1e-9

# Bench amplitudes in GHz: charge-drive strength for the cross-resonance
# families, coupler frequency-modulation depth for coupler_mod.
BENCH_AMPLITUDES = {
    "short": {"cr_square": 0.030, "cr_gaussian_flattop": 0.030, "coupler_mod": 0.150},
    "medium": {"cr_square": 0.025, "cr_gaussian_flattop": 0.025, "coupler_mod": 0.120},
    "long": {"cr_square": 0.020, "cr_gaussian_flattop": 0.020, "coupler_mod": 0.100},
    "overdrive": {"cr_square": 0.045, "cr_gaussian_flattop": 0.045, "coupler_mod": 0.250},
}
BENCH_RISE_FRACTION = 0.2


@dataclass(frozen=True)
class PulseSpec:
    """A control pulse.

    ``carrier_frequency=None`` means the carrier is calibrated against the
    Hamiltonian being driven: the target mode's frequency for the
    cross-resonance families, the control/target detuning for coupler_mod.
    ``control_node`` is the qubit that receives the superposition in the
    bench initial state; it defaults to ``drive_node``.
    """

    family: str
    regime: str
    duration: float
    amplitude: float
    drive_node: int
    target_node: int
    carrier_frequency: float | None = None
    rise_time: float = 0.0
    control_node: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown pulse family {self.family!r}")
        if self.regime not in REGIMES:
            raise ParameterError(f"unknown pulse regime {self.regime!r}")
        lo, hi = REGIME_BANDS[self.regime]
        if not lo <= self.duration <= hi:
            raise ParameterError(
                f"duration {self.duration} ns outside the {self.regime} band [{lo}, {hi}]"
            )
        if not self.amplitude >= 0:
            raise ParameterError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.rise_time < 0 or 2 * self.rise_time > self.duration:
            raise ParameterError(f"rise_time {self.rise_time} incompatible with duration {self.duration}")
        if self.carrier_frequency is not None and self.carrier_frequency < 0:
            raise ParameterError("carrier_frequency must be >= 0")

    @property
    def pulse_id(self) -> str:
        return f"{self.regime}_{self.family}"

    @property
    def control(self) -> int:
        return self.drive_node if self.control_node is None else self.control_node

    def envelope(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        T, r = self.duration, self.rise_time
        env = np.where((t >= 0) & (t <= T), 1.0, 0.0)
        if r > 0 and self.family != "cr_square":
            rising = t < r
            falling = t > T - r
            if self.family == "cr_gaussian_flattop":
                sigma = r / 3.0
                env = np.where(rising, np.exp(-0.5 * ((t - r) / sigma) ** 2), env)
                env = np.where(falling, np.exp(-0.5 * ((t - (T - r)) / sigma) ** 2), env)
            else:
                env = np.where(rising, np.sin(0.5 * np.pi * t / r) ** 2, env)
                env = np.where(falling, np.sin(0.5 * np.pi * (T - t) / r) ** 2, env)
        return env

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DuffingModel:
    hamiltonian: EffectiveHamiltonian
    dims: tuple[int, ...]
    drift: np.ndarray

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def lowering(self, node_id: int) -> np.ndarray:
        return _mode_operator(_destroy(self.dims[0]), self.hamiltonian.index_of(node_id), self.dims)

    def number(self, node_id: int) -> np.ndarray:
        k = self.hamiltonian.index_of(node_id)
        return _mode_operator(np.diag(np.arange(self.dims[k], dtype=float)), k, self.dims)

    def occupations(self) -> np.ndarray:
        """(dim, modes) array of Fock occupations of each basis state."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1)
        return grids.T

    def basis_state(self, occupation) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[np.ravel_multi_index(tuple(occupation), self.dims)] = 1.0
        return psi


@dataclass(frozen=True)
class FidelityResult:
    relative_infidelity: float
    leakage: float
    norm_error: float

    def to_dict(self) -> dict:
        return asdict(self)


def _destroy(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1)


def _mode_operator(op: np.ndarray, k: int, dims) -> np.ndarray:
    factors = [op if i == k else np.eye(d) for i, d in enumerate(dims)]
    return reduce(np.kron, factors)


def build_duffing(h: EffectiveHamiltonian, d: int = DEFAULT_TRUNCATION) -> DuffingModel:
    """H0 = sum w n + (a/2) n(n-1) + sum_{i<j} g (a_i^+ a_j + h.c.) on a truncated Fock basis."""
    if d < 2:
        raise ParameterError(f"truncation must be >= 2, got {d}")
    dims = (d,) * h.size
    total = d ** h.size
    if total > MAX_HILBERT_DIM:
        raise CapacityError(f"Hilbert dimension {d}^{h.size} = {total} exceeds {MAX_HILBERT_DIM}")
    occ = np.indices(dims).reshape(h.size, -1).T.astype(float)
    diag = occ @ h.frequencies + 0.5 * (occ * (occ - 1)) @ h.anharmonicities
    drift = np.diag(diag)
    a = _destroy(d)
    lowering = [_mode_operator(a, k, dims) for k in range(h.size)]
    for i in range(h.size):
        for j in range(i + 1, h.size):
            g = h.coupling[i, j]
            if g != 0:
                hop = lowering[i].T @ lowering[j]
                drift = drift + g * (hop + hop.T)
    return DuffingModel(h, dims, drift)


def ground_state(model: DuffingModel) -> np.ndarray:
    return model.basis_state([0] * len(model.dims))


def plus_state(model: DuffingModel, node_id: int) -> np.ndarray:
    """|+> on one mode, every other mode in |0>."""
    k = model.hamiltonian.index_of(node_id)
    occ = [0] * len(model.dims)
    psi = model.basis_state(occ)
    occ[k] = 1
    return (psi + model.basis_state(occ)) / math.sqrt(2.0)


def bench_initial_state(model: DuffingModel, pulse: PulseSpec) -> np.ndarray:
    return plus_state(model, pulse.control)


def resolve_carrier(model: DuffingModel, pulse: PulseSpec) -> float:
    if pulse.carrier_frequency is not None:
        return float(pulse.carrier_frequency)
    h = model.hamiltonian
    target = h.modes[h.index_of(pulse.target_node)].frequency
    if pulse.family == "coupler_mod":
        control = h.modes[h.index_of(pulse.control)].frequency
        return abs(control - target)
    return target


def drive_operator(model: DuffingModel, pulse: PulseSpec) -> np.ndarray:
    """Charge drive (a + a^+) for cross-resonance, number operator for coupler modulation."""
    if pulse.family == "coupler_mod":
        return model.number(pulse.drive_node)
    a = model.lowering(pulse.drive_node)
    return a + a.T


@dataclass(frozen=True)
class _Prepared:
    energies: np.ndarray
    vectors: np.ndarray
    drive_eig: np.ndarray
    carrier: float
    max_frequency: float


def _prepare(model: DuffingModel, pulse: PulseSpec) -> _Prepared:
    energies, vectors = np.linalg.eigh(model.drift)
    drive_eig = vectors.T @ drive_operator(model, pulse) @ vectors
    drive_eig = 0.5 * (drive_eig + drive_eig.T)
    carrier = resolve_carrier(model, pulse)
    mask = np.abs(drive_eig) > DRIVE_ELEMENT_CUTOFF * max(np.abs(drive_eig).max(), 1e-300)
    gaps = np.abs(energies[:, None] - energies[None, :])[mask]
    transition = float(gaps.max()) if gaps.size else 0.0
    max_mode = float(model.hamiltonian.frequencies.max())
    return _Prepared(energies, vectors, drive_eig, carrier, max(transition + carrier, max_mode))


def default_time_step(model: DuffingModel, pulse: PulseSpec) -> float:
    """Largest step allowed: 1 / (50 * fastest frequency in the driven problem)."""
    return 1.0 / (STEPS_PER_PERIOD * _prepare(model, pulse).max_frequency)


def _evolve(model, pulse, psi0, dt=None, backend=None):
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (model.dim,):
        raise ValidationError(f"state has shape {psi0.shape}, model dimension is {model.dim}")
    if abs(np.linalg.norm(psi0) - 1.0) > NORM_TOLERANCE:
        raise ValidationError("initial state must be normalized")
    prep = _prepare(model, pulse)
    step_max = 1.0 / (STEPS_PER_PERIOD * prep.max_frequency) if dt is None else float(dt)
    if not step_max > 0:
        raise ParameterError(f"time step must be positive, got {dt}")
    T = float(pulse.duration)
    nsteps = max(1, math.ceil(T / step_max - 1e-9))
    h = T / nsteps
    phi0 = prep.vectors.T @ psi0
    if pulse.amplitude == 0:
        phi, dev = phi0, abs(np.linalg.norm(phi0) - 1.0)
    else:
        t = np.arange(2 * nsteps + 1) * (0.5 * h)
        samples = pulse.amplitude * pulse.envelope(t) * np.cos(2 * np.pi * prep.carrier * t)
        phi, dev = _kernels.propagate(2 * np.pi * prep.energies, prep.drive_eig, phi0, samples, h, backend)
    psi = prep.vectors @ (np.exp(-2j * np.pi * prep.energies * T) * phi)
    if dev > NORM_TOLERANCE:
        raise IntegrationError(f"norm drifted by {dev:.2e} (> {NORM_TOLERANCE}); use a smaller dt")
    return psi, dev, nsteps


def evolve(model: DuffingModel, pulse: PulseSpec, psi0, dt: float | None = None,
           backend: str | None = None) -> np.ndarray:
    """psi(T) under H0 + s(t) D, with s(t) = amplitude * envelope(t) * cos(2 pi f t)."""
    return _evolve(model, pulse, psi0, dt, backend)[0]


def rotating_frame(model: DuffingModel, psi: np.ndarray, t: float) -> np.ndarray:
    """Remove each mode's own free precession exp(-2 pi i w_k n_k t)."""
    occ = model.occupations()
    phase = occ @ model.hamiltonian.frequencies
    return np.exp(2j * np.pi * phase * t) * psi


def leakage(model: DuffingModel, psi: np.ndarray) -> float:
    """Population outside {qubits in 0/1, every other mode in 0}, bare Fock basis."""
    occ = model.occupations()
    qubit = np.array([kind == "qubit" for kind in model.hamiltonian.kinds])
    inside = np.all(np.where(qubit, occ <= 1, occ == 0), axis=1)
    pop = np.abs(psi) ** 2
    return float(min(max(pop[~inside].sum() / pop.sum(), 0.0), 1.0))


def overlap_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    num = abs(np.vdot(a, b)) ** 2
    return float(num / (np.vdot(a, a).real * np.vdot(b, b).real))


def relative_infidelity(
    layout: EffectiveHamiltonian,
    reference: EffectiveHamiltonian,
    pulse: PulseSpec,
    psi0=None,
    d: int = DEFAULT_TRUNCATION,
    frame: str = "rotating",
    dt: float | None = None,
    backend: str | None = None,
    reference_state: np.ndarray | None = None,
) -> FidelityResult:
    """1 - |<psi_ref(T)|psi_layout(T)>|^2 under the same pulse and initial state.

    With ``frame="rotating"`` each final state is expressed in the frame of
    its own layout's mode frequencies, i.e. a static frequency offset that a
    calibrated controller would track is not counted as error. ``frame="lab"``
    compares the raw lab-frame states.
    """
    if layout.size != reference.size or layout.node_ids != reference.node_ids:
        raise ComparabilityError(
            f"layout has modes {layout.node_ids}, reference has {reference.node_ids}"
        )
    if frame not in ("rotating", "lab"):
        raise ParameterError(f"unknown frame {frame!r}")
    lay_model = build_duffing(layout, d)
    if psi0 is None:
        psi0 = bench_initial_state(lay_model, pulse)
    psi_lay, dev, _ = _evolve(lay_model, pulse, psi0, dt, backend)
    if reference_state is None:
        reference_state = final_state(reference, pulse, psi0, d, frame, dt, backend)
    if frame == "rotating":
        psi_lay_cmp = rotating_frame(lay_model, psi_lay, pulse.duration)
    else:
        psi_lay_cmp = psi_lay
    infid = min(max(1.0 - overlap_fidelity(reference_state, psi_lay_cmp), 0.0), 1.0)
    return FidelityResult(infid, leakage(lay_model, psi_lay), float(dev))


def final_state(h, pulse, psi0=None, d=DEFAULT_TRUNCATION, frame="rotating", dt=None, backend=None):
    """Final state of one layout, already in the comparison frame."""
    model = build_duffing(h, d)
    if psi0 is None:
        psi0 = bench_initial_state(model, pulse)
    psi = _evolve(model, pulse, psi0, dt, backend)[0]
    return rotating_frame(model, psi, pulse.duration) if frame == "rotating" else psi


def pulse_library(regime: str, control: int = 0, coupler: int = 1, target: int = 2) -> list[PulseSpec]:
    """Bench set for a Q-C-Q module: one pulse per family at the band midpoint."""
    if regime not in REGIMES:
        raise ParameterError(f"unknown regime {regime!r}")
    lo, hi = REGIME_BANDS[regime]
    duration = 0.5 * (lo + hi)
    rise = BENCH_RISE_FRACTION * duration
    amps = BENCH_AMPLITUDES[regime]
    return [
        PulseSpec("cr_square", regime, duration, amps["cr_square"], control, target, None, 0.0, control),
        PulseSpec("cr_gaussian_flattop", regime, duration, amps["cr_gaussian_flattop"],
                  control, target, None, rise, control),
        PulseSpec("coupler_mod", regime, duration, amps["coupler_mod"], coupler, target, None, rise, control),
    ]


def bench_pulses(regimes=REGIMES, **nodes) -> list[PulseSpec]:
    return [p for r in regimes for p in pulse_library(r, **nodes)]


def pulse_from_dict(data: Mapping) -> PulseSpec:
    try:
        return PulseSpec(
            family=data["family"],
            regime=data["regime"],
            duration=float(data["duration"]),
            amplitude=float(data["amplitude"]),
            drive_node=int(data["drive_node"]),
            target_node=int(data["target_node"]),
            carrier_frequency=None if data.get("carrier_frequency") is None else float(data["carrier_frequency"]),
            rise_time=float(data.get("rise_time", 0.0)),
            control_node=None if data.get("control_node") is None else int(data["control_node"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"pulse spec: malformed field ({exc})") from None


def load_pulse(path: str | Path) -> PulseSpec:
    try:
        return pulse_from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
