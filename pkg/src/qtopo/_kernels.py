"""Time-stepping kernels.

The drift H0 = V diag(E) V^T is removed exactly, leaving

    d phi/dt = -2 pi i s(t) P(t) D P(t)^* phi,   P(t) = diag(exp(2 pi i E t))

which is integrated with classic RK4. ``s`` is sampled on the half-step grid
(length 2*nsteps + 1). Both backends perform the same arithmetic; the numba
one is selected unless ``QTOPO_DISABLE_NUMBA`` is set to a truthy value or
numba is unavailable.
"""

from __future__ import annotations

import os

import numpy as np

TWO_PI = 2.0 * np.pi


def _env_disabled() -> bool:
    return os.environ.get("QTOPO_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def default_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def propagate_numpy(omega, drive, phi0, samples, dt):
    """Reference implementation; returns (phi_T, max |norm - 1|)."""
    phi = np.array(phi0, dtype=np.complex128)
    nsteps = (samples.shape[0] - 1) // 2
    half = 0.5 * dt
    max_dev = 0.0

    def rhs(p, s, x):
        return (-1j * TWO_PI * s) * p * (drive @ (np.conj(p) * x))

    p_start = np.exp(1j * omega * 0.0)
    for step in range(nsteps):
        t = step * dt
        p_mid = np.exp(1j * omega * (t + half))
        p_end = np.exp(1j * omega * (t + dt))
        s0, s1, s2 = samples[2 * step], samples[2 * step + 1], samples[2 * step + 2]
        k1 = rhs(p_start, s0, phi)
        k2 = rhs(p_mid, s1, phi + half * k1)
        k3 = rhs(p_mid, s1, phi + half * k2)
        k4 = rhs(p_end, s2, phi + dt * k3)
        phi = phi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        dev = abs(np.sqrt(np.vdot(phi, phi).real) - 1.0)
        if dev > max_dev:
            max_dev = dev
        p_start = p_end
    return phi, max_dev


if HAVE_NUMBA:

    @njit(cache=True)
    def _rhs(p, drive, s, x, out, v):
        n = x.shape[0]
        c = -1j * TWO_PI * s
        for m in range(n):
            v[m] = np.conj(p[m]) * x[m]
        for m in range(n):
            acc = 0j
            for q in range(n):
                acc += drive[m, q] * v[q]
            out[m] = c * p[m] * acc

    @njit(cache=True)
    def _phases(omega, t, out):
        for m in range(omega.shape[0]):
            out[m] = np.exp(1j * omega[m] * t)

    @njit(cache=True)
    def propagate_numba(omega, drive, phi0, samples, dt):
        n = phi0.shape[0]
        nsteps = (samples.shape[0] - 1) // 2
        half = 0.5 * dt
        phi = phi0.copy()
        k1 = np.empty(n, np.complex128)
        k2 = np.empty(n, np.complex128)
        k3 = np.empty(n, np.complex128)
        k4 = np.empty(n, np.complex128)
        tmp = np.empty(n, np.complex128)
        v = np.empty(n, np.complex128)
        p_start = np.empty(n, np.complex128)
        p_mid = np.empty(n, np.complex128)
        p_end = np.empty(n, np.complex128)
        _phases(omega, 0.0, p_start)
        max_dev = 0.0
        for step in range(nsteps):
            t = step * dt
            _phases(omega, t + half, p_mid)
            _phases(omega, t + dt, p_end)
            s0 = samples[2 * step]
            s1 = samples[2 * step + 1]
            s2 = samples[2 * step + 2]
            _rhs(p_start, drive, s0, phi, k1, v)
            for m in range(n):
                tmp[m] = phi[m] + half * k1[m]
            _rhs(p_mid, drive, s1, tmp, k2, v)
            for m in range(n):
                tmp[m] = phi[m] + half * k2[m]
            _rhs(p_mid, drive, s1, tmp, k3, v)
            for m in range(n):
                tmp[m] = phi[m] + dt * k3[m]
            _rhs(p_end, drive, s2, tmp, k4, v)
            norm2 = 0.0
            for m in range(n):
                phi[m] += (dt / 6.0) * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])
                norm2 += phi[m].real * phi[m].real + phi[m].imag * phi[m].imag
            dev = abs(np.sqrt(norm2) - 1.0)
            if dev > max_dev:
                max_dev = dev
            for m in range(n):
                p_start[m] = p_end[m]
        return phi, max_dev

else:  # pragma: no cover
    propagate_numba = None


def propagate(omega, drive, phi0, samples, dt, backend: str | None = None):
    backend = backend or default_backend()
    omega = np.ascontiguousarray(omega, dtype=np.float64)
    drive = np.ascontiguousarray(drive, dtype=np.float64)
    phi0 = np.ascontiguousarray(phi0, dtype=np.complex128)
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    if backend == "numba":
        if propagate_numba is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return propagate_numba(omega, drive, phi0, samples, float(dt))
    if backend == "numpy":
        return propagate_numpy(omega, drive, phi0, samples, float(dt))
    raise ValueError(f"unknown backend {backend!r}")
