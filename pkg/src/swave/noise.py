"""Trace-class Q-Wiener increments with Q = Lambda^(-delta).

Every mode draws from its own PCG64 substream keyed by ``(seed, mode
multi-index)``. Enlarging the grid therefore leaves the draws of shared
modes unchanged, which couples resolutions in space. Time coupling
comes from summing fine increments.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .spectral import Field, SpectralGrid, build_grid, project_array

__all__ = [
    "NoiseSpec",
    "NoisePath",
    "build_noise",
    "sample_path",
    "coarsen_increments",
    "coarsen_array",
    "restrict_to_grid",
    "steps_for",
    "dump_path",
    "load_path",
]

_NOISE_STREAM = 1
# uint32 dim, uint32 N, uint32 M_ref, float64 delta, uint64 seed
_HEADER = struct.Struct("<IIIdQ")


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    grid: SpectralGrid
    delta: float
    q: np.ndarray
    hs_partial: float

    @property
    def threshold(self) -> float:
        return 1.0 + self.grid.dim / 2.0


def build_noise(grid: SpectralGrid, delta: float) -> NoiseSpec:
    """Covariance eigenvalues q_m = lambda_m^(-delta).

    ``delta`` must exceed 1 + dim/2 so that Lambda^(1/2) Q^(1/2) is
    Hilbert-Schmidt.
    """
    delta = float(delta)
    threshold = 1.0 + grid.dim / 2.0
    if not delta > threshold:
        raise ValueError(
            f"trace condition violated: delta={delta} must exceed 1 + d/2 = {threshold} "
            "so that ||Lambda^(1/2) Q^(1/2)||_HS is finite"
        )
    q = grid.eigenvalues ** (-delta)
    q.flags.writeable = False
    hs = float(np.sum(grid.eigenvalues ** (1.0 - delta)))
    return NoiseSpec(grid, delta, q, hs)


def steps_for(t_end: float, tau: float) -> int:
    """Number of steps M with M * tau == t_end; raises if tau does not divide t_end."""
    if not (tau > 0 and t_end > 0):
        raise ValueError(f"need positive t_end and tau, got {t_end!r}, {tau!r}")
    m = int(round(t_end / tau))
    if m < 1 or abs(m * tau - t_end) > 1e-12 * max(1.0, t_end):
        raise ValueError(f"tau={tau!r} does not divide t_end={t_end!r}")
    return m


@dataclass(frozen=True, eq=False)
class NoisePath:
    spec: NoiseSpec
    t_end: float
    tau_ref: float
    increments: np.ndarray  # (M_ref, n_modes), step-major
    seed: int

    @property
    def m_ref(self) -> int:
        return self.increments.shape[0]

    @property
    def grid(self) -> SpectralGrid:
        return self.spec.grid


def _mode_stream(seed: int, index) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(_NOISE_STREAM, *map(int, index)))
    return np.random.Generator(np.random.PCG64(ss))


def sample_path(spec: NoiseSpec, t_end: float, tau_ref: float, seed: int) -> NoisePath:
    m_ref = steps_for(t_end, tau_ref)
    if int(seed) < 0:
        raise ValueError("seed must be non-negative")
    grid = spec.grid
    xi = np.empty((m_ref, grid.n_modes))
    for col, index in enumerate(grid.indices):
        xi[:, col] = _mode_stream(seed, index).standard_normal(m_ref)
    inc = xi * np.sqrt(spec.q * float(tau_ref))
    inc.flags.writeable = False
    return NoisePath(spec, float(t_end), float(tau_ref), inc, int(seed))


def coarsen_array(path: NoisePath, tau: float) -> np.ndarray:
    """Increments at stepsize ``tau`` as an (M, n_modes) array.

    Each coarse increment is the left-to-right sum of its fine constituents.
    """
    m = steps_for(path.t_end, tau)
    if path.m_ref % m:
        raise ValueError(f"tau={tau!r} is not a multiple of tau_ref={path.tau_ref!r}")
    r = path.m_ref // m
    fine = path.increments
    if r == 1:
        return fine
    acc = fine[0::r].copy()
    for i in range(1, r):
        acc += fine[i::r]
    return acc


def coarsen_increments(path: NoisePath, tau: float) -> list:
    arr = coarsen_array(path, tau)
    return [Field(path.grid, row) for row in arr]


def restrict_to_grid(path: NoisePath, coarse: SpectralGrid) -> NoisePath:
    inc = project_array(path.increments, path.grid, coarse)
    inc.flags.writeable = False
    spec = build_noise(coarse, path.spec.delta)
    return NoisePath(spec, path.t_end, path.tau_ref, inc, path.seed)


def dump_path(path: NoisePath, fh) -> None:
    """Write the path to a binary file object (little-endian float64 payload)."""
    g = path.grid
    fh.write(_HEADER.pack(g.dim, g.n_per_axis, path.m_ref, path.spec.delta, path.seed))
    fh.write(np.ascontiguousarray(path.increments, dtype="<f8").tobytes())


def load_path(fh, t_end: float = 1.0) -> NoisePath:
    """Inverse of :func:`dump_path`; the horizon is not stored in the header."""
    dim, n, m_ref, delta, seed = _HEADER.unpack(fh.read(_HEADER.size))
    grid = build_grid(dim, n)
    spec = build_noise(grid, delta)
    payload = np.frombuffer(fh.read(8 * m_ref * grid.n_modes), dtype="<f8")
    if payload.size != m_ref * grid.n_modes:
        raise ValueError("truncated noise path payload")
    inc = payload.astype(np.float64).reshape(m_ref, grid.n_modes)
    inc.flags.writeable = False
    return NoisePath(spec, float(t_end), float(t_end) / m_ref, inc, int(seed))
