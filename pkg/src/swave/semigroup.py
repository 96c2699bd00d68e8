"""Exact wave group E(t) = exp(tA) acting mode by mode.

Each mode with frequency w = sqrt(lambda) undergoes

    u' =  cos(wt) u + sin(wt) v / w
    v' = -w sin(wt) u + cos(wt) v

which is a rotation in the (sqrt(lambda) u, v) plane, so every product
norm is preserved exactly.  Negative ``t`` gives the inverse.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Field, PairState, SpectralGrid

__all__ = [
    "apply_semigroup",
    "apply_cosine",
    "apply_sine",
    "Rotation",
    "rotation",
]


@dataclass(frozen=True)
class Rotation:
    """Per-mode coefficients of E(t) for a fixed grid and time."""

    cos: np.ndarray
    sin_over_omega: np.ndarray
    omega_sin: np.ndarray

    def apply(self, u: np.ndarray, v: np.ndarray):
        return (
            self.cos * u + self.sin_over_omega * v,
            self.cos * v - self.omega_sin * u,
        )


def rotation(grid: SpectralGrid, t: float) -> Rotation:
    omega = np.sqrt(grid.eigenvalues)
    ang = float(t) * omega
    s = np.sin(ang)
    return Rotation(np.cos(ang), s / omega, omega * s)


def apply_semigroup(x: PairState, t: float) -> PairState:
    rot = rotation(x.grid, t)
    u, v = rot.apply(x.u.coeffs, x.v.coeffs)
    return PairState(Field(x.grid, u), Field(x.grid, v))


def apply_cosine(f: Field, t: float) -> Field:
    return Field(f.grid, np.cos(float(t) * np.sqrt(f.grid.eigenvalues)) * f.coeffs)


def apply_sine(f: Field, t: float) -> Field:
    return Field(f.grid, np.sin(float(t) * np.sqrt(f.grid.eigenvalues)) * f.coeffs)
