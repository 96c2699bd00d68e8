"""Dirichlet sine eigenbasis on the unit interval / unit square.

Functions are stored by their coefficients in the orthonormal basis

    e_j(x)      = sqrt(2) sin(j pi x)                      (dim = 1)
    e_(j,k)(x,y) = 2 sin(j pi x) sin(k pi y)               (dim = 2)

with eigenvalues lambda_j = (j pi)^2 and lambda_(j,k) = pi^2 (j^2 + k^2).
For ``dim=2`` the retained modes are the tensor set {1..N}^2, flattened
row-major with ``j`` as the outer index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "SpectralGrid",
    "Field",
    "PairState",
    "build_grid",
    "sobolev_norm",
    "product_norm",
    "lambda_pow_apply",
    "project",
    "embed",
    "random_initial_state",
    "zero_state",
    "state_to_json",
    "state_from_json",
]

_INIT_STREAM = 2


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Mode set and Laplacian eigenvalues for a given dimension and per-axis N."""

    dim: int
    n_per_axis: int
    eigenvalues: np.ndarray
    indices: np.ndarray  # (n_modes, dim) integer multi-indices, 1-based

    @property
    def n_modes(self) -> int:
        return self.n_per_axis**self.dim

    @property
    def shape(self) -> tuple:
        return (self.n_per_axis,) * self.dim

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues.min())

    @property
    def lambda_max(self) -> float:
        """Largest retained eigenvalue; the abscissa used for spatial rates."""
        return float(self.eigenvalues.max())

    def __eq__(self, other):
        if not isinstance(other, SpectralGrid):
            return NotImplemented
        return self.dim == other.dim and self.n_per_axis == other.n_per_axis

    def __hash__(self):
        return hash((self.dim, self.n_per_axis))

    def __repr__(self):
        return f"SpectralGrid(dim={self.dim}, n_per_axis={self.n_per_axis})"

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.n_modes))


@lru_cache(maxsize=64)
def build_grid(dim: int, n_per_axis: int) -> SpectralGrid:
    """Return the (cached, immutable) grid for ``dim`` in {1, 2} and N >= 1."""
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim!r}")
    if int(n_per_axis) != n_per_axis or n_per_axis < 1:
        raise ValueError(f"n_per_axis must be a positive integer, got {n_per_axis!r}")
    n = int(n_per_axis)
    j = np.arange(1, n + 1)
    if dim == 1:
        idx = j[:, None]
        lam = (np.pi * j.astype(float)) ** 2
    else:
        jj, kk = np.meshgrid(j, j, indexing="ij")
        idx = np.stack([jj.ravel(), kk.ravel()], axis=1)
        lam = np.pi**2 * (jj.ravel() ** 2 + kk.ravel() ** 2).astype(float)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    idx.flags.writeable = False
    return SpectralGrid(dim, n, _readonly(lam), idx)


@dataclass(frozen=True, eq=False)
class Field:
    """A function in span{e_m} given by its real coefficient vector."""

    grid: SpectralGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64, copy=True).ravel()
        if c.size != self.grid.n_modes:
            raise ValueError(
                f"coefficient length {c.size} does not match grid with {self.grid.n_modes} modes"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("field coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self.grid, other.grid)
        return Field(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self.grid, other.grid)
        return Field(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def as_array(self) -> np.ndarray:
        """Coefficients reshaped to ``grid.shape``."""
        return self.coeffs.reshape(self.grid.shape)


@dataclass(frozen=True, eq=False)
class PairState:
    """Displacement/velocity pair X = (u, v) on a single grid."""

    u: Field
    v: Field

    def __post_init__(self):
        _same_grid(self.u.grid, self.v.grid)

    @property
    def grid(self) -> SpectralGrid:
        return self.u.grid

    def __sub__(self, other: "PairState") -> "PairState":
        return PairState(self.u - other.u, self.v - other.v)


def _same_grid(a: SpectralGrid, b: SpectralGrid):
    if a != b:
        raise ValueError(f"grid mismatch: {a!r} vs {b!r}")


def sobolev_norm(f: Field, alpha: float) -> float:
    """(sum_m lambda_m^alpha c_m^2)^(1/2)."""
    c = f.coeffs
    if alpha == 0:
        return float(np.sqrt(np.dot(c, c)))
    w = f.grid.eigenvalues ** float(alpha)
    return float(np.sqrt(np.dot(w * c, c)))


def product_norm(x: PairState, beta: float) -> float:
    """Norm of the product space: (|u|_beta^2 + |v|_(beta-1)^2)^(1/2)."""
    _same_grid(x.u.grid, x.v.grid)
    return float(np.hypot(sobolev_norm(x.u, beta), sobolev_norm(x.v, beta - 1.0)))


def lambda_pow_apply(f: Field, s: float) -> Field:
    if s == 0:
        return f
    return Field(f.grid, f.coeffs * f.grid.eigenvalues ** float(s))


def _check_nested(coarse: SpectralGrid, fine: SpectralGrid):
    if coarse.dim != fine.dim:
        raise ValueError(f"dimension mismatch: {coarse.dim} vs {fine.dim}")
    if coarse.n_per_axis > fine.n_per_axis:
        raise ValueError(
            f"coarse grid N={coarse.n_per_axis} exceeds fine grid N={fine.n_per_axis}"
        )


def project_array(coeffs: np.ndarray, fine: SpectralGrid, coarse: SpectralGrid) -> np.ndarray:
    """Array-level truncation; ``coeffs`` may carry leading batch axes."""
    _check_nested(coarse, fine)
    n = coarse.n_per_axis
    lead = coeffs.shape[:-1]
    a = coeffs.reshape(lead + fine.shape)
    if fine.dim == 1:
        out = a[..., :n]
    else:
        out = a[..., :n, :n]
    return np.ascontiguousarray(out).reshape(lead + (coarse.n_modes,))


def embed_array(coeffs: np.ndarray, coarse: SpectralGrid, fine: SpectralGrid) -> np.ndarray:
    _check_nested(coarse, fine)
    n = coarse.n_per_axis
    lead = coeffs.shape[:-1]
    out = np.zeros(lead + fine.shape)
    src = coeffs.reshape(lead + coarse.shape)
    if fine.dim == 1:
        out[..., :n] = src
    else:
        out[..., :n, :n] = src
    return out.reshape(lead + (fine.n_modes,))


def project(f: Field, coarse: SpectralGrid) -> Field:
    """Galerkin projection: keep the coefficients of modes in ``coarse``."""
    return Field(coarse, project_array(f.coeffs, f.grid, coarse))


def embed(f: Field, fine: SpectralGrid) -> Field:
    """Zero-padding right inverse of :func:`project`."""
    return Field(fine, embed_array(f.coeffs, f.grid, fine))


def project_state(x: PairState, coarse: SpectralGrid) -> PairState:
    return PairState(project(x.u, coarse), project(x.v, coarse))


def embed_state(x: PairState, fine: SpectralGrid) -> PairState:
    return PairState(embed(x.u, fine), embed(x.v, fine))


def zero_state(grid: SpectralGrid) -> PairState:
    return PairState(grid.zeros(), grid.zeros())


def random_initial_state(grid: SpectralGrid, seed: int, bits=None, power: float = 1.0) -> PairState:
    """Bernoulli(1/2) coefficients divided by the eigenvalues; zero velocity.

    ``bits`` overrides the random draw (testing hook); it must hold one 0/1
    entry per mode in canonical order.  ``power`` divides by lambda^power
    instead: with the default the displacement lies only in H^(3/2 - eps)
    (d=1), ``power=2`` gives data regular enough for the full spatial rates.
    """
    if bits is None:
        ss = np.random.SeedSequence(int(seed), spawn_key=(_INIT_STREAM,))
        rng = np.random.Generator(np.random.PCG64(ss))
        bits = rng.integers(0, 2, size=grid.n_modes)
    b = np.asarray(bits, dtype=np.float64).ravel()
    if b.size != grid.n_modes:
        raise ValueError("bits length does not match grid")
    return PairState(Field(grid, b / grid.eigenvalues ** float(power)), grid.zeros())


def state_to_dict(x: PairState) -> dict:
    return {
        "dim": x.grid.dim,
        "n_per_axis": x.grid.n_per_axis,
        "u": [float(c) for c in x.u.coeffs],
        "v": [float(c) for c in x.v.coeffs],
    }


def state_to_json(x: PairState) -> str:
    # repr() of a Python float round-trips exactly
    d = state_to_dict(x)
    u = ", ".join(repr(c) for c in d["u"])
    v = ", ".join(repr(c) for c in d["v"])
    return f'{{"dim": {d["dim"]}, "n_per_axis": {d["n_per_axis"]}, "u": [{u}], "v": [{v}]}}'


def state_from_json(text: str) -> PairState:
    d = json.loads(text)
    missing = {"dim", "n_per_axis", "u", "v"} - set(d)
    if missing:
        raise ValueError(f"state JSON missing keys: {sorted(missing)}")
    grid = build_grid(int(d["dim"]), int(d["n_per_axis"]))
    return PairState(Field(grid, d["u"]), Field(grid, d["v"]))
