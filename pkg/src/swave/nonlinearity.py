"""Nemytskij damping operator F(v)(x) = f(v(x)) and its Galerkin projection.

F_N(v) = P_N F(v) is evaluated pseudospectrally: synthesize v on interior
sine-collocation nodes, apply f pointwise, analyze back and truncate.  For
polynomial f of degree p the product contains frequencies up to p*N only,
so a collocation size M >= p*N makes the projection exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import _kernels
from .spectral import Field, SpectralGrid

__all__ = [
    "NonlinearitySpec",
    "CollocationPlan",
    "AssumptionReport",
    "make_cubic",
    "make_polynomial",
    "make_function",
    "make_named",
    "NAMED_NONLINEARITIES",
    "make_plan",
    "default_collocation_size",
    "sine_synthesis",
    "sine_analysis",
    "dense_sine_matrix",
    "apply_F",
    "apply_F_jacobian",
    "check_assumptions",
]


@dataclass(frozen=True)
class NonlinearitySpec:
    """Scalar damping function with its growth constants.

    ``poly`` holds ascending polynomial coefficients when f is a polynomial;
    the compiled kernels only accelerate that case.
    """

    f: Callable
    f_prime: Callable
    f_double_prime: Callable
    gamma: float
    c0: float
    c1: float
    c2: float
    c3: float
    degree: Optional[int] = None
    poly: Optional[tuple] = None
    name: str = "custom"

    def __post_init__(self):
        if self.gamma < 2:
            raise ValueError(f"growth exponent gamma must be >= 2, got {self.gamma}")
        if self.poly is not None and self.degree is None:
            object.__setattr__(self, "degree", len(self.poly) - 1)

    @property
    def dpoly(self):
        if self.poly is None:
            return None
        d = npoly.polyder(np.asarray(self.poly, dtype=float))
        return tuple(d) if d.size else (0.0,)


def _trim(coeffs):
    c = list(map(float, coeffs))
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return tuple(c)


def make_polynomial(coeffs, gamma=2.0, c0=0.0, c1=0.0, c2=0.0, c3=0.0, name="polynomial"):
    """Polynomial f with ascending coefficients ``coeffs``."""
    p = _trim(coeffs)
    arr = np.asarray(p)
    d1 = npoly.polyder(arr) if arr.size > 1 else np.zeros(1)
    d2 = npoly.polyder(d1) if d1.size > 1 else np.zeros(1)
    return NonlinearitySpec(
        f=lambda v: npoly.polyval(v, arr),
        f_prime=lambda v: npoly.polyval(v, d1),
        f_double_prime=lambda v: npoly.polyval(v, d2),
        gamma=gamma,
        c0=c0,
        c1=c1,
        c2=c2,
        c3=c3,
        degree=len(p) - 1,
        poly=p,
        name=name,
    )


def make_cubic() -> NonlinearitySpec:
    """f(v) = v - v^3 (gamma=3, C0=1, C1=1, C2=3, C3=6)."""
    return make_polynomial((0.0, 1.0, 0.0, -1.0), gamma=3.0, c0=1.0, c1=1.0, c2=3.0, c3=6.0,
                           name="cubic")


def make_function(f, f_prime, f_double_prime, gamma, c0, c1, c2, c3, name="custom"):
    """Non-polynomial f; its projection is evaluated inexactly by collocation."""
    return NonlinearitySpec(f, f_prime, f_double_prime, gamma, c0, c1, c2, c3, name=name)


def _exp_spec():
    # deliberately violates the one-sided bound: f' = e^v is unbounded above
    return make_function(np.exp, np.exp, np.exp, gamma=2.0, c0=1.0, c1=1.0, c2=1.0, c3=1.0,
                         name="exp")


NAMED_NONLINEARITIES = {
    "cubic": make_cubic,
    "linear": lambda: make_polynomial((0.0, 1.0), gamma=2.0, c0=1.0, c1=1.0, c2=1.0, c3=1.0,
                                      name="linear"),
    "zero": lambda: make_polynomial((0.0,), gamma=2.0, c0=1.0, c1=0.0, c2=1.0, c3=1.0,
                                    name="zero"),
    "square": lambda: make_polynomial((0.0, 0.0, 1.0), gamma=2.0, c0=1.0, c1=1.0, c2=2.0,
                                      c3=2.0, name="square"),
    "exp": _exp_spec,
}


def make_named(name: str) -> NonlinearitySpec:
    try:
        return NAMED_NONLINEARITIES[name]()
    except KeyError:
        raise ValueError(
            f"unknown nonlinearity {name!r}; choose from {sorted(NAMED_NONLINEARITIES)}"
        ) from None


def default_collocation_size(n_per_axis: int, degree: Optional[int]) -> int:
    """Smallest M = 2^k - 1 with M >= degree*N (or >= 4N for non-polynomial f).

    DST-I of length M runs as an FFT of length 2(M+1), so M + 1 is kept a
    power of two.
    """
    need = max(n_per_axis, degree * n_per_axis if degree is not None else 4 * n_per_axis, 1)
    m = 1
    while m - 1 < need:
        m *= 2
    return m - 1


@dataclass(eq=False)
class CollocationPlan:
    """Collocation nodes and transform workspace for one grid.

    Holds mutable buffers: use one plan per thread.
    """

    grid: SpectralGrid
    m_quad: int
    exact_degree: Optional[int]
    backend: str
    transform: object = field(repr=False)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(1, self.m_quad + 1) / (self.m_quad + 1.0)

    def is_exact_for(self, spec: NonlinearitySpec) -> bool:
        return spec.degree is not None and self.m_quad >= spec.degree * self.grid.n_per_axis


def make_plan(grid: SpectralGrid, spec: Optional[NonlinearitySpec] = None,
              m_quad: Optional[int] = None, backend: Optional[str] = None) -> CollocationPlan:
    degree = spec.degree if spec is not None else None
    if m_quad is None:
        m_quad = default_collocation_size(grid.n_per_axis, degree)
    m_quad = int(m_quad)
    if m_quad < grid.n_per_axis:
        raise ValueError(f"m_quad={m_quad} below n_per_axis={grid.n_per_axis}")
    if degree is not None and m_quad < degree * grid.n_per_axis:
        raise ValueError(
            f"m_quad={m_quad} too small for exact projection of a degree-{degree} "
            f"nonlinearity on N={grid.n_per_axis} (need >= {degree * grid.n_per_axis})"
        )
    name = backend or _kernels.BACKEND
    tr = _kernels.transform_class(name)(grid.dim, grid.n_per_axis, m_quad)
    return CollocationPlan(grid, m_quad, degree, name, tr)


def _check_plan(plan: CollocationPlan, grid: SpectralGrid):
    if plan.grid != grid:
        raise ValueError(f"plan built for {plan.grid!r}, field lives on {grid!r}")


def sine_synthesis(f: Field, plan: CollocationPlan) -> np.ndarray:
    """Point values sum_m c_m e_m(x_i) at the collocation nodes (flattened)."""
    _check_plan(plan, f.grid)
    return plan.transform.synthesize(f.coeffs)


def sine_analysis(values, plan: CollocationPlan, target: Optional[SpectralGrid] = None) -> Field:
    """Discrete-orthogonality inverse of :func:`sine_synthesis`, truncated to ``target``."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size != plan.m_quad**plan.grid.dim:
        raise ValueError(f"expected {plan.m_quad ** plan.grid.dim} values, got {values.size}")
    coeffs = Field(plan.grid, plan.transform.analyze(values))
    if target is not None and target != plan.grid:
        from .spectral import project

        coeffs = project(coeffs, target)
    return coeffs


def dense_sine_matrix(n: int, m: int) -> np.ndarray:
    """(m, n) matrix S[i, j] = sqrt(2) sin((j+1)(i+1) pi / (m+1)); the O(M N) oracle."""
    i = np.arange(1, m + 1)[:, None]
    j = np.arange(1, n + 1)[None, :]
    return math.sqrt(2.0) * np.sin(np.pi * i * j / (m + 1.0))


def apply_F(spec: NonlinearitySpec, v: Field, plan: CollocationPlan) -> Field:
    """P_N f(v); exact for polynomial f when the plan is large enough.

    For non-polynomial f the result is a collocation approximation and
    ``plan.is_exact_for(spec)`` is False.
    """
    _check_plan(plan, v.grid)
    if spec.poly is not None:
        if not plan.is_exact_for(spec):
            raise ValueError(
                f"plan with m_quad={plan.m_quad} cannot project a degree-{spec.degree} "
                "nonlinearity exactly"
            )
        return Field(v.grid, plan.transform.poly_apply(spec.poly, v.coeffs))
    vals = plan.transform.synthesize(v.coeffs)
    return Field(v.grid, plan.transform.analyze(spec.f(vals)))


def apply_F_jacobian(spec: NonlinearitySpec, v: Field, w: Field, plan: CollocationPlan) -> Field:
    """P_N (f'(v) w), the derivative of F_N at v in direction w."""
    _check_plan(plan, v.grid)
    _check_plan(plan, w.grid)
    return Field(v.grid, jacobian_array(spec, v.coeffs, w.coeffs, plan))


def apply_F_array(spec: NonlinearitySpec, v: np.ndarray, plan: CollocationPlan) -> np.ndarray:
    if spec.poly is not None:
        return plan.transform.poly_apply(spec.poly, v)
    return plan.transform.analyze(spec.f(plan.transform.synthesize(v)))


def jacobian_array(spec, v, w, plan):
    tr = plan.transform
    if spec.poly is not None:
        return tr.poly_jvp(spec.dpoly, v, w)
    return tr.analyze(spec.f_prime(tr.synthesize(v)) * tr.synthesize(w))


@dataclass
class AssumptionReport:
    """Tightest constants found on the sample versus the declared ones."""

    interval: tuple
    samples: int
    gamma: float
    declared: dict
    tightest: dict
    passed: dict

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def rows(self):
        for key in ("c0", "c1", "c2", "c3"):
            yield key, self.declared[key], self.tightest[key], self.passed[key]


def check_assumptions(spec: NonlinearitySpec, v_range=(-10.0, 10.0), samples: int = 2001,
                      rtol: float = 1e-12) -> AssumptionReport:
    """Check the four growth/monotonicity inequalities on an equispaced sample.

    Inequalities checked: v f(v) <= C0 (1 + v^2), f'(v) <= C1,
    |f'(v)| <= C2 (1 + |v|^(gamma-1)), |f''(v)| <= C3 (1 + |v|^(gamma-2)).
    """
    lo, hi = map(float, v_range)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"need a finite interval lo < hi, got {v_range!r}")
    if samples < 2:
        raise ValueError("need at least 2 samples")
    v = np.linspace(lo, hi, int(samples))
    av = np.abs(v)
    g = spec.gamma
    with np.errstate(over="ignore", invalid="ignore"):
        fv = np.asarray(spec.f(v), dtype=float)
        d1 = np.asarray(spec.f_prime(v), dtype=float)
        d2 = np.asarray(spec.f_double_prime(v), dtype=float)
        tight = {
            "c0": float(np.max(v * fv / (1.0 + v * v))),
            "c1": float(np.max(d1)),
            "c2": float(np.max(np.abs(d1) / (1.0 + av ** (g - 1.0)))),
            "c3": float(np.max(np.abs(d2) / (1.0 + av ** (g - 2.0)))),
        }
    declared = {"c0": spec.c0, "c1": spec.c1, "c2": spec.c2, "c3": spec.c3}
    passed = {}
    for k, t in tight.items():
        passed[k] = bool(math.isfinite(t) and t <= declared[k] + rtol * max(1.0, abs(declared[k])))
    return AssumptionReport((lo, hi), int(samples), g, declared, tight, passed)
