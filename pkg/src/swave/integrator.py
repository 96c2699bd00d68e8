"""Modified implicit exponential Euler scheme on the spectral Galerkin system.

One step reads

    X_{m+1} = E_N(tau) X_m + tau F_N(X_{m+1}) + E_N(tau) B_N dW_m,

where the nonlinearity only touches the velocity. The displacement is
therefore explicit, and the velocity solves v = Y_v + tau P_N f(v) with
Y = E_N(tau)(u_m, v_m + dW_m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from . import _kernels
from .noise import NoisePath, coarsen_array, steps_for
from .nonlinearity import (
    CollocationPlan,
    NonlinearitySpec,
    apply_F_array,
    jacobian_array,
)
from .semigroup import rotation
from .spectral import Field, PairState

__all__ = [
    "SchemeConfig",
    "StepDiagnostics",
    "StepFailure",
    "Stepper",
    "step",
    "solve_implicit",
    "integrate",
]


class StepFailure(RuntimeError):
    """Nonlinear solve did not converge; carries the diagnostics."""

    def __init__(self, message, diagnostics=None, step_index=None):
        super().__init__(message)
        self.diagnostics = diagnostics
        self.step_index = step_index


@dataclass(frozen=True)
class SchemeConfig:
    tau: float
    fp_tol: float = 1e-12
    fp_max_iter: int = 50
    newton_fallback: bool = True
    linear_tol: float = 1e-13
    enforce_stepsize_rule: bool = True

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        if self.fp_tol <= 0 or self.linear_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.fp_max_iter < 1:
            raise ValueError("fp_max_iter must be >= 1")

    def validate_for(self, spec: NonlinearitySpec) -> None:
        """Reject tau > 1/(6 C1) when the rule is enforced and C1 > 0."""
        if self.enforce_stepsize_rule and spec.c1 > 0:
            cap = 1.0 / (6.0 * spec.c1)
            if self.tau > cap * (1 + 1e-12):
                raise ValueError(
                    f"stepsize tau={self.tau!r} exceeds the convergence cap "
                    f"1/(6*max(0, C1)) = {cap!r} for C1={spec.c1!r}"
                )


@dataclass
class StepDiagnostics:
    iterations: int = 0
    residual: float = 0.0
    branch: str = "fixed-point"
    warnings: list = field(default_factory=list)


def _norm(a):
    return math.sqrt(float(np.dot(a, a)))


def _newton(spec, plan, y, tau, cfg, diag):
    """Damped Newton on G(v) = v - y - tau F_N(v), CG for the inner solve.

    I - tau DF_N(v) is symmetric with spectrum >= 1 - tau C1 > 0, so CG applies.
    """
    n = y.size
    v = np.array(y, dtype=np.float64, copy=True)

    def resid(x):
        return x - y - tau * apply_F_array(spec, x, plan)

    g = resid(v)
    gn = _norm(g)
    for it in range(1, cfg.fp_max_iter + 1):
        if not math.isfinite(gn):
            break
        if gn <= cfg.fp_tol * (1.0 + _norm(v)):
            diag.iterations += it - 1
            diag.residual = gn
            return v, True
        vv = v
        op = LinearOperator(
            (n, n), matvec=lambda w: w - tau * jacobian_array(spec, vv, w, plan), dtype=float
        )
        s, info = cg(op, -g, rtol=cfg.linear_tol, atol=0.0, maxiter=max(10 * n, 100))
        if info != 0:
            diag.warnings.append(f"CG returned info={info} at Newton iteration {it}")
        t = 1.0
        while True:
            cand = v + t * s
            gc = resid(cand)
            gcn = _norm(gc)
            if gcn <= (1.0 - 1e-4 * t) * gn or t < 1e-6:
                break
            t *= 0.5
        v, g, gn = cand, gc, gcn
    diag.iterations += cfg.fp_max_iter
    diag.residual = gn
    return v, gn <= cfg.fp_tol * (1.0 + _norm(v))


def _finish_solve(spec, plan, y, tau, cfg, v, iters, inc, status):
    diag = StepDiagnostics(iterations=iters, residual=inc)
    if status == _kernels.CONVERGED:
        return v, diag
    label = {_kernels.STALLED: "stalled", _kernels.MAX_ITER: "hit the iteration cap",
             _kernels.NONFINITE: "produced non-finite values"}[status]
    diag.warnings.append(f"fixed-point iteration {label} after {iters} iterations")
    if not cfg.newton_fallback:
        raise StepFailure(f"fixed-point iteration {label}", diag)
    diag.branch = "newton"
    v, ok = _newton(spec, plan, y, tau, cfg, diag)
    if not ok:
        raise StepFailure("Newton fallback did not converge", diag)
    return v, diag


def _solve_array(y, tau, spec, plan, cfg):
    if spec.poly is not None:
        out = plan.transform.poly_solve(spec.poly, y, tau, cfg.fp_tol, cfg.fp_max_iter)
    else:
        out = _kernels.fixed_point(
            lambda x: apply_F_array(spec, x, plan), y, tau, cfg.fp_tol, cfg.fp_max_iter
        )
    return _finish_solve(spec, plan, y, tau, cfg, *out)


def solve_implicit(y_v: Field, tau: float, spec: NonlinearitySpec, plan: CollocationPlan,
                   cfg: SchemeConfig):
    """Solve v = y_v + tau F_N(v): fixed-point iteration first, Newton if it stalls."""
    if plan.grid != y_v.grid:
        raise ValueError("plan and field grids differ")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau > 0:
        SchemeConfig(tau, cfg.fp_tol, cfg.fp_max_iter, cfg.newton_fallback, cfg.linear_tol,
                     cfg.enforce_stepsize_rule).validate_for(spec)
    v, diag = _solve_array(np.ascontiguousarray(y_v.coeffs), float(tau), spec, plan, cfg)
    return Field(y_v.grid, v), diag


class Stepper:
    """Array-level stepping for a fixed (grid, tau, nonlinearity).

    Precomputes the rotation of E_N(tau); ``advance`` returns fresh arrays.
    """

    def __init__(self, spec: NonlinearitySpec, plan: CollocationPlan, cfg: SchemeConfig):
        cfg.validate_for(spec)
        if spec.poly is not None and not plan.is_exact_for(spec):
            raise ValueError("collocation plan too small for exact projection")
        self.spec, self.plan, self.cfg = spec, plan, cfg
        self.grid = plan.grid
        rot = rotation(plan.grid, cfg.tau)
        self._cos = np.ascontiguousarray(rot.cos)
        self._so = np.ascontiguousarray(rot.sin_over_omega)
        self._os = np.ascontiguousarray(rot.omega_sin)
        self._poly = None if spec.poly is None else np.asarray(spec.poly, dtype=np.float64)

    def predict(self, u, v, dw):
        w = v + dw
        return self._cos * u + self._so * w, self._cos * w - self._os * u

    def advance(self, u, v, dw):
        cfg = self.cfg
        if self._poly is not None:
            yu, yv, v1, iters, inc, status = self.plan.transform.poly_step(
                self._poly, u, v, dw, self._cos, self._so, self._os,
                cfg.tau, cfg.fp_tol, cfg.fp_max_iter,
            )
            v1, diag = _finish_solve(self.spec, self.plan, yv, cfg.tau, cfg,
                                     v1, iters, inc, status)
            return yu, v1, diag
        yu, yv = self.predict(u, v, dw)
        v1, diag = _solve_array(yv, cfg.tau, self.spec, self.plan, cfg)
        return yu, v1, diag

    def run(self, u, v, increments, record_every: int = 0, callback=None):
        """Apply one step per row of ``increments``.

        ``record_every=k`` stores the state after every k-th step (and the
        initial state) and returns them stacked as ``(n_rec, 2, n_modes)``.
        """
        u = np.ascontiguousarray(u, dtype=np.float64)
        v = np.ascontiguousarray(v, dtype=np.float64)
        rec = [np.stack([u, v])] if record_every else None
        for m, dw in enumerate(increments):
            try:
                u, v, diag = self.advance(u, v, np.ascontiguousarray(dw))
            except StepFailure as exc:
                exc.step_index = m
                raise
            if callback is not None:
                callback(m + 1, u, v, diag)
            if record_every and (m + 1) % record_every == 0:
                rec.append(np.stack([u, v]))
        return u, v, (np.stack(rec) if record_every else None)


def step(x_m: PairState, dW: Field, spec: NonlinearitySpec, plan: CollocationPlan,
         cfg: SchemeConfig):
    """One step of the scheme; returns ``(X_{m+1}, StepDiagnostics)``."""
    grid = x_m.grid
    if dW.grid != grid or plan.grid != grid:
        raise ValueError("state, increment and plan must share one grid")
    st = Stepper(spec, plan, cfg)
    u, v, diag = st.advance(
        np.ascontiguousarray(x_m.u.coeffs), np.ascontiguousarray(x_m.v.coeffs),
        np.ascontiguousarray(dW.coeffs),
    )
    return PairState(Field(grid, u), Field(grid, v)), diag


Observer = Callable[[int, float, PairState], None]


def integrate(x0: PairState, path: NoisePath, tau: float, spec: NonlinearitySpec,
              plan: CollocationPlan, cfg: Optional[SchemeConfig] = None,
              observers: Iterable[Observer] = (), noise_scale: float = 1.0) -> PairState:
    """Integrate from t=0 to ``path.t_end`` with stepsize ``tau``.

    Observers are called as ``obs(m, t_m, state)`` after every step and must
    not mutate the state.  A failing step raises :class:`StepFailure` with
    ``step_index`` set.
    """
    grid = x0.grid
    if path.grid != grid or plan.grid != grid:
        raise ValueError("initial state, noise path and plan must share one grid")
    cfg = cfg or SchemeConfig(tau)
    if abs(cfg.tau - tau) > 1e-15 * tau:
        cfg = SchemeConfig(tau, cfg.fp_tol, cfg.fp_max_iter, cfg.newton_fallback,
                           cfg.linear_tol, cfg.enforce_stepsize_rule)
    steps_for(path.t_end, tau)
    incs = coarsen_array(path, tau)
    if noise_scale != 1.0:
        incs = incs * float(noise_scale)
    observers = list(observers)
    cb = None
    if observers:
        def cb(m, u, v, _diag):
            state = PairState(Field(grid, u), Field(grid, v))
            for obs in observers:
                obs(m, m * tau, state)
    u, v, _ = Stepper(spec, plan, cfg).run(x0.u.coeffs, x0.v.coeffs, incs, callback=cb)
    return PairState(Field(grid, u), Field(grid, v))
