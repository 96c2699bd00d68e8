"""Monte Carlo mean-square convergence studies with coupled noise.

Temporal study: one reference trajectory per sample at ``tau_ref``. Every
ladder stepsize reuses the same Brownian path, with fine increments
summed in groups.  Spatial study: one reference trajectory on ``N_ref``;
coarse grids see the same path restricted to their modes and the
projected initial state.

Errors are aggregated as root-mean-square over samples at each common
time.  The "sup" policy then takes the maximum over times, i.e. sup of
RMS, not RMS of sup.  Samples are reduced in index order, so reports do
not depend on the worker count.
"""
from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing as mp
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import reduce
from typing import Optional

import numpy as np

from .integrator import SchemeConfig, StepFailure, Stepper
from .noise import build_noise, coarsen_array, sample_path, steps_for
from .nonlinearity import make_named, make_plan
from .spectral import (
    PairState,
    build_grid,
    embed_array,
    product_norm,
    project_array,
    random_initial_state,
)

__all__ = [
    "ExperimentPlan",
    "RateReport",
    "StudyFailure",
    "InsufficientDataError",
    "MomentMonitor",
    "fit_rate",
    "sample_seed",
    "temporal_study",
    "spatial_study",
    "run_study",
    "NORM_BETA",
]

NORM_BETA = {"H1": 1.0, "H": 0.0}
_INITIAL_POWER = {"bernoulli": 1.0, "smooth": 2.0, "zero": None}
_SAMPLE_STREAM = 3


class InsufficientDataError(ValueError):
    pass


class StudyFailure(RuntimeError):
    """Integration failure inside a study, with (sample, resolution, step) context."""

    def __init__(self, message, sample=None, resolution=None, step=None):
        super().__init__(message)
        self.sample, self.resolution, self.step = sample, resolution, step

    def __reduce__(self):
        return (type(self), (self.args[0], self.sample, self.resolution, self.step))


def sample_seed(master_seed: int, s: int) -> int:
    """Per-sample seed from a SeedSequence hash of (master_seed, s)."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(_SAMPLE_STREAM, int(s)))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ExperimentPlan:
    kind: str  # "temporal" | "spatial"
    dim: int
    ladder: tuple  # stepsizes (temporal) or per-axis N (spatial)
    reference: float  # tau_ref (temporal) or N_ref (spatial)
    fixed: float  # N (temporal) or tau (spatial)
    samples: int
    seed: int = 0
    nonlinearity: str = "cubic"
    delta: float = 1.505
    t_end: float = 1.0
    norms: tuple = ("H1", "H")
    policy: Optional[str] = None  # default: sup (temporal), terminal (spatial)
    moments: tuple = ((1.0, 2.0),)
    fp_tol: float = 1e-12
    fp_max_iter: int = 50
    newton_fallback: bool = True
    linear_tol: float = 1e-13
    enforce_stepsize_rule: bool = True
    m_quad: Optional[int] = None
    initial: str = "bernoulli"  # "bernoulli" (b/lambda), "smooth" (b/lambda^2) or "zero"

    def __post_init__(self):
        object.__setattr__(self, "ladder", tuple(self.ladder))
        object.__setattr__(self, "norms", tuple(self.norms))
        object.__setattr__(self, "moments", tuple(tuple(map(float, m)) for m in self.moments))
        if self.policy is None:
            object.__setattr__(self, "policy", "sup" if self.kind == "temporal" else "terminal")

    def validate(self) -> None:
        if self.kind not in ("temporal", "spatial"):
            raise ValueError(f"unknown study kind {self.kind!r}")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not self.ladder:
            raise ValueError("ladder must not be empty")
        if self.policy not in ("sup", "terminal"):
            raise ValueError(f"unknown error-time policy {self.policy!r}")
        bad = set(self.norms) - set(NORM_BETA)
        if bad or not self.norms:
            raise ValueError(f"norms must be drawn from {sorted(NORM_BETA)}, got {self.norms!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        make_named(self.nonlinearity)
        if self.initial not in _INITIAL_POWER:
            raise ValueError(f"initial must be one of {sorted(_INITIAL_POWER)}")
        if self.kind == "temporal":
            m_ref = steps_for(self.t_end, self.reference)
            for tau in self.ladder:
                m = steps_for(self.t_end, tau)
                if m > m_ref or m_ref % m:
                    raise ValueError(
                        f"ladder stepsize {tau!r} must be a multiple of tau_ref={self.reference!r}"
                    )
            if int(self.fixed) != self.fixed or self.fixed < 1:
                raise ValueError("temporal study needs a positive integer N")
        else:
            steps_for(self.t_end, self.fixed)
            for n in self.ladder:
                if int(n) != n or n < 1 or n > self.reference:
                    raise ValueError(f"ladder N={n!r} must be an integer in [1, N_ref]")

    def scheme(self, tau: float) -> SchemeConfig:
        return SchemeConfig(float(tau), self.fp_tol, self.fp_max_iter, self.newton_fallback,
                            self.linear_tol, self.enforce_stepsize_rule)


@dataclass
class RateReport:
    study: str
    dim: int
    policy: str
    norms: list
    resolutions: list
    abscissa_name: str
    abscissa: list
    errors: dict  # policy -> norm -> list
    stderr: dict  # policy -> norm -> list
    fits: dict  # policy -> norm -> {slope, intercept, r_squared} | None
    samples: int
    seed: int
    fits_per_axis_n: dict = field(default_factory=dict)
    moments: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    wall_clock: float = 0.0
    backend: str = ""

    def slope(self, norm: str = "H1", policy: Optional[str] = None):
        fit = self.fits[policy or self.policy].get(norm)
        return None if fit is None else fit["slope"]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def csv_rows(self):
        for policy in sorted(self.errors):
            for norm in self.norms:
                errs = self.errors[policy][norm]
                ses = self.stderr[policy][norm]
                for a, e, se in zip(self.abscissa, errs, ses):
                    yield [self.study, self.dim, norm, policy, f"{a:.17g}", f"{e:.17g}",
                           f"{se:.17g}", self.samples, self.seed]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["study", "dim", "norm", "policy", "abscissa", "rms_error", "mc_stderr",
                    "samples", "seed"])
        w.writerows(self.csv_rows())
        return buf.getvalue()


def fit_rate(points):
    """Least-squares line through (log2 abscissa, log2 error).

    Zero errors are dropped with a warning. Returns (slope, intercept, r^2).
    """
    pts = [(float(a), float(e)) for a, e in points]
    usable = [(a, e) for a, e in pts if e > 0]
    if len(usable) < len(pts):
        warnings.warn(f"fit_rate: dropped {len(pts) - len(usable)} zero/negative errors",
                      RuntimeWarning, stacklevel=2)
    if any(a <= 0 for a, _ in usable):
        raise ValueError("abscissae must be positive")
    if len(usable) < 3:
        raise InsufficientDataError(f"need >= 3 positive points, got {len(usable)}")
    x = np.log2([a for a, _ in usable])
    y = np.log2([e for _, e in usable])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


class MomentMonitor:
    """Observer recording ||X(t)||_{H^beta}^p after each step."""

    def __init__(self, beta: float = 1.0, p: float = 2.0):
        self.beta, self.p = float(beta), float(p)
        self.times: list = []
        self.values: list = []

    def __call__(self, m: int, t: float, state: PairState) -> None:
        self.times.append(t)
        self.values.append(product_norm(state, self.beta) ** self.p)

    @staticmethod
    def aggregate(series):
        """Sample mean at every time and its maximum over time.

        ``series`` is a sequence of equally long value lists, one per sample.
        """
        arr = np.asarray(series, dtype=float)
        mean = arr.mean(axis=0)
        return mean, float(mean.max()) if mean.size else 0.0


# ---------------------------------------------------------------------------
# per-sample workers (module level so they pickle into worker processes)

_STEPPERS: dict = {}


def _stepper(plan: ExperimentPlan, n: int, tau: float) -> Stepper:
    key = (plan.dim, int(n), float(tau), plan.nonlinearity, plan.m_quad, plan.fp_tol,
           plan.fp_max_iter, plan.newton_fallback, plan.linear_tol, plan.enforce_stepsize_rule)
    st = _STEPPERS.get(key)
    if st is None:
        spec = make_named(plan.nonlinearity)
        grid = build_grid(plan.dim, int(n))
        st = Stepper(spec, make_plan(grid, spec, plan.m_quad), plan.scheme(tau))
        if len(_STEPPERS) > 64:
            _STEPPERS.clear()
        _STEPPERS[key] = st
    return st


def _sq_norms(diff, lam, betas):
    """Squared product norms for states stacked as (..., 2, n_modes)."""
    du2 = diff[..., 0, :] ** 2
    dv2 = diff[..., 1, :] ** 2
    return np.stack([(du2 * lam**b).sum(-1) + (dv2 * lam ** (b - 1.0)).sum(-1) for b in betas])


def _initial(plan, grid, seed):
    power = _INITIAL_POWER[plan.initial]
    if power is None:
        return np.zeros(grid.n_modes), np.zeros(grid.n_modes)
    x0 = random_initial_state(grid, seed, power=power)
    return x0.u.coeffs, x0.v.coeffs


def _run(st: Stepper, u, v, incs, record_every, sample, resolution):
    try:
        return st.run(u, v, incs, record_every=record_every)
    except StepFailure as exc:
        raise StudyFailure(
            f"integration failed: sample {sample}, resolution {resolution!r}, "
            f"step {exc.step_index}: {exc}",
            sample, resolution, exc.step_index,
        ) from None


def _moment_series(states, lam, moments):
    out = []
    for beta, p in moments:
        sq = _sq_norms(states, lam, (beta,))[0]
        out.append(sq ** (p / 2.0))
    return out


def _temporal_sample(plan: ExperimentPlan, s: int):
    seed = sample_seed(plan.seed, s)
    n = int(plan.fixed)
    grid = build_grid(plan.dim, n)
    lam = grid.eigenvalues
    betas = [NORM_BETA[k] for k in plan.norms]
    path = sample_path(build_noise(grid, plan.delta), plan.t_end, plan.reference, seed)
    u0, v0 = _initial(plan, grid, seed)
    m_ref = path.m_ref
    ratios = [m_ref // steps_for(plan.t_end, tau) for tau in plan.ladder]
    stride = reduce(math.gcd, ratios)
    ref_st = _stepper(plan, n, plan.reference)
    _, _, ref_rec = _run(ref_st, u0, v0, path.increments, stride, s, plan.reference)
    sq = []
    for tau, r in zip(plan.ladder, ratios):
        if r == 1:
            # same stepsize as the reference: identical computation
            states = ref_rec
        else:
            st = _stepper(plan, n, tau)
            _, _, states = _run(st, u0, v0, coarsen_array(path, tau), 1, s, tau)
        sq.append(_sq_norms(states - ref_rec[:: r // stride], lam, betas))
    return sq, _moment_series(ref_rec, lam, plan.moments)


def _spatial_sample(plan: ExperimentPlan, s: int):
    seed = sample_seed(plan.seed, s)
    n_ref = int(plan.reference)
    tau = float(plan.fixed)
    g_ref = build_grid(plan.dim, n_ref)
    lam = g_ref.eigenvalues
    betas = [NORM_BETA[k] for k in plan.norms]
    path = sample_path(build_noise(g_ref, plan.delta), plan.t_end, tau, seed)
    u0, v0 = _initial(plan, g_ref, seed)
    _, _, ref_rec = _run(_stepper(plan, n_ref, tau), u0, v0, path.increments, 1, s, n_ref)
    sq = []
    for n in plan.ladder:
        n = int(n)
        if n == n_ref:
            states = ref_rec
        else:
            g = build_grid(plan.dim, n)
            _, _, rec = _run(
                _stepper(plan, n, tau),
                project_array(u0, g_ref, g), project_array(v0, g_ref, g),
                project_array(path.increments, g_ref, g), 1, s, n,
            )
            states = embed_array(rec, g, g_ref)
        sq.append(_sq_norms(states - ref_rec, lam, betas))
    return sq, _moment_series(ref_rec, lam, plan.moments)


_SAMPLE_FN = {"temporal": _temporal_sample, "spatial": _spatial_sample}


def _sample_task(args):
    plan, s = args
    return _SAMPLE_FN[plan.kind](plan, s)


def _collect(plan: ExperimentPlan, workers: int):
    tasks = [(plan, s) for s in range(plan.samples)]
    if workers <= 1 or plan.samples == 1:
        return [_sample_task(t) for t in tasks]
    try:
        ctx = mp.get_context("fork")
    except ValueError:  # platforms without fork
        ctx = mp.get_context()
    chunk = max(1, plan.samples // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as ex:
        return list(ex.map(_sample_task, tasks, chunksize=chunk))


def _aggregate(plan: ExperimentPlan, results, abscissa, abscissa_name, resolutions,
               per_axis_abscissa=None, started=0.0):
    from . import _kernels

    S = plan.samples
    errors = {"sup": {}, "terminal": {}}
    stderr = {"sup": {}, "terminal": {}}
    for k, norm in enumerate(plan.norms):
        for pol in errors:
            errors[pol][norm] = []
            stderr[pol][norm] = []
        for i in range(len(resolutions)):
            # (S, T_i) squared errors, stacked in sample order
            e2 = np.stack([res[0][i][k] for res in results])
            ms = e2.mean(axis=0)
            sd = e2.std(axis=0, ddof=1) if S > 1 else np.zeros_like(ms)
            for pol, t in (("sup", int(np.argmax(ms))), ("terminal", ms.size - 1)):
                rms = math.sqrt(ms[t])
                se = sd[t] / math.sqrt(S) / (2.0 * rms) if rms > 0 else 0.0
                errors[pol][norm].append(rms)
                stderr[pol][norm].append(float(se))

    notes = []
    fits = {}
    fits_n = {}
    for pol in errors:
        fits[pol] = {}
        fits_n[pol] = {}
        for norm in plan.norms:
            errs = errors[pol][norm]
            ses = stderr[pol][norm]
            fits[pol][norm] = _try_fit(abscissa, errs, notes, f"{pol}/{norm}")
            if per_axis_abscissa is not None:
                fits_n[pol][norm] = _try_fit(per_axis_abscissa, errs, None, "")
            # monotone refinement check; resolutions are ordered coarse -> fine
            order = _coarse_to_fine(plan, resolutions)
            for a, b in zip(order, order[1:]):
                if errs[b] - errs[a] > 2.0 * math.hypot(ses[a], ses[b]):
                    notes.append(
                        f"{pol}/{norm}: error increases from resolution {resolutions[a]!r} "
                        f"to {resolutions[b]!r} beyond 2 Monte Carlo standard errors"
                    )

    moments = []
    for j, (beta, p) in enumerate(plan.moments):
        mean, mx = MomentMonitor.aggregate([res[1][j] for res in results])
        moments.append({"beta": beta, "p": p, "max_mean": mx,
                        "finite": bool(np.all(np.isfinite(mean)))})

    return RateReport(
        study=plan.kind, dim=plan.dim, policy=plan.policy, norms=list(plan.norms),
        resolutions=[float(r) for r in resolutions], abscissa_name=abscissa_name,
        abscissa=[float(a) for a in abscissa], errors=errors, stderr=stderr, fits=fits,
        samples=S, seed=plan.seed,
        fits_per_axis_n=fits_n if per_axis_abscissa is not None else {},
        moments=moments, warnings=notes, wall_clock=time.perf_counter() - started,
        backend=_kernels.BACKEND,
    )


def _coarse_to_fine(plan, resolutions):
    idx = list(range(len(resolutions)))
    if plan.kind == "temporal":
        return sorted(idx, key=lambda i: -resolutions[i])
    return sorted(idx, key=lambda i: resolutions[i])


def _try_fit(abscissa, errs, notes, label):
    usable = sum(1 for e in errs if e > 0)
    if usable < 3:
        if notes is not None:
            notes.append(f"{label}: only {usable} nonzero error(s); no slope fitted")
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        slope, intercept, r2 = fit_rate(zip(abscissa, errs))
    return {"slope": slope, "intercept": intercept, "r_squared": r2}


def temporal_study(plan: ExperimentPlan, workers: int = 1) -> RateReport:
    """Mean-square error of the time discretization against a fine-stepsize reference."""
    if plan.kind != "temporal":
        raise ValueError("temporal_study needs a temporal plan")
    plan.validate()
    started = time.perf_counter()
    results = _collect(plan, workers)
    taus = [float(t) for t in plan.ladder]
    return _aggregate(plan, results, taus, "tau", taus, started=started)


def spatial_study(plan: ExperimentPlan, workers: int = 1) -> RateReport:
    """Mean-square error of the Galerkin truncation against a large-N reference."""
    if plan.kind != "spatial":
        raise ValueError("spatial_study needs a spatial plan")
    plan.validate()
    started = time.perf_counter()
    results = _collect(plan, workers)
    ns = [int(n) for n in plan.ladder]
    lam = [build_grid(plan.dim, n).lambda_max for n in ns]
    return _aggregate(plan, results, lam, "lambda_N", ns, per_axis_abscissa=ns,
                      started=started)


def run_study(plan: ExperimentPlan, workers: int = 1) -> RateReport:
    return (temporal_study if plan.kind == "temporal" else spatial_study)(plan, workers)
