"""Command-line front end.

    swave simulate   [--config PATH] [--preset NAME] [--seed INT] [--out DIR]
    swave rate-time  [...] [--samples INT] [--workers INT]
    swave rate-space [...]
    swave check      [...]

Exit codes: 0 success, 1 failed check, 2 invalid configuration,
3 integration failure.  Diagnostics go to stderr; stdout carries summary
lines and output paths only.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .harness import ExperimentPlan, StudyFailure, run_study
from .integrator import SchemeConfig, StepFailure, Stepper
from .noise import build_noise, sample_path, steps_for
from .nonlinearity import check_assumptions, make_named, make_plan
from .spectral import (
    Field,
    PairState,
    build_grid,
    product_norm,
    random_initial_state,
    state_to_json,
    zero_state,
)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_INTEGRATION = 0, 1, 2, 3

_TIME_LADDER = [2.0**-j for j in range(4, 10)]
_SPACE_LADDER = [2**i for i in range(4, 10)]

PRESETS = {
    "paper-d1-time": dict(dim=1, n=100, delta=1.505, ladder=_TIME_LADDER,
                          reference=2.0**-10, samples=1000),
    "paper-d2-time": dict(dim=2, n=30, delta=2.005, ladder=_TIME_LADDER,
                          reference=2.0**-10, samples=1000),
    "desk-d2-time": dict(dim=2, n=16, delta=2.005, ladder=_TIME_LADDER,
                         reference=2.0**-10, samples=100),
    "paper-d1-space": dict(dim=1, tau=2.0**-5, delta=1.505, ladder=_SPACE_LADDER,
                           reference=1024, samples=1000),
    "d1-sim": dict(dim=1, n=100, delta=1.505, tau=2.0**-10),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dim: int = 1
    n: int = 100
    delta: float = 1.505
    t_end: float = 1.0
    nonlinearity: str = "cubic"
    tau: float = 2.0**-10
    seed: int = 0
    samples: int = 100
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    out: str = "out"
    ladder: Optional[list] = None
    reference: Optional[float] = None
    norms: list = field(default_factory=lambda: ["H1", "H"])
    policy: Optional[str] = None
    initial: str = "bernoulli"
    fp_tol: float = 1e-12
    fp_max_iter: int = 50
    newton_fallback: bool = True
    linear_tol: float = 1e-13
    enforce_stepsize_rule: bool = True
    m_quad: Optional[int] = None
    snapshot_stride: int = 64
    noise_scale: float = 1.0
    v_range: list = field(default_factory=lambda: [-10.0, 10.0])
    check_samples: int = 2001

    @classmethod
    def keys(cls):
        return {f.name for f in dataclasses.fields(cls)}

    def validate(self):
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("n must be a positive integer")
        if self.samples < 1 or self.workers < 1:
            raise ConfigError("samples and workers must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.snapshot_stride < 0:
            raise ConfigError("snapshot_stride must be >= 0")
        if self.initial not in ("bernoulli", "smooth", "zero"):
            raise ConfigError("initial must be bernoulli, smooth or zero")
        try:
            make_named(self.nonlinearity)
            steps_for(self.t_end, self.tau)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def load_config(args) -> RunConfig:
    merged = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        merged.update(PRESETS[args.preset])
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - RunConfig.keys()
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(data)
    env_seed = os.environ.get("SWAVE_SEED")
    if env_seed is not None:
        try:
            merged["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"SWAVE_SEED must be an integer, got {env_seed!r}") from None
    for key in ("seed", "samples", "workers", "out"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def _plan(cfg: RunConfig, kind: str) -> ExperimentPlan:
    if kind == "temporal":
        ladder = cfg.ladder if cfg.ladder is not None else _TIME_LADDER
        reference = cfg.reference if cfg.reference is not None else 2.0**-10
        fixed = cfg.n
    else:
        ladder = cfg.ladder if cfg.ladder is not None else _SPACE_LADDER
        reference = int(cfg.reference) if cfg.reference is not None else 1024
        fixed = cfg.tau
    plan = ExperimentPlan(
        kind=kind, dim=cfg.dim, ladder=tuple(ladder), reference=reference, fixed=fixed,
        samples=cfg.samples, seed=cfg.seed, nonlinearity=cfg.nonlinearity, delta=cfg.delta,
        t_end=cfg.t_end, norms=tuple(cfg.norms), policy=cfg.policy, fp_tol=cfg.fp_tol,
        fp_max_iter=cfg.fp_max_iter, newton_fallback=cfg.newton_fallback,
        linear_tol=cfg.linear_tol, enforce_stepsize_rule=cfg.enforce_stepsize_rule,
        m_quad=cfg.m_quad, initial=cfg.initial,
    )
    try:
        plan.validate()
        spec = make_named(cfg.nonlinearity)
        build_noise(build_grid(cfg.dim, 1), cfg.delta)
        for tau in (ladder if kind == "temporal" else [fixed]):
            plan.scheme(tau).validate_for(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return plan


def cmd_simulate(cfg: RunConfig) -> int:
    spec = make_named(cfg.nonlinearity)
    grid = build_grid(cfg.dim, cfg.n)
    try:
        scheme = SchemeConfig(cfg.tau, cfg.fp_tol, cfg.fp_max_iter, cfg.newton_fallback,
                              cfg.linear_tol, cfg.enforce_stepsize_rule)
        scheme.validate_for(spec)
        noise = build_noise(grid, cfg.delta)
        plan = make_plan(grid, spec, cfg.m_quad)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.initial == "zero":
        x0 = zero_state(grid)
    else:
        x0 = random_initial_state(grid, cfg.seed, power=2.0 if cfg.initial == "smooth" else 1.0)
    path = sample_path(noise, cfg.t_end, cfg.tau, cfg.seed)
    incs = path.increments * cfg.noise_scale if cfg.noise_scale != 1.0 else path.increments

    out = Path(cfg.out)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    rows = []

    def record(m, state):
        rows.append(f"{m},{m * cfg.tau:.17g},{product_norm(state, 1.0):.17g},"
                    f"{product_norm(state, 0.0):.17g}")
        if cfg.snapshot_stride and m % cfg.snapshot_stride == 0:
            (snap_dir / f"state_{m:06d}.json").write_text(state_to_json(state) + "\n")

    def callback(m, u, v, _diag):
        record(m, PairState(Field(grid, u), Field(grid, v)))

    record(0, x0)
    try:
        Stepper(spec, plan, scheme).run(x0.u.coeffs, x0.v.coeffs, incs, callback=callback)
    except StepFailure as exc:
        print(f"error: integration failed at step {exc.step_index}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    norms_path = out / "norms.csv"
    norms_path.write_text("step,t,norm_H1,norm_H\n" + "\n".join(rows) + "\n")
    print(norms_path)
    print(snap_dir)
    return EXIT_OK


def _cmd_rate(cfg: RunConfig, kind: str) -> int:
    plan = _plan(cfg, kind)
    try:
        report = run_study(plan, workers=cfg.workers)
    except (StudyFailure, StepFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = "rate_time" if kind == "temporal" else "rate_space"
    (out / f"{stem}.json").write_text(report.to_json() + "\n")
    (out / f"{stem}.csv").write_text(report.to_csv())
    for note in report.warnings:
        print(f"warning: {note}", file=sys.stderr)
    for norm in plan.norms:
        fit = report.fits[plan.policy][norm]
        if fit is None:
            print(f"{norm}: no slope (fewer than 3 nonzero errors)")
        else:
            print(f"{norm}: slope {fit['slope']:.4f} vs {report.abscissa_name} "
                  f"(r^2 {fit['r_squared']:.4f})")
    print(out / f"{stem}.json")
    print(out / f"{stem}.csv")
    return EXIT_OK


def cmd_rate_time(cfg: RunConfig) -> int:
    return _cmd_rate(cfg, "temporal")


def cmd_rate_space(cfg: RunConfig) -> int:
    return _cmd_rate(cfg, "spatial")


def cmd_check(cfg: RunConfig) -> int:
    spec = make_named(cfg.nonlinearity)
    rep = check_assumptions(spec, tuple(cfg.v_range), cfg.check_samples)
    ok = rep.ok
    print(f"nonlinearity {spec.name} on [{rep.interval[0]:g}, {rep.interval[1]:g}], "
          f"{rep.samples} samples, gamma={rep.gamma:g}")
    print(f"{'constant':<10}{'declared':>14}{'tightest':>14}  result")
    for key, declared, tight, passed in rep.rows():
        print(f"{key:<10}{declared:>14.6g}{tight:>14.6g}  {'pass' if passed else 'FAIL'}")
    threshold = 1.0 + cfg.dim / 2.0
    try:
        noise = build_noise(build_grid(cfg.dim, cfg.n), cfg.delta)
        noise2 = build_noise(build_grid(cfg.dim, 2 * cfg.n), cfg.delta)
        print(f"noise delta={cfg.delta:g} > 1 + d/2 = {threshold:g}: pass "
              f"(HS partial sums {noise.hs_partial:.6g} at N={cfg.n}, "
              f"{noise2.hs_partial:.6g} at N={2 * cfg.n})")
    except ValueError as exc:
        ok = False
        print(f"noise delta={cfg.delta:g} > 1 + d/2 = {threshold:g}: FAIL")
        print(f"error: {exc}", file=sys.stderr)
    print("all checks passed" if ok else "some checks failed")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


COMMANDS = {
    "simulate": cmd_simulate,
    "rate-time": cmd_rate_time,
    "rate-space": cmd_rate_space,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--preset", help=f"built-in configuration: {', '.join(sorted(PRESETS))}")
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
