"""Configuration-driven front end.

Subcommands: validate (check every structural hypothesis and print the
certificate), periodic (solve for the time-periodic field and write
reports), stability (solve, perturb, march the initial-value problem, fit
decay rates), sweep (cross product over forcing amplitudes with one output
directory per cell and an aggregate rate table).

Exit codes: 0 success, 2 configuration error, 3 hypothesis failure,
4 non-convergence, 5 I/O failure. Config files are YAML (JSON parses as a
subset); unknown keys anywhere are rejected.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import boundary as bd
from . import diagnostics as dg
from . import ivp_solver as ivp
from . import periodic_solver as ps
from . import systems
from .errors import (
    BoundaryMapError,
    DomainError,
    DominanceError,
    HyperbolicityError,
    IoError,
    NonContractionError,
    PeriodicityError,
    SignatureError,
    SourceOriginError,
)
from .system_model import gtilde_matrix, minimal_K, validate_hyperbolicity

logger = logging.getLogger("periodic_hyp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_NO_CONVERGENCE = 4
EXIT_IO = 5

_HYPOTHESIS_ERRORS = (HyperbolicityError, SignatureError, SourceOriginError,
                      DominanceError, PeriodicityError, BoundaryMapError,
                      DomainError)


class ConfigError(Exception):
    pass


_SYSTEM_PARAMS = {
    "linear_damped_scalar": {"lam", "c", "L", "domain_radius"},
    "linear_reflect_2x2": {"speed", "L", "domain_radius"},
    "quasilinear_euler_damping": {"gamma", "a", "base_c", "L", "domain_radius"},
}
_SYSTEM_GAINS = {
    "linear_damped_scalar": set(),
    "linear_reflect_2x2": {"k"},
    "quasilinear_euler_damping": {"k_left", "k_right"},
}
_SECTION_KEYS = {
    "system": {"name", "params"},
    "boundary": {"T_star", "gains", "forcing"},
    "grid": {"Nt", "Nx"},
    "solver": {"K", "tol", "max_iter"},
    "experiment": {"mode", "eps", "perturbation", "t_end", "record_every"},
}
_MODES = {"validate", "periodic", "stability", "sweep"}


@dataclass
class RunConfig:
    """Validated configuration of one run."""

    system_name: str
    system_params: dict
    T_star: float
    gains: dict
    forcing: list
    Nt: int
    Nx: int
    K: Optional[float]
    tol: float
    max_iter: int
    mode: str
    eps: list
    perturbation: float
    t_end: Optional[float]
    record_every: Optional[float]


def _check_keys(section: str, data: dict, allowed: set) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")


def _as_float(value, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{name}' must be a number, got {value!r}")


def load_config(path) -> RunConfig:
    """Parse and validate a YAML/JSON config file."""
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config does not parse: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys("top level", data, set(_SECTION_KEYS))
    for name in ("system", "boundary", "grid", "experiment"):
        if name not in data:
            raise ConfigError(f"missing required section '{name}'")

    for name, allowed in _SECTION_KEYS.items():
        section = data.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"section '{name}' must be a mapping")
        _check_keys(name, section, allowed)

    sysname = data["system"].get("name")
    if sysname not in _SYSTEM_PARAMS:
        raise ConfigError(
            f"unknown system {sysname!r}; builtins: {sorted(_SYSTEM_PARAMS)}")
    params = data["system"].get("params", {}) or {}
    _check_keys("system.params", params, _SYSTEM_PARAMS[sysname])
    params = {k: _as_float(v, f"system.params.{k}") for k, v in params.items()}

    boundary = data["boundary"]
    T_star = _as_float(boundary.get("T_star"), "boundary.T_star")
    gains = boundary.get("gains", {}) or {}
    _check_keys("boundary.gains", gains, _SYSTEM_GAINS[sysname])
    gains = {k: _as_float(v, f"boundary.gains.{k}") for k, v in gains.items()}
    forcing = boundary.get("forcing", [])
    if not isinstance(forcing, list):
        raise ConfigError("boundary.forcing must be a list (one entry per family)")
    for comp in forcing:
        if not isinstance(comp, list):
            raise ConfigError("each forcing entry must be a list of harmonics")
        for harm in comp:
            if not isinstance(harm, dict):
                raise ConfigError("each harmonic must be a mapping")
            _check_keys("forcing harmonic", harm, {"amplitude", "harmonic", "phase"})
            if "amplitude" not in harm:
                raise ConfigError("each harmonic needs an amplitude")
            if _as_float(harm["amplitude"], "amplitude") < 0:
                raise ConfigError("amplitudes must be nonnegative")

    grid = data["grid"]
    try:
        Nt, Nx = int(grid.get("Nt")), int(grid.get("Nx"))
    except (TypeError, ValueError):
        raise ConfigError("grid.Nt and grid.Nx must be integers")

    solver = data.get("solver", {}) or {}
    K = solver.get("K")
    K = None if K is None else _as_float(K, "solver.K")
    if K is not None and K < 0:
        raise ConfigError("solver.K must be nonnegative")
    tol = _as_float(solver.get("tol", 1e-10), "solver.tol")
    max_iter = int(solver.get("max_iter", 200))

    exp = data["experiment"]
    mode = exp.get("mode")
    if mode not in _MODES:
        raise ConfigError(f"experiment.mode must be one of {sorted(_MODES)}")
    eps = exp.get("eps", [0.01])
    if isinstance(eps, (int, float)):
        eps = [eps]
    eps = [_as_float(e, "experiment.eps") for e in eps]
    if not eps or any(e < 0 for e in eps):
        raise ConfigError("experiment.eps must be nonnegative")
    perturbation = _as_float(exp.get("perturbation", 0.0), "experiment.perturbation")
    if perturbation < 0:
        raise ConfigError("experiment.perturbation must be nonnegative")
    t_end = exp.get("t_end")
    t_end = None if t_end is None else _as_float(t_end, "experiment.t_end")
    record_every = exp.get("record_every")
    record_every = None if record_every is None else _as_float(
        record_every, "experiment.record_every")

    return RunConfig(
        system_name=sysname, system_params=params,
        T_star=T_star, gains=gains, forcing=forcing,
        Nt=Nt, Nx=Nx, K=K, tol=tol, max_iter=max_iter,
        mode=mode, eps=eps, perturbation=perturbation,
        t_end=t_end, record_every=record_every,
    )


def build_system(cfg: RunConfig):
    builders = {
        "linear_damped_scalar": systems.linear_damped_scalar,
        "linear_reflect_2x2": systems.linear_reflect_2x2,
        "quasilinear_euler_damping": systems.quasilinear_euler_damping,
    }
    return builders[cfg.system_name](**cfg.system_params)


def build_boundary(cfg: RunConfig, n: int, eps: float) -> bd.BoundarySpec:
    forcing = list(cfg.forcing) + [[]] * (n - len(cfg.forcing))
    if len(forcing) != n:
        raise ConfigError(f"forcing has {len(cfg.forcing)} entries; system has {n}")
    hs = [systems.harmonic_signal(comp, cfg.T_star, scale=eps) if comp
          else systems.zero_signal for comp in forcing]
    if cfg.system_name == "linear_damped_scalar":
        return systems.scalar_inflow_boundary(hs[0], cfg.T_star)
    if cfg.system_name == "linear_reflect_2x2":
        return systems.reflection_boundary(cfg.gains.get("k", 0.0),
                                           hs[0], hs[1], cfg.T_star)
    return systems.two_gain_boundary(cfg.gains.get("k_left", 0.0),
                                     cfg.gains.get("k_right", 0.0),
                                     hs[0], hs[1], cfg.T_star)


@dataclass
class ValidationOutcome:
    ok: bool
    lines: list
    theta: float = float("nan")
    K: float = float("nan")
    M3: float = float("nan")


def _validate_all(cfg: RunConfig, eps: float) -> ValidationOutcome:
    """Run every hypothesis gate, collecting a printable summary."""
    lines = []
    ok = True
    spec = build_system(cfg)
    bspec = build_boundary(cfg, spec.n, eps)
    lines.append(f"system: {cfg.system_name} (n={spec.n}, m={spec.m})")

    try:
        rep = validate_hyperbolicity(spec)
        lines.append(f"signature: {rep.signature} constant over {rep.samples} samples")
        lines.append(f"mu_max: {rep.mu_max:.6g} "
                     f"(time rescaling needed: {'yes' if rep.needs_time_rescaling else 'no'})")
        lines.append(f"A(0) diagonal: {'yes' if rep.a0_diagonal else 'no'} "
                     f"(off-diagonal max {rep.a0_offdiag_max:.2e})")
        lines.append(f"F(0) residual: {rep.f0_norm:.2e}")
        if not rep.ok:
            ok = False
    except _HYPOTHESIS_ERRORS as exc:
        lines.append(f"structural hypotheses FAILED: {exc}")
        return ValidationOutcome(ok=False, lines=lines)

    g0 = spec.gradF_at(np.zeros(spec.n))
    K_min = minimal_K(g0)
    K = cfg.K if cfg.K is not None else K_min + 1e-6
    lines.append(f"K_min: {K_min:.6g}, K: {K:.6g}")
    try:
        gt = gtilde_matrix(spec, K)
        profile = dg.weights(gt, spec.L, spec.n, spec.m)
        lines.append(f"M3: {profile.M3:.6g}")
    except DominanceError as exc:
        lines.append(f"source dominance FAILED: {exc}")
        return ValidationOutcome(ok=False, lines=lines)

    try:
        theta_data = bd.characterizing_data(bspec)
        theta = theta_data.theta
        lines.append(f"theta: {theta:.6g}")
        if theta >= 1.0:
            lines.append("boundary dissipativity FAILED: theta >= 1")
            ok = False
    except _HYPOTHESIS_ERRORS as exc:
        lines.append(f"boundary linearization FAILED: {exc}")
        return ValidationOutcome(ok=False, lines=lines)

    try:
        forcing_rep = bd.validate_forcing(bspec)
        lines.append(f"forcing C1 norm: {forcing_rep.h_c1_max:.6g}, "
                     f"periodicity residual: {forcing_rep.periodicity_residual:.2e}")
        if forcing_rep.rescaled:
            lines.append(f"forcing gain {forcing_rep.max_gain:.3g} > 1/2: "
                         f"signals rescaled by {2 * forcing_rep.max_gain:.3g} in the report")
    except PeriodicityError as exc:
        lines.append(f"forcing periodicity FAILED: {exc}")
        return ValidationOutcome(ok=False, lines=lines)

    cert = dg.smallness_certificate(theta, K, spec.L, profile.M3)
    state = "PASS" if cert.ok else "FAIL"
    lines.append(f"certificate: theta + K L M3 = {theta + K * spec.L * profile.M3:.6g} "
                 f"< 1: {state} (margin {cert.margin:.6g})")
    if not cert.ok:
        ok = False
    lines.append(f"hypotheses: {'PASS' if ok else 'FAIL'}")
    return ValidationOutcome(ok=ok, lines=lines, theta=theta, K=K, M3=profile.M3)


def _write_field(fld, path: Path) -> None:
    try:
        np.savez(path, values=fld.values, T_star=fld.T_star, L=fld.L,
                 t_nodes=fld.t_nodes, x_nodes=fld.x_nodes)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}")


def _make_out_dir(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}")


def _solve_and_emit(cfg: RunConfig, eps: float, out: Path):
    spec = build_system(cfg)
    bspec = build_boundary(cfg, spec.n, eps)
    iter_cfg = ps.IterationConfig(Nt=cfg.Nt, Nx=cfg.Nx, K=cfg.K,
                                  tol=cfg.tol, max_iter=cfg.max_iter)
    fld, report = ps.solve_periodic(spec, bspec, iter_cfg)
    _make_out_dir(out)
    _write_field(fld, out / "field.npz")
    dg.emit_report(report, "csv", out / "iteration_report.csv")
    return spec, bspec, fld, report


def _cmd_validate(cfg: RunConfig) -> int:
    outcome = _validate_all(cfg, cfg.eps[0])
    for line in outcome.lines:
        print(line)
    return EXIT_OK if outcome.ok else EXIT_HYPOTHESIS


def _cmd_periodic(cfg: RunConfig, out: Path) -> int:
    outcome = _validate_all(cfg, cfg.eps[0])
    for line in outcome.lines:
        print(line)
    if not outcome.ok:
        return EXIT_HYPOTHESIS
    spec, bspec, fld, report = _solve_and_emit(cfg, cfg.eps[0], out)
    if not report.converged:
        print(f"not converged after {report.iterations} sweeps")
        return EXIT_NO_CONVERGENCE
    nrm = dg.norms(fld)
    print(f"converged in {report.iterations} sweeps "
          f"(fitted ratio {report.fitted_beta}); |u| = {nrm.c0:.6g}")
    print(f"wrote {out / 'field.npz'} and iteration reports")
    return EXIT_OK


def _stability_cell(cfg: RunConfig, eps: float, out: Path, seed: int) -> dict:
    """One solve + perturb + march + fit cycle; returns the aggregate row."""
    spec, bspec, fld, report = _solve_and_emit(cfg, eps, out)
    if not report.converged:
        raise NonContractionError("periodic solve did not converge")
    from .system_model import measured_mu_max
    T0 = spec.L * measured_mu_max(spec)
    record_every = cfg.record_every if cfg.record_every else T0 / 4.0
    t_end = cfg.t_end if cfg.t_end else 12.0 * T0
    n_samples = max(1, int(round(t_end / record_every)))
    t_end = n_samples * record_every

    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2 * np.pi, spec.n)
    u0 = ps.extract_initial_data(fld)
    bump = ivp.bump_profile(fld.x_nodes, spec.L)
    u0 = u0 + cfg.perturbation * bump[:, None] * np.cos(phases)[None, :]

    traj = ivp.run(u0, spec, bspec, t_end=t_end, record_every=record_every)
    srep = ivp.stability_metrics(traj, fld, spec)
    dg.emit_report(srep, "csv", out / "stability_report.csv")
    nrm = dg.norms(fld)
    return {
        "eps": eps,
        "fitted_beta": report.fitted_beta,
        "fitted_decay": srep.fitted_decay,
        "fitted_derivative_decay": srep.fitted_derivative_decay,
        "c0": nrm.c0,
        "completed": traj.completed,
    }


def _cmd_stability(cfg: RunConfig, out: Path, seed: int) -> int:
    outcome = _validate_all(cfg, cfg.eps[0])
    for line in outcome.lines:
        print(line)
    if not outcome.ok:
        return EXIT_HYPOTHESIS
    row = _stability_cell(cfg, cfg.eps[0], out, seed)
    print(f"stability: fitted per-transit decay {row['fitted_decay']}, "
          f"derivative decay {row['fitted_derivative_decay']}")
    if not row["completed"]:
        print("warning: run stopped before t_end (left the neighborhood)")
    return EXIT_OK


def _sweep_worker(args):
    cfg_dict, eps, out_str, seed = args
    cfg = RunConfig(**cfg_dict)
    try:
        row = _stability_cell(cfg, eps, Path(out_str), seed)
        return eps, row, EXIT_OK
    except NonContractionError:
        return eps, None, EXIT_NO_CONVERGENCE
    except _HYPOTHESIS_ERRORS:
        return eps, None, EXIT_HYPOTHESIS
    except IoError:
        return eps, None, EXIT_IO


def _cmd_sweep(cfg: RunConfig, out: Path, seed: int, jobs: int) -> int:
    outcome = _validate_all(cfg, min(cfg.eps))
    for line in outcome.lines:
        print(line)
    if not outcome.ok:
        return EXIT_HYPOTHESIS
    _make_out_dir(out)
    tasks = []
    for eps in cfg.eps:
        cell = out / f"eps_{eps:g}"
        tasks.append((cfg.__dict__.copy(), eps, str(cell), seed))
    if jobs > 1 and len(tasks) > 1:
        with get_context("spawn").Pool(min(jobs, len(tasks))) as pool:
            results = pool.map(_sweep_worker, tasks)
    else:
        results = [_sweep_worker(t) for t in tasks]

    rows = []
    status = EXIT_OK
    for eps, row, code in sorted(results, key=lambda r: r[0]):
        if row is None:
            status = code
            print(f"eps={eps:g}: FAILED (exit {code})")
        else:
            rows.append(row)
            print(f"eps={eps:g}: beta={row['fitted_beta']}, decay={row['fitted_decay']}")
    header = "eps,fitted_beta,fitted_decay,fitted_derivative_decay,c0"
    lines = [header]
    for row in rows:
        lines.append(",".join(
            "" if row[k] is None else f"{row[k]:.17g}"
            for k in header.split(",")))
    try:
        (out / "rates.csv").write_text("\n".join(lines) + "\n")
    except OSError as exc:
        print(f"cannot write aggregate: {exc}")
        return EXIT_IO
    return status


def run(argv) -> int:
    """Entry point returning the process exit code."""
    level = os.environ.get("PERIODIC_HYP_LOG", "error").lower()
    logging.basicConfig()
    logger.setLevel({"error": logging.ERROR, "info": logging.INFO,
                     "debug": logging.DEBUG}.get(level, logging.ERROR))

    parser = argparse.ArgumentParser(
        prog="periodic-hyp",
        description="time-periodic solutions of 1D hyperbolic balance laws "
                    "driven by periodic dissipative boundary conditions")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "periodic", "stability", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default="periodic_hyp_out")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        p.add_argument("--seed", type=int, default=0)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "validate":
            return _cmd_validate(cfg)
        if args.command == "periodic":
            return _cmd_periodic(cfg, Path(args.out))
        if args.command == "stability":
            return _cmd_stability(cfg, Path(args.out), args.seed)
        return _cmd_sweep(cfg, Path(args.out), args.seed, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonContractionError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except _HYPOTHESIS_ERRORS as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except IoError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
