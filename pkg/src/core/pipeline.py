"""Job orchestration: one command per run, artifacts written atomically."""
import logging
import os
import sys
from dataclasses import asdict
from typing import Any, Callable, Dict, List, NamedTuple, Optional

import numpy as np

from src.audit import audit_assumptions
from src.config import Config
from src.config.job import JobConfig
from src.config.settings import Settings
from src.core.errors import MVSDEError, NotApplicable
from src.critical import phase_diagram, sigma_c, sigma_star_curve
from src.multiwell import (
    check_c2fg,
    check_vainilla,
    construct_multiwell,
    sigma_c_upper_estimate,
    sigma_r,
)
from src.particle import advance, batch_means_estimate, init_ensemble, trace_rows
from src.quadrature import build_context, density
from src.selfconsistency import find_roots, series_coefficients
from src.services.output_service import save_csv, save_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

# Points per root in the exported stationary densities.
_DENSITY_POINTS = 201
_VAINILLA_SIGMAS = (0.25, 0.5, 1.0, 2.0)


class Artifact(NamedTuple):
    """What a command produced: the JSON result and its CSV table."""
    result: Dict[str, Any]
    header: List[str]
    rows: List[List[Any]]


class JobOutcome(NamedTuple):
    exit_code: int
    paths: List[str]
    message: str = ""


def _audit(cfg: JobConfig) -> Artifact:
    report = audit_assumptions(cfg.model, cfg.regime)
    rows = [[c.id, c.label, c.section, c.holds, c.witness, c.notes] for c in report.checks]
    return Artifact(report.to_dict(), ["id", "label", "section", "holds", "witness", "notes"], rows)


def _roots(cfg: JobConfig) -> Artifact:
    report = find_roots(cfg.model, cfg.sigma, cfg.grid_points, cfg.threads)
    densities = []
    for root in report.roots:
        ctx = build_context(cfg.model, cfg.sigma, root.m)
        x = np.linspace(*ctx.truncation, _DENSITY_POINTS)
        densities.append({"m": root.m, "x": x.tolist(), "rho": density(ctx, x).tolist()})
    result = dict(report.to_dict(), densities=densities)
    rows = [[r.m, r.residual, r.slope_sign] for r in report.roots]
    return Artifact(result, ["m", "residual", "slope_sign"], rows)


def _phase_diagram(cfg: JobConfig) -> Artifact:
    diagram = phase_diagram(cfg.model, cfg.sigma_grid, cfg.threads)
    header, rows = diagram.to_rows()
    return Artifact(diagram.to_dict(), header, rows)


def _critical(cfg: JobConfig) -> Artifact:
    result = sigma_c(cfg.model, cfg.bracket)
    row = [result.sigma_c if result.sigma_c is not None else 0.0, result.iterations, result.d_at_root_slope]
    return Artifact(result.to_dict(), ["sigma_c", "iterations", "d_slope"], [row])


def _critical_curve(cfg: JobConfig) -> Artifact:
    curve = sigma_star_curve(cfg.model, cfg.theta_grid, cfg.threads, cfg.bracket)
    return Artifact(curve.to_dict(), ["theta", "sigma_star"], curve.to_rows())


def _sigma_r(cfg: JobConfig) -> Artifact:
    sr = sigma_r(cfg.model)
    series = series_coefficients(cfg.model, max(sr, Config.SIGMA_FLOOR), cfg.n_max)
    result = {"sigma_r": sr, "series": series.to_dict()}
    return Artifact(result, ["sigma_r", "n_c"], [[sr, series.n_c]])


def _multiwell_check(cfg: JobConfig) -> Artifact:
    model = cfg.model
    result: Dict[str, Any] = {}
    if cfg.multiwell is not None:
        model = construct_multiwell(model, cfg.multiwell.x1, cfg.multiwell.x2)
        result["constructed_model"] = model.to_dict()

    estimate = sigma_c_upper_estimate(model, threads=cfg.threads)
    result["upper_estimate"] = asdict(estimate)
    try:
        result["c2fg"] = check_c2fg(model).to_dict()
    except NotApplicable as exc:
        logger.info("c2fg skipped: %s", exc)
        result["c2fg"] = None
    vainilla = check_vainilla(model, cfg.sigma_grid or _VAINILLA_SIGMAS)
    result["vainilla"] = vainilla.to_dict()
    rows = [[row.sigma, row.ii5, row.ii1, row.ii2] for row in vainilla.rows]
    return Artifact(result, ["sigma", "ii5", "ii1", "ii2"], rows)


def _simulate(cfg: JobConfig) -> Artifact:
    sim = cfg.simulation
    ensemble = init_ensemble(sim.n, sim.init, sim.seed, sim.dt, sim.antithetic)
    logger.info("Simulating n=%s sigma=%.6g dt=%g for %s + %s steps",
                sim.n, cfg.sigma, sim.dt, sim.burn_steps, sim.sample_steps)
    ensemble = advance(ensemble, cfg.model, cfg.sigma, sim.burn_steps + sim.sample_steps)
    times, means = zip(*ensemble.mean_trace)
    estimate = batch_means_estimate(means[sim.burn_steps:])
    logger.info("Stationary mean %.6g +/- %.2g", estimate.mean, estimate.stderr)
    result = {"mean": estimate.mean, "stderr": estimate.stderr, "steps": ensemble.steps, "time": ensemble.time}
    return Artifact(result, ["t", "mean", "stderr"], [list(r) for r in trace_rows(times, means)])


COMMAND_HANDLERS: Dict[str, Callable[[JobConfig], Artifact]] = {
    "audit": _audit,
    "roots": _roots,
    "phase-diagram": _phase_diagram,
    "critical": _critical,
    "critical-curve": _critical_curve,
    "sigma-r": _sigma_r,
    "multiwell-check": _multiwell_check,
    "simulate": _simulate,
}


def output_prefix(cfg: JobConfig, settings: Settings) -> str:
    if cfg.output:
        return cfg.output
    stem = os.path.splitext(os.path.basename(cfg.source))[0] if cfg.source else "job"
    return os.path.join(settings.output_dir, f"{stem}_{cfg.command}")


def write_artifacts(cfg: JobConfig, artifact: Artifact, prefix: str) -> List[str]:
    config = cfg.to_dict()
    paths = []
    if cfg.format in ("json", "both"):
        paths.append(save_json(f"{prefix}.json", artifact.result, config))
    if cfg.format in ("csv", "both"):
        paths.append(save_csv(f"{prefix}.csv", artifact.header, artifact.rows, config))
    return paths


def run_job(cfg: JobConfig, settings: Optional[Settings] = None) -> JobOutcome:
    """Run one job. Exit code 0 on success, 1 on config error, 2 on numerical failure."""
    settings = settings or Settings.load()
    try:
        Config.validate()
    except ValueError as exc:
        print(f"✗ Configuration error: {exc}", file=sys.stderr)
        return JobOutcome(EXIT_CONFIG, [], str(exc))
    logger.info("Configuration validated")

    logger.info("Running %s on %s", cfg.command, cfg.model.description or "model")
    try:
        artifact = COMMAND_HANDLERS[cfg.command](cfg)
    except MVSDEError as exc:
        message = f"{type(exc).__name__}: {exc}"
        logger.error("Numerical failure in %s: %s", cfg.command, message)
        print(f"✗ Numerical failure: {message}", file=sys.stderr)
        return JobOutcome(EXIT_NUMERICAL, [], message)
    except ValueError as exc:
        print(f"✗ Configuration error: {exc}", file=sys.stderr)
        return JobOutcome(EXIT_CONFIG, [], str(exc))

    paths = write_artifacts(cfg, artifact, output_prefix(cfg, settings))
    for path in paths:
        logger.info("Wrote %s", path)
    return JobOutcome(EXIT_OK, paths)
