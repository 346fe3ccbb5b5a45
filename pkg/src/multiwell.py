"""Multi-well thresholds: sigma_r, the dominating bistable bound and admissible constructions."""
import logging
import math
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from src.config import Config
from src.core.errors import ConstructionFailure, MVSDEError, NoSignChange, NotApplicable
from src.core.models import (
    C2fgReport,
    FunctionSpec,
    ModelSpec,
    UpperEstimate,
    VainillaReport,
    VainillaRow,
)
from src.core.parallel import parallel_map
from src.critical import sigma_c
from src.drifts import BlendedScaleDrift, DominatingDrift
from src.model import farthest_root, find_theta_star, gauss_legendre, primitives, vbar_from
from src.quadrature import build_context
from src.selfconsistency import find_roots, interior_roots, series_coefficients

logger = logging.getLogger(__name__)

_SCAN_POINTS = 24
_CONSTRUCTION_SIGMAS = (0.1, 0.2, 0.5, 1.0, 2.0)


def _require_x_star(model: ModelSpec) -> float:
    x_star = farthest_root(model)
    if x_star is None:
        raise NotApplicable("V' has no positive sign change, so x* is undefined")
    return x_star


def _half_line(model: ModelSpec, sigma: float, x_star: float):
    ctx = build_context(model, sigma, 0.0, breakpoints=interior_roots(model, x_star))
    keep = ctx.nodes >= 0.0
    return ctx, ctx.nodes[keep], ctx.weights[keep], keep


def _h(model: ModelSpec, sigma: float, x_star: float, a_star: float) -> float:
    ctx, x, w, keep = _half_line(model, sigma, x_star)
    scaled = ctx.a[keep] / a_star
    negative_part = np.maximum(model.v_prime(x), 0.0)  # (-V')_-
    return float(w @ ((scaled ** 3 - scaled) * negative_part))


def sigma_r(model: ModelSpec, bracket_hint: Tuple[float, float] = (0.1, 2.0)) -> float:
    """Noise level above which the scaled series coefficients are ordered.

    The sign change (- to +) of int_0^inf (a~^3 - a~)(-V')_- rho(x, 0) dx. When
    the integral is positive down to the sigma floor, which is always the case
    for a bistable drift, 0.0 is returned.
    """
    x_star = _require_x_star(model)
    a_star = float(primitives(model, np.array([x_star])).a[0])
    floor = Config.SIGMA_FLOOR
    h = lambda s: _h(model, s, x_star, a_star)

    lo, hi = sorted(float(s) for s in bracket_hint)
    lo = max(lo, floor)
    hi = max(hi, lo)
    h_lo = h(lo)
    while h_lo > 0.0 and lo > floor:
        hi = lo
        lo = max(0.5 * lo, floor)
        h_lo = h(lo)
    if h_lo > 0.0:
        logger.info("H > 0 down to sigma=%.3g; sigma_r = 0", floor)
        return 0.0

    h_hi, doublings = h(hi), 0
    while h_hi <= 0.0:
        if doublings >= Config.BRACKET_DOUBLINGS:
            raise NoSignChange(f"H stays non-positive up to sigma={hi:.6g} (H={h_hi:.3g})")
        lo, hi = hi, 2.0 * hi
        h_hi = h(hi)
        doublings += 1

    root = brentq(h, lo, hi, xtol=Config.SIGMA_TOL, rtol=4 * np.finfo(float).eps)
    logger.info("sigma_r=%.8g", root)
    return root


def dominating_bistable(model: ModelSpec) -> ModelSpec:
    """Replace V' by the dominating bistable drift V'_D."""
    x_star = _require_x_star(model)
    kinks = tuple(r for r in interior_roots(model, x_star) if r > 0.0)
    drift = DominatingDrift(model.v_prime, x_star, kinks)
    return replace(model, v_prime=drift, description=f"dominating bistable of {model.description or 'model'}")


def _has_positive_root(model: ModelSpec, sigma: float) -> bool:
    report = find_roots(model, sigma)
    dedup = Config.ROOT_DEDUP * (report.scan_window[1] - report.scan_window[0])
    return any(m > dedup for m in report.positive_roots)


def sigma_c_upper_estimate(model: ModelSpec, sigma_grid: Optional[Sequence[float]] = None,
                           threads: int = 1) -> UpperEstimate:
    """max(sigma_c of the dominating drift, sigma_r), and the largest sigma with a positive root."""
    x_star = farthest_root(model)
    sc_dominating: Optional[float] = None
    sr = 0.0
    if x_star is not None:
        sc_dominating = sigma_c(dominating_bistable(model)).sigma_c
        sr = sigma_r(model)
    bound = max(sc_dominating or 0.0, sr)

    floor = Config.SIGMA_FLOOR
    if sigma_grid is None:
        top = max(1.5 * bound + 0.5, 2.0 * floor)
        sigma_grid = np.geomspace(floor, top, _SCAN_POINTS)
    sigmas = [float(s) for s in sigma_grid]
    flags = parallel_map(lambda s: _has_positive_root(model, s), sigmas, threads)

    scan = 0.0
    hits = [i for i, flag in enumerate(flags) if flag]
    if hits:
        i = hits[-1]
        if i == len(sigmas) - 1:
            logger.warning("Positive root persists at the top of the scan grid (sigma=%.6g)", sigmas[i])
            scan = sigmas[i]
        else:
            lo, hi = sigmas[i], sigmas[i + 1]
            while hi - lo > Config.COUNT_TOL:
                mid = 0.5 * (lo + hi)
                if _has_positive_root(model, mid):
                    lo = mid
                else:
                    hi = mid
            scan = 0.5 * (lo + hi)

    logger.info("Upper threshold bound=%.6g (sigma_c^D=%s, sigma_r=%.6g), scan=%.6g",
                bound, sc_dominating, sr, scan)
    return UpperEstimate(bound, scan, sc_dominating, sr)


def _normalised_tilde(values: np.ndarray, at_star: float, name: str) -> np.ndarray:
    if not at_star > 0.0:
        raise NotApplicable(f"{name} at x* is {at_star:.6g}; the normalisation needs it positive")
    return values / at_star


def check_vainilla(model: ModelSpec, sigma_grid: Sequence[float], theta: Optional[float] = None) -> VainillaReport:
    """Sign checks behind the increasing upper threshold, at each sigma of the grid.

    ii5 is the first scaled series coefficient at sigma_r (at the sigma floor
    when sigma_r = 0); ii1 and ii2 are int a~(-V')(1 - V~) rho and the same
    with P~, over [0, inf).
    """
    if theta is not None:
        model = model.with_theta(theta)
    x_star = _require_x_star(model)
    star = primitives(model, np.array([x_star]))
    a_star = float(star.a[0])
    v_star = float(vbar_from(model, star, 0.0)[0])
    p_star = float(star.p[0])

    sr = sigma_r(model)
    ii5 = series_coefficients(model, max(sr, Config.SIGMA_FLOOR), 1).I_scaled[0]

    rows: List[VainillaRow] = []
    for sigma in sigma_grid:
        ctx, x, w, keep = _half_line(model, float(sigma), x_star)
        scaled = ctx.a[keep] / a_star
        u = -model.v_prime(x)
        v_tilde = _normalised_tilde(ctx.vbar[keep], v_star, "V̄(., 0)")
        p_tilde = _normalised_tilde(ctx.p_int[keep], p_star, "int P'/k^2")
        ii1 = float(w @ (scaled * u * (1.0 - v_tilde)))
        ii2 = float(w @ (scaled * u * (1.0 - p_tilde)))
        rows.append(VainillaRow(float(sigma), ii5, ii1, ii2))
        logger.debug("vainilla sigma=%.4g ii1=%.3g ii2=%.3g", sigma, ii1, ii2)

    return VainillaReport(model.theta, sr, tuple(rows))


def _rescaled(v_prime, x_star: float):
    """t -> -V'(x* t) as an evaluator; exact coefficient substitution for FunctionSpec."""
    if isinstance(v_prime, FunctionSpec):
        poly = tuple(-c * x_star ** i for i, c in enumerate(v_prime.poly_coeffs))
        trig = tuple((-a, w * x_star, ph) for a, w, ph in v_prime.trig_terms)
        return FunctionSpec(poly, trig)
    return lambda t: -v_prime(x_star * np.asarray(t, dtype=float))


def _running_integral(integrand, top: float, resolution: int) -> Tuple[np.ndarray, np.ndarray]:
    t = np.linspace(0.0, top, resolution + 1)
    nodes, weights = gauss_legendre(Config.PRIMITIVE_ORDER)
    half = 0.5 * np.diff(t)
    pts = (0.5 * (t[1:] + t[:-1]))[:, None] + half[:, None] * nodes[None, :]
    cells = (integrand(pts) @ weights) * half
    return t[1:], np.cumsum(cells)


def _is_polynomial(f: FunctionSpec, coeffs: Sequence[float]) -> bool:
    diff = np.zeros(max(len(f.poly_coeffs), len(coeffs)))
    diff[: len(f.poly_coeffs)] += f.poly_coeffs
    diff[: len(coeffs)] -= coeffs
    return f.is_polynomial and bool(np.allclose(diff, 0.0, atol=1e-12))


def _first_violation(t: np.ndarray, running: np.ndarray) -> Optional[float]:
    bad = np.nonzero(running <= 0.0)[0]
    return float(t[bad[0]]) if bad.size else None


def check_c2fg(model: ModelSpec, t_resolution: int = 400) -> C2fgReport:
    """Running-integral conditions for the quadratic-interaction, unit-diffusion case.

    Coordinates are rescaled so that x* = 1. Margins are the minima of the
    running integrals over their t-grids; witnesses are the first t where a
    running integral stops being positive.
    """
    if t_resolution < 2:
        raise ValueError("t_resolution must be at least 2")
    if not _is_polynomial(model.p_prime, (0.0, 1.0)):
        raise NotApplicable("these conditions are stated for P' = x")
    if not _is_polynomial(model.k_squared, (1.0,)):
        raise NotApplicable("these conditions are stated for k = 1")
    x_star = _require_x_star(model)
    g = _rescaled(model.v_prime, x_star)

    def first(t):
        y = np.asarray(g(t), dtype=float)
        return t * (1.0 - t) * np.maximum(y, 0.0) - t * np.maximum(-y, 0.0)

    def second(t):
        y = np.asarray(g(t), dtype=float)
        return t * (np.maximum(y, 0.0) - 2.0 * np.maximum(-y, 0.0))

    t1, j1 = _running_integral(first, 1.0, t_resolution)
    t2, j2 = _running_integral(second, math.sqrt(2.0), t_resolution)
    # the open intervals exclude their right end points
    t1, j1, t2, j2 = t1[:-1], j1[:-1], t2[:-1], j2[:-1]
    report = C2fgReport(x_star, float(j1.min()), float(j2.min()),
                        _first_violation(t1, j1), _first_violation(t2, j2))
    logger.info("c2fg x*=%.6g margins %.3g / %.3g (witnesses %s / %s)",
                x_star, report.margin1, report.margin2, report.witness1, report.witness2)
    return report


def _dominations(model: ModelSpec, x1: float, x2: float, x_star: float, sigmas: Sequence[float]):
    """Worst ratios of each scaled lobe to (1 + margin) times the mass it must dominate."""
    need = 1.0 + Config.CONSTRUCTION_MARGIN
    worst1 = worst2 = math.inf
    for sigma in sigmas:
        ctx, x, w, keep = _half_line(model, sigma, x_star)
        t = x / x_star
        u = -model.v_prime(x)
        plus, minus = np.maximum(u, 0.0), np.maximum(-u, 0.0)
        inner, middle = x <= x1, (x >= x1) & (x <= x2)
        outer, beyond = (x >= x2) & (x <= x_star), (x >= x_star) & (t <= math.sqrt(2.0))
        lobe1 = float(w[inner] @ (t * (1.0 - t) * u)[inner])
        lobe2 = float(w[outer] @ (t * plus)[outer])
        dip = float(w[middle] @ (t * minus)[middle])
        tail = float(w[beyond] @ (t * minus)[beyond])
        if dip > 0.0:
            worst1 = min(worst1, lobe1 / (need * dip))
        if tail > 0.0:
            worst2 = min(worst2, lobe2 / (need * 2.0 * tail))
    return worst1, worst2


def construct_multiwell(base: ModelSpec, x1: float, x2: float,
                        sigma_grid: Optional[Sequence[float]] = None) -> ModelSpec:
    """Scale the lobes of a multi-well drift until the admissibility conditions hold.

    -V' is multiplied by alpha1 on [0, x1] and alpha2 on [x2, x*], each doubled
    until the rho-weighted dominations hold with the configured margin on
    `sigma_grid` and check_c2fg passes. The returned model carries
    theta = max(base theta, theta* + 1) of the scaled drift.
    """
    if not base.is_symmetric:
        raise ConstructionFailure("the base model is not symmetric")
    if not isinstance(base.v_prime, FunctionSpec):
        raise ConstructionFailure("the base drift must be a polynomial/trig FunctionSpec")
    x_star = _require_x_star(base)
    if not 0.0 < x1 < x2 < x_star:
        raise ConstructionFailure(f"need 0 < x1 < x2 < x* = {x_star:.6g}, got x1={x1}, x2={x2}")
    for lo, hi in ((0.0, x1), (x2, x_star)):
        inner = np.linspace(lo, hi, 203)[1:-1]
        if np.any(-base.v_prime(inner) <= 0.0):
            raise ConstructionFailure(f"-V' is not positive on ({lo:.6g}, {hi:.6g}); no lobe scaling can help")

    sigmas = tuple(sigma_grid) if sigma_grid is not None else _CONSTRUCTION_SIGMAS
    alpha1 = alpha2 = 1.0
    limit = 2.0 ** Config.CONSTRUCTION_MAX_DOUBLINGS
    while True:
        drift = BlendedScaleDrift(base.v_prime, x1, x2, x_star, alpha1, alpha2, Config.BLEND_WIDTH)
        candidate = replace(base, v_prime=drift,
                            description=f"constructed multi-well (alpha1={alpha1:g}, alpha2={alpha2:g})")
        try:
            # scaling the lobes raises theta*; keep the candidate above it
            theta_star = find_theta_star(candidate, search=(1e-6, 1e9))
            candidate = candidate.with_theta(max(base.theta, theta_star.theta + 1.0))
            ratio1, ratio2 = _dominations(candidate, x1, x2, x_star, sigmas)
            c2fg = check_c2fg(candidate)
        except MVSDEError as exc:
            raise ConstructionFailure(f"candidate with alpha1={alpha1:g}, alpha2={alpha2:g} failed: {exc}") from exc

        grow1 = ratio1 < 1.0 or not c2fg.holds1
        grow2 = ratio2 < 1.0 or not c2fg.holds2
        if not (grow1 or grow2):
            logger.info("Constructed multi-well drift with alpha1=%g alpha2=%g", alpha1, alpha2)
            return candidate
        alpha1 = 2.0 * alpha1 if grow1 else alpha1
        alpha2 = 2.0 * alpha2 if grow2 else alpha2
        logger.debug("Doubling scalings: alpha1=%g alpha2=%g", alpha1, alpha2)
        if alpha1 > limit or alpha2 > limit:
            raise ConstructionFailure(f"no scaling up to 2^{Config.CONSTRUCTION_MAX_DOUBLINGS} meets the margins")
