"""Critical noise levels of symmetric models: D(sigma), sigma_c, sigma*(theta), phase diagrams."""
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from src.config import Config
from src.core.errors import MVSDEError
from src.core.models import CriticalCurve, CriticalResult, ModelSpec, PhaseDiagram, RootReport
from src.core.parallel import parallel_map
from src.model import farthest_root
from src.quadrature import DensityContext, build_context
from src.selfconsistency import dFdm, find_roots

logger = logging.getLogger(__name__)

# D(floor) below this (but positive) is reported as approaching zero from above.
_BOUNDARY_EPS = 1e-6
# Final brackets lie on the lattice 2**(k/_LATTICE), so sigma_c is the same
# for every starting bracket.
_LATTICE = 8


def _lattice_point(k: int) -> float:
    return 2.0 ** (k / _LATTICE)


def _lattice_bracket(d: Callable[[float], float], lo: float, hi: float) -> Tuple[float, float, int]:
    """The lattice cell holding the sign change of d that [lo, hi] brackets."""
    i = math.floor(_LATTICE * math.log2(lo))
    j = math.ceil(_LATTICE * math.log2(hi))
    if not (d(_lattice_point(i)) > 0.0 >= d(_lattice_point(j))):
        logger.warning("No lattice cell brackets the sign change in [%.6g, %.6g]; solving there", lo, hi)
        return lo, hi, 2
    evaluations = 2
    while j - i > 1:
        k = (i + j) // 2
        if d(_lattice_point(k)) > 0.0:
            i = k
        else:
            j = k
        evaluations += 1
    return _lattice_point(i), _lattice_point(j), evaluations


def D(model: ModelSpec, sigma: float) -> float:
    """dF/dm at m = 0; its sign decides whether m = 0 is the only root."""
    return dFdm(model, sigma, 0.0)


def _moments(ctx: DensityContext, model: ModelSpec):
    w = ctx.weights
    u = -model.v_prime(ctx.nodes)
    a = ctx.a
    mean = lambda f: float(w @ f)
    cov = lambda f, g: float(w @ ((f - mean(f)) * (g - mean(g))))
    return a, u, mean, cov


def dD_dsigma(model: ModelSpec, sigma: float, m: float = 0.0) -> float:
    """d/dsigma of (2/sigma^2) Cov(a, -V'), differentiating the density in closed form."""
    ctx = build_context(model, sigma, m)
    a, u, mean, cov = _moments(ctx, model)
    beta = 2.0 / sigma ** 2
    vbar = ctx.vbar
    dcov = -(cov(a * u, vbar) - cov(a, vbar) * mean(u) - mean(a) * cov(u, vbar))
    return (cov(a, u) + beta * dcov) * (-4.0 / sigma ** 3)


def dD_dtheta(model: ModelSpec, sigma: float, m: float = 0.0) -> float:
    """d/dtheta of (2/sigma^2) Cov(a, -V'); theta enters only through V̄."""
    ctx = build_context(model, sigma, m)
    a, u, mean, cov = _moments(ctx, model)
    beta = 2.0 / sigma ** 2
    q = ctx.p_int - m * ctx.a  # dV̄/dtheta
    dcov = -beta * (cov(a * u, q) - cov(a, q) * mean(u) - mean(a) * cov(u, q))
    return beta * dcov


def sigma_star_slope(model: ModelSpec, sigma_c: float) -> float:
    """d sigma*/d theta at a critical point, by implicit differentiation of D = 0."""
    return -dD_dtheta(model, sigma_c) / dD_dsigma(model, sigma_c)


def _boundary_note(model: ModelSpec, d_floor: float) -> str:
    if not 0.0 < d_floor < _BOUNDARY_EPS:
        return ""
    ctx = build_context(model, Config.SIGMA_FLOOR, 0.0)
    x_star = farthest_root(model)
    if x_star is not None and 0.0 <= abs(ctx.x_min) < x_star:
        return "limit approached from above"
    return ""


def sigma_c(model: ModelSpec, bracket_hint: Tuple[float, float] = (0.5, 2.0)) -> CriticalResult:
    """The unique sign change of D(sigma), from + to -.

    Returns sigma_c = None when D <= 0 down to the sigma floor, which means
    no transition (sigma* = 0).
    """
    floor = Config.SIGMA_FLOOR
    lo, hi = sorted(float(s) for s in bracket_hint)
    lo = max(lo, floor)
    hi = max(hi, lo)
    evaluations = 0

    d = lambda s: D(model, s)
    d_lo, d_hi = d(lo), d(hi)
    evaluations += 2
    while d_lo <= 0.0 and lo > floor:
        hi, d_hi = lo, d_lo
        lo = max(0.5 * lo, floor)
        d_lo = d(lo)
        evaluations += 1
    d_floor = d_lo if lo == floor else d(floor)
    note = _boundary_note(model, d_floor)

    if d_lo <= 0.0:
        message = f"D <= 0 down to sigma={floor:g} (D={d_lo:.3g}); no transition, sigma* = 0"
        logger.info(message)
        return CriticalResult(None, (lo, hi), evaluations, None, "; ".join(filter(None, [message, note])), d_floor)

    doublings = 0
    while d_hi >= 0.0 and doublings < Config.BRACKET_DOUBLINGS:
        lo, d_lo = hi, d_hi
        hi *= 2.0
        d_hi = d(hi)
        doublings += 1
        evaluations += 1
    if d_hi >= 0.0:
        message = f"D stays positive up to sigma={hi:.6g}; no sign change bracketed"
        logger.warning(message)
        return CriticalResult(None, (lo, hi), evaluations, None, message, d_floor)

    lo, hi, snapped = _lattice_bracket(d, lo, hi)
    evaluations += snapped
    root, info = brentq(d, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, full_output=True)
    h = 1e-4 * root
    slope = (d(root + h) - d(root - h)) / (2.0 * h)
    residual = d(root)
    logger.info("sigma_c=%.10g (D=%.3g, dD/dsigma=%.4g)", root, residual, slope)
    return CriticalResult(root, (lo, hi), evaluations + info.function_calls, slope, note, d_floor)


def _curve_point(model: ModelSpec, theta: float, hint: Tuple[float, float]):
    result = sigma_c(model.with_theta(theta), hint)
    if result.sigma_c is None:
        return 0.0, None
    return result.sigma_c, sigma_star_slope(model.with_theta(theta), result.sigma_c)


def sigma_star_curve(model: ModelSpec, thetas: Sequence[float], threads: int = 1,
                     bracket_hint: Tuple[float, float] = (0.5, 2.0)) -> CriticalCurve:
    """sigma*(theta) over a theta list, with the slope from implicit differentiation.

    Sequential runs warm-start each bracket at the previous sigma_c +/- 50%;
    with threads > 1 every point starts cold from `bracket_hint`. sigma_c solves on
    a fixed lattice cell, so both give the same values bit for bit.
    """
    thetas = [float(t) for t in thetas]
    if any(b <= a for a, b in zip(thetas, thetas[1:])):
        raise ValueError("thetas must be strictly increasing")

    stars: List[float] = []
    slopes: List[Optional[float]] = []
    failures: List[Tuple[float, str]] = []

    def guarded(theta: float, hint: Tuple[float, float]):
        try:
            return _curve_point(model, theta, hint), None
        except MVSDEError as exc:
            logger.warning("sigma* failed at theta=%.6g: %s", theta, exc)
            return (math.nan, None), str(exc)

    if threads > 1:
        results = parallel_map(lambda t: guarded(t, bracket_hint), thetas, threads)
    else:
        results, previous = [], None
        for theta in thetas:
            hint = (0.5 * previous, 1.5 * previous) if previous else bracket_hint
            outcome = guarded(theta, hint)
            results.append(outcome)
            star = outcome[0][0]
            previous = star if star and math.isfinite(star) else previous

    for theta, ((star, slope), error) in zip(thetas, results):
        stars.append(star)
        slopes.append(slope)
        if error:
            failures.append((theta, error))

    finite = [s for s in stars if math.isfinite(s)]
    monotone = all(b - a > -1e-6 for a, b in zip(finite, finite[1:])) and all(
        b - a > 1e-6 for a, b in zip(finite, finite[1:]) if a > 0.0
    )
    return CriticalCurve(tuple(thetas), tuple(stars), monotone, tuple(slopes), tuple(failures))


def _count(model: ModelSpec, sigma: float) -> Optional[int]:
    try:
        return find_roots(model, sigma).count
    except MVSDEError as exc:
        logger.warning("Root count failed at sigma=%.6g: %s", sigma, exc)
        return None


def phase_diagram(model: ModelSpec, sigma_grid: Sequence[float], threads: int = 1) -> PhaseDiagram:
    """Roots of F over a sigma grid and the sigma values where their number changes."""
    sigmas = [float(s) for s in sigma_grid]
    if any(s <= 0.0 for s in sigmas) or any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise ValueError("sigma_grid must be positive and strictly increasing")

    def guarded(sigma: float):
        try:
            return find_roots(model, sigma), None
        except MVSDEError as exc:
            logger.warning("find_roots failed at sigma=%.6g: %s", sigma, exc)
            return None, str(exc)

    results = parallel_map(guarded, sigmas, threads)
    reports: List[Optional[RootReport]] = [r for r, _ in results]
    failures = tuple((s, err) for s, (_, err) in zip(sigmas, results) if err)

    transitions: List[float] = []
    for (s0, r0), (s1, r1) in zip(zip(sigmas, reports), zip(sigmas[1:], reports[1:])):
        if r0 is None or r1 is None or r0.count == r1.count:
            continue
        lo, hi, c_lo = s0, s1, r0.count
        while hi - lo > Config.COUNT_TOL:
            mid = 0.5 * (lo + hi)
            c = _count(model, mid)
            if c is None:
                break
            if c == c_lo:
                lo = mid
            else:
                hi = mid
        transitions.append(0.5 * (lo + hi))
        logger.info("Root count %s -> %s near sigma=%.6g", r0.count, r1.count, transitions[-1])

    return PhaseDiagram(tuple(sigmas), tuple(reports), tuple(transitions), failures)
