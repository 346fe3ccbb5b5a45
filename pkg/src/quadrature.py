"""Stabilised integrals against the stationary density.

The density at (sigma, m) is rho(x) ~ exp(-(2/sigma^2) V̄(x, m)) / k^2(x). Every
integral is computed on a truncation window around the global minimum of V̄,
with the exponent shifted so the largest factor is 1 and the normaliser kept
in log form.
"""
import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erfc, logsumexp

from src.config import Config
from src.core.errors import NotApplicable, NotNormalizable, QuadratureFailure, WindowTooSmall
from src.core.models import ModelSpec
from src.core.retry import retry
from src.model import (
    confinement_radius,
    farthest_root,
    gauss_legendre,
    is_confining,
    primitives,
    profile,
    refine_minima,
    vbar_from,
)

logger = logging.getLogger(__name__)

Integrand = Union[Callable, float]

POSITIVE = "[0,inf)"
NEGATIVE = "(-inf,0]"
BEYOND = "[x*,inf)"
INNER = "[0,x*]"
SIDES = (POSITIVE, NEGATIVE, BEYOND, INNER)

_WIDEN = 1.2
_MAX_WIDEN = 5
# Rounding floor of a panel estimate, in units of eps times the exponent scale.
_NOISE_ULPS = 256.0
# Panels narrower than this fraction of the window are never split.
_MIN_PANEL = 1e-9


@dataclass(frozen=True, eq=False)
class DensityContext:
    """Quadrature of the normalised stationary density at one (sigma, m).

    `weights` already include the normalised density, so an expectation is a
    dot product with integrand values at `nodes`. `a`, `vbar` and `p_int`
    are a(x), V̄(x, m) and int_0^x P'/k^2 at the nodes.
    """
    model: ModelSpec
    sigma: float
    m: float
    shift: float
    log_norm: float
    truncation: Tuple[float, float]
    nodes: np.ndarray
    weights: np.ndarray
    log_density: np.ndarray
    a: np.ndarray
    vbar: np.ndarray
    p_int: np.ndarray
    x_min: float
    x_star: Optional[float]
    edges: np.ndarray
    tail_bound: float


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _log_integrand(model: ModelSpec, beta: float, m: float, pts: np.ndarray, v_min: float = 0.0):
    """log(exp(-beta (V̄ - v_min)) / k^2) at pts, with the primitives and V̄ there."""
    prim = primitives(model, pts)
    vbar = vbar_from(model, prim, m)
    return -np.log(model.k_squared(pts)) - beta * (vbar - v_min), prim, vbar


def _exponent_scale(model: ModelSpec, beta: float, m: float, prim) -> np.ndarray:
    """beta times the size of the terms summed into V̄; bounds its rounding error."""
    return beta * (np.abs(prim.v) + model.theta * (np.abs(prim.p) + abs(m) * np.abs(prim.a)))


def _locate_window(model: ModelSpec, beta: float, m: float, cutoff: float):
    def scan(radius: float):
        x, prim = profile(model, radius, Config.PROFILE_POINTS)
        vbar = vbar_from(model, prim, m)
        inside = np.nonzero(beta * (vbar - vbar.min()) < cutoff)[0]
        if inside[0] == 0 or inside[-1] == len(x) - 1:
            raise WindowTooSmall(f"density not localised within |x| <= {radius:.6g}")
        return x, vbar, inside

    try:
        return retry(scan, (WindowTooSmall,), max_attempts=24, initial=confinement_radius(model, m))
    except WindowTooSmall as exc:
        raise QuadratureFailure(str(exc)) from exc


def _refine_small_sigma(model, beta, m, v_min, lo, hi, cutoff):
    """Re-locate the window edges on a local grid when the peak is narrow."""
    x = np.linspace(lo, hi, Config.PROFILE_POINTS)
    excess = beta * (vbar_from(model, primitives(model, x), m) - v_min)
    inside = np.nonzero(excess < cutoff)[0]
    first, last = max(inside[0] - 1, 0), min(inside[-1] + 1, len(x) - 1)
    return float(x[first]), float(x[last])


def _mesh(model: ModelSpec, beta: float, m: float, v_min: float, edges: np.ndarray):
    """Split panels until coarse and split Gauss-Legendre estimates agree.

    A panel is accepted once the two estimates differ by less than its share
    of QUAD_RTOL, or by less than the rounding noise of exp(-beta V̄) on it.
    The returned log-integrand is relative to v_min.
    """
    nodes, weights = gauss_legendre(Config.GL_ORDER)
    n = len(nodes)
    eps = np.finfo(float).eps
    width = edges[-1] - edges[0]
    while True:
        if len(edges) - 1 > Config.MAX_PANELS:
            raise QuadratureFailure(f"panel limit {Config.MAX_PANELS} reached at sigma={math.sqrt(2 / beta):.6g}")
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        quarter = 0.5 * half
        coarse = mid[:, None] + half[:, None] * nodes
        fine = np.stack([(mid - quarter)[:, None] + quarter[:, None] * nodes,
                         (mid + quarter)[:, None] + quarter[:, None] * nodes], axis=1)
        pts = np.concatenate([coarse.ravel(), fine.ravel()])
        logf, prim, vbar = _log_integrand(model, beta, m, pts, v_min)
        f = np.exp(logf)
        panels = len(half)
        k = panels * n
        i_coarse = (f[:k].reshape(panels, n) @ weights) * half
        i_fine = (f[k:].reshape(panels, 2, n) @ weights).sum(axis=1) * quarter
        total = float(i_fine.sum())

        scale = _exponent_scale(model, beta, m, prim)
        panel_scale = np.maximum(scale[:k].reshape(panels, n).max(axis=1),
                                 scale[k:].reshape(panels, 2 * n).max(axis=1))
        noise = _NOISE_ULPS * eps * np.maximum(1.0, panel_scale) * np.abs(i_fine)
        tol = np.maximum(Config.QUAD_RTOL * total * (2 * half / width), noise)
        bad = (np.abs(i_coarse - i_fine) > tol) & (2 * half > _MIN_PANEL * width)
        if not bad.any():
            qw = (quarter[:, None, None] * np.broadcast_to(weights, (panels, 2, n))).ravel()
            return pts[k:], qw, logf[k:], prim.a[k:], vbar[k:], prim.p[k:]
        edges = np.sort(np.concatenate([edges, mid[bad]]))


@lru_cache(maxsize=256)
def _build(model: ModelSpec, sigma: float, m: float, window_scale: float,
           breakpoints: Tuple[float, ...]) -> DensityContext:
    if not is_confining(model):
        raise NotNormalizable("effective potential does not grow quadratically (tail growth audit failed)")
    beta = 2.0 / sigma ** 2
    cutoff = Config.LOG_CUTOFF - 2.0 * math.log(model.diffusion.epsilon)

    x, vbar, inside = _locate_window(model, beta, m, cutoff)
    x_min, v_min = refine_minima(model, m, x, vbar)[0]
    shift = beta * v_min
    lo, hi = float(x[inside[0] - 1]), float(x[inside[-1] + 1])
    if sigma < Config.SMALL_SIGMA:
        lo, hi = _refine_small_sigma(model, beta, m, v_min, lo, hi, cutoff)

    outside = (x <= lo) | (x >= hi)
    gap = (x[outside] - x_min) ** 2
    curvature = float(np.min((vbar[outside] - v_min) / gap))
    if not curvature > 0.0:
        raise NotNormalizable(f"no quadratic lower bound on V̄ outside [{lo:.6g}, {hi:.6g}]")
    spread = sigma / (2.0 * math.sqrt(curvature))

    x_star = farthest_root(model)
    marks = [0.0, *model.breakpoints, *breakpoints]
    if x_star is not None:
        marks += [x_star, -x_star]

    scale = window_scale
    for _ in range(_MAX_WIDEN):
        centre, radius = 0.5 * (lo + hi), 0.5 * (hi - lo) * scale
        a, b = centre - radius, centre + radius
        edges = np.unique(np.concatenate([np.linspace(a, b, Config.INITIAL_PANELS + 1),
                                          [p for p in marks if a < p < b]]))
        pts, qw, logf, a_vals, vbar_vals, p_vals = _mesh(model, beta, m, v_min, edges)
        shifted = np.log(qw) + logf
        log_norm = float(logsumexp(shifted))
        tail = (spread * math.sqrt(math.pi / 2) / model.diffusion.epsilon ** 2) * float(
            erfc((x_min - a) / (spread * math.sqrt(2))) + erfc((b - x_min) / (spread * math.sqrt(2)))
        )
        if tail <= Config.TAIL_RTOL * math.exp(log_norm):
            break
        logger.debug("Tail bound %.3g too large at sigma=%.4g m=%.4g; widening window", tail, sigma, m)
        scale *= _WIDEN
    else:
        raise QuadratureFailure(f"tail mass bound {tail:.3g} not certified at sigma={sigma:.6g}, m={m:.6g}")

    weights = np.exp(shifted - log_norm)
    log_density = shifted - shift
    logger.debug("Context sigma=%.6g m=%.6g window=[%.6g, %.6g] nodes=%s", sigma, m, a, b, len(pts))
    return DensityContext(
        model=model, sigma=sigma, m=m, shift=shift, log_norm=log_norm, truncation=(a, b),
        nodes=_frozen(pts), weights=_frozen(weights), log_density=_frozen(log_density),
        a=_frozen(a_vals), vbar=_frozen(vbar_vals), p_int=_frozen(p_vals),
        x_min=x_min, x_star=x_star, edges=_frozen(edges), tail_bound=tail,
    )


def build_context(model: ModelSpec, sigma: float, m: float, window_scale: float = 1.0,
                  breakpoints: Sequence[float] = ()) -> DensityContext:
    """Locate, truncate and normalise the stationary density at (sigma, m)."""
    if not sigma > 0.0:
        raise ValueError("sigma must be positive")
    return _build(model, float(sigma), float(m), float(window_scale), tuple(sorted(set(breakpoints))))


def rebase(ctx: DensityContext, shift: float) -> DensityContext:
    """Same context with a different exponent shift; expectations are unchanged."""
    log_norm = float(logsumexp(ctx.log_density + shift))
    weights = np.exp(ctx.log_density + shift - log_norm)
    return replace(ctx, shift=shift, log_norm=log_norm, weights=_frozen(weights))


def _values(ctx: DensityContext, g: Integrand, nodes: np.ndarray) -> np.ndarray:
    if callable(g):
        return np.broadcast_to(np.asarray(g(nodes), dtype=float), nodes.shape)
    return np.full(nodes.shape, float(g))


def expectation(ctx: DensityContext, g: Integrand) -> float:
    """Integral of g against the normalised density."""
    value = float(ctx.weights @ _values(ctx, g, ctx.nodes))
    if not math.isfinite(value):
        raise QuadratureFailure(f"non-finite expectation at sigma={ctx.sigma:.6g}, m={ctx.m:.6g}")
    return value


def side_mask(ctx: DensityContext, side: str) -> np.ndarray:
    x = ctx.nodes
    if side == POSITIVE:
        return x >= 0.0
    if side == NEGATIVE:
        return x <= 0.0
    if side not in SIDES:
        raise ValueError(f"unknown side {side!r}; expected one of {', '.join(SIDES)}")
    if ctx.x_star is None:
        raise NotApplicable("V' has no positive sign change, so x* is undefined")
    if side == BEYOND:
        return x >= ctx.x_star
    return (x >= 0.0) & (x <= ctx.x_star)


def half_line_expectation(ctx: DensityContext, g: Integrand, side: str) -> float:
    """Integral of g against the normalised density over one of SIDES."""
    mask = side_mask(ctx, side)
    nodes = ctx.nodes[mask]
    value = float(ctx.weights[mask] @ _values(ctx, g, nodes))
    if not math.isfinite(value):
        raise QuadratureFailure(f"non-finite half-line expectation on {side}")
    return value


def density(ctx: DensityContext, x) -> np.ndarray:
    """Normalised stationary density at arbitrary points."""
    x = np.asarray(x, dtype=float)
    beta = 2.0 / ctx.sigma ** 2
    logf, _, _ = _log_integrand(ctx.model, beta, ctx.m, x, ctx.shift / beta)
    return np.exp(logf - ctx.log_norm)
