"""MV-SDE model operations: evaluation, effective potential, mode map, zeros, theta*."""
import logging
import math
from functools import lru_cache
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from src.config import Config
from src.core.errors import BracketFailure, NotApplicable, QuadratureFailure
from src.core.models import FunctionSpec, ModelSpec, ModeEstimate, ThetaStar, Zero

logger = logging.getLogger(__name__)


class Primitives(NamedTuple):
    """Integrals from 0 of 1/k^2, V'/k^2 and P'/k^2."""
    a: np.ndarray
    v: np.ndarray
    p: np.ndarray


class Minimum(NamedTuple):
    x: float
    value: float


def evaluate(f, x: float) -> float:
    return float(f(x))


def eval_derivative(f, x: float) -> float:
    return float(f.derivative()(x))


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _quad(func: Callable[[float], float], x: float, points: Sequence[float] = ()) -> float:
    lo, hi = (0.0, x) if x >= 0 else (x, 0.0)
    inner = [p for p in points if lo < p < hi]
    value, abserr, *rest = quad(
        func, lo, hi, points=inner or None, epsabs=1e-13, epsrel=1e-12, limit=500, full_output=1
    )
    if len(rest) > 1 and abserr > 1e-10 * (1.0 + abs(value)):
        raise QuadratureFailure(f"adaptive quadrature on [0, {x:.6g}] stopped at error {abserr:.3g}: {rest[1]}")
    return value if x >= 0 else -value


def a_of_x(model: ModelSpec, x: float) -> float:
    """a(x) = integral of 1/k^2 from 0 to x."""
    if x == 0.0:
        return 0.0
    k2 = model.k_squared
    return _quad(lambda s: 1.0 / k2(s), x)


def effective_potential(model: ModelSpec, x: float, m: float) -> float:
    """V̄(x, m), anchored so that V̄(0, m) = 0."""
    if x == 0.0:
        return 0.0
    v, p, k2, theta = model.v_prime, model.p_prime, model.k_squared, model.theta
    return _quad(lambda s: (v(s) + theta * (p(s) - m)) / k2(s), x, model.breakpoints)


def _exact_primitives(model: ModelSpec) -> bool:
    return model.diffusion.is_constant and isinstance(model.v_prime, FunctionSpec)


def primitives(model: ModelSpec, xs) -> Primitives:
    """Vectorised a(x), int V'/k^2 and int P'/k^2 at arbitrary points."""
    xs = np.asarray(xs, dtype=float)
    if _exact_primitives(model):
        k0 = model.k_squared.poly_coeffs[0]
        return Primitives(xs / k0, model.v_prime.antiderivative(xs) / k0, model.p_prime.antiderivative(xs) / k0)

    flat = xs.ravel()
    if flat.size == 0:
        return Primitives(xs.copy(), xs.copy(), xs.copy())
    lo, hi = min(float(flat.min()), 0.0), max(float(flat.max()), 0.0)
    fill = np.linspace(lo, hi, int(math.ceil((hi - lo) / Config.PRIMITIVE_STEP)) + 1)
    kinks = [b for b in model.breakpoints if lo < b < hi]
    knots = np.unique(np.concatenate([flat, fill, [0.0], kinks]))

    nodes, weights = gauss_legendre(Config.PRIMITIVE_ORDER)
    half = 0.5 * np.diff(knots)
    pts = (0.5 * (knots[1:] + knots[:-1]))[:, None] + half[:, None] * nodes[None, :]
    inv_k2 = 1.0 / model.k_squared(pts)
    zero = int(np.searchsorted(knots, 0.0))
    idx = np.searchsorted(knots, flat)

    out = []
    for values in (inv_k2, model.v_prime(pts) * inv_k2, model.p_prime(pts) * inv_k2):
        seg = (values @ weights) * half
        # accumulate outward from 0 on both sides
        cum = np.zeros(len(knots))
        cum[zero + 1:] = np.cumsum(seg[zero:])
        cum[:zero] = -np.cumsum(seg[:zero][::-1])[::-1]
        out.append(cum[idx].reshape(xs.shape))
    return Primitives(*out)


def vbar_from(model: ModelSpec, prim: Primitives, m: float) -> np.ndarray:
    return prim.v + model.theta * (prim.p - m * prim.a)


# --- tails and growth -----------------------------------------------------


def _trimmed(coeffs: Sequence[float]) -> np.ndarray:
    c = np.array(coeffs, dtype=float)
    nz = np.nonzero(np.abs(c) > 1e-12)[0]
    return c[: nz[-1] + 1] if nz.size else np.zeros(1)


def _add(f: FunctionSpec, g: FunctionSpec, scale: float = 1.0) -> FunctionSpec:
    """f + scale*g as a FunctionSpec."""
    return FunctionSpec(
        tuple(P.polyadd(f.poly_coeffs, scale * np.asarray(g.poly_coeffs))),
        f.trig_terms + tuple((scale * a, w, ph) for a, w, ph in g.trig_terms),
    )


def tail_growth(model: ModelSpec) -> Tuple[int, float]:
    """(d, c) with V̄'(x, 0) ~ c x^d as |x| grows; trig parts are bounded and ignored."""
    num = _trimmed(P.polyadd(model.v_prime.tail.poly_coeffs, model.theta * np.asarray(model.p_prime.poly_coeffs)))
    den = _trimmed(model.k_squared.poly_coeffs)
    return len(num) - len(den), float(num[-1] / den[-1])


def is_confining(model: ModelSpec) -> bool:
    """V̄(x, 0) grows at least quadratically, so the density is normalisable."""
    d, c = tail_growth(model)
    k2 = model.k_squared
    bounded_below = _trimmed(k2.poly_coeffs)[-1] > 0 and (k2.degree > 0 or k2.poly_coeffs[0] > k2.trig_bound)
    return d >= 1 and d % 2 == 1 and c > 0 and bounded_below


def root_bound(f: FunctionSpec, slack: float = 0.0) -> float:
    """Fujiwara bound: |f| exceeds its trig amplitude (+ slack) beyond it."""
    c = _trimmed(f.poly_coeffs)
    n = len(c) - 1
    if n == 0:
        return 0.0
    lower = np.abs(c[:-1]).copy()
    lower[0] = 0.5 * (lower[0] + f.trig_bound + slack)
    k = np.arange(n, 0, -1)  # c[i] pairs with power 1/(n - i)
    return 2.0 * float(np.max((lower / abs(c[-1])) ** (1.0 / k)))


def confinement_radius(model: ModelSpec, m: float = 0.0) -> float:
    """Radius, a power-of-two multiple of the search radius, beyond which V̄'(., m) keeps its sign."""
    tail = _add(model.v_prime.tail, _add(model.p_prime, FunctionSpec((-m,))), model.theta)
    needed = 1.05 * root_bound(tail)
    x_star = getattr(model.v_prime, "x_star", 0.0)
    needed = max(needed, 1.05 * x_star)
    radius = Config.SEARCH_RADIUS
    while radius < needed:
        radius *= 2.0
    return radius


# --- minima of the effective potential ------------------------------------


@lru_cache(maxsize=128)
def profile(model: ModelSpec, radius: float, points: int) -> Tuple[np.ndarray, Primitives]:
    """Primitives on a uniform grid over [-radius, radius]; independent of sigma and m."""
    x = np.linspace(-radius, radius, points)
    x.setflags(write=False)
    return x, primitives(model, x)


def refine_minima(model: ModelSpec, m: float, x: np.ndarray, vbar: np.ndarray) -> List[Minimum]:
    """Refine the interior grid minima of V̄(., m) to roots of V̄'; sorted by value."""
    theta, v, p = model.theta, model.v_prime, model.p_prime
    h = lambda s: float(v(s) + theta * (p(s) - m))  # sign of V̄'
    inner = np.nonzero((vbar[1:-1] <= vbar[:-2]) & (vbar[1:-1] <= vbar[2:]))[0] + 1
    located: List[float] = []
    for i in inner:
        left, right = float(x[i - 1]), float(x[i + 1])
        hl, hr = h(left), h(right)
        loc = brentq(h, left, right, xtol=1e-14) if hl < 0.0 < hr else float(x[i])
        if not located or abs(loc - located[-1]) > 1e-9:
            located.append(loc)
    if not located:
        i = int(np.argmin(vbar))
        located = [float(x[i])]
    values = vbar_from(model, primitives(model, np.array(located)), m)
    return sorted((Minimum(xl, float(vl)) for xl, vl in zip(located, values)), key=lambda mn: mn.value)


def local_minima(model: ModelSpec, m: float) -> List[Minimum]:
    radius = confinement_radius(model, m)
    x, prim = profile(model, radius, Config.AUDIT_GRID_POINTS)
    return refine_minima(model, m, x, vbar_from(model, prim, m))


# --- mode map -------------------------------------------------------------


def _poly_min(coeffs: Sequence[float]) -> Tuple[float, float]:
    """Exact global minimum (value, location) of a real polynomial."""
    c = _trimmed(coeffs)
    deg = len(c) - 1
    if deg == 0:
        return float(c[0]), 0.0
    if deg % 2 == 1:
        return -math.inf, -math.copysign(math.inf, c[-1])
    if c[-1] < 0:
        return -math.inf, math.inf
    crit = P.polyroots(P.polyder(c))
    real = crit.real[np.abs(crit.imag) <= 1e-6 * (1.0 + np.abs(crit.real))]
    values = P.polyval(real, c)
    i = int(np.argmin(values))
    return float(values[i]), float(real[i])


def function_min(f, radius: float) -> Tuple[float, float]:
    """Global minimum of f: exact for polynomials, grid plus local refinement otherwise."""
    if isinstance(f, FunctionSpec) and f.is_polynomial:
        return _poly_min(f.poly_coeffs)
    x = np.linspace(-radius, radius, Config.AUDIT_GRID_POINTS)
    y = f(x)
    i = int(np.argmin(y))
    step = x[1] - x[0]
    res = minimize_scalar(lambda s: float(f(s)), bounds=(x[i] - step, x[i] + step), method="bounded",
                          options={"xatol": 1e-12})
    if res.success and res.fun < y[i]:
        return float(res.fun), float(res.x)
    return float(y[i]), float(x[i])


def audit_radius(model: ModelSpec) -> float:
    return max(Config.AUDIT_RADIUS, 1.5 * root_bound(model.v_prime.tail))


def mode_map_slope_min(model: ModelSpec, theta: Optional[float] = None) -> Tuple[float, float]:
    """min over x of V'' + theta P'' (the slope of the inverse mode map, times theta)."""
    theta = model.theta if theta is None else theta
    if isinstance(model.v_prime, FunctionSpec):
        q = _add(model.v_prime.derivative(), model.p_prime.derivative(), theta)
        return function_min(q, audit_radius(model))
    dv, dp = model.v_prime.derivative(), model.p_prime.derivative()
    return function_min(lambda s: dv(s) + theta * dp(s), audit_radius(model))


def mode_map_increasing(model: ModelSpec) -> bool:
    value, _ = mode_map_slope_min(model)
    return value > 0.0


def _solve_mode(model: ModelSpec, m: float) -> float:
    theta, v, p = model.theta, model.v_prime, model.p_prime
    h = lambda s: float(v(s) + theta * (p(s) - m))
    radius = 1.0
    for _ in range(Config.BRACKET_DOUBLINGS):
        if h(-radius) < 0.0 < h(radius):
            return brentq(h, -radius, radius, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        radius *= 2.0
    raise BracketFailure(f"no sign change of V' + theta(P' - m) within |x| <= {radius:.3g} at m = {m:.6g}")


def mode_x_star(model: ModelSpec, m: float) -> ModeEstimate:
    """Mode of the stationary density in the small-noise limit.

    When the inverse mode map is strictly increasing this is the unique root
    of V' + theta(P' - m). Otherwise it is the global minimiser of V̄(., m),
    which is where rho(., m) peaks as sigma shrinks.
    """
    if mode_map_increasing(model):
        x = _solve_mode(model, m)
        return ModeEstimate(x, False, (x,))
    minima = local_minima(model, m)
    best = minima[0]
    tol = 1e-9 * (1.0 + abs(best.value))
    tied = sorted(mn.x for mn in minima if mn.value - best.value <= tol)
    if len(tied) > 1:
        location = max(tied, key=lambda s: (abs(s), s))
        logger.warning("Mode tie at m=%.6g between %s", m, ", ".join(f"{t:.6g}" for t in tied))
        return ModeEstimate(location, True, tuple(tied))
    return ModeEstimate(best.x, False, (best.x,))


# --- zeros ----------------------------------------------------------------


def sign_changes(f, lo: float, hi: float, points: Optional[int] = None) -> List[float]:
    """Sign changes of f on [lo, hi], refined by Brent's method."""
    points = points or Config.AUDIT_GRID_POINTS
    x = np.linspace(lo, hi, points)
    y = np.asarray(f(x), dtype=float)
    s = np.sign(y)
    found: List[float] = []
    i = 0
    while i < points - 1:
        if s[i] == 0.0:
            j = i
            while j + 1 < points and s[j + 1] == 0.0:
                j += 1
            before = s[i - 1] if i > 0 else 0.0
            after = s[j + 1] if j + 1 < points else 0.0
            if before * after < 0.0:
                found.append(float(0.5 * (x[i] + x[j])))
            i = j + 1
            continue
        if s[i] * s[i + 1] < 0.0:
            found.append(brentq(lambda t: float(f(t)), x[i], x[i + 1], xtol=1e-14))
        i += 1
    return found


def _is_simple(model: ModelSpec, x0: float) -> bool:
    deg = model.v_prime.degree
    threshold = Config.SIMPLE_ZERO_TOL * (1.0 + abs(x0) ** max(deg - 2, 0))
    return abs(eval_derivative(model.v_prime, x0)) > threshold


def zeros_of_v_prime(model: ModelSpec, interval: Tuple[float, float]) -> List[Zero]:
    """Zeros of V' on the interval, each flagged simple or not."""
    lo, hi = interval
    f = model.v_prime
    x = np.linspace(lo, hi, Config.AUDIT_GRID_POINTS)
    y = np.abs(np.asarray(f(x), dtype=float))
    scale = 1.0 + float(np.max(y))
    locations = sign_changes(f, lo, hi)

    # touch points: local minima of |V'| without a sign change
    step = x[1] - x[0]
    dips = np.nonzero((y[1:-1] <= y[:-2]) & (y[1:-1] <= y[2:]) & (y[1:-1] < 1e-3 * scale))[0] + 1
    crossings = list(locations)
    for run in np.split(dips, np.nonzero(np.diff(dips) > 1)[0] + 1) if dips.size else []:
        centre = float(0.5 * (x[run[0]] + x[run[-1]]))
        if any(abs(centre - loc) <= 2 * step for loc in crossings):
            continue
        if len(run) > 1:
            # flat stretch of exact zeros (clamped drifts)
            locations.append(centre)
            continue
        i = run[0]
        res = minimize_scalar(lambda t: abs(float(f(t))), bounds=(x[i - 1], x[i + 1]), method="bounded",
                              options={"xatol": 1e-14})
        if abs(float(f(res.x))) < Config.SIMPLE_ZERO_TOL * scale:
            locations.append(float(res.x))
    locations.sort()
    return [Zero(loc, _is_simple(model, loc)) for loc in locations]


@lru_cache(maxsize=256)
def _farthest_root(v_prime) -> Optional[float]:
    x_star = getattr(v_prime, "x_star", None)
    if x_star is not None:
        return float(x_star)
    bound = max(root_bound(v_prime.tail), 1.0)
    roots = [r for r in sign_changes(v_prime, 0.0, 1.01 * bound) if r > 1e-12]
    return max(roots) if roots else None


def farthest_root(model: ModelSpec) -> Optional[float]:
    """x*: the farthest positive sign change of V' (None when V' has none)."""
    return _farthest_root(model.v_prime)


def find_theta_star(model: ModelSpec, search: Tuple[float, float] = (1e-6, 1e3)) -> ThetaStar:
    """Smallest theta in `search` making V' + theta P' strictly increasing."""
    radius = audit_radius(model)
    p_floor, where = function_min(model.p_prime.derivative(), radius)
    if not p_floor > 0.0:
        raise NotApplicable(f"P'' is not bounded below by a positive constant (P''({where:.6g}) = {p_floor:.6g})")

    increasing = lambda theta: mode_map_slope_min(model, theta)[0] > 0.0
    lo, hi = search
    if increasing(lo):
        return ThetaStar(lo, True)
    if not increasing(hi):
        logger.warning("theta* not found below %.6g", hi)
        return ThetaStar(hi, False)
    while hi - lo > Config.THETA_TOL:
        mid = 0.5 * (lo + hi)
        if increasing(mid):
            hi = mid
        else:
            lo = mid
    return ThetaStar(hi, True)
