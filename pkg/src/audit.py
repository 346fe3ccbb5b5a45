"""Numerical audit of the standing assumptions for each analysis regime.

Every check produces an AssumptionCheck; symbolic checks are exact for
polynomial drifts, grid checks report the location of the worst violation.
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from src.config import Config
from src.core.errors import MVSDEError
from src.core.models import AssumptionCheck, AssumptionReport, FunctionSpec, ModelSpec
from src.model import (
    audit_radius,
    farthest_root,
    function_min,
    is_confining,
    local_minima,
    mode_map_slope_min,
    primitives,
    tail_growth,
    vbar_from,
    zeros_of_v_prime,
)

logger = logging.getLogger(__name__)

GENERIC = "generic"
BISTABLE = "symmetric-bistable"
MULTIWELL = "symmetric-multiwell"
REGIMES = (GENERIC, BISTABLE, MULTIWELL)

# Assumption-set tag recorded on every check.
_SECTION = {GENERIC: "general", BISTABLE: "bistable", MULTIWELL: "multiwell"}

Check = Tuple[Optional[bool], Optional[float], str]


def _grid(lo: float, hi: float) -> np.ndarray:
    return np.linspace(lo, hi, Config.AUDIT_GRID_POINTS)


# --- regularity and growth ------------------------------------------------


def _smoothness(model: ModelSpec) -> Check:
    v = model.v_prime
    if isinstance(v, FunctionSpec):
        return True, None, "polynomial/trig drift is smooth; k^2 is a positive polynomial"
    if getattr(v, "is_smooth", False):
        return True, None, "wrapped drift declares C2 smoothness"
    return False, float(v.breakpoints[-1]) if v.breakpoints else None, f"{v.description} is not C2"


def _bounded_inverse_k2(model: ModelSpec) -> Check:
    k2 = model.k_squared
    floor = model.diffusion.epsilon ** 2
    value, where = function_min(k2, audit_radius(model))
    lead = k2.leading_coefficient
    if k2.degree > 0 and (k2.degree % 2 == 1 or lead <= 0.0):
        return False, None, "k^2 is unbounded below in the tails"
    if value < floor * (1.0 - 1e-12):
        return False, where, f"min k^2 = {value:.6g} < epsilon^2 = {floor:.6g}"
    return True, None, f"min k^2 = {value:.6g} >= epsilon^2"


def _quadratic_growth(model: ModelSpec) -> Check:
    d, c = tail_growth(model)
    holds = is_confining(model)
    return holds, None, f"V̄'(x, 0) ~ {c:.6g} x^{d}"


def _divergent_drift(model: ModelSpec) -> Check:
    tail = model.v_prime.tail
    d, c = tail_growth(model)
    v_ok = tail.degree % 2 == 1 and tail.leading_coefficient > 0.0
    vbar_ok = d >= 1 and d % 2 == 1 and c > 0.0
    notes = f"V' ~ {tail.leading_coefficient:.6g} x^{tail.degree}, V̄' ~ {c:.6g} x^{d}"
    return v_ok and vbar_ok, None, notes


def _polynomial_bound(model: ModelSpec) -> Check:
    degree = model.v_prime.degree
    return True, None, f"|V'| <= K(1 + x^{2 * max(1, math.ceil(degree / 2))})"


def _mode_map_monotone(model: ModelSpec) -> Check:
    value, where = mode_map_slope_min(model)
    if value > 0.0:
        return True, None, f"min(V'' + theta P'') = {value:.6g}"
    return False, where, f"V'' + theta P'' = {value:.6g} at x = {where:.6g}"


# --- homeomorphism replacements (generic regime) --------------------------


def _touch_points(model: ModelSpec) -> Tuple[float, Optional[float], List[float]]:
    """min of V'' + theta P'' and the isolated points where it vanishes."""
    value, where = mode_map_slope_min(model)
    dv, dp = model.v_prime.derivative(), model.p_prime.derivative()
    x = _grid(-audit_radius(model), audit_radius(model))
    q = np.asarray(dv(x), dtype=float) + model.theta * np.asarray(dp(x), dtype=float)
    scale = 1.0 + float(np.max(np.abs(q)))
    dips = np.nonzero((q[1:-1] <= q[:-2]) & (q[1:-1] <= q[2:]) & (np.abs(q[1:-1]) <= 1e-9 * scale))[0] + 1
    points = sorted({round(float(x[i]), 9) for i in dips})
    if abs(value) <= 1e-9 * scale and not any(abs(p - where) <= 2 * (x[1] - x[0]) for p in points):
        points.append(where)
    return value, where, sorted(points)


def _homeomorphism(model: ModelSpec) -> Check:
    value, where, points = _touch_points(model)
    scale = 1.0 + abs(value)
    if value < -1e-9 * scale:
        return False, where, f"V'' + theta P'' = {value:.6g} < 0"
    if not points:
        return True, None, "V'' + theta P'' > 0; no touch points"
    for x_t in points:
        m_t = float(model.v_prime(x_t) + model.theta * model.p_prime(x_t)) / model.theta
        best = local_minima(model, m_t)[0]
        if abs(best.x - x_t) > 1e-4 * (1.0 + abs(x_t)):
            return False, x_t, f"touch point {x_t:.6g} is not the global mode at m = {m_t:.6g}"
    return True, None, f"touch points {', '.join(f'{p:.6g}' for p in points)} are global modes"


def _touch_curvature(model: ModelSpec) -> Check:
    _, _, points = _touch_points(model)
    if not points:
        return True, None, "no touch points"
    d2 = model.v_prime.derivative()
    for x_t in points:
        if abs(float(d2(x_t))) <= Config.SIMPLE_ZERO_TOL:
            return False, x_t, f"V''({x_t:.6g}) = 0"
    return True, None, "V'' != 0 at every touch point"


# --- symmetric regimes -----------------------------------------------------


def _antisymmetry(model: ModelSpec) -> Check:
    v, p, k2 = model.v_prime, model.p_prime, model.k_squared
    symbolic = p.is_odd(1e-12) and k2.is_even(1e-12)
    if isinstance(v, FunctionSpec):
        holds = symbolic and v.is_odd(1e-12)
        return holds, None, "odd V', P' and even k^2" if holds else "parity fails on the coefficients"
    x = _grid(0.0, audit_radius(model))
    gap = np.abs(v(x) + v(-x)) / (1.0 + np.abs(v(x)))
    i = int(np.argmax(gap))
    if symbolic and gap[i] <= 1e-10:
        return True, None, f"odd to {gap[i]:.1e} on a symmetric grid"
    return False, float(x[i]), f"|V'(x) + V'(-x)| = {gap[i]:.3g}"


def _beyond_x_star(model: ModelSpec, x_star: float) -> Optional[float]:
    """First grid point beyond x* where -V' >= 0, or None."""
    x = _grid(x_star, max(audit_radius(model), 2.0 * x_star))[1:]
    bad = np.nonzero(np.asarray(model.v_prime(x)) <= 0.0)[0]
    if bad.size:
        return float(x[bad[0]])
    tail = model.v_prime.tail
    if tail.degree % 2 == 0 or tail.leading_coefficient <= 0.0:
        return math.inf
    return None


def _bistable_roots(model: ModelSpec, x_star: Optional[float]) -> Check:
    if x_star is None:
        return False, None, "-V' has no positive root"
    radius = max(audit_radius(model), 2.0 * x_star)
    zeros = zeros_of_v_prime(model, (-radius, radius))
    positive = [z.location for z in zeros if z.location > 1e-9]
    if len(positive) != 1:
        extra = next((r for r in positive if abs(r - x_star) > 1e-9), None)
        return False, extra, f"{len(positive)} positive roots (expected 1)"
    beyond = _beyond_x_star(model, x_star)
    if beyond is not None:
        return False, beyond, "-V' is not negative beyond x*"
    return True, None, f"roots {{0, +/-{x_star:.6g}}}"


def _farthest_root_condition(model: ModelSpec, x_star: Optional[float]) -> Check:
    if x_star is None:
        return False, None, "-V' has no positive root"
    beyond = _beyond_x_star(model, x_star)
    if beyond is not None:
        return False, beyond, "-V' is not negative beyond x*"
    return True, None, f"x* = {x_star:.6g} is the farthest root"


def _sup_condition(values: np.ndarray, x: np.ndarray, name: str, strict: bool) -> Check:
    """sup over [0, x*] is attained at x* (last grid point), and positive when `strict`."""
    at_star = float(values[-1])
    tol = Config.AUDIT_TOL * (1.0 + abs(at_star))
    i = int(np.argmax(values))
    if values[i] > at_star + tol:
        return False, float(x[i]), f"{name}({x[i]:.6g}) = {values[i]:.6g} exceeds its value at x*"
    if strict and not at_star > 0.0:
        return False, float(x[-1]), f"{name}(x*) = {at_star:.6g} is not positive"
    return True, None, f"{name}(x*) = {at_star:.6g}"


def _inf_condition(values: np.ndarray, x: np.ndarray, name: str, strict: bool) -> Check:
    """inf over [x*, inf) is attained at x* (first grid point)."""
    at_star = float(values[0])
    tol = Config.AUDIT_TOL * (1.0 + abs(at_star))
    i = int(np.argmin(values))
    if values[i] < at_star - tol:
        return False, float(x[i]), f"{name}({x[i]:.6g}) = {values[i]:.6g} is below its value at x*"
    if strict and not at_star > 0.0:
        return False, float(x[0]), f"{name}(x*) = {at_star:.6g} is not positive"
    return True, None, f"inf {name} attained at x*"


def _potential_checks(model: ModelSpec, x_star: Optional[float], label: str) -> Dict[str, Check]:
    """Sup/inf conditions on V̄(., 0) (5, 6) and int P'/k^2 (7, 8)."""
    if x_star is None:
        missing = (None, None, "x* undefined")
        return {"5": missing, "6": missing, "7": missing, "8": missing}
    inner = _grid(0.0, x_star)
    outer = _grid(x_star, max(audit_radius(model), 2.0 * x_star))
    p_in, p_out = primitives(model, inner), primitives(model, outer)
    v_in, v_out = vbar_from(model, p_in, 0.0), vbar_from(model, p_out, 0.0)
    confining = is_confining(model)
    six = _inf_condition(v_out, outer, label, strict=False)
    if six[0] and not confining:
        six = (False, None, "V̄ is not confining beyond the audit grid")
    return {
        "5": _sup_condition(v_in, inner, label, strict=True),
        "6": six,
        "7": _sup_condition(p_in.p, inner, "int P'/k^2", strict=True),
        "8": _inf_condition(p_out.p, outer, "int P'/k^2", strict=True),
    }


# --- regimes ---------------------------------------------------------------

Entry = Tuple[int, str, Callable[[], Check]]


def _generic(model: ModelSpec) -> List[Entry]:
    return [
        (1, "1", lambda: _smoothness(model)),
        (2, "2", lambda: _bounded_inverse_k2(model)),
        (3, "3", lambda: _quadratic_growth(model)),
        (4, "4", lambda: _divergent_drift(model)),
        (5, "5", lambda: _polynomial_bound(model)),
        (6, "6", lambda: _mode_map_monotone(model)),
        (7, "7", lambda: _homeomorphism(model)),
        (8, "8", lambda: _touch_curvature(model)),
    ]


def _potentials(model: ModelSpec, dominated: bool) -> Callable[[str], Callable[[], Check]]:
    """Deferred sup/inf checks, computed once per model on first use."""
    cache: Dict[str, Check] = {}

    def compute() -> Dict[str, Check]:
        if not cache:
            x_star = farthest_root(model)
            if dominated and x_star is not None:
                from src.multiwell import dominating_bistable

                cache.update(_potential_checks(dominating_bistable(model), x_star, "V̄_D"))
            else:
                cache.update(_potential_checks(model, x_star, "V̄"))
        return cache

    return lambda label: lambda: compute()[label]


def _bistable(model: ModelSpec) -> List[Entry]:
    own = _potentials(model, dominated=False)
    return [
        (1, "1", lambda: _antisymmetry(model)),
        (2, "2", lambda: _bistable_roots(model, farthest_root(model))),
        (3, "3", lambda: _quadratic_growth(model)),
        (4, "4", lambda: _polynomial_bound(model)),
        (5, "5", own("5")),
        (6, "6", own("6")),
        (7, "7", own("7")),
        (8, "8", own("8")),
    ]


def _multiwell(model: ModelSpec) -> List[Entry]:
    own = _potentials(model, dominated=False)
    dominated = _potentials(model, dominated=True)
    return [
        (1, "1", lambda: _antisymmetry(model)),
        (2, "2*", lambda: _farthest_root_condition(model, farthest_root(model))),
        (3, "3", lambda: _quadratic_growth(model)),
        (4, "4", lambda: _polynomial_bound(model)),
        (5, "5*", dominated("5")),
        (6, "6*", dominated("6")),
        (7, "7", own("7")),
        (8, "8", own("8")),
    ]


_REGIME_CHECKS: Dict[str, Callable[[ModelSpec], List[Entry]]] = {
    GENERIC: _generic,
    BISTABLE: _bistable,
    MULTIWELL: _multiwell,
}


def audit_assumptions(model: ModelSpec, regime: str = GENERIC) -> AssumptionReport:
    """Check assumptions 1-8 of `regime`.

    A check whose numerics fail is reported as undetermined (holds = None)
    rather than raised.
    """
    if regime not in _REGIME_CHECKS:
        raise ValueError(f"unknown regime {regime!r}; expected one of {', '.join(REGIMES)}")
    section = _SECTION[regime]
    checks = []
    for ident, label, run in _REGIME_CHECKS[regime](model):
        try:
            holds, witness, notes = run()
        except MVSDEError as exc:
            holds, witness, notes = None, None, f"undetermined: {exc}"
            logger.warning("Assumption %s (%s) could not be checked: %s", label, section, exc)
        checks.append(AssumptionCheck(ident, label, section, holds, witness, notes))
        if holds is False:
            logger.info("Assumption %s (%s) fails: %s", label, section, notes)
    return AssumptionReport(regime, tuple(checks))
