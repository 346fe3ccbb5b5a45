"""Self-consistency function, first-moment function and their roots."""
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from src.config import Config
from src.core.errors import NotApplicable, QuadratureFailure, WindowTooSmall
from src.core.models import ModelSpec, RootEntry, RootReport, SeriesCoefficients
from src.core.parallel import parallel_map
from src.core.retry import retry
from src.model import a_of_x, farthest_root, mode_x_star, root_bound, sign_changes
from src.quadrature import build_context, expectation

logger = logging.getLogger(__name__)

# Sub-grid points per refinement level of a scan cell with a sign change.
_SUBDIVIDE = 16
_MAX_DEPTH = 3


def F(model: ModelSpec, sigma: float, m: float) -> float:
    """First-moment function (1/theta) E[-V'] under the normalised density at (sigma, m)."""
    ctx = build_context(model, sigma, m)
    return -expectation(ctx, model.v_prime) / model.theta


def G(model: ModelSpec, sigma: float, m: float) -> float:
    """Self-consistency function E[P'] - m."""
    ctx = build_context(model, sigma, m)
    return expectation(ctx, model.p_prime) - m


def dFdm(model: ModelSpec, sigma: float, m: float) -> float:
    """dF/dm = (2/sigma^2) Cov(a, -V'), in centred form."""
    ctx = build_context(model, sigma, m)
    w = ctx.weights
    u = -model.v_prime(ctx.nodes)
    da = ctx.a - w @ ctx.a
    du = u - w @ u
    return (2.0 / sigma ** 2) * float(w @ (da * du))


def _largest_root(model: ModelSpec) -> float:
    bound = max(root_bound(model.v_prime.tail), 1.0)
    roots = sign_changes(model.v_prime, -1.01 * bound, 1.01 * bound)
    return max((abs(r) for r in roots), default=0.0)


def _scan_window(model: ModelSpec, sigma: float) -> float:
    v, p, theta = model.v_prime, model.p_prime, model.theta
    x_far = _largest_root(model)

    def attempt(radius: float) -> float:
        half_width = max(abs(float(v(s) + theta * p(s))) / theta for s in (radius, -radius))
        if not (F(model, sigma, half_width) < 0.0 < F(model, sigma, -half_width)):
            raise WindowTooSmall(f"F does not change sign over [-{half_width:.6g}, {half_width:.6g}] at sigma={sigma:.6g}")
        return half_width

    initial = x_far + max(0.5, 0.25 * x_far)
    return retry(attempt, (WindowTooSmall,), max_attempts=8, initial=initial)


class _Scanner:
    def __init__(self, model: ModelSpec, sigma: float, threads: int):
        self.model = model
        self.sigma = sigma
        self.threads = threads
        self.f = lambda m: F(model, sigma, m)

    def grid(self, lo: float, hi: float, count: int):
        ms = np.linspace(lo, hi, count)
        return ms, np.array(parallel_map(self.f, list(ms), self.threads))

    def roots_in(self, ms: np.ndarray, fs: np.ndarray, depth: int = 0) -> List[float]:
        found: List[float] = []
        for i in range(len(ms) - 1):
            a, b, fa, fb = ms[i], ms[i + 1], fs[i], fs[i + 1]
            if fa == 0.0:
                found.append(float(a))
                continue
            if fa * fb >= 0.0:
                continue
            # a sign change may hide three roots (a pitchfork near m = 0), so
            # every such cell is resampled before the final bracket
            if depth < _MAX_DEPTH:
                found.extend(self.roots_in(*self.grid(a, b, _SUBDIVIDE + 1), depth + 1))
                continue
            found.append(brentq(self.f, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps))
        if fs[-1] == 0.0:
            found.append(float(ms[-1]))
        return found


def find_roots(model: ModelSpec, sigma: float, grid_points: Optional[int] = None, threads: int = 1) -> RootReport:
    """All roots of F on a window where F is provably sign-definite outside."""
    if not sigma > 0.0:
        raise ValueError("sigma must be positive")
    count = max(grid_points or Config.ROOT_GRID_POINTS, 400)
    count += count % 2  # even count keeps m = 0 off the grid
    half_width = _scan_window(model, sigma)

    scanner = _Scanner(model, sigma, threads)
    ms, fs = scanner.grid(-half_width, half_width, count)
    candidates = sorted(scanner.roots_in(ms, fs))

    dedup = Config.ROOT_DEDUP * 2.0 * half_width
    roots: List[RootEntry] = []
    for r in candidates:
        if roots and r - roots[-1].m <= dedup:
            continue
        residual = abs(F(model, sigma, r))
        # relative to the size of the averaged drift once that exceeds 1
        magnitude = expectation(build_context(model, sigma, r), lambda x: np.abs(model.v_prime(x))) / model.theta
        if residual >= Config.ROOT_FTOL * max(1.0, magnitude):
            raise QuadratureFailure(f"root at m={r:.12g} has residual {residual:.3g}")
        slope = dFdm(model, sigma, r)
        sign = 0 if abs(slope) <= Config.SLOPE_ZERO_TOL else int(math.copysign(1, slope))
        roots.append(RootEntry(r, residual, sign))

    logger.info("sigma=%.6g: %s root(s) in [-%.4g, %.4g]", sigma, len(roots), half_width, half_width)
    return RootReport(sigma, tuple(roots), (-half_width, half_width), count)


def laplace_limit(model: ModelSpec, m: float, laplace_normalised: bool = False) -> float:
    """Small-noise limit of F: -V'(x*(m))/theta.

    With `laplace_normalised` the value is divided by k^2(x*(m)), the form taken
    when the normaliser is the Laplace approximation without the 1/k^2 weight.
    At a tie between modes the two one-sided limits are averaged.
    """
    mode = mode_x_star(model, m)

    def limit(x: float) -> float:
        value = -float(model.v_prime(x)) / model.theta
        return value / float(model.k_squared(x)) if laplace_normalised else value

    if mode.tie:
        left, right = min(mode.locations), max(mode.locations)
        logger.warning("Averaging one-sided Laplace limits at m=%.6g (modes %.6g, %.6g)", m, left, right)
        return 0.5 * (limit(left) + limit(right))
    return limit(mode.location)


def interior_roots(model: ModelSpec, x_star: float) -> Tuple[float, ...]:
    """Sign changes of V' strictly inside (0, x*), mirrored to both sides."""
    inner = [r for r in sign_changes(model.v_prime, 0.0, x_star) if 1e-12 < r < x_star - 1e-12]
    return tuple(sorted([-r for r in inner] + inner))


def series_coefficients(model: ModelSpec, sigma: float, n_max: Optional[int] = None) -> SeriesCoefficients:
    """Odd series coefficients I(2n-1) of F at m = 0 and their scaled versions.

    The density is the shifted, unnormalised one; only signs and ratios are
    meaningful.
    """
    n_max = n_max or Config.SERIES_N_MAX
    if not model.is_symmetric:
        raise NotApplicable("series coefficients need odd V', P' and even k^2")
    x_star = farthest_root(model)
    if x_star is None:
        raise NotApplicable("V' has no positive sign change")

    ctx = build_context(model, sigma, 0.0, breakpoints=interior_roots(model, x_star))
    x = ctx.nodes
    w = ctx.weights * math.exp(ctx.log_norm)
    u = -model.v_prime(x)
    a_star = a_of_x(model, x_star)
    scaled = ctx.a / a_star
    positive, inner, beyond = x >= 0.0, (x >= 0.0) & (x <= x_star), x > x_star
    u_plus, u_minus = np.maximum(u, 0.0), np.maximum(-u, 0.0)

    I, I_scaled, parts, log_abs, signs, even = [], [], [], [], [], []
    for n in range(1, n_max + 1):
        odd = scaled ** (2 * n - 1)
        tilde = 2.0 * float(w[positive] @ (u[positive] * odd[positive]))
        a_n = float(w[inner] @ (odd[inner] * u_plus[inner]))
        b_n = float(w[inner] @ (odd[inner] * u_minus[inner]))
        c_n = float(w[beyond] @ (odd[beyond] * u_minus[beyond]))
        log_mag = math.log(abs(tilde)) + (2 * n - 1) * math.log(a_star) if tilde != 0.0 else -math.inf
        sign = int(np.sign(tilde))
        I.append(sign * math.exp(log_mag) if log_mag < 700.0 else sign * math.inf)
        I_scaled.append(tilde)
        parts.append((a_n, b_n, c_n))
        log_abs.append(log_mag)
        signs.append(sign)

        terms = ctx.weights * scaled ** (2 * n) * u
        even.append(abs(float(terms.sum())) / max(float(np.abs(terms).sum()), 1e-300))

    n_c = 0
    while n_c < n_max and signs[n_c] >= 0:
        n_c += 1
    return SeriesCoefficients(
        sigma=sigma, n_max=n_max, I=tuple(I), I_scaled=tuple(I_scaled), parts=tuple(parts),
        x_star=x_star, log_abs_I=tuple(log_abs), signs=tuple(signs), even_checks=tuple(even), n_c=n_c,
    )
