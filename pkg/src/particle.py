"""Interacting N-particle Euler-Maruyama simulator.

Each step draws its normals from a Philox generator whose counter is fixed by
(seed, step), so a run is reproducible bit-for-bit and any step can be
regenerated on its own.
"""
import logging
import math
from dataclasses import replace
from typing import List, Sequence, Tuple

import numpy as np

from src.config import Config
from src.core.errors import Divergence
from src.core.models import InitLaw, MeanEstimate, ModelSpec, ParticleEnsemble

logger = logging.getLogger(__name__)

_KEY_MASK = (1 << 64) - 1
_INIT_STREAM = 1
_STEP_STREAM = 0


def _generator(seed: int, step: int, stream: int) -> np.random.Generator:
    bit_gen = np.random.Philox(key=int(seed) & _KEY_MASK, counter=[0, step, 0, stream])
    return np.random.Generator(bit_gen)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def init_ensemble(n: int, law: InitLaw, seed: int, dt: float, antithetic: bool = False) -> ParticleEnsemble:
    """Draw n initial positions from `law` with the init stream of `seed`."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    gen = _generator(seed, 0, _INIT_STREAM)
    sign = -1.0 if antithetic else 1.0
    if law.kind == "point":
        positions = np.full(n, law.params[0])
    elif law.kind == "uniform":
        lo, hi = law.params
        centre, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        positions = centre + sign * half * gen.uniform(-1.0, 1.0, n)
    else:
        mu, sd = law.params
        positions = mu + sign * sd * gen.standard_normal(n)
    return ParticleEnsemble(_readonly(positions), n, int(seed), float(dt), antithetic=antithetic)


def _empirical_mean(values: np.ndarray) -> float:
    # np.sum reduces pairwise in a fixed order
    return float(np.sum(values)) / len(values)


def _advance_positions(x: np.ndarray, model: ModelSpec, sigma: float, dt: float, seed: int, step: int,
                       antithetic: bool) -> Tuple[np.ndarray, float]:
    """One Euler-Maruyama step; returns the new positions and the mean of P' there."""
    pp = model.p_prime(x)
    mean = _empirical_mean(pp)
    drift = -model.v_prime(x) - model.theta * (pp - mean)
    xi = _generator(seed, step, _STEP_STREAM).standard_normal(len(x))
    if antithetic:
        xi = -xi
    noise = sigma * model.diffusion.k(x) * math.sqrt(dt) * xi
    new = x + drift * dt + noise
    worst = float(np.max(np.abs(new)))
    if not math.isfinite(worst) or worst > Config.DIVERGENCE_BOUND:
        raise Divergence(f"particle left |x| <= {Config.DIVERGENCE_BOUND:g} at step {step} (max |x| = {worst:.3g}); "
                         f"reduce dt={dt:g}")
    return new, _empirical_mean(model.p_prime(new))


def _run(e: ParticleEnsemble, model: ModelSpec, sigma: float, n_steps: int) -> Tuple[np.ndarray, np.ndarray]:
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    x = np.array(e.positions, dtype=float)
    means = np.empty(n_steps)
    for i in range(n_steps):
        x, means[i] = _advance_positions(x, model, sigma, e.dt, e.seed, e.steps + i + 1, e.antithetic)
    return x, means


def advance(e: ParticleEnsemble, model: ModelSpec, sigma: float, n_steps: int) -> ParticleEnsemble:
    """A new ensemble n_steps later, with the mean trace extended."""
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    x, means = _run(e, model, sigma, n_steps)
    times = e.time + e.dt * np.arange(1, n_steps + 1)
    trace = e.mean_trace + tuple(zip(times.tolist(), means.tolist()))
    return replace(e, positions=_readonly(x), time=e.time + n_steps * e.dt, steps=e.steps + n_steps,
                   mean_trace=trace)


def step(e: ParticleEnsemble, model: ModelSpec, sigma: float) -> ParticleEnsemble:
    return advance(e, model, sigma, 1)


def stationary_mean_estimate(model: ModelSpec, sigma: float, init: InitLaw, n: int, dt: float,
                             t_burn: float, t_sample: float, seed: int,
                             antithetic: bool = False) -> MeanEstimate:
    """Time average of the empirical mean of P' over [t_burn, t_burn + t_sample].

    The standard error comes from batch means over Config.BATCHES batches.
    """
    if not (t_burn > 0.0 and t_sample > 0.0):
        raise ValueError("t_burn and t_sample must be positive")
    burn_steps = int(round(t_burn / dt))
    sample_steps = int(round(t_sample / dt))
    if sample_steps < Config.BATCHES:
        raise ValueError(f"t_sample/dt must give at least {Config.BATCHES} steps")

    e = init_ensemble(n, init, seed, dt, antithetic)
    logger.info("Simulating n=%s sigma=%.6g dt=%g for %s + %s steps", n, sigma, dt, burn_steps, sample_steps)
    x, _ = _run(e, model, sigma, burn_steps)
    burned = replace(e, positions=_readonly(x), time=burn_steps * dt, steps=burn_steps)
    _, samples = _run(burned, model, sigma, sample_steps)
    estimate = batch_means_estimate(samples)
    logger.info("Stationary mean %.6g +/- %.2g", estimate.mean, estimate.stderr)
    return estimate


def batch_means_estimate(samples: Sequence[float], batches: int = Config.BATCHES) -> MeanEstimate:
    """Mean of a correlated series with a batch-means standard error."""
    samples = np.asarray(samples, dtype=float)
    if len(samples) < batches:
        raise ValueError(f"need at least {batches} samples")
    batch_means = np.array([b.mean() for b in np.array_split(samples, batches)])
    return MeanEstimate(float(samples.mean()), float(batch_means.std(ddof=1) / math.sqrt(batches)))


def trace_rows(times: Sequence[float], means: Sequence[float]) -> List[Tuple[float, float, float]]:
    """(t, mean, running standard error of the time-averaged mean) rows."""
    means = np.asarray(means, dtype=float)
    count = np.arange(1, len(means) + 1)
    total = np.cumsum(means)
    squares = np.cumsum(means ** 2)
    var = (squares - total ** 2 / count) / np.maximum(count - 1, 1)
    stderr = np.sqrt(np.maximum(var, 0.0) / count)
    return [(float(t), float(m), float(s)) for t, m, s in zip(times, means, stderr)]
