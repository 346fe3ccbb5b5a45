import math
import unittest

import numpy as np

from src.core.errors import Divergence
from src.core.models import DiffusionSpec, FunctionSpec, InitLaw, ModelSpec
from src.critical import sigma_c
from src.particle import (
    advance,
    batch_means_estimate,
    init_ensemble,
    stationary_mean_estimate,
    step,
    trace_rows,
)
from src.selfconsistency import find_roots

X = FunctionSpec((0.0, 1.0))
BISTABLE = ModelSpec(FunctionSpec((0.0, -1.0, 0.0, 1.0)), X, theta=2.0)
GAUSSIAN = ModelSpec(X, X, theta=1.0)


class TestInitialLaws(unittest.TestCase):
    def test_point_mass(self):
        e = init_ensemble(50, InitLaw("point", (0.7,)), seed=3, dt=0.01)
        self.assertTrue(np.all(e.positions == 0.7))
        self.assertEqual((e.time, e.steps), (0.0, 0))

    def test_same_seed_same_draw(self):
        law = InitLaw("gaussian", (0.5, 2.0))
        a = init_ensemble(100, law, seed=11, dt=0.01)
        b = init_ensemble(100, law, seed=11, dt=0.01)
        c = init_ensemble(100, law, seed=12, dt=0.01)
        np.testing.assert_array_equal(a.positions, b.positions)
        self.assertFalse(np.array_equal(a.positions, c.positions))

    def test_antithetic_mirror(self):
        law = InitLaw("uniform", (-1.0, 3.0))
        plain = init_ensemble(200, law, seed=5, dt=0.01)
        mirrored = init_ensemble(200, law, seed=5, dt=0.01, antithetic=True)
        np.testing.assert_allclose(plain.positions - 1.0, -(mirrored.positions - 1.0), atol=1e-14)
        self.assertTrue(np.all((plain.positions >= -1.0) & (plain.positions <= 3.0)))

    def test_positions_are_read_only(self):
        e = init_ensemble(10, InitLaw(), seed=0, dt=0.01)
        with self.assertRaises(ValueError):
            e.positions[0] = 2.0

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            init_ensemble(1, InitLaw(), seed=0, dt=0.01)
        with self.assertRaises(ValueError):
            init_ensemble(10, InitLaw(), seed=0, dt=0.0)


class TestStepping(unittest.TestCase):
    def setUp(self):
        self.start = init_ensemble(64, InitLaw("gaussian", (0.0, 1.0)), seed=9, dt=0.01)

    def test_runs_are_reproducible(self):
        a = advance(self.start, BISTABLE, 0.5, 20)
        b = advance(self.start, BISTABLE, 0.5, 20)
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_split_runs_match(self):
        whole = advance(self.start, BISTABLE, 0.5, 10)
        split = advance(advance(self.start, BISTABLE, 0.5, 4), BISTABLE, 0.5, 6)
        np.testing.assert_array_equal(whole.positions, split.positions)
        self.assertEqual(whole.mean_trace, split.mean_trace)
        self.assertEqual(split.steps, 10)
        self.assertAlmostEqual(split.time, 0.1, places=12)

    def test_single_step(self):
        once = step(self.start, BISTABLE, 0.5)
        self.assertEqual(once.steps, 1)
        self.assertEqual(len(once.mean_trace), 1)
        self.assertAlmostEqual(once.mean_trace[0][1], float(np.mean(once.positions)), places=12)

    def test_antithetic_paths_mirror_for_odd_drift(self):
        start = init_ensemble(32, InitLaw("point", (0.0,)), seed=4, dt=0.01)
        flipped = init_ensemble(32, InitLaw("point", (0.0,)), seed=4, dt=0.01, antithetic=True)
        a = advance(start, BISTABLE, 0.8, 25)
        b = advance(flipped, BISTABLE, 0.8, 25)
        np.testing.assert_allclose(a.positions, -b.positions, atol=1e-12)

    def test_zero_noise_is_deterministic_flow(self):
        start = init_ensemble(8, InitLaw("point", (1.0,)), seed=0, dt=0.01)
        end = advance(start, GAUSSIAN, 0.0, 1)
        np.testing.assert_allclose(end.positions, 0.99)

    def test_noise_scales_with_diffusion(self):
        rational = ModelSpec(X, X, DiffusionSpec(FunctionSpec((1.0, 0.0, 1.0)), 1.0), 1.0)
        start = init_ensemble(16, InitLaw("point", (2.0,)), seed=6, dt=0.01)
        unit = step(start, GAUSSIAN, 0.5).positions - 1.98
        scaled = step(start, rational, 0.5).positions - 1.98
        # k(2) = sqrt(5)
        np.testing.assert_allclose(scaled, math.sqrt(5.0) * unit, rtol=1e-10, atol=1e-14)

    def test_divergence(self):
        start = init_ensemble(8, InitLaw("point", (10.0,)), seed=0, dt=1.0)
        with self.assertRaises(Divergence):
            advance(start, BISTABLE, 0.1, 5)

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            advance(self.start, BISTABLE, 0.5, -1)
        with self.assertRaises(ValueError):
            advance(self.start, BISTABLE, -0.5, 1)


class TestEstimates(unittest.TestCase):
    def test_gaussian_stationary_mean(self):
        estimate = stationary_mean_estimate(GAUSSIAN, 1.0, InitLaw("point", (1.0,)), n=2000, dt=0.01,
                                            t_burn=5.0, t_sample=20.0, seed=7)
        self.assertLess(abs(estimate.mean), 0.05)
        self.assertGreater(estimate.stderr, 0.0)

    def test_bistable_means_match_stationary_roots(self):
        sigma = 0.5 * sigma_c(BISTABLE).sigma_c
        low, _, high = find_roots(BISTABLE, sigma).locations
        for start, root in ((1.0, high), (-1.0, low)):
            with self.subTest(start=start):
                estimate = stationary_mean_estimate(BISTABLE, sigma, InitLaw("point", (start,)), n=4000,
                                                    dt=0.005, t_burn=10.0, t_sample=10.0, seed=1234)
                self.assertEqual(math.copysign(1.0, estimate.mean), start)
                self.assertLess(abs(estimate.mean - root), 3 * estimate.stderr + 0.02)

    def test_estimate_validates_times(self):
        with self.assertRaises(ValueError):
            stationary_mean_estimate(GAUSSIAN, 1.0, InitLaw(), n=10, dt=0.01, t_burn=0.0, t_sample=1.0, seed=0)
        with self.assertRaises(ValueError):
            stationary_mean_estimate(GAUSSIAN, 1.0, InitLaw(), n=10, dt=0.01, t_burn=1.0, t_sample=0.05, seed=0)

    def test_batch_means(self):
        flat = batch_means_estimate([2.0] * 40, batches=4)
        self.assertEqual(flat, (2.0, 0.0))
        with self.assertRaises(ValueError):
            batch_means_estimate([1.0, 2.0], batches=4)

    def test_trace_rows(self):
        rows = trace_rows([0.1, 0.2, 0.3], [1.0, 2.0, 3.0])
        self.assertEqual(rows[0], (0.1, 1.0, 0.0))
        self.assertEqual(rows[2][1], 3.0)
        self.assertAlmostEqual(rows[2][2], math.sqrt(1.0 / 3.0), places=12)


if __name__ == "__main__":
    unittest.main()
