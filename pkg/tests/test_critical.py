import math
import unittest

import numpy as np

from src.core.models import FunctionSpec, ModelSpec
from src.critical import D, dD_dsigma, dD_dtheta, phase_diagram, sigma_c, sigma_star_curve
from src.selfconsistency import find_roots

X = FunctionSpec((0.0, 1.0))
BISTABLE = ModelSpec(FunctionSpec((0.0, -1.0, 0.0, 1.0)), X, theta=2.0)


class TestGaussianThreshold(unittest.TestCase):
    def test_d_is_constant(self):
        model = ModelSpec(X, X, theta=1.0)
        for sigma in (0.2, 1.0, 4.0):
            self.assertAlmostEqual(D(model, sigma), -0.5, delta=1e-9)

    def test_no_transition(self):
        result = sigma_c(ModelSpec(X, X, theta=1.0))
        self.assertIsNone(result.sigma_c)
        self.assertIn("no transition", result.diagnostics)


class TestBistableThreshold(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.result = sigma_c(BISTABLE)

    def test_sigma_c_is_a_simple_root(self):
        s = self.result.sigma_c
        self.assertIsNotNone(s)
        self.assertLess(abs(D(BISTABLE, s)), 1e-9)
        self.assertLess(self.result.d_at_root_slope, 0.0)
        self.assertGreater(self.result.d_at_floor, 0.0)

    def test_root_count_either_side(self):
        s = self.result.sigma_c
        self.assertEqual(find_roots(BISTABLE, 0.5 * s).count, 3)
        self.assertEqual(find_roots(BISTABLE, 2.0 * s).count, 1)

    def test_unique_sign_change(self):
        values = [D(BISTABLE, s) for s in np.geomspace(0.05, 10.0, 30)]
        signs = np.sign(values)
        changes = np.nonzero(np.diff(signs))[0]
        self.assertEqual(len(changes), 1)
        self.assertGreater(signs[0], 0)
        self.assertLess(signs[-1], 0)

    def test_bracket_hint_far_from_root(self):
        # both searches end on the same 2**(k/8) cell, so the roots agree exactly
        for hint in ((5.0, 6.0), (0.05, 0.07), (0.9 * self.result.sigma_c, 1.1 * self.result.sigma_c)):
            other = sigma_c(BISTABLE, hint)
            self.assertEqual(other.sigma_c, self.result.sigma_c)
            self.assertEqual(other.bracket, self.result.bracket)
        lo, hi = self.result.bracket
        self.assertAlmostEqual(math.log2(hi) - math.log2(lo), 0.125, places=12)

    def test_phase_diagram_transition(self):
        grid = np.linspace(0.2, 2.0, 10)
        diagram = phase_diagram(BISTABLE, grid)
        self.assertEqual(diagram.counts[0], 3)
        self.assertEqual(diagram.counts[-1], 1)
        self.assertEqual(len(diagram.transition_estimates), 1)
        self.assertAlmostEqual(diagram.transition_estimates[0], self.result.sigma_c, delta=1e-3)


class TestAnalyticDerivatives(unittest.TestCase):
    def test_sigma_derivative(self):
        sigma, h = 0.8, 1e-4
        central = (D(BISTABLE, sigma + h) - D(BISTABLE, sigma - h)) / (2 * h)
        self.assertAlmostEqual(dD_dsigma(BISTABLE, sigma), central, delta=1e-5 * max(1.0, abs(central)))

    def test_theta_derivative(self):
        sigma, h = 0.8, 1e-4
        up, down = BISTABLE.with_theta(2.0 + h), BISTABLE.with_theta(2.0 - h)
        central = (D(up, sigma) - D(down, sigma)) / (2 * h)
        self.assertAlmostEqual(dD_dtheta(BISTABLE, sigma), central, delta=1e-5 * max(1.0, abs(central)))


class TestCriticalCurve(unittest.TestCase):
    def test_curve_is_increasing(self):
        thetas = (1.25, 1.5, 2.0, 2.5, 3.0, 4.0)
        curve = sigma_star_curve(BISTABLE, thetas)
        self.assertEqual(len(curve.sigma_stars), len(thetas))
        self.assertFalse(curve.failures)
        self.assertTrue(curve.monotone)
        self.assertTrue(all(math.isfinite(s) and s > 0.0 for s in curve.sigma_stars))
        self.assertTrue(all(slope > 0.0 for slope in curve.slopes))

    def test_threaded_curve_matches(self):
        thetas = (1.5, 3.0)
        serial = sigma_star_curve(BISTABLE, thetas)
        threaded = sigma_star_curve(BISTABLE, thetas, threads=2)
        self.assertEqual(threaded.sigma_stars, serial.sigma_stars)
        self.assertEqual(threaded.slopes, serial.slopes)

    def test_invalid_grids(self):
        with self.assertRaises(ValueError):
            sigma_star_curve(BISTABLE, (2.0, 1.0))
        with self.assertRaises(ValueError):
            phase_diagram(BISTABLE, (0.0, 1.0))
        with self.assertRaises(ValueError):
            phase_diagram(BISTABLE, (1.0, 0.5))


if __name__ == "__main__":
    unittest.main()
