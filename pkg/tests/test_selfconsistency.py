import unittest

import numpy as np
from scipy.optimize import brentq

from src.core.errors import NotApplicable
from src.core.models import DiffusionSpec, FunctionSpec, ModelSpec
from src.selfconsistency import F, G, dFdm, find_roots, interior_roots, laplace_limit, series_coefficients

X = FunctionSpec((0.0, 1.0))
CUBIC = FunctionSpec((0.0, -1.0, 0.0, 1.0))
QUINTIC = FunctionSpec((0.0, 4.0, 0.0, -5.0, 0.0, 1.0))
SEVEN_ROOT = FunctionSpec((0.0, -0.9, 0.0, 7.0, 0.0, -16.1, 0.0, 10.0))

GAUSSIAN = ModelSpec(X, X, theta=1.0)
BISTABLE = ModelSpec(CUBIC, X, theta=2.0)
RATIONAL = ModelSpec(CUBIC, X, DiffusionSpec(FunctionSpec((1.0, 0.0, 1.0)), 1.0), 2.0)


class TestMomentFunctions(unittest.TestCase):
    def test_gaussian_closed_form(self):
        for theta in (0.5, 1.0, 3.0):
            model = GAUSSIAN.with_theta(theta)
            for sigma in (0.4, 1.5):
                for m in np.linspace(-2.0, 2.0, 9):
                    self.assertAlmostEqual(F(model, sigma, m), -m / (1 + theta), delta=1e-8)

    def test_self_consistency_matches_first_moment(self):
        # integration by parts: E[V' + theta P'] = theta m for every diffusion
        for model in (BISTABLE, RATIONAL):
            for sigma in (0.3, 1.0):
                for m in (-0.7, 0.2, 1.1):
                    self.assertAlmostEqual(G(model, sigma, m), F(model, sigma, m), delta=1e-8)

    def test_slope_matches_finite_difference(self):
        h = 1e-4
        for model in (BISTABLE, RATIONAL):
            for m in (0.0, 0.35):
                central = (F(model, 0.7, m + h) - F(model, 0.7, m - h)) / (2 * h)
                self.assertAlmostEqual(dFdm(model, 0.7, m), central, delta=1e-6)

    def test_gaussian_slope(self):
        self.assertAlmostEqual(dFdm(GAUSSIAN, 1.0, 0.3), -0.5, delta=1e-9)

    def test_symmetric_model_is_odd_in_m(self):
        for m in (0.1, 0.8):
            self.assertAlmostEqual(F(BISTABLE, 0.5, -m), -F(BISTABLE, 0.5, m), delta=1e-10)
        self.assertAlmostEqual(F(BISTABLE, 0.5, 0.0), 0.0, delta=1e-10)


class TestFindRoots(unittest.TestCase):
    def test_gaussian_single_root(self):
        report = find_roots(GAUSSIAN, 1.0)
        self.assertEqual(report.count, 1)
        self.assertAlmostEqual(report.roots[0].m, 0.0, delta=1e-9)
        self.assertEqual(report.roots[0].slope_sign, -1)

    def test_bistable_below_threshold(self):
        report = find_roots(BISTABLE, 0.3)
        self.assertEqual(report.count, 3)
        low, mid, high = report.locations
        self.assertAlmostEqual(low, -high, delta=1e-9)
        self.assertAlmostEqual(mid, 0.0, delta=1e-9)
        self.assertEqual(report.roots[1].slope_sign, 1)
        for root in report.roots:
            self.assertLess(root.residual, 1e-9)

    def test_quintic_roots_approach_drift_zeros(self):
        # theta = theta* + 1 with theta* = -min V'' = 7.25
        model = ModelSpec(QUINTIC, X, theta=8.25)
        zeros = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        errors = []
        for sigma in (0.2, 0.1, 0.05):
            report = find_roots(model, sigma, grid_points=800)
            self.assertEqual(report.count, 5, f"sigma={sigma}")
            self.assertEqual([r.slope_sign for r in report.roots], [-1, 1, -1, 1, -1])
            errors.append(float(np.max(np.abs(np.array(report.locations) - zeros))))
        self.assertLess(errors[1], errors[0])
        self.assertLess(errors[2], errors[1])
        self.assertLess(errors[2], 0.1)

    def test_non_positive_sigma(self):
        with self.assertRaises(ValueError):
            find_roots(GAUSSIAN, -1.0)


class TestLaplaceLimit(unittest.TestCase):
    def test_gaussian_limit(self):
        for m in (-1.0, 0.5):
            self.assertAlmostEqual(laplace_limit(GAUSSIAN, m), -m / 2.0, places=10)

    def test_bistable_limit(self):
        # mode solves x^3 + x = 1 at theta = 2, m = 0.5
        x = brentq(lambda t: t ** 3 + t - 1.0, 0.0, 1.0, xtol=1e-15)
        self.assertAlmostEqual(laplace_limit(BISTABLE, 0.5), -(x ** 3 - x) / 2.0, places=9)

    def test_small_noise_convergence(self):
        model = ModelSpec(QUINTIC, X, theta=8.25)
        for m in (0.3, 1.5):
            limit = laplace_limit(model, m)
            errors = [abs(F(model, sigma, m) - limit) for sigma in (0.2, 0.1, 0.05)]
            self.assertLess(errors[1], errors[0])
            self.assertLess(errors[2], errors[1])


class TestSeriesCoefficients(unittest.TestCase):
    def test_bistable_coefficients_decrease(self):
        for sigma in (0.3, 1.0, 3.0):
            with self.subTest(sigma=sigma):
                series = series_coefficients(BISTABLE, sigma, n_max=8)
                self.assertEqual(len(series.I_scaled), 8)
                self.assertTrue(all(b < a for a, b in zip(series.I_scaled, series.I_scaled[1:])))
                self.assertAlmostEqual(series.x_star, 1.0, places=10)
                # V' has no zero inside (0, x*), so the middle part vanishes
                self.assertTrue(all(abs(b) < 1e-15 for _, b, _ in series.parts))
                self.assertTrue(all(check < 1e-8 for check in series.even_checks))

    def test_asymmetric_model_rejected(self):
        model = ModelSpec(FunctionSpec((0.1, -1.0, 0.0, 1.0)), X, theta=2.0)
        with self.assertRaises(NotApplicable):
            series_coefficients(model, 0.5)

    def test_interior_roots_mirrored(self):
        model = ModelSpec(SEVEN_ROOT, X, theta=3.0)
        np.testing.assert_allclose(interior_roots(model, 1.0), [-0.6, -0.5, 0.5, 0.6], atol=1e-12)
        self.assertEqual(interior_roots(BISTABLE, 1.0), ())


if __name__ == "__main__":
    unittest.main()
