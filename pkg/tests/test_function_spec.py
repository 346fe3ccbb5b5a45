import math
import unittest

import numpy as np

from src.core.errors import ValidationError
from src.core.models import DiffusionSpec, FunctionSpec, InitLaw, ModelSpec


class TestFunctionSpec(unittest.TestCase):
    def test_polynomial_evaluation(self):
        f = FunctionSpec((0.0, -1.0, 0.0, 1.0))
        self.assertEqual(f(2.0), 6.0)
        np.testing.assert_allclose(f(np.array([-1.0, 0.0, 1.0])), [0.0, 0.0, 0.0])

    def test_trig_phase_and_derivative(self):
        # -0.1 sin(2x) written as a phase-shifted cosine
        f = FunctionSpec((0.0, 1.0), ((-0.1, 2.0, -math.pi / 2),))
        x = 0.37
        self.assertAlmostEqual(f(x), x - 0.1 * math.sin(2 * x), places=14)
        self.assertAlmostEqual(f.derivative()(x), 1.0 - 0.2 * math.cos(2 * x), places=14)

    def test_antiderivative_is_exact(self):
        f = FunctionSpec((1.0, 0.0, 3.0), ((2.0, 0.5),))
        x = 1.7
        expected = x + x ** 3 + 4.0 * math.sin(0.5 * x)
        self.assertAlmostEqual(f.antiderivative(x), expected, places=12)
        self.assertEqual(f.antiderivative(0.0), 0.0)

    def test_parity(self):
        self.assertTrue(FunctionSpec((0.0, -1.0, 0.0, 1.0)).is_odd())
        self.assertFalse(FunctionSpec((0.1, -1.0, 0.0, 1.0)).is_odd())
        self.assertTrue(FunctionSpec((1.0, 0.0, 1.0)).is_even())
        # sin is odd, cos is even
        self.assertTrue(FunctionSpec((0.0,), ((1.0, 3.0, -math.pi / 2),)).is_odd())
        self.assertTrue(FunctionSpec((0.0,), ((1.0, 3.0),)).is_even())

    def test_degree_ignores_trailing_zeros(self):
        f = FunctionSpec((0.0, 2.0, 0.0, 0.0))
        self.assertEqual(f.degree, 1)
        self.assertEqual(f.leading_coefficient, 2.0)

    def test_non_finite_coefficients_rejected(self):
        with self.assertRaises(ValueError):
            FunctionSpec((0.0, math.inf))

    def test_from_dict_rejects_unknown_field(self):
        with self.assertRaises(ValidationError) as ctx:
            FunctionSpec.from_dict({"poly": [0, 1], "coeffs": [1]}, "v_prime")
        self.assertEqual(ctx.exception.field, "v_prime.coeffs")

    def test_from_dict_rejects_bad_trig_term(self):
        with self.assertRaises(ValidationError) as ctx:
            FunctionSpec.from_dict({"poly": [0, 1], "trig": [[1.0]]}, "v_prime")
        self.assertEqual(ctx.exception.field, "v_prime.trig")


class TestModelSpec(unittest.TestCase):
    def test_model_dict_roundtrip(self):
        model = ModelSpec(
            FunctionSpec((0.0, -1.0, 0.0, 1.0)),
            FunctionSpec((0.0, 1.0)),
            DiffusionSpec(FunctionSpec((1.0, 0.0, 1.0)), 1.0),
            theta=2.0,
            description="rational",
        )
        self.assertEqual(ModelSpec.from_dict(model.to_dict()), model)

    def test_missing_theta_names_the_field(self):
        with self.assertRaises(ValidationError) as ctx:
            ModelSpec.from_dict({"v_prime": {"poly": [0, 1]}, "p_prime": {"poly": [0, 1]}})
        self.assertEqual(ctx.exception.field, "model.theta")

    def test_non_positive_theta_rejected(self):
        with self.assertRaises(ValidationError):
            ModelSpec.from_dict({"v_prime": {"poly": [0, 1]}, "p_prime": {"poly": [0, 1]}, "theta": 0})
        with self.assertRaises(ValueError):
            ModelSpec(FunctionSpec((0.0, 1.0)), FunctionSpec((0.0, 1.0)), theta=-1.0)

    def test_wrapped_drift_loads_from_dict(self):
        data = {
            "v_prime": {"kind": "dominating", "base": {"poly": [0, -1, 0, 1]}, "x_star": 1.0},
            "p_prime": {"poly": [0, 1]},
            "theta": 2.0,
        }
        model = ModelSpec.from_dict(data)
        self.assertEqual(model.v_prime.x_star, 1.0)
        self.assertEqual(ModelSpec.from_dict(model.to_dict()), model)

    def test_symmetry_flag(self):
        odd = ModelSpec(FunctionSpec((0.0, -1.0, 0.0, 1.0)), FunctionSpec((0.0, 1.0)))
        shifted = ModelSpec(FunctionSpec((0.1, -1.0, 0.0, 1.0)), FunctionSpec((0.0, 1.0)))
        self.assertTrue(odd.is_symmetric)
        self.assertFalse(shifted.is_symmetric)

    def test_epsilon_must_be_positive(self):
        with self.assertRaises(ValueError):
            DiffusionSpec(FunctionSpec((1.0,)), 0.0)


class TestInitLaw(unittest.TestCase):
    def test_arity_checked(self):
        with self.assertRaises(ValueError):
            InitLaw("uniform", (0.0,))
        with self.assertRaises(ValueError):
            InitLaw("cauchy", (0.0, 1.0))

    def test_params_are_floats(self):
        law = InitLaw("gaussian", (0, 1))
        self.assertEqual(law.params, (0.0, 1.0))


if __name__ == "__main__":
    unittest.main()
