import math
import os
import tempfile
import unittest

import numpy as np

from src import __version__
from src.services.output_service import load_csv, load_json, save_csv, save_json


class TestOutputService(unittest.TestCase):
    def test_json_payload_has_version_and_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "nested", "run.json")
            save_json(path, {"sigma_c": 0.75, "bracket": (0.5, 1.0)}, {"command": "critical"})
            data = load_json(path)
            self.assertEqual(data["version"], __version__)
            self.assertEqual(data["config"], {"command": "critical"})
            self.assertEqual(data["result"]["bracket"], [0.5, 1.0])

    def test_non_finite_values_become_null(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "run.json")
            save_json(path, {"I": [1.0, math.inf, math.nan], "count": np.int64(3), "x": np.float64(0.5)}, {})
            result = load_json(path)["result"]
            self.assertEqual(result["I"], [1.0, None, None])
            self.assertEqual(result["count"], 3)
            self.assertEqual(result["x"], 0.5)

    def test_csv_header_comments(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "run.csv")
            save_csv(path, ["theta", "sigma_star"], [[1.5, 0.6], [2.0, 0.8]], {"command": "critical-curve"})
            with open(path, "r", encoding="utf-8") as f:
                lines = f.read().splitlines()
            self.assertEqual(lines[0], f"# version: {__version__}")
            self.assertTrue(lines[1].startswith("# config: "))
            self.assertIn('"command": "critical-curve"', lines[1])
            rows = load_csv(path)
            self.assertEqual(rows[0], ["theta", "sigma_star"])
            self.assertEqual(rows[2], ["2.0", "0.8"])

    def test_write_replaces_existing_file_without_leftovers(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "run.json")
            save_json(path, {"value": 1}, {})
            save_json(path, {"value": 2}, {})
            self.assertEqual(load_json(path)["result"]["value"], 2)
            self.assertEqual(os.listdir(tmp), ["run.json"])

    def test_failed_write_leaves_no_temp_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "run.json")
            with self.assertRaises(TypeError):
                save_json(path, {"value": object()}, {})
            self.assertFalse(os.path.exists(path))
            self.assertEqual(os.listdir(tmp), [])


if __name__ == "__main__":
    unittest.main()
