import io
import os
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

from main import main
from src.config.job import JobConfig, SimulationParams
from src.config.settings import Settings
from src.core.models import FunctionSpec, ModelSpec
from src.core.pipeline import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, output_prefix, run_job
from src.services.output_service import load_csv, load_json

X = FunctionSpec((0.0, 1.0))
GAUSSIAN = ModelSpec(X, X, theta=1.0, description="gaussian")
BISTABLE = ModelSpec(FunctionSpec((0.0, -1.0, 0.0, 1.0)), X, theta=2.0)
CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs", "jobs")


class TestRunJob(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.settings = Settings(output_dir=self.tmp.name)

    def test_audit_writes_json(self):
        cfg = JobConfig("audit", GAUSSIAN, format="json", source="gaussian_audit.json")
        outcome = run_job(cfg, self.settings)
        self.assertEqual(outcome.exit_code, EXIT_OK)
        self.assertEqual(outcome.paths, [os.path.join(self.tmp.name, "gaussian_audit_audit.json")])
        data = load_json(outcome.paths[0])
        self.assertTrue(data["result"]["all_hold"])
        self.assertEqual(data["config"]["command"], "audit")
        self.assertIn("numerics", data["config"])

    def test_critical_curve_rows(self):
        prefix = os.path.join(self.tmp.name, "curve")
        cfg = JobConfig("critical-curve", BISTABLE, output=prefix, theta_grid=(1.5, 2.0, 3.0))
        outcome = run_job(cfg, self.settings)
        self.assertEqual(outcome.exit_code, EXIT_OK)
        rows = load_csv(prefix + ".csv")
        self.assertEqual(rows[0], ["theta", "sigma_star"])
        self.assertEqual(len(rows), 4)
        self.assertTrue(load_json(prefix + ".json")["result"]["monotone"])

    def test_numerical_failure_exit_code(self):
        unstable = ModelSpec(FunctionSpec((0.0, 1.0, 0.0, -1.0)), X, theta=2.0)
        cfg = JobConfig("critical", unstable, output=os.path.join(self.tmp.name, "bad"))
        with redirect_stderr(io.StringIO()) as err:
            outcome = run_job(cfg, self.settings)
        self.assertEqual(outcome.exit_code, EXIT_NUMERICAL)
        self.assertIn("NotNormalizable", outcome.message)
        self.assertIn("Numerical failure", err.getvalue())
        self.assertEqual(os.listdir(self.tmp.name), [])

    def test_bad_parameters_exit_code(self):
        cfg = JobConfig("critical-curve", BISTABLE, output=os.path.join(self.tmp.name, "bad"), theta_grid=(2.0, 1.0))
        with redirect_stderr(io.StringIO()):
            outcome = run_job(cfg, self.settings)
        self.assertEqual(outcome.exit_code, EXIT_CONFIG)

    def test_output_prefix(self):
        cfg = JobConfig("roots", BISTABLE, sigma=0.3, source="/jobs/bistable_roots.json")
        self.assertEqual(output_prefix(cfg, self.settings), os.path.join(self.tmp.name, "bistable_roots_roots"))
        self.assertEqual(output_prefix(cfg.with_overrides(output="x/y"), self.settings), "x/y")


class TestReproducibility(unittest.TestCase):
    """Artifacts are byte-identical across reruns and thread counts."""

    def run_twice_each(self, cfg):
        outputs = []
        for threads in (1, 4, 1, 4):
            with tempfile.TemporaryDirectory() as tmp:
                outcome = run_job(cfg.with_overrides(threads=threads), Settings(output_dir=tmp))
                self.assertEqual(outcome.exit_code, EXIT_OK, outcome.message)
                files = {}
                for path in outcome.paths:
                    with open(path, "rb") as f:
                        files[os.path.basename(path)] = f.read()
                outputs.append(files)
        for other in outputs[1:]:
            self.assertEqual(other, outputs[0])
        return outputs[0]

    def test_phase_diagram(self):
        cfg = JobConfig("phase-diagram", BISTABLE, sigma_grid=(0.4, 0.8, 1.6), source="det.json")
        files = self.run_twice_each(cfg)
        self.assertEqual(sorted(files), ["det_phase-diagram.csv", "det_phase-diagram.json"])

    def test_critical_curve(self):
        cfg = JobConfig("critical-curve", BISTABLE, theta_grid=(1.5, 2.0, 3.0), source="det.json")
        self.run_twice_each(cfg)

    def test_simulate(self):
        sim = SimulationParams(n=500, dt=0.01, t_burn=1.0, t_sample=1.0, seed=3)
        cfg = JobConfig("simulate", BISTABLE, sigma=0.5, simulation=sim, source="det.json")
        files = self.run_twice_each(cfg)
        self.assertIn(b'"seed": 3', files["det_simulate.json"])


class TestShippedJobs(unittest.TestCase):
    def run_shipped(self, name):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        prefix = os.path.join(tmp.name, "out")
        with redirect_stdout(io.StringIO()):
            code = main(["--config", os.path.join(CONFIG_DIR, name), "--output", prefix])
        self.assertEqual(code, EXIT_OK)
        return load_json(prefix + ".json")["result"]

    def test_quintic_roots(self):
        result = self.run_shipped("quintic_roots.json")
        self.assertEqual(len(result["roots"]), 5)

    def test_multiwell_check(self):
        result = self.run_shipped("multiwell_check.json")
        estimate = result["upper_estimate"]
        self.assertLessEqual(estimate["scan_estimate"], estimate["bound"] + 1e-3)
        self.assertTrue(result["vainilla"]["all_pass"])
        self.assertIsNone(result["c2fg"]["witness1"])
        self.assertIsNone(result["c2fg"]["witness2"])


class TestMain(unittest.TestCase):
    def test_missing_config_file(self):
        with redirect_stderr(io.StringIO()) as err:
            code = main(["--config", "does-not-exist.json"])
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("Configuration error", err.getvalue())

    def test_shipped_audit_job(self):
        with tempfile.TemporaryDirectory() as tmp:
            prefix = os.path.join(tmp, "audit")
            with redirect_stdout(io.StringIO()) as out:
                code = main(["--config", os.path.join(CONFIG_DIR, "gaussian_audit.json"), "--output", prefix])
            self.assertEqual(code, EXIT_OK)
            self.assertIn("Job completed successfully", out.getvalue())
            self.assertTrue(os.path.exists(prefix + ".json"))

    def test_missing_sigma_for_roots(self):
        with redirect_stderr(io.StringIO()):
            code = main(["roots", "--config", os.path.join(CONFIG_DIR, "gaussian_audit.json")])
        self.assertEqual(code, EXIT_CONFIG)


if __name__ == "__main__":
    unittest.main()
