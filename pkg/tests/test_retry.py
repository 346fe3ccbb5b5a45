import unittest

from src.core.errors import WindowTooSmall
from src.core.parallel import parallel_map
from src.core.retry import retry


class TestRetry(unittest.TestCase):
    def test_value_grows_until_success(self):
        seen = []

        def attempt(radius):
            seen.append(radius)
            if radius < 3.0:
                raise WindowTooSmall("too small")
            return radius

        self.assertEqual(retry(attempt, (WindowTooSmall,), max_attempts=5, initial=1.0), 4.0)
        self.assertEqual(seen, [1.0, 2.0, 4.0])

    def test_last_error_is_raised(self):
        calls = []

        def attempt(radius):
            calls.append(radius)
            raise WindowTooSmall(f"radius {radius}")

        with self.assertRaises(WindowTooSmall) as ctx:
            retry(attempt, (WindowTooSmall,), max_attempts=3, initial=0.5, growth_factor=1.5)
        self.assertEqual(len(calls), 3)
        self.assertIn("1.125", str(ctx.exception))

    def test_other_errors_pass_through(self):
        def attempt(_):
            raise KeyError("boom")

        with self.assertRaises(KeyError):
            retry(attempt, (WindowTooSmall,), max_attempts=4)


class TestParallelMap(unittest.TestCase):
    def test_order_preserved(self):
        items = list(range(20))
        self.assertEqual(parallel_map(lambda x: x * x, items, threads=4), [x * x for x in items])

    def test_single_thread(self):
        self.assertEqual(parallel_map(str, (1, 2), threads=1), ["1", "2"])
        self.assertEqual(parallel_map(str, [], threads=3), [])


if __name__ == "__main__":
    unittest.main()
