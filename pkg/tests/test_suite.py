"""
Test Suite Runner

Collects every husrelay test module. Acceptance-size sweeps are skipped unless
HUSRELAY_SLOW=1 is set.
"""

import sys
import unittest
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

TEST_MODULES = [
    "tests.test_model",
    "tests.test_channel",
    "tests.test_embedded_solver",
    "tests.test_planner",
    "tests.test_comparators",
    "tests.test_cli",
]


def run_tests():
    """Run all tests"""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()

    for name in TEST_MODULES:
        suite.addTests(loader.loadTestsFromName(name))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return result.wasSuccessful()


if __name__ == '__main__':
    success = run_tests()
    sys.exit(0 if success else 1)
