"""Acceptance criteria on the default bench configuration.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary. Criteria 5 to 8 share one sweep over the headline runs.
"""

import pytest

from tabasco import bench
from tabasco.bench import BenchConfig

from conftest import ACCEPTANCE_LINES

CONFIG = BenchConfig()


@pytest.fixture(scope="module")
def runs():
    return bench.run_sweep(CONFIG)


def report(result):
    line = result.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    return result


class TestAcceptance:
    def test_c1_jsd_difference_bound(self):
        result = report(bench.check_bound(CONFIG.bound_pairs))
        assert CONFIG.bound_pairs == 1_000_000
        assert result.passed, result.details
        assert result.seconds < 10.0

    def test_c2_closed_form_jsd(self):
        result = report(bench.check_closed_form(CONFIG.closed_form_vectors))
        assert CONFIG.closed_form_vectors == 10_000
        assert result.passed, result.details

    def test_c3_mixture_recovery(self):
        result = report(bench.check_mixture(CONFIG.mixture_seeds))
        assert CONFIG.mixture_seeds == 20
        assert result.passed, result.details
        assert result.seconds < 5.0

    def test_c4_high_confidence_purity(self):
        result = report(bench.check_purity_gain(CONFIG))
        assert result.passed, result.details["failures"]

    def test_c5_metric_complementarity(self, runs):
        result = report(bench.check_complementarity(runs))
        assert result.passed, result.details

    def test_c6_tail_selection_dominance(self, runs):
        result = report(bench.check_tail_dominance(runs))
        assert result.passed, result.details

    def test_c7_partition_and_determinism(self, runs):
        result = report(bench.check_invariants(runs, CONFIG))
        assert result.passed, result.details["problems"]

    def test_c8_purity_correlation(self, runs):
        result = report(bench.check_purity_correlation(runs, CONFIG))
        assert result.passed, result.details
