"""多起点调度与起点扰动。"""
import numpy as np
import pytest

from core.engine import RestartEngine, RestartOutcome
from core.errors import AllRestartsFailed, NonFiniteState
from core.variants import NU, POS, RAW, UNIT, clamp_to_domain, perturb_values, pick_best, restart_starts


def _ok(index, x0):
    return RestartOutcome(index=index, x=x0, loglik=-float(np.sum(x0 ** 2)), converged=True)


class TestRestartEngine:
    def test_results_sorted_by_index(self):
        starts = [np.array([float(k)]) for k in range(6)]
        outcomes = RestartEngine(_ok, threads=3).run(starts)
        assert [o.index for o in outcomes] == list(range(6))

    def test_failed_restart_is_skipped(self):
        def run_one(index, x0):
            if index == 1:
                raise NonFiniteState(4)
            return _ok(index, x0)

        outcomes = RestartEngine(run_one).run([np.zeros(1), np.ones(1), np.ones(1)])
        assert not outcomes[1].ok
        assert outcomes[1].error["type"] == "NonFiniteState"
        assert outcomes[0].ok and outcomes[2].ok

    def test_fail_mode_aborts(self):
        def run_one(index, x0):
            return RestartOutcome(index=index, error={"message": "boom"}) if index else _ok(index, x0)

        with pytest.raises(AllRestartsFailed):
            RestartEngine(run_one, degradation="fail").run([np.zeros(1), np.zeros(1)])

    def test_all_failed(self):
        with pytest.raises(AllRestartsFailed) as err:
            RestartEngine(lambda k, x: RestartOutcome(index=k)).run([np.zeros(1)] * 2)
        assert len(err.value.failures) == 2

    def test_retries(self):
        calls = []

        def run_one(index, x0):
            calls.append(index)
            if len(calls) == 1:
                raise ArithmeticError("overflow")
            return _ok(index, x0)

        outcomes = RestartEngine(run_one, max_retries=2).run([np.zeros(1)])
        assert outcomes[0].ok
        assert calls == [0, 0]

    def test_bad_degradation(self):
        with pytest.raises(ValueError):
            RestartEngine(_ok, degradation="ignore")


class TestVariants:
    KINDS = np.array([RAW, POS, UNIT, NU])

    def test_first_start_is_the_initial_value(self):
        values = np.array([0.3, 1.0, 0.9, 8.0])
        starts = restart_starts(values, self.KINDS, 4, 0.25, seed=0)
        assert len(starts) == 4
        np.testing.assert_array_equal(starts[0], values)
        assert not np.array_equal(starts[1], starts[2])

    def test_starts_are_reproducible(self):
        values = np.array([0.3, 1.0, 0.9, 8.0])
        a = restart_starts(values, self.KINDS, 3, 0.25, seed=7)
        b = restart_starts(values, self.KINDS, 3, 0.25, seed=7)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_relative_perturbation_bounds(self):
        values = np.array([2.0, 1.0, 0.5, 10.0])
        out = perturb_values(values, self.KINDS, 0.5, np.random.default_rng(1))
        assert np.all(np.abs(out / values - 1.0) <= 0.5)

    def test_clamp_to_domain(self):
        out = clamp_to_domain(np.array([-5.0, -1.0, 1.2, 1.5]), self.KINDS)
        assert out[0] == -5.0
        assert out[1] > 0
        assert out[2] < 1
        assert out[3] > 2

    def test_pick_best_breaks_ties_by_index(self):
        outcomes = [RestartOutcome(index=k, loglik=ll) for k, ll in enumerate([-3.0, -1.0, -1.0])]
        assert pick_best(outcomes).index == 1
