import itertools

import numpy as np
import pytest

from scenario.bases import CameraConstants, ScenarioConfig
from scenario.generator import generate_scenario
from selection.baselines import select_baseline
from selection.exceptions import DinkelbachConvergenceError, EnumerationCapError, UnknownStrategyError
from selection.objective import (ObjectiveWeights, QcqpForm, SelectionMask, TimeAggregates, assemble_qcqp,
								 composite_value)
from selection.selector import (default_multipliers, dinkelbach_select, dual_bound, dual_function, mask_count,
								proximity_mask, snapshot_select, solve_subproblem_exact)
from tests.conftest import make_aggregates, make_scenario
from utils.rng import derive_seed


def _random_aggregates(seed: int, n: int) -> TimeAggregates:
	return TimeAggregates.from_scenario(generate_scenario(ScenarioConfig(n_helpers=n), seed))


def _feasible_values(form: QcqpForm, M: int) -> np.ndarray:
	values = []
	for size in range(1, M + 1):
		for combo in itertools.combinations(range(form.n), size):
			s = np.zeros(form.n)
			s[list(combo)] = 1.0
			values.append(form.value(s))
	return np.array(values)


class TestSubproblem:

	def test_single_helper(self):
		agg = make_aggregates([10.0], [100.0])
		form = assemble_qcqp(agg, agg.camera, 0.3, 1)
		mask, value = solve_subproblem_exact(form, 1)
		assert mask.to_list() == [1]
		assert value == pytest.approx(form.value(np.ones(1)))

	def test_double_loop_oracle(self):
		agg = _random_aggregates(7, 10)
		form = assemble_qcqp(agg, agg.camera, 0.02, 2)
		best_value, best_mask = np.inf, None
		for i in range(10):
			for j in range(i, 10):
				s = np.zeros(10)
				s[i] = s[j] = 1.0
				value = form.value(s)
				if value < best_value:
					best_value, best_mask = value, s
		mask, value = solve_subproblem_exact(form, 2)
		assert value == pytest.approx(best_value, rel=1e-12)
		np.testing.assert_array_equal(mask.as_float(), best_mask)

	def test_large_eta_maximizes_range(self):
		agg = make_aggregates([1.0, 2.0, 3.0, 4.0, 5.0], [100.0, 500.0, 300.0, 400.0, 200.0])
		form = assemble_qcqp(agg, agg.camera, 1e9, 2)
		mask, _ = solve_subproblem_exact(form, 2)
		assert mask.indices == (1, 3)

	def test_ties_go_to_lexicographically_smallest(self):
		form = QcqpForm(P0=np.zeros((3, 3)), q0=np.zeros(3), h0=0.0, M=2)
		mask, value = solve_subproblem_exact(form, 2)
		assert value == 0.0
		assert mask.to_list() == [0, 0, 1]

	def test_enumeration_cap(self):
		form = QcqpForm(P0=np.eye(3), q0=np.zeros(3), h0=0.0, M=1)
		with pytest.raises(EnumerationCapError):
			solve_subproblem_exact(form, 1, n_cap=2)

	def test_mask_count(self):
		assert mask_count(10, 2) == 55
		assert mask_count(3, 5) == 7


class TestDinkelbach:

	@pytest.mark.parametrize("M", [1, 2, 3, 4])
	def test_matches_exhaustive_ratio(self, M):
		for i in range(10):
			agg = _random_aggregates(derive_seed(21, i), 8)
			ratios = {}
			for size in range(1, M + 1):
				for combo in itertools.combinations(range(8), size):
					mask = SelectionMask.from_indices(combo, 8, M)
					ratios[mask] = composite_value(agg, agg.camera, mask)
			best = min(ratios, key=ratios.get)

			mask, ratio, _ = dinkelbach_select(agg, agg.camera, M)
			assert ratio == pytest.approx(ratios[best], rel=1e-9)
			assert mask == best

	@pytest.mark.parametrize("M", [2, 3, 4])
	def test_multi_helper_optimum_matches_exhaustive(self, M):
		# the visual-range term dominates, so the optimum takes several helpers
		weights = ObjectiveWeights(1.0, 1e12, 1.0)
		for i in range(5):
			agg = _random_aggregates(derive_seed(22, i), 8)
			ratios = {}
			for size in range(1, M + 1):
				for combo in itertools.combinations(range(8), size):
					mask = SelectionMask.from_indices(combo, 8, M)
					ratios[mask] = composite_value(agg, agg.camera, mask, weights)
			best = min(ratios, key=ratios.get)

			mask, ratio, _ = dinkelbach_select(agg, agg.camera, M, weights=weights)
			assert mask.count >= 2
			assert ratio == pytest.approx(ratios[best], rel=1e-9)
			assert mask == best

	def test_tied_pairs_go_to_lexicographically_smallest(self):
		agg = make_aggregates([1.0, 1.0, 1.0], [100.0, 100.0, 100.0])
		mask, ratio, _ = dinkelbach_select(agg, agg.camera, 2, weights=ObjectiveWeights(1.0, 1e4, 1.0))
		assert mask.to_list() == [0, 1, 1]
		assert ratio == pytest.approx(2.0 + 1e4 / 200.0)

	def test_trace_is_monotone(self, aggregates):
		_, _, trace = dinkelbach_select(aggregates, aggregates.camera, 3)
		etas = np.array([state.eta for state in trace])
		assert np.all(np.diff(etas) <= 1e-12 * etas.max())
		assert [state.k for state in trace] == list(range(1, len(trace) + 1))
		for state in trace:
			assert state.F_value <= 1e-9 * max(1.0, abs(state.eta)) * aggregates.camera.zu * aggregates.Rbar.sum()

	def test_single_helper_converges_at_once(self):
		agg = make_aggregates([10.0], [100.0], vterm=[30.0], velocities=[30.0])
		mask, _, trace = dinkelbach_select(agg, agg.camera, 1)
		assert mask.to_list() == [1]
		assert len(trace) <= 2

	def test_far_helper_beats_proximity(self):
		agg = make_aggregates([0.1, 0.1], [1.0, 1000.0])
		mask, ratio, trace = dinkelbach_select(agg, agg.camera, 1)
		assert mask.indices == (1,)
		assert ratio == pytest.approx(0.101)
		assert trace[0].eta == pytest.approx(1.1)

	def test_non_convergence_carries_trace(self):
		agg = make_aggregates([0.1, 0.1], [1.0, 1000.0])
		with pytest.raises(DinkelbachConvergenceError) as info:
			dinkelbach_select(agg, agg.camera, 1, k_max=1)
		assert len(info.value.trace) == 1

	def test_snapshot_selection_is_feasible(self, scenario):
		mask = snapshot_select(scenario, 3)
		assert 1 <= mask.count <= 3


class TestDual:

	def test_indefinite_matrix_gives_minus_infinity(self):
		form = QcqpForm(P0=np.array([[0.0, 1.0], [1.0, 0.0]]), q0=np.ones(2), h0=0.0, M=1)
		g, s_hat = dual_function(form, np.zeros(form.n_constraints))
		assert g == -np.inf
		assert s_hat is None

	def test_positive_definite_at_zero(self):
		form = QcqpForm(P0=np.diag([2.0, 3.0]), q0=np.zeros(2), h0=1.0, M=1)
		g, s_hat = dual_function(form, np.zeros(form.n_constraints))
		assert g == pytest.approx(1.0)
		np.testing.assert_allclose(s_hat, 0.0)

	def test_default_multipliers_give_finite_bound(self, aggregates):
		form = assemble_qcqp(aggregates, aggregates.camera, 0.01, 3)
		g, _ = dual_function(form, default_multipliers(form))
		assert np.isfinite(g)

	def test_bound_never_exceeds_primal(self):
		rng = np.random.default_rng(5)
		for i in range(10):
			agg = _random_aggregates(derive_seed(31, i), 8)
			_, ratio, _ = dinkelbach_select(agg, agg.camera, 3)
			form = assemble_qcqp(agg, agg.camera, ratio, 3)
			primal = float(_feasible_values(form, 3).min())
			scale = max(1.0, np.abs(form.P0).sum() + np.abs(form.q0).sum() + abs(form.h0))

			certificate = dual_bound(form, steps=50)
			assert certificate.bound <= primal + 1e-9 * scale
			assert certificate.feasible_gap >= -1e-9 * scale
			assert np.all(certificate.lam >= 0)

			for _ in range(5):
				lam = default_multipliers(form) * rng.uniform(0.5, 3.0) + rng.uniform(0.0, 1.0, form.n_constraints)
				g, _ = dual_function(form, lam)
				assert g <= primal + 1e-9 * scale

	def test_certificate_export(self, aggregates):
		form = assemble_qcqp(aggregates, aggregates.camera, 0.01, 2)
		data = dual_bound(form, steps=5).to_dict()
		assert set(data) == {"lambda", "bound", "feasible_gap", "iterations"}
		assert len(data["lambda"]) == form.n_constraints


class TestBaselines:

	def test_proximity(self):
		scenario = make_scenario([10.0, 50.0, 90.0], [30.0, 30.0, 30.0])
		assert select_baseline(scenario, 2, "proximity").indices == (0, 1)
		assert proximity_mask(3, 2) == select_baseline(scenario, 2, "proximity")

	def test_min_velocity(self):
		scenario = make_scenario([10.0, 50.0, 90.0], [20.0, 35.0, 25.0])
		assert select_baseline(scenario, 1, "min_velocity").indices == (0,)

	def test_random_is_reproducible(self, scenario):
		first = select_baseline(scenario, 3, "random", seed=4)
		assert first == select_baseline(scenario, 3, "random", seed=4)
		assert first.count == 3

	def test_unknown_strategy(self, scenario):
		with pytest.raises(UnknownStrategyError):
			select_baseline(scenario, 2, "fastest")

	def test_optimized_mask_dominates(self):
		for i in range(10):
			scenario = generate_scenario(ScenarioConfig(n_helpers=8), derive_seed(41, i))
			agg = TimeAggregates.from_scenario(scenario)
			_, ratio, _ = dinkelbach_select(agg, scenario.camera, 3)
			for strategy in ("random", "proximity", "min_velocity"):
				baseline = select_baseline(scenario, 3, strategy, seed=i)
				assert ratio <= composite_value(agg, scenario.camera, baseline) * (1 + 1e-9)
