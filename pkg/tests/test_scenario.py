import numpy as np
import pytest
from pydantic import ValidationError

from scenario.bases import ArrivalModel, ScenarioConfig, Vehicle, VelocityModel
from scenario.exceptions import ScenarioIndexError
from scenario.generator import (count_overtakes, generate_scenario, position_at, relative_gap, sample_positions,
								sample_velocities, sample_velocity, scenario_from_json, scenario_to_json, trajectories)
from tests.conftest import make_scenario


class TestArrivals:

	def test_zero_length_span_is_empty(self):
		assert sample_positions(ArrivalModel(rho=0.01, span=(0.0, 0.0)), 3) == []

	def test_positions_increase_within_span(self):
		positions = sample_positions(ArrivalModel(rho=0.05, span=(100.0, 600.0)), 42)
		assert positions
		assert np.all(np.diff(positions) > 0)
		assert positions[0] >= 100.0 and positions[-1] <= 600.0

	def test_same_seed_same_positions(self):
		model = ArrivalModel()
		assert sample_positions(model, 9) == sample_positions(model, 9)

	def test_mean_count_matches_rate(self):
		"""Mean count over 4000 seeds lies within 3 standard errors of rho*(b-a) = 10."""
		model = ArrivalModel(rho=0.01, span=(0.0, 1000.0))
		counts = np.array([len(sample_positions(model, seed)) for seed in range(4000)])
		assert abs(counts.mean() - model.mean_count) < 3.0 * np.sqrt(model.mean_count / len(counts))

	def test_reversed_span_rejected(self):
		with pytest.raises(ValidationError):
			ArrivalModel(span=(10.0, 0.0))

	def test_negative_span_start_rejected(self):
		with pytest.raises(ValidationError):
			ArrivalModel(span=(-50.0, 1000.0))


class TestVelocities:

	def test_support(self):
		v = sample_velocities(VelocityModel(), 10000, 1)
		assert v.min() >= 20.0 and v.max() <= 40.0

	def test_symmetric_truncation_keeps_mean(self):
		v = sample_velocities(VelocityModel(mu=30.0, sigma=5.0, v_min=20.0, v_max=40.0), 100000, 2)
		assert abs(v.mean() - 30.0) < 0.05

	def test_degenerate_sigma(self):
		v = sample_velocities(VelocityModel(mu=30.0, sigma=1e-9), 100, 3)
		np.testing.assert_allclose(v, 30.0, atol=1e-6)

	def test_single_draw_support(self):
		draws = [sample_velocity(VelocityModel(), seed) for seed in range(500)]
		assert min(draws) >= 20.0 and max(draws) <= 40.0

	def test_single_draw_degenerate_sigma(self):
		assert sample_velocity(VelocityModel(mu=30.0, sigma=1e-9), 4) == pytest.approx(30.0, abs=1e-6)

	def test_single_draw_is_deterministic(self):
		assert sample_velocity(VelocityModel(), 7) == sample_velocity(VelocityModel(), 7)
		assert isinstance(sample_velocity(VelocityModel(), 7), float)

	def test_inverted_bounds_rejected(self):
		with pytest.raises(ValidationError):
			VelocityModel(v_min=40.0, v_max=20.0)


class TestKinematics:

	def test_position_at(self):
		vehicle = Vehicle(id=1, x0=100.0, v=30.0)
		assert position_at(vehicle, 0.0) == 100.0
		assert position_at(vehicle, 2.0) == 160.0
		assert position_at(Vehicle(id=2, x0=0.0, v=0.0), 7.5) == 0.0

	def test_relative_gap(self):
		scenario = make_scenario([10.0, 60.0], [30.0, 32.0], horizon_T=10.0, dt=0.1)
		assert relative_gap(scenario, 0, 10.0) == pytest.approx(70.0)

	def test_equal_velocities_keep_gap(self):
		scenario = make_scenario([10.0, 60.0], [30.0, 30.0], horizon_T=10.0, dt=0.1)
		gaps = [relative_gap(scenario, 0, t) for t in scenario.times]
		np.testing.assert_allclose(gaps, 50.0)

	def test_gap_matches_trajectories(self, scenario):
		X = trajectories(scenario)
		for i in range(scenario.n_helpers - 1):
			for point, t in enumerate(scenario.times):
				assert relative_gap(scenario, i, t) == pytest.approx(X[i + 2, point] - X[i + 1, point], abs=1e-12)

	def test_gap_index_out_of_range(self):
		scenario = make_scenario([10.0, 60.0], [30.0, 30.0])
		with pytest.raises(ScenarioIndexError):
			relative_gap(scenario, 1, 0.0)

	def test_overtakes_are_counted(self):
		scenario = make_scenario([10.0], [20.0], ego_v=40.0, horizon_T=10.0, dt=0.1)
		assert count_overtakes(scenario) == 1


class TestScenario:

	def test_generated_scenario_is_ordered(self, scenario):
		assert scenario.n_helpers == 8
		positions = [scenario.ego.x0] + list(scenario.helper_positions())
		assert np.all(np.diff(positions) > 0)
		assert len(scenario.times) == scenario.n_steps + 1 == 101

	def test_same_seed_same_scenario(self, scenario_config):
		assert generate_scenario(scenario_config, 5) == generate_scenario(scenario_config, 5)
		assert generate_scenario(scenario_config, 5) != generate_scenario(scenario_config, 6)

	def test_poisson_count_when_unbounded(self):
		scenario = generate_scenario(ScenarioConfig(n_helpers=None), 4)
		assert scenario.n_helpers >= 1
		assert scenario.helpers[-1].x0 <= 1000.0

	def test_helpers_must_be_ahead(self):
		with pytest.raises(ValidationError):
			make_scenario([50.0, 20.0], [30.0, 30.0])

	def test_grid_must_divide_horizon(self):
		with pytest.raises(ValidationError):
			make_scenario([50.0], [30.0], horizon_T=1.0, dt=0.3)

	def test_lead_range_clipped_to_span(self):
		scenario = make_scenario([50.0], [30.0], r_max=150.0, span=(0.0, 100.0))
		assert scenario.lead_range == 100.0

	def test_json_export(self, scenario):
		assert scenario_from_json(scenario_to_json(scenario)) == scenario
