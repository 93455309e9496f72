import numpy as np
import pytest

from scenario.bases import CameraConstants, Scenario, ScenarioConfig, Vehicle
from scenario.generator import generate_scenario
from selection.objective import TimeAggregates


def make_scenario(positions, velocities, ego_v=30.0, horizon_T=1.0, dt=0.5, r_max=150.0, **kwargs) -> Scenario:
	"""Hand-built scenario: ego at x=0, helpers at `positions` with `velocities`."""
	helpers = tuple(Vehicle(id=i + 1, x0=float(x), v=float(v)) for i, (x, v) in enumerate(zip(positions, velocities)))
	return Scenario(ego=Vehicle(id=0, x0=0.0, v=ego_v), helpers=helpers, horizon_T=horizon_T, dt=dt, r_max=r_max,
					**kwargs)


def make_aggregates(xbar, Rbar, vterm=None, velocities=None, n_points=1, camera=None) -> TimeAggregates:
	xbar = np.asarray(xbar, dtype=float)
	zeros = np.zeros_like(xbar)
	return TimeAggregates(
		xbar=xbar,
		Rbar=np.asarray(Rbar, dtype=float),
		vterm=zeros if vterm is None else np.asarray(vterm, dtype=float),
		velocities=zeros if velocities is None else np.asarray(velocities, dtype=float),
		n_points=n_points,
		camera=camera or CameraConstants(),
	)


@pytest.fixture
def scenario_config() -> ScenarioConfig:
	return ScenarioConfig(n_helpers=8)


@pytest.fixture
def scenario(scenario_config) -> Scenario:
	return generate_scenario(scenario_config, 11)


@pytest.fixture
def aggregates(scenario) -> TimeAggregates:
	return TimeAggregates.from_scenario(scenario)
