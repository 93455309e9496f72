"""
Seeded highway scenarios and constant-velocity kinematics.

Arrivals are a Poisson point process: cumulative sums of exponential gaps with
rate rho. Velocities follow a normal law truncated to [v_min, v_max], sampled by
scipy's inverse-CDF truncnorm and clipped onto the support.
"""

from typing import List, Optional

import numpy as np
from scipy.stats import truncnorm

from scenario.bases import ArrivalModel, Scenario, ScenarioConfig, Vehicle, VelocityModel
from scenario.exceptions import InvalidScenarioError, ScenarioIndexError
from utils import logger
from utils.rng import SeedLike, as_generator


def sample_positions(model: ArrivalModel, seed: SeedLike) -> List[float]:
	"""
	Arrival positions on [a, b]: a + cumulative exponential gaps, cut at the first
	point beyond b. May be empty.
	"""
	rng = as_generator(seed, "positions")
	a, b = model.span
	positions: List[float] = []
	if b <= a:
		return positions

	scale = 1.0 / model.rho
	x = a
	while True:
		x += float(rng.exponential(scale))
		if x > b:
			break
		positions.append(x)
	return positions


def _first_arrivals(model: ArrivalModel, n: int, rng: np.random.Generator) -> List[float]:
	"""First n points of the process started at a, ignoring b."""
	gaps = rng.exponential(1.0 / model.rho, size=n)
	return list(model.span[0] + np.cumsum(gaps))


def sample_velocities(model: VelocityModel, n: int, seed: SeedLike) -> np.ndarray:
	rng = as_generator(seed, "velocities")
	draws = truncnorm.rvs(model.alpha, model.beta, loc=model.mu, scale=model.sigma, size=n, random_state=rng)
	return np.clip(np.atleast_1d(draws).astype(float), model.v_min, model.v_max)


def sample_velocity(model: VelocityModel, seed: SeedLike) -> float:
	return float(sample_velocities(model, 1, seed)[0])


def position_at(vehicle: Vehicle, t: float) -> float:
	assert t >= 0, "time must be non-negative"
	return vehicle.x0 + vehicle.v * t


def relative_gap(scenario: Scenario, i: int, t: float) -> float:
	"""Y_i(t) = X_{i+1}(t) - X_i(t) between consecutive helpers."""
	n = scenario.n_helpers
	if i < 0 or i >= n - 1:
		raise ScenarioIndexError(i, n)
	ahead = scenario.helpers[i + 1]
	behind = scenario.helpers[i]
	return t * (ahead.v - behind.v) + (ahead.x0 - behind.x0)


def trajectories(scenario: Scenario) -> np.ndarray:
	"""Positions on the time grid, shape (N+1, n_points); row 0 is the ego."""
	vehicles = (scenario.ego,) + scenario.helpers
	x0 = np.array([veh.x0 for veh in vehicles], dtype=float)
	v = np.array([veh.v for veh in vehicles], dtype=float)
	return x0[:, None] + v[:, None] * scenario.times[None, :]


def count_overtakes(scenario: Scenario) -> int:
	"""Pairs (ego included) whose longitudinal order flips during [0, T]."""
	vehicles = (scenario.ego,) + scenario.helpers
	end = np.array([position_at(veh, scenario.horizon_T) for veh in vehicles])
	# vehicles are sorted by x0, so any later vehicle ending behind an earlier one overtook it
	flips = end[:, None] > end[None, :]
	return int(np.triu(flips, k=1).sum())


def generate_scenario(config: ScenarioConfig, seed: int) -> Scenario:
	"""
	Builds the scenario for `seed`. With a fixed helper count the helpers are the
	first N arrivals after the ego; without one the PPP count on the span is kept and
	empty draws are retried on fresh sub-streams.
	"""
	a = config.arrival.span[0]

	if config.n_helpers is not None:
		positions = _first_arrivals(config.arrival, config.n_helpers, as_generator(seed, "positions"))
	else:
		positions = []
		for attempt in range(config.max_attempts):
			positions = sample_positions(config.arrival, as_generator(seed, "positions", attempt))
			if positions:
				break
		if not positions:
			raise InvalidScenarioError(f"no arrivals on {config.arrival.span} after {config.max_attempts} attempts", seed)

	velocities = sample_velocities(config.velocity, len(positions) + 1, as_generator(seed, "velocities"))

	ego = Vehicle(id=0, x0=a, v=float(velocities[0]))
	helpers = tuple(
		Vehicle(id=i + 1, x0=float(x), v=float(velocities[i + 1]))
		for i, x in enumerate(positions)
	)

	try:
		scenario = Scenario(
			ego=ego,
			helpers=helpers,
			horizon_T=config.horizon_T,
			dt=config.dt,
			camera=config.camera,
			seed=seed,
			r_max=config.r_max,
			span=config.arrival.span,
		)
	except ValueError as e:
		raise InvalidScenarioError(str(e), seed) from e

	logger.trace(f"scenario seed={seed}: {scenario.n_helpers} helpers, lead at {helpers[-1].x0:.1f} m")
	return scenario


def scenario_to_json(scenario: Scenario) -> str:
	return scenario.model_dump_json(indent=2)


def scenario_from_json(text: str, seed: Optional[int] = None) -> Scenario:
	try:
		return Scenario.model_validate_json(text)
	except ValueError as e:
		raise InvalidScenarioError(str(e), seed) from e
