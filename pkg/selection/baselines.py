from typing import List

import numpy as np

from scenario.bases import Scenario
from selection.exceptions import UnknownStrategyError
from selection.objective import SelectionMask
from utils.rng import SeedLike, as_generator

BASELINE_STRATEGIES: List[str] = ["random", "proximity", "min_velocity"]


def select_baseline(scenario: Scenario, M: int, strategy: str, seed: SeedLike = 0) -> SelectionMask:
	"""
	Reference selections:
		random       - uniform over the subsets of size min(M, N)
		proximity    - the M helpers nearest to the ego at t=0
		min_velocity - the M slowest helpers at t=0
	Ties keep the lower helper index.
	"""
	n = scenario.n_helpers
	size = min(M, n)

	if strategy == "random":
		rng = as_generator(seed, "baseline")
		chosen = rng.choice(n, size=size, replace=False)
	elif strategy == "proximity":
		gaps = scenario.helper_positions() - scenario.ego.x0
		chosen = np.argsort(gaps, kind="stable")[:size]
	elif strategy == "min_velocity":
		chosen = np.argsort(scenario.helper_velocities(), kind="stable")[:size]
	else:
		raise UnknownStrategyError(strategy, BASELINE_STRATEGIES)

	return SelectionMask.from_indices(chosen, n, M)
