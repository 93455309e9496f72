from utils.exceptions import SimulationError


class InvalidScenarioError(SimulationError):
	"""Scenario construction failed (empty helper set, broken ordering, bad grid)"""
	def __init__(self, reason: str, seed: int | None = None):
		self.reason = reason
		self.seed = seed
		suffix = f" (seed {seed})" if seed is not None else ""
		super().__init__(f"Invalid scenario: {reason}{suffix}")


class ScenarioIndexError(SimulationError):
	def __init__(self, index: int, n_helpers: int):
		self.index = index
		self.n_helpers = n_helpers
		super().__init__(f"Helper index {index} out of range for a gap query over {n_helpers} helpers (valid: 0..{n_helpers - 2})")
