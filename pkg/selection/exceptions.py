from typing import List

from utils.exceptions import SimulationError


class EmptySelectionError(SimulationError):
	"""A ratio term was requested for a mask that selects nobody"""
	def __init__(self, what: str):
		self.what = what
		super().__init__(f"{what} is undefined for an empty selection")


class NonPositiveDenominatorError(SimulationError):
	def __init__(self, vehicle_index: int, denominator: float):
		self.vehicle_index = vehicle_index
		self.denominator = denominator
		super().__init__(f"Motion-blur denominator of helper {vehicle_index} is {denominator:.6g} (must be > 0)")


class InvalidAggregatesError(SimulationError):
	def __init__(self, reason: str):
		self.reason = reason
		super().__init__(f"Invalid time aggregates: {reason}")


class EnumerationCapError(SimulationError):
	def __init__(self, n_helpers: int, n_cap: int):
		self.n_helpers = n_helpers
		self.n_cap = n_cap
		super().__init__(
			f"Exact enumeration is capped at N={n_cap} helpers (got N={n_helpers}); "
			f"use a baseline strategy or pre-filter the candidates"
		)


class DinkelbachConvergenceError(SimulationError):
	def __init__(self, k_max: int, trace: List):
		self.k_max = k_max
		self.trace = trace
		last = trace[-1] if trace else None
		detail = f", last eta={last.eta:.6g}, F={last.F_value:.6g}" if last is not None else ""
		super().__init__(f"Dinkelbach did not converge within {k_max} iterations{detail}")


class UnknownStrategyError(SimulationError):
	def __init__(self, strategy: str, known: List[str]):
		self.strategy = strategy
		self.known = known
		super().__init__(f"Unknown strategy '{strategy}', expected one of {known}")
