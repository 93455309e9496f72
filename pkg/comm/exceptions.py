from typing import List

from utils.exceptions import SimulationError


class PoolExhaustedError(SimulationError):
	def __init__(self, w_T: float):
		self.w_T = w_T
		super().__init__(f"Resource pool holds {w_T:.6g} RBs; at least one is needed")


class LinkDeadError(SimulationError):
	"""Energy is unbounded once every packet is lost"""
	def __init__(self, delta: float):
		self.delta = delta
		super().__init__(f"Link error probability is {delta:.6g}; energy per delivered bit is unbounded")


class InfeasibleBudgetError(SimulationError):
	def __init__(self, M: int, P_min: float, P_T: float):
		self.M = M
		self.P_min = P_min
		self.P_T = P_T
		super().__init__(f"{M} vehicles at the power floor {P_min:.6g} W exceed the budget P_T={P_T:.6g} W")


class AllocationConvergenceError(SimulationError):
	def __init__(self, k_max: int, trace):
		self.k_max = k_max
		self.trace = trace
		outer: List[dict] = trace.outer if trace is not None else []
		detail = f", last eta={outer[-1]['eta']:.6g}, F={outer[-1]['F']:.6g}" if outer else ""
		super().__init__(f"Allocation did not converge within {k_max} Dinkelbach iterations{detail}")
