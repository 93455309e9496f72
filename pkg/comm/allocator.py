"""
Power and RB allocation across the selected helpers.

The Dinkelbach driver maximizes total throughput over total energy

	N(P, w) = sum_i R_ch * w_i * (1 - delta_i(P_i))
	D(P)    = sum_i P_i * T / (1 - delta_i(P_i))

through the parametric problem max N - eta*D, solved by Frank-Wolfe over
{P_min <= P_i, sum P <= P_T} x {w >= 0, sum w = w_T}. The per-vehicle sum of
throughput-per-energy ratios is available as a direct Frank-Wolfe objective.
Powers are in watts; delta_i = delta_COL * delta_SEN(P_i), delta_COL fixed by (w_T, M).
"""

import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from comm.bases import AllocationConfig, CommConfig
from comm.channel import (SQRT2, collision_prob, erf_taylor, erf_taylor_derivative, rb_pool, sensing_error_from_q,
						  sensing_q, watts_to_dbm)
from comm.exceptions import AllocationConvergenceError, InfeasibleBudgetError, LinkDeadError
from utils import logger
from utils.rng import SeedLike, as_generator

FEASIBILITY_RTOL = 1e-9
ALLOCATION_STRATEGIES: List[str] = ["proposed", "uniform", "random"]


def default_min_power(P_T: float, M: int) -> float:
	"""Power floor keeping 1/P_i bounded: max(1e-3 * P_T, P_T / (100 M))."""
	return max(1e-3 * P_T, P_T / (100.0 * M))


class Allocation:
	def __init__(self, *, P: np.ndarray, w: np.ndarray):
		P = np.asarray(P, dtype=float)
		w = np.asarray(w, dtype=float)
		assert P.ndim == 1 and P.shape == w.shape, "P and w must be vectors of one length"
		self.P = P
		self.w = w

	@property
	def M(self) -> int:
		return len(self.P)

	def is_feasible(self, P_min: float, P_T: float, w_T: float, rtol: float = FEASIBILITY_RTOL) -> bool:
		return bool(
			np.all(self.P >= P_min * (1.0 - rtol))
			and self.P.sum() <= P_T * (1.0 + rtol)
			and np.all(self.w >= -rtol * w_T)
			and abs(self.w.sum() - w_T) <= rtol * max(1.0, w_T)
		)

	def step_towards(self, vertex: "Allocation", m: float) -> "Allocation":
		return Allocation(P=self.P + m * (vertex.P - self.P), w=self.w + m * (vertex.w - self.w))

	def to_dict(self) -> Dict:
		return {"P": self.P.tolist(), "w": self.w.tolist()}

	def __repr__(self) -> str:
		return f"Allocation(P={np.round(self.P, 6).tolist()}, w={np.round(self.w, 4).tolist()})"


class AllocationProblem:
	"""One allocation instance: the M links, the budgets and the error model."""
	def __init__(self, *, comm: CommConfig, distances: np.ndarray, w_T: Optional[float] = None,
				 P_T: Optional[float] = None, erf_mode: str = "exact", taylor_order: int = 0):
		distances = np.asarray(distances, dtype=float)
		assert distances.ndim == 1 and len(distances) >= 1, "at least one link is required"
		assert np.all(distances > 0), "distances must be positive"
		assert erf_mode in ("exact", "taylor"), f"unknown erf mode '{erf_mode}'"

		self.comm = comm
		self.distances = distances
		self.M = len(distances)
		self.w_T = rb_pool(comm) if w_T is None else float(w_T)
		self.P_T = comm.P_T if P_T is None else float(P_T)
		self.P_min = comm.P_min if comm.P_min is not None else default_min_power(self.P_T, self.M)
		self.erf_mode = erf_mode
		self.taylor_order = taylor_order

		if self.M * self.P_min > self.P_T:
			raise InfeasibleBudgetError(self.M, self.P_min, self.P_T)
		self.delta_col = collision_prob(self.w_T, self.M)

	@classmethod
	def from_config(cls, comm: CommConfig, distances: np.ndarray, config: AllocationConfig,
					w_T: Optional[float] = None, P_T: Optional[float] = None) -> "AllocationProblem":
		return cls(comm=comm, distances=distances, w_T=w_T, P_T=P_T, erf_mode=config.erf_mode,
				   taylor_order=config.taylor_order)

	def q(self, P: np.ndarray) -> np.ndarray:
		return sensing_q(self.comm, watts_to_dbm(P), self.distances)

	def delta(self, P: np.ndarray) -> np.ndarray:
		return self.delta_col * sensing_error_from_q(self.q(P), self.erf_mode, self.taylor_order)

	def delta_gradient(self, P: np.ndarray) -> np.ndarray:
		"""d delta_i / d P_i (watts)."""
		P = np.asarray(P, dtype=float)
		Q = self.q(P)
		dQ_dP = 10.0 / (P * math.log(10.0) * self.comm.sigma_sh * SQRT2)
		if self.erf_mode == "exact":
			dsen_dQ = -np.exp(-Q ** 2) / math.sqrt(math.pi)
		else:
			raw = 0.5 * (1.0 - erf_taylor(Q, self.taylor_order))
			clamped = (raw <= 0.0) | (raw >= 1.0)
			dsen_dQ = np.where(clamped, 0.0, -0.5 * erf_taylor_derivative(Q, self.taylor_order))
		return self.delta_col * dsen_dQ * dQ_dP

	def _survival(self, P: np.ndarray) -> np.ndarray:
		delta = self.delta(P)
		dead = np.flatnonzero(delta >= 1.0)
		if dead.size:
			raise LinkDeadError(float(delta[dead[0]]))
		return 1.0 - delta

	def throughputs(self, alloc: Allocation) -> np.ndarray:
		return self.comm.R_ch * alloc.w * self._survival(alloc.P)

	def energies(self, alloc: Allocation) -> np.ndarray:
		return alloc.P * self.comm.T / self._survival(alloc.P)

	def numerator(self, alloc: Allocation) -> float:
		return float(self.throughputs(alloc).sum())

	def denominator(self, alloc: Allocation) -> float:
		return float(self.energies(alloc).sum())

	def ratio(self, alloc: Allocation) -> float:
		return self.numerator(alloc) / self.denominator(alloc)

	def sum_of_ratios(self, alloc: Allocation) -> float:
		"""sum_i zeta_i / E_i = sum_i R_ch w_i (1 - delta_i)^2 / (P_i T)"""
		return float(np.sum(self.throughputs(alloc) / self.energies(alloc)))

	def value(self, alloc: Allocation, eta: float = 0.0, form: str = "ratio") -> float:
		"""Maximization-sense objective of the inner problem: N - eta*D, or the per-vehicle sum."""
		if form == "sum":
			return self.sum_of_ratios(alloc)
		return self.numerator(alloc) - eta * self.denominator(alloc)

	def gradient(self, alloc: Allocation, eta: float = 0.0, form: str = "ratio") -> Tuple[np.ndarray, np.ndarray]:
		"""Gradient of -value (minimization sense) with respect to (P, w)."""
		P, w = alloc.P, alloc.w
		R, T = self.comm.R_ch, self.comm.T
		survival = self._survival(P)
		d_delta = self.delta_gradient(P)

		if form == "sum":
			grad_w = R * survival ** 2 / (P * T)
			grad_P = R * w / T * (-2.0 * survival * d_delta / P - survival ** 2 / P ** 2)
			return -grad_P, -grad_w

		dN_dP = -R * w * d_delta
		dD_dP = T / survival + P * T * d_delta / survival ** 2
		grad_P = -dN_dP + eta * dD_dP
		grad_w = -R * survival
		return grad_P, grad_w


def alloc_objective(problem: AllocationProblem, alloc: Allocation, form: str = "ratio") -> float:
	"""Total throughput over total energy ('ratio') or the per-vehicle sum of ratios ('sum')."""
	if form == "ratio":
		return problem.ratio(alloc)
	if form == "sum":
		return problem.sum_of_ratios(alloc)
	raise ValueError(f"Unknown allocation objective '{form}', expected 'ratio' or 'sum'")


def fw_linear_oracle(gradient_P: np.ndarray, gradient_w: np.ndarray, problem: AllocationProblem) -> Allocation:
	"""
	Vertex minimizing <gradient, psi> over the feasible set. All RBs go to the smallest
	w-gradient; power sits at the floors unless some P-gradient is negative, in which case
	the whole slack goes to the most negative one. Ties keep the lowest index.
	"""
	gradient_P = np.asarray(gradient_P, dtype=float)
	gradient_w = np.asarray(gradient_w, dtype=float)
	assert np.all(np.isfinite(gradient_P)) and np.all(np.isfinite(gradient_w)), "gradients must be finite"

	M = problem.M
	slack = problem.P_T - M * problem.P_min
	if slack < 0:
		raise InfeasibleBudgetError(M, problem.P_min, problem.P_T)

	w = np.zeros(M)
	w[int(np.argmin(gradient_w))] = problem.w_T

	P = np.full(M, problem.P_min)
	best = int(np.argmin(gradient_P))
	if gradient_P[best] < 0:
		P[best] += slack
	return Allocation(P=P, w=w)


class FwTrace:
	"""Inner Frank-Wolfe records {k, j, objective, fw_gap, step} and outer Dinkelbach records {k, eta, F}."""
	def __init__(self):
		self.inner: List[Dict] = []
		self.outer: List[Dict] = []

	def add_inner(self, *, k: int, j: int, objective: float, fw_gap: float, step: float):
		self.inner.append({"k": k, "j": j, "objective": objective, "fw_gap": fw_gap, "step": step})

	def add_outer(self, *, k: int, eta: float, F: float):
		self.outer.append({"k": k, "eta": eta, "F": F})

	@property
	def iterations_outer(self) -> int:
		return len(self.outer)

	@property
	def iterations_inner(self) -> int:
		return len(self.inner)

	@property
	def etas(self) -> List[float]:
		return [record["eta"] for record in self.outer]

	def best_gaps(self, k: Optional[int] = None) -> List[float]:
		"""Running minimum of the FW gap, per outer iteration k (all records when k is None)."""
		gaps = [r["fw_gap"] for r in self.inner if k is None or r["k"] == k]
		return list(np.minimum.accumulate(gaps)) if gaps else []

	def to_dict(self) -> Dict:
		return {"inner": self.inner, "outer": self.outer}


def frank_wolfe(problem: AllocationProblem, eta: float, x0: Allocation, j_max: int = 500, gap_tol: float = 1e-6,
				form: str = "ratio", trace: Optional[FwTrace] = None, k: int = 0) -> Tuple[Allocation, FwTrace]:
	"""
	Frank-Wolfe with steps m_j = 2/(j+2). Every iterate is a convex combination of feasible
	points. Stops when the FW gap falls under gap_tol relative to the objective scale.

	:return: the best iterate seen (x0 included) and the trace
	"""
	trace = FwTrace() if trace is None else trace
	assert x0.is_feasible(problem.P_min, problem.P_T, problem.w_T, rtol=1e-6), "x0 must be feasible"

	x = x0
	best, best_value = x0, problem.value(x0, eta, form)
	for j in range(j_max):
		grad_P, grad_w = problem.gradient(x, eta, form)
		vertex = fw_linear_oracle(grad_P, grad_w, problem)
		gap = float(grad_P @ (x.P - vertex.P) + grad_w @ (x.w - vertex.w))
		objective = problem.value(x, eta, form)
		m = 2.0 / (j + 2.0)
		trace.add_inner(k=k, j=j, objective=objective, fw_gap=gap, step=m)

		if form == "sum":
			scale = max(1.0, abs(objective))
		else:
			scale = max(1.0, problem.numerator(x) + abs(eta) * problem.denominator(x))
		if gap <= gap_tol * scale:
			break

		x = x.step_towards(vertex, m)
		value = problem.value(x, eta, form)
		if value > best_value:
			best, best_value = x, value

	return best, trace


def uniform_allocation(problem: AllocationProblem) -> Allocation:
	M = problem.M
	return Allocation(P=np.full(M, problem.P_T / M), w=np.full(M, problem.w_T / M))


def random_allocation(problem: AllocationProblem, seed: SeedLike) -> Allocation:
	"""Dirichlet-uniform split of the power slack above the floors and of the RB pool."""
	rng = as_generator(seed, "allocation")
	M = problem.M
	slack = problem.P_T - M * problem.P_min
	P = problem.P_min + rng.dirichlet(np.ones(M)) * slack
	w = rng.dirichlet(np.ones(M)) * problem.w_T
	return Allocation(P=P, w=w)


def allocate_baseline(problem: AllocationProblem, strategy: str, seed: SeedLike = 0) -> Allocation:
	if strategy == "uniform":
		return uniform_allocation(problem)
	if strategy == "random":
		return random_allocation(problem, seed)
	raise ValueError(f"Unknown allocation baseline '{strategy}', expected 'uniform' or 'random'")


def dinkelbach_allocate(problem: AllocationProblem, epsilon: float = 1e-6, k_max: int = 30, j_max: int = 500,
						gap_tol: float = 1e-6) -> Tuple[Allocation, FwTrace]:
	"""
	Maximizes N/D. eta starts at the uniform allocation's ratio and is raised to
	N(x_k)/D(x_k) after each Frank-Wolfe solve, until F(eta_k)/D(x_k) <= epsilon*max(1, eta_k).

	:raises AllocationConvergenceError: after k_max outer iterations.
	"""
	assert epsilon > 0, "epsilon must be positive"
	trace = FwTrace()
	x = uniform_allocation(problem)
	eta = problem.ratio(x)

	for k in range(1, k_max + 1):
		x, _ = frank_wolfe(problem, eta, x, j_max, gap_tol, "ratio", trace, k)
		N, D = problem.numerator(x), problem.denominator(x)
		F = N - eta * D
		trace.add_outer(k=k, eta=eta, F=F)
		logger.trace(f"allocation k={k} eta={eta:.10g} F={F:.4g} inner={len(trace.inner)}")

		if F / D <= epsilon * max(1.0, eta):
			logger.trace(f"allocation converged after {k} iterations, ratio={N / D:.10g}")
			return x, trace
		eta = N / D

	raise AllocationConvergenceError(k_max, trace)


def allocate(problem: AllocationProblem, config: AllocationConfig) -> Tuple[Allocation, FwTrace]:
	"""Runs the configured objective: Dinkelbach on the ratio, or Frank-Wolfe on the per-vehicle sum."""
	if config.form == "ratio":
		return dinkelbach_allocate(problem, config.epsilon, config.k_max, config.j_max, config.gap_tol)
	return frank_wolfe(problem, 0.0, uniform_allocation(problem), config.j_max, config.gap_tol, "sum")


def round_rbs(w: np.ndarray, w_T: float) -> np.ndarray:
	"""Largest-remainder rounding of real RB shares onto floor(w_T) whole blocks; ties keep the lowest index."""
	w = np.asarray(w, dtype=float)
	total = int(math.floor(w_T + 1e-9))
	if total == 0 or w.sum() <= 0:
		return np.zeros(len(w), dtype=int)
	shares = w * total / w.sum()
	counts = np.floor(shares).astype(int)
	remaining = total - int(counts.sum())
	if remaining > 0:
		order = np.argsort(-(shares - counts), kind="stable")
		counts[order[:remaining]] += 1
	return counts
