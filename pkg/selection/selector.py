"""
Helper selection by Dinkelbach's method.

The outer loop updates eta_{k+1} = G(s_k)/D(s_k); the inner subproblem
min G(s) - eta*D(s) over binary s with 1 <= 1's <= M is solved exactly by
enumeration. The Lagrangian dual of the same QCQP gives an independent lower
bound, ascended by projected supergradient steps.
"""

import itertools
from functools import lru_cache
from math import comb
from typing import Iterator, List, Optional, Tuple

import numpy as np

from scenario.bases import CameraConstants, Scenario
from selection.exceptions import DinkelbachConvergenceError, EnumerationCapError
from selection.objective import (UNIT_WEIGHTS, ObjectiveWeights, QcqpForm, SelectionMask, TimeAggregates,
								 assemble_qcqp, composite_G_D)
from utils import logger

N_CAP = 25
MASK_MATRIX_LIMIT = 1 << 18
CHUNK_ROWS = 1 << 16
TIE_RTOL = 1e-12

PINV_RTOL = 1e-10
RANGE_RTOL = 1e-8


class DinkelbachState:
	def __init__(self, *, eta: float, k: int, F_value: float, best_mask: SelectionMask, epsilon: float):
		assert k >= 1, "iterations are counted from 1"
		self.eta = eta
		self.k = k
		self.F_value = F_value
		self.best_mask = best_mask
		self.epsilon = epsilon

	def to_dict(self) -> dict:
		return {"k": self.k, "eta": self.eta, "F": self.F_value, "mask": self.best_mask.to_list()}

	def __repr__(self) -> str:
		return f"DinkelbachState(k={self.k}, eta={self.eta:.6g}, F={self.F_value:.6g}, mask={self.best_mask})"


class DualCertificate:
	def __init__(self, *, lam: np.ndarray, bound: float, feasible_gap: float, iterations: int = 0):
		lam = np.asarray(lam, dtype=float)
		assert np.all(lam >= 0), "multipliers must be non-negative"
		self.lam = lam
		self.bound = bound
		self.feasible_gap = feasible_gap
		self.iterations = iterations

	@property
	def is_finite(self) -> bool:
		return bool(np.isfinite(self.bound))

	def to_dict(self) -> dict:
		return {
			"lambda": self.lam.tolist(),
			"bound": self.bound if self.is_finite else None,
			"feasible_gap": self.feasible_gap if self.is_finite else None,
			"iterations": self.iterations,
		}


def mask_count(n: int, M: int) -> int:
	"""Number of masks with 1..M selected helpers."""
	return sum(comb(n, k) for k in range(1, min(M, n) + 1))


def _combinations(n: int, M: int) -> Iterator[Tuple[int, ...]]:
	return itertools.chain.from_iterable(itertools.combinations(range(n), k) for k in range(1, min(M, n) + 1))


def _rows(batch: List[Tuple[int, ...]], n: int) -> np.ndarray:
	S = np.zeros((len(batch), n), dtype=np.uint8)
	for row, combo in enumerate(batch):
		S[row, list(combo)] = 1
	return S


@lru_cache(maxsize=64)
def _mask_matrix(n: int, M: int) -> np.ndarray:
	S = _rows(list(_combinations(n, M)), n)
	S.setflags(write=False)
	return S


def _mask_chunks(n: int, M: int) -> Iterator[np.ndarray]:
	if mask_count(n, M) <= MASK_MATRIX_LIMIT:
		yield _mask_matrix(n, M)
		return
	combos = _combinations(n, M)
	while True:
		batch = list(itertools.islice(combos, CHUNK_ROWS))
		if not batch:
			return
		yield _rows(batch, n)


def _pick(S: np.ndarray, values: np.ndarray) -> int:
	"""Row of the minimum; near-ties go to the lexicographically smallest bit row."""
	best = float(values.min())
	tied = np.flatnonzero(values <= best + TIE_RTOL * max(1.0, abs(best)))
	if len(tied) == 1:
		return int(tied[0])
	# lexsort keys run from least to most significant
	order = np.lexsort(S[tied].T[::-1])
	return int(tied[order[0]])


def solve_subproblem_exact(form: QcqpForm, M: Optional[int] = None, n_cap: int = N_CAP) -> Tuple[SelectionMask, float]:
	"""
	Exact minimum of the QCQP objective over binary masks with 1..M ones.

	:raises EnumerationCapError: when the form has more than `n_cap` helpers.
	"""
	M = form.M if M is None else M
	n = form.n
	if n > n_cap:
		raise EnumerationCapError(n, n_cap)

	best_bits: Optional[np.ndarray] = None
	best_value = np.inf
	for S in _mask_chunks(n, M):
		values = form.values(S)
		if best_bits is not None:
			S = np.vstack([best_bits[None, :], S])
			values = np.concatenate([[best_value], values])
		row = _pick(S, values)
		best_bits = np.array(S[row])
		best_value = float(values[row])

	assert best_bits is not None, "no feasible mask enumerated"
	return SelectionMask(bits=best_bits, M=M), best_value


def proximity_mask(n: int, M: int) -> SelectionMask:
	"""Helpers are indexed front to back from the ego, so the nearest M come first."""
	return SelectionMask.from_indices(range(min(M, n)), n, M)


def dinkelbach_select(aggregates: TimeAggregates, camera: CameraConstants, M: int, epsilon: float = 1e-8,
					  k_max: int = 50, weights: ObjectiveWeights = UNIT_WEIGHTS,
					  n_cap: int = N_CAP) -> Tuple[SelectionMask, float, List[DinkelbachState]]:
	"""
	Minimizes G(s)/D(s) over masks with 1..M helpers.

	Stops when the subproblem optimum F(eta_k) satisfies |F|/D(s_k) < epsilon*max(1, |eta_k|),
	or when the inner solution repeats.

	:return: (mask, ratio G/D of the mask, per-iteration trace)
	:raises DinkelbachConvergenceError: after k_max iterations without convergence.
	"""
	assert epsilon > 0, "epsilon must be positive"
	assert k_max >= 1, "k_max must be >= 1"
	n = aggregates.n
	if n > n_cap:
		raise EnumerationCapError(n, n_cap)

	G, D = composite_G_D(aggregates, camera, proximity_mask(n, M), weights)
	eta = G / D
	if not np.isfinite(eta):
		eta = 0.0

	trace: List[DinkelbachState] = []
	previous: Optional[SelectionMask] = None
	for k in range(1, k_max + 1):
		form = assemble_qcqp(aggregates, camera, eta, M, weights)
		mask, F = solve_subproblem_exact(form, M, n_cap)
		G, D = composite_G_D(aggregates, camera, mask, weights)
		trace.append(DinkelbachState(eta=eta, k=k, F_value=F, best_mask=mask, epsilon=epsilon))
		logger.trace(f"dinkelbach k={k} eta={eta:.10g} F={F:.4g} mask={mask.indices}")

		if abs(F) / D < epsilon * max(1.0, abs(eta)) or mask == previous:
			logger.trace(f"dinkelbach converged after {k} iterations, ratio={G / D:.10g}")
			return mask, G / D, trace

		previous = mask
		eta = G / D

	raise DinkelbachConvergenceError(k_max, trace)


def snapshot_select(scenario: Scenario, M: int, epsilon: float = 1e-8, k_max: int = 50,
					weights: ObjectiveWeights = UNIT_WEIGHTS, n_cap: int = N_CAP) -> SelectionMask:
	"""The same selection computed from the t=0 positions only, as an epoch-based scheme would."""
	aggregates = TimeAggregates.from_scenario(scenario, snapshot=True)
	mask, _, _ = dinkelbach_select(aggregates, scenario.camera, M, epsilon, k_max, weights, n_cap)
	return mask


# --- Lagrangian dual ---------------------------------------------------------

def _lagrangian(form: QcqpForm, lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
	P = form.P0 + np.einsum("k,kij->ij", lam, form.cons_P)
	q = form.q0 + lam @ form.cons_q
	r = form.h0 + float(lam @ form.cons_h)
	return P, q, r


def dual_function(form: QcqpForm, lam: np.ndarray) -> Tuple[float, Optional[np.ndarray]]:
	"""
	g(lambda) = r - q'P^+q/4 when P(lambda) is PSD and q lies in its range, else -inf.

	:return: (g, minimizer of the Lagrangian or None on the -inf branch)
	"""
	lam = np.asarray(lam, dtype=float)
	assert lam.shape == (form.n_constraints,), f"expected {form.n_constraints} multipliers, got {lam.shape}"
	assert np.all(lam >= 0), "multipliers must be non-negative"

	P, q, r = _lagrangian(form, lam)
	eigvals, eigvecs = np.linalg.eigh(P)
	scale = float(np.abs(eigvals).max(initial=0.0))
	tol = PINV_RTOL * scale
	if eigvals.min() < -tol:
		return -np.inf, None

	keep = np.abs(eigvals) > tol
	coords = eigvecs.T @ q
	inv = np.zeros_like(eigvals)
	inv[keep] = 1.0 / eigvals[keep]

	q_norm = float(np.linalg.norm(q))
	projected = eigvecs[:, keep] @ coords[keep]
	if np.linalg.norm(projected - q) > RANGE_RTOL * q_norm:
		return -np.inf, None

	g = r - 0.25 * float(np.sum(coords ** 2 * inv))
	s_hat = -0.5 * eigvecs @ (inv * coords)
	return g, s_hat


def default_multipliers(form: QcqpForm) -> np.ndarray:
	"""Smallest box multiplier that makes P(lambda) positive definite."""
	eigvals = np.linalg.eigvalsh(form.P0)
	scale = float(np.abs(eigvals).max(initial=0.0))
	mu = max(0.0, -float(eigvals.min())) * (1.0 + 1e-3) + 1e-9 * max(1.0, scale)
	lam = np.zeros(form.n_constraints)
	lam[2:] = mu
	return lam


def dual_bound(form: QcqpForm, lambda0: Optional[np.ndarray] = None, steps: int = 200,
			   primal_value: Optional[float] = None) -> DualCertificate:
	"""
	Projected supergradient ascent on g with steps alpha0/sqrt(k); keeps the best bound.

	`primal_value` defaults to the exact subproblem optimum.
	"""
	lam = default_multipliers(form) if lambda0 is None else np.asarray(lambda0, dtype=float).copy()
	assert np.all(lam >= 0), "lambda0 must be non-negative"
	alpha0 = 0.1 * max(1.0, float(np.abs(lam).max(initial=0.0)))

	box = np.zeros(form.n_constraints)
	box[2:] = 1.0

	best_bound = -np.inf
	best_lam = lam.copy()
	k = 0
	for k in range(1, steps + 1):
		g, s_hat = dual_function(form, lam)
		if g > best_bound:
			best_bound, best_lam = g, lam.copy()

		direction = box if s_hat is None else form.constraint_values(s_hat)
		norm = float(np.linalg.norm(direction))
		if norm == 0.0:
			break
		lam = np.maximum(0.0, lam + alpha0 / np.sqrt(k) * direction / norm)

	if primal_value is None:
		_, primal_value = solve_subproblem_exact(form)
	gap = primal_value - best_bound if np.isfinite(best_bound) else np.inf
	logger.trace(f"dual bound {best_bound:.6g} after {k} steps, gap {gap:.3g}")
	return DualCertificate(lam=best_lam, bound=best_bound, feasible_gap=gap, iterations=k)
