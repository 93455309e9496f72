"""
Helper-selection criteria and the common-denominator form of their sum.

With time-summed aggregates xbar (distance to ego), Rbar (visual range) and
vterm (velocity), the composite objective w1*f1 + w2*f2 + w3*f3 equals G(s)/D(s)
where

	G(s) = w1*zu*(s.xbar)(Rbar.s) + w2*zu + w3*er*(s.vterm)(Rbar.s)
	D(s) = zu*(Rbar.s)

and G(s) - eta*D(s) is the quadratic form s'P0 s + q0's + h0 of assemble_qcqp.
"""

import json
from typing import Dict, Iterable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from scenario.bases import CameraConstants, Scenario
from scenario.generator import trajectories
from selection.exceptions import EmptySelectionError, InvalidAggregatesError, NonPositiveDenominatorError


class ObjectiveWeights(NamedTuple):
	w1: float = 1.0
	w2: float = 1.0
	w3: float = 1.0


UNIT_WEIGHTS = ObjectiveWeights(1.0, 1.0, 1.0)
WeightSpec = Union[str, Sequence[float], ObjectiveWeights]


class SelectionMask:
	def __init__(self, *, bits: Union[Sequence[int], np.ndarray], M: int):
		arr = np.asarray(bits)
		assert arr.ndim == 1, "mask must be a vector"
		if not np.all((arr == 0) | (arr == 1)):
			raise ValueError(f"mask entries must be 0 or 1, got {arr.tolist()}")
		if M < 1:
			raise ValueError(f"cardinality bound M must be >= 1, got {M}")
		if int(arr.sum()) > M:
			raise ValueError(f"mask selects {int(arr.sum())} helpers, more than M={M}")

		self.bits = arr.astype(np.uint8)
		self.bits.setflags(write=False)
		self.M = M

	@classmethod
	def from_indices(cls, indices: Iterable[int], n: int, M: int) -> "SelectionMask":
		bits = np.zeros(n, dtype=np.uint8)
		bits[list(indices)] = 1
		return cls(bits=bits, M=M)

	@property
	def n(self) -> int:
		return len(self.bits)

	@property
	def count(self) -> int:
		return int(self.bits.sum())

	@property
	def indices(self) -> Tuple[int, ...]:
		return tuple(int(i) for i in np.flatnonzero(self.bits))

	def as_float(self) -> np.ndarray:
		return self.bits.astype(float)

	def to_list(self) -> list:
		return [int(b) for b in self.bits]

	def __eq__(self, other) -> bool:
		if not isinstance(other, SelectionMask):
			return False
		return np.array_equal(self.bits, other.bits)

	def __hash__(self) -> int:
		return hash(self.bits.tobytes())

	def __repr__(self) -> str:
		return f"SelectionMask({''.join(str(b) for b in self.bits)}, M={self.M})"


class TimeAggregates:
	"""
	Time-summed per-helper quantities over the scenario grid.

	xbar[i]  = sum_t |x_it - x_0t|
	Rbar[i]  = sum_t R_it, R_it the gap to the nearest vehicle strictly ahead
			   (the lead range when nobody is ahead)
	vterm[i] = sum_t v_i
	"""
	def __init__(self, *, xbar: np.ndarray, Rbar: np.ndarray, vterm: np.ndarray, velocities: np.ndarray,
				 n_points: int, camera: CameraConstants):
		xbar = np.asarray(xbar, dtype=float)
		Rbar = np.asarray(Rbar, dtype=float)
		vterm = np.asarray(vterm, dtype=float)
		velocities = np.asarray(velocities, dtype=float)
		assert xbar.shape == Rbar.shape == vterm.shape == velocities.shape, "aggregate vectors must share one length"
		assert n_points >= 1, "at least one grid point is required"

		bad = np.flatnonzero(~(Rbar > 0))
		if bad.size:
			raise InvalidAggregatesError(f"helpers {bad.tolist()} have a non-positive time-summed visual range")

		self.xbar = xbar
		self.Rbar = Rbar
		self.vterm = vterm
		self.velocities = velocities
		self.n_points = n_points
		self.camera = camera

	@property
	def n(self) -> int:
		return len(self.xbar)

	@classmethod
	def from_scenario(cls, scenario: Scenario, snapshot: bool = False) -> "TimeAggregates":
		"""`snapshot` keeps only t=0, the epoch-based view of the same scenario."""
		X = trajectories(scenario)
		if snapshot:
			X = X[:, :1]
		ego, helpers = X[0], X[1:]

		# absolute, not the signed X_i - X_0: a helper the ego overtakes still counts as far
		distance = np.abs(helpers - ego[None, :])

		# gap from every helper i to every vehicle j (ego included), per time point
		diff = X[None, :, :] - helpers[:, None, :]
		ahead = np.where(diff > 0, diff, np.inf).min(axis=1)
		visual_range = np.where(np.isinf(ahead), scenario.lead_range, ahead)

		velocities = scenario.helper_velocities()
		n_points = X.shape[1]
		return cls(
			xbar=distance.sum(axis=1),
			Rbar=visual_range.sum(axis=1),
			vterm=velocities * n_points,
			velocities=velocities,
			n_points=n_points,
			camera=scenario.camera,
		)


AggregateSource = Union[Scenario, TimeAggregates]


def _aggregates(source: AggregateSource) -> TimeAggregates:
	if isinstance(source, TimeAggregates):
		return source
	return TimeAggregates.from_scenario(source)


def _check_length(agg: TimeAggregates, mask: SelectionMask):
	if mask.n != agg.n:
		raise ValueError(f"mask has {mask.n} entries for {agg.n} helpers")


def f1_location(source: AggregateSource, mask: SelectionMask) -> float:
	"""Time-summed distance of the selected helpers to the ego."""
	agg = _aggregates(source)
	_check_length(agg, mask)
	return float(mask.as_float() @ agg.xbar)


def f2_visual_range(source: AggregateSource, mask: SelectionMask) -> float:
	"""Reciprocal of the collective time-summed visual range."""
	agg = _aggregates(source)
	_check_length(agg, mask)
	if mask.count == 0:
		raise EmptySelectionError("the visual-range term")
	return 1.0 / float(mask.as_float() @ agg.Rbar)


def blur_per_point(camera: CameraConstants, velocities: np.ndarray, mode: str = "parallel") -> np.ndarray:
	"""Blur length (pixels) of each vehicle at one time point."""
	v = np.asarray(velocities, dtype=float)
	if mode == "parallel":
		return v * camera.e * camera.r / camera.zu
	if mode != "general":
		raise ValueError(f"Unknown blur mode '{mode}', expected 'general' or 'parallel'")

	numerator = v * camera.e * (camera.r * np.cos(camera.phi) - camera.u * camera.Q * np.sin(camera.phi))
	denominator = v * camera.e * camera.u * np.sin(camera.phi) + camera.zu
	bad = np.flatnonzero(~(denominator > 0))
	if bad.size:
		raise NonPositiveDenominatorError(int(bad[0]), float(denominator[bad[0]]))
	return numerator / denominator


def f3_motion_blur(source: AggregateSource, mask: SelectionMask, mode: str = "parallel") -> float:
	agg = _aggregates(source)
	_check_length(agg, mask)
	selected = np.flatnonzero(mask.bits)
	per_point = blur_per_point(agg.camera, agg.velocities[selected], mode)
	return float(per_point.sum() * agg.n_points)


def resolve_weights(preset: WeightSpec, aggregates: Optional[TimeAggregates] = None,
					range_emphasis: float = 1.0) -> ObjectiveWeights:
	"""
	'unit' -> (1, 1, 1); 'normalized' -> each term scaled to unit size for an average
	helper of `aggregates`, the visual-range term multiplied by `range_emphasis`;
	a triple is taken as-is.
	"""
	if isinstance(preset, ObjectiveWeights):
		return preset
	if isinstance(preset, str):
		if preset == "unit":
			return UNIT_WEIGHTS
		if preset == "normalized":
			assert aggregates is not None, "normalized weights need the aggregates they normalize"
			camera = aggregates.camera
			tiny = np.finfo(float).tiny
			return ObjectiveWeights(
				w1=1.0 / max(float(aggregates.xbar.mean()), tiny),
				w2=range_emphasis * float(aggregates.Rbar.mean()),
				w3=camera.zu / (camera.er * max(float(aggregates.vterm.mean()), tiny)),
			)
		raise ValueError(f"Unknown weight preset '{preset}', expected 'unit', 'normalized' or [w1, w2, w3]")
	values = [float(w) for w in preset]
	if len(values) != 3 or any(w < 0 for w in values):
		raise ValueError(f"weights must be three non-negative numbers, got {preset}")
	return ObjectiveWeights(*values)


def composite_G_D(aggregates: TimeAggregates, camera: CameraConstants, mask: SelectionMask,
				  weights: ObjectiveWeights = UNIT_WEIGHTS) -> Tuple[float, float]:
	_check_length(aggregates, mask)
	s = mask.as_float()
	xs = float(s @ aggregates.xbar)
	rs = float(s @ aggregates.Rbar)
	vs = float(s @ aggregates.vterm)

	D = camera.zu * rs
	if D <= 0:
		raise EmptySelectionError("the composite ratio G/D")
	G = weights.w1 * camera.zu * xs * rs + weights.w2 * camera.zu + weights.w3 * camera.er * vs * rs
	return G, D


def composite_value(aggregates: TimeAggregates, camera: CameraConstants, mask: SelectionMask,
					weights: ObjectiveWeights = UNIT_WEIGHTS) -> float:
	G, D = composite_G_D(aggregates, camera, mask, weights)
	return G / D


class QcqpForm:
	"""
	min s'P0 s + q0's + h0  s.t.  s'P_j s + q_j's + h_j <= 0 for every constraint j.

	Constraints, in order: cardinality (1's - M <= 0), non-empty (1 - 1's <= 0) and
	one box constraint per helper (s_i^2 - s_i <= 0), the last group being tight
	exactly on binary points.
	"""
	def __init__(self, *, P0: np.ndarray, q0: np.ndarray, h0: float, M: int, eta: float = 0.0):
		P0 = np.asarray(P0, dtype=float)
		q0 = np.asarray(q0, dtype=float)
		n = len(q0)
		assert P0.shape == (n, n), f"P0 must be {n}x{n}, got {P0.shape}"
		assert np.max(np.abs(P0 - P0.T), initial=0.0) < 1e-12, "P0 must be symmetric"
		assert M >= 1, "M must be >= 1"

		self.P0 = P0
		self.q0 = q0
		self.h0 = float(h0)
		self.M = M
		self.eta = float(eta)

		ones = np.ones(n)
		eye = np.eye(n)
		zeros = np.zeros((n, n))
		self.constraint_names = ["cardinality", "nonempty"] + [f"box_{i}" for i in range(n)]
		self.cons_P = np.stack([zeros, zeros] + [np.outer(eye[i], eye[i]) for i in range(n)])
		self.cons_q = np.vstack([ones, -ones, -eye])
		self.cons_h = np.concatenate([[-float(M), 1.0], np.zeros(n)])

	@property
	def n(self) -> int:
		return len(self.q0)

	@property
	def n_constraints(self) -> int:
		return len(self.cons_h)

	def value(self, s: np.ndarray) -> float:
		s = np.asarray(s, dtype=float)
		return float(s @ self.P0 @ s + self.q0 @ s + self.h0)

	def values(self, masks: np.ndarray) -> np.ndarray:
		"""Objective of every row of a (K, N) mask matrix."""
		S = np.asarray(masks, dtype=float)
		return np.einsum("ki,ij,kj->k", S, self.P0, S) + S @ self.q0 + self.h0

	def constraint_values(self, s: np.ndarray) -> np.ndarray:
		s = np.asarray(s, dtype=float)
		return np.einsum("i,kij,j->k", s, self.cons_P, s) + self.cons_q @ s + self.cons_h

	def to_dict(self) -> Dict:
		return {
			"P0": self.P0.tolist(),
			"q0": self.q0.tolist(),
			"h0": self.h0,
			"M": self.M,
			"eta": self.eta,
			"constraints": [
				{"name": name, "P": P.tolist(), "q": q.tolist(), "h": float(h)}
				for name, P, q, h in zip(self.constraint_names, self.cons_P, self.cons_q, self.cons_h)
			],
		}

	def to_json(self) -> str:
		return json.dumps(self.to_dict(), indent=2)


def binarity_residual(s: np.ndarray) -> float:
	"""s'Is - 1's; zero on a vector in [0, 1]^N iff every entry is 0 or 1."""
	s = np.asarray(s, dtype=float)
	return float(s @ s - s.sum())


def assemble_qcqp(aggregates: TimeAggregates, camera: CameraConstants, eta: float, M: int,
				  weights: ObjectiveWeights = UNIT_WEIGHTS) -> QcqpForm:
	assert np.isfinite(eta), "eta must be finite"
	A = weights.w1 * camera.zu * np.outer(aggregates.xbar, aggregates.Rbar) \
		+ weights.w3 * camera.er * np.outer(aggregates.vterm, aggregates.Rbar)
	P0 = (A + A.T) / 2.0
	q0 = -eta * camera.zu * aggregates.Rbar
	h0 = weights.w2 * camera.zu
	return QcqpForm(P0=P0, q0=q0, h0=h0, M=M, eta=eta)
