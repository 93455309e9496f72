"""
Late fusion by the max-IoU rule and packet-drop degradation.

Each helper's detections reach the ego in a frame only when its packet survives.
Drops are drawn as U >= delta with one uniform U per (frame, helper), so raising
any delta under the same seed can only remove survivors.
"""

from typing import Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from fusion.records import DetectionRecord, FusionOutcome
from utils.rng import SeedLike, as_generator


def fuse_max_iou(ego: Iterable[DetectionRecord], helpers: Mapping[int, Iterable[DetectionRecord]],
				 survivors: Iterable[int], object_ids: Optional[Sequence[int]] = None,
				 threshold: float = 0.5) -> FusionOutcome:
	"""
	Fused IoU per object: the maximum over the ego and the surviving helpers, a
	missing detection counting as 0. Objects default to every id seen by any vehicle,
	delivered or not.
	"""
	ego = list(ego)
	helpers = {vid: list(records) for vid, records in helpers.items()}
	survivors = frozenset(survivors) & frozenset(helpers)

	if object_ids is None:
		seen = {r.object_id for r in ego}
		for records in helpers.values():
			seen.update(r.object_id for r in records)
		object_ids = sorted(seen)

	fused = {obj: 0.0 for obj in object_ids}
	predicted = set()
	contributing = [ego] + [helpers[vid] for vid in sorted(survivors)]
	for records in contributing:
		for record in records:
			if record.object_id not in fused:
				continue
			predicted.add(record.object_id)
			fused[record.object_id] = max(fused[record.object_id], record.iou)

	return FusionOutcome(fused_iou=fused, predicted=frozenset(predicted), surviving_helpers=survivors,
						 threshold=threshold)


class DropSchedule:
	"""Survival of each helper's packet in each frame."""
	def __init__(self, *, helper_ids: Sequence[int], survived: np.ndarray):
		survived = np.asarray(survived, dtype=bool)
		assert survived.ndim == 2 and survived.shape[1] == len(helper_ids), "one column per helper"
		self.helper_ids: Tuple[int, ...] = tuple(helper_ids)
		self.survived = survived

	@property
	def n_frames(self) -> int:
		return self.survived.shape[0]

	def survivors(self, frame: int) -> FrozenSet[int]:
		return frozenset(vid for vid, alive in zip(self.helper_ids, self.survived[frame]) if alive)

	def survival_rates(self) -> Dict[int, float]:
		return {vid: float(rate) for vid, rate in zip(self.helper_ids, self.survived.mean(axis=0))}


def simulate_drops(deltas: Mapping[int, float], n_frames: int, seed: SeedLike) -> DropSchedule:
	"""i.i.d. Bernoulli survival with probability 1 - delta per helper and frame."""
	helper_ids = sorted(deltas)
	delta = np.array([deltas[vid] for vid in helper_ids], dtype=float)
	assert np.all((delta >= 0) & (delta <= 1)), "drop probabilities must lie in [0, 1]"
	rng = as_generator(seed, "drops")
	uniforms = rng.random((n_frames, len(helper_ids)))
	return DropSchedule(helper_ids=helper_ids, survived=uniforms >= delta[None, :])


class FrameAverages(NamedTuple):
	mean_iou: float
	precision: float
	recall: float
	f1: float
	n_frames: int


def evaluate_frames(ego: List[DetectionRecord], helpers: Mapping[int, List[DetectionRecord]], schedule: DropSchedule,
					object_ids: Optional[Sequence[int]] = None, threshold: float = 0.5) -> FrameAverages:
	"""Fusion metrics averaged over the frames of a drop schedule."""
	cache: Dict[FrozenSet[int], FusionOutcome] = {}
	rows = []
	for frame in range(schedule.n_frames):
		survivors = schedule.survivors(frame)
		if survivors not in cache:
			cache[survivors] = fuse_max_iou(ego, helpers, survivors, object_ids, threshold)
		outcome = cache[survivors]
		rows.append((outcome.mean_iou, outcome.precision, outcome.recall, outcome.f1))

	if not rows:
		return FrameAverages(0.0, 0.0, 0.0, 0.0, 0)
	means = np.mean(np.array(rows), axis=0)
	return FrameAverages(*(float(m) for m in means), n_frames=len(rows))
