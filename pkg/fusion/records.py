from typing import Dict, FrozenSet, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter


class DetectionRecord(BaseModel):
	"""One vehicle's detection of one ground-truth object."""
	model_config = ConfigDict(frozen=True, extra="forbid")

	vehicle_id: int = Field(ge=0)
	object_id: int = Field(ge=0)
	iou: float = Field(ge=0, le=1)
	confidence: float = Field(1.0, ge=0, le=1)


_RECORD_LIST = TypeAdapter(List[DetectionRecord])


def records_to_json(records: List[DetectionRecord]) -> str:
	return _RECORD_LIST.dump_json(records, indent=2).decode()


def records_from_json(text: str) -> List[DetectionRecord]:
	return _RECORD_LIST.validate_json(text)


class FusionOutcome:
	"""
	Per-object fused IoU and the detection scores derived from it.

	An object is a true positive when its fused IoU reaches the match threshold and a
	false positive when some contributing vehicle reported it below the threshold.
	"""
	def __init__(self, *, fused_iou: Dict[int, float], predicted: FrozenSet[int], surviving_helpers: FrozenSet[int],
				 threshold: float = 0.5):
		assert 0.0 < threshold <= 1.0, "threshold must be in (0, 1]"
		self.fused_iou = fused_iou
		self.predicted = predicted
		self.surviving_helpers = surviving_helpers
		self.threshold = threshold

	@property
	def n_objects(self) -> int:
		return len(self.fused_iou)

	@property
	def true_positives(self) -> int:
		return sum(1 for iou in self.fused_iou.values() if iou >= self.threshold)

	@property
	def false_positives(self) -> int:
		return sum(1 for obj, iou in self.fused_iou.items() if obj in self.predicted and iou < self.threshold)

	@property
	def mean_iou(self) -> float:
		return float(np.mean(list(self.fused_iou.values()))) if self.fused_iou else 0.0

	@property
	def precision(self) -> float:
		detections = self.true_positives + self.false_positives
		return self.true_positives / detections if detections else 0.0

	@property
	def recall(self) -> float:
		return self.true_positives / self.n_objects if self.n_objects else 0.0

	@property
	def f1(self) -> float:
		p, r = self.precision, self.recall
		return 2.0 * p * r / (p + r) if p + r > 0 else 0.0

	def to_dict(self) -> Dict:
		return {
			"mean_iou": self.mean_iou,
			"precision": self.precision,
			"recall": self.recall,
			"f1": self.f1,
			"surviving_helpers": sorted(self.surviving_helpers),
		}
