"""
Synthetic detection fixtures.

Objects are scattered along the road covered by the scenario. Every camera looks
forward up to the sensing range, and each vehicle between the camera and an object
hides part of it: a vehicle g meters ahead of the camera lets 1 - exp(-g / l) of the
view through, so a close leader blocks most of the road behind it and a distant one
hardly any. The IoU on a visible object also decays with the distance to it and with
the camera's motion blur.
"""

from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from fusion.records import DetectionRecord
from scenario.bases import Scenario
from selection.objective import blur_per_point
from utils.rng import SeedLike, as_generator


class FixtureConfig(BaseModel):
	model_config = ConfigDict(frozen=True, extra="forbid")

	n_objects: int = Field(100, ge=1)
	iou_base: float = Field(0.9, gt=0, le=1, description="IoU of a close, sharp detection")
	decay_length: float = Field(120.0, gt=0, description="distance (m) over which IoU falls by 1/e")
	blur_scale: float = Field(50.0, gt=0, description="blur (pixels) that halves the IoU")
	occlusion_length: float = Field(20.0, gt=0, description="a vehicle this far ahead hides 1/e of the view")
	noise_sigma: float = Field(0.05, ge=0)


def object_positions(scenario: Scenario, n_objects: int, seed: SeedLike) -> np.ndarray:
	rng = as_generator(seed, "fixtures")
	start = scenario.ego.x0
	end = scenario.helpers[-1].x0 + scenario.lead_range
	return np.sort(rng.uniform(start, end, size=n_objects))


def visibility(x0: np.ndarray, objects: np.ndarray, sensing_range: float, occlusion_length: float) -> np.ndarray:
	"""
	Visible share of each object (columns) from each camera (rows): zero behind the
	camera or past the sensing range, otherwise the product of 1 - exp(-g / l) over
	the vehicles strictly between camera and object, g being their distance ahead.
	"""
	x0 = np.asarray(x0, dtype=float)
	objects = np.asarray(objects, dtype=float)
	ahead = objects[None, :] - x0[:, None]
	in_range = (ahead > 0) & (ahead <= sensing_range)

	spacing = x0[None, :] - x0[:, None]
	passing = np.where(spacing > 0, -np.expm1(-np.maximum(spacing, 0.0) / occlusion_length), 1.0)
	between = (spacing[:, :, None] > 0) & (x0[None, :, None] < objects[None, None, :])
	shares = np.where(between, passing[:, :, None], 1.0).prod(axis=1)
	return np.where(in_range, shares, 0.0)


def detection_quality(scenario: Scenario, config: FixtureConfig, objects: np.ndarray) -> np.ndarray:
	"""Noise-free IoU, shape (N+1, n_objects); row 0 is the ego."""
	vehicles = (scenario.ego,) + scenario.helpers
	x0 = np.array([veh.x0 for veh in vehicles])
	blur = blur_per_point(scenario.camera, np.array([veh.v for veh in vehicles]))
	visible = visibility(x0, objects, scenario.lead_range, config.occlusion_length)
	distance = np.maximum(objects[None, :] - x0[:, None], 0.0)
	sharpness = 1.0 / (1.0 + blur / config.blur_scale)
	return config.iou_base * np.exp(-distance / config.decay_length) * sharpness[:, None] * visible


def generate_detections(scenario: Scenario, config: FixtureConfig,
						seed: SeedLike) -> Tuple[List[DetectionRecord], Dict[int, List[DetectionRecord]]]:
	"""
	A vehicle reports every object inside its sensing range, however little of it
	shows; object ids index `object_positions`.

	:return: (ego records, helper records keyed by vehicle id)
	"""
	rng = as_generator(seed, "fixtures")
	objects = object_positions(scenario, config.n_objects, rng)
	quality = detection_quality(scenario, config, objects)
	noisy = np.clip(quality + rng.normal(0.0, config.noise_sigma, size=quality.shape), 0.0, 1.0)

	vehicles = (scenario.ego,) + scenario.helpers
	x0 = np.array([veh.x0 for veh in vehicles])
	ahead = objects[None, :] - x0[:, None]
	in_range = (ahead > 0) & (ahead <= scenario.lead_range)

	detections: Dict[int, List[DetectionRecord]] = {}
	for index, vehicle in enumerate(vehicles):
		detections[vehicle.id] = [
			DetectionRecord(vehicle_id=vehicle.id, object_id=int(obj_id), iou=float(noisy[index, obj_id]),
							confidence=float(np.clip(quality[index, obj_id], 0.0, 1.0)))
			for obj_id in np.flatnonzero(in_range[index])
		]

	ego = detections.pop(scenario.ego.id)
	return ego, detections
