import math
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class CameraConstants(BaseModel):
	"""Pinhole camera constants of the motion-blur model (shared by all vehicles)."""
	model_config = ConfigDict(frozen=True, extra="forbid")

	e: float = Field(0.01, gt=0, description="exposure time (s)")
	r: float = Field(0.006, gt=0, description="focal length")
	u: float = Field(5e-6, gt=0, description="CCD pixel size (m)")
	z: float = Field(20.0, gt=0, description="perpendicular distance to the object (m)")
	Q: float = Field(0.0, ge=0, description="object start position (pixels)")
	phi: float = Field(0.0, ge=0, le=math.pi / 2, description="motion direction vs image plane (rad)")

	@property
	def zu(self) -> float:
		return self.z * self.u

	@property
	def er(self) -> float:
		return self.e * self.r


class ArrivalModel(BaseModel):
	"""Poisson point process of vehicle arrivals on [a, b]."""
	model_config = ConfigDict(frozen=True, extra="forbid")

	rho: float = Field(0.01, gt=0, description="vehicles per meter")
	span: Tuple[float, float] = (0.0, 1000.0)

	@model_validator(mode="after")
	def _check_span(self):
		if self.span[0] < 0:
			raise ValueError(f"span start {self.span[0]} must be non-negative")
		# a zero-length span is allowed and simply produces no arrivals
		if self.span[1] < self.span[0]:
			raise ValueError(f"span end {self.span[1]} lies before span start {self.span[0]}")
		return self

	@property
	def mean_count(self) -> float:
		return self.rho * (self.span[1] - self.span[0])


class VelocityModel(BaseModel):
	"""Normal velocity law truncated to [v_min, v_max]."""
	model_config = ConfigDict(frozen=True, extra="forbid")

	mu: float = 30.0
	sigma: float = Field(5.0, gt=0)
	v_min: float = Field(20.0, ge=0)
	v_max: float = 40.0

	@model_validator(mode="after")
	def _check_bounds(self):
		if not self.v_min < self.v_max:
			raise ValueError(f"v_min ({self.v_min}) must be below v_max ({self.v_max})")
		return self

	@property
	def alpha(self) -> float:
		return (self.v_min - self.mu) / self.sigma

	@property
	def beta(self) -> float:
		return (self.v_max - self.mu) / self.sigma


class Vehicle(BaseModel):
	model_config = ConfigDict(frozen=True, extra="forbid")

	id: int = Field(ge=0)
	x0: float = Field(ge=0, description="longitudinal position at t=0 (m)")
	y0: float = Field(0.0, description="lateral position (m), informational only")
	v: float = Field(ge=0, description="constant velocity over the CP interval (m/s)")


class Scenario(BaseModel):
	"""
	One highway snapshot: the ego vehicle and the N candidate helpers ahead of it,
	evaluated on the time grid {0, dt, ..., horizon_T}.
	"""
	model_config = ConfigDict(frozen=True, extra="forbid")

	ego: Vehicle
	helpers: Tuple[Vehicle, ...]
	horizon_T: float = Field(gt=0)
	dt: float = Field(gt=0)
	camera: CameraConstants = CameraConstants()
	seed: int = Field(0, ge=0)
	r_max: float = Field(150.0, gt=0, description="sensing range of the lead vehicle (m)")
	span: Tuple[float, float] = (0.0, 1000.0)

	@model_validator(mode="after")
	def _check_invariants(self):
		if len(self.helpers) == 0:
			raise ValueError("a scenario needs at least one helper")
		previous = self.ego.x0
		for helper in self.helpers:
			if not helper.x0 > previous:
				raise ValueError(f"helper {helper.id} at x0={helper.x0} is not strictly ahead of {previous}")
			previous = helper.x0
		steps = self.horizon_T / self.dt
		if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
			raise ValueError(f"horizon_T={self.horizon_T} is not a whole number of dt={self.dt} steps")
		return self

	@property
	def n_helpers(self) -> int:
		return len(self.helpers)

	@property
	def n_steps(self) -> int:
		return int(round(self.horizon_T / self.dt))

	@property
	def times(self) -> np.ndarray:
		return self.dt * np.arange(self.n_steps + 1, dtype=float)

	@property
	def lead_range(self) -> float:
		"""Visual range of the front-most vehicle: R_max, never longer than the span."""
		span_length = self.span[1] - self.span[0]
		if span_length <= 0:
			return self.r_max
		return min(self.r_max, span_length)

	def helper_positions(self) -> np.ndarray:
		return np.array([h.x0 for h in self.helpers], dtype=float)

	def helper_velocities(self) -> np.ndarray:
		return np.array([h.v for h in self.helpers], dtype=float)


class ScenarioConfig(BaseModel):
	"""Generator settings; the `scenario` section of the experiment file."""
	model_config = ConfigDict(frozen=True, extra="forbid")

	arrival: ArrivalModel = ArrivalModel()
	velocity: VelocityModel = VelocityModel()
	camera: CameraConstants = CameraConstants()
	n_helpers: Optional[int] = Field(10, ge=1, description="null keeps the PPP count on the span")
	horizon_T: float = Field(10.0, gt=0)
	dt: float = Field(0.1, gt=0)
	r_max: float = Field(150.0, gt=0)
	max_attempts: int = Field(100, ge=1)
