import os
from typing import List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from comm.bases import AllocationConfig, CommConfig
from fusion.fixtures import FixtureConfig
from harness.exceptions import ConfigError
from scenario.bases import ScenarioConfig

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config", "default.yaml")

SELECTION_STRATEGIES = ["proposed", "random", "proximity", "min_velocity", "snapshot"]
ALLOCATION_STRATEGIES = ["proposed", "uniform", "random"]
FUSION_STRATEGIES = ["proposed", "random", "proximity", "min_velocity", "snapshot", "ego_only"]


def _non_empty(values: list, name: str) -> list:
	if not values:
		raise ValueError(f"{name} must not be empty")
	return values


def _known(values: List[str], known: List[str]) -> List[str]:
	unknown = [v for v in values if v not in known]
	if unknown:
		raise ValueError(f"unknown strategies {unknown}, expected a subset of {known}")
	return _non_empty(values, "strategies")


class SelectionSection(BaseModel):
	model_config = ConfigDict(frozen=True, extra="forbid")

	axis: Literal["M", "N"] = "M"
	M_values: List[int] = [1, 2, 3, 4, 5]
	N_values: List[int] = [6, 8, 10, 12]
	M_fixed: int = Field(3, ge=1, description="cardinality bound on the N axis")
	epsilon: float = Field(1e-8, gt=0)
	k_max: int = Field(50, ge=1)
	n_cap: int = Field(25, ge=1)
	weights: Union[Literal["unit", "normalized"], List[float]] = "normalized"
	range_emphasis: float = Field(100.0, gt=0)
	dual_steps: int = Field(100, ge=0, description="0 skips the dual certificate")
	strategies: List[str] = ["proposed", "random", "proximity", "min_velocity", "snapshot"]

	@field_validator("M_values", "N_values")
	@classmethod
	def _check_ladder(cls, values: List[int]) -> List[int]:
		if any(v < 1 for v in _non_empty(values, "ladder")):
			raise ValueError(f"ladder entries must be >= 1, got {values}")
		return values

	@field_validator("strategies")
	@classmethod
	def _check_strategies(cls, values: List[str]) -> List[str]:
		return _known(values, SELECTION_STRATEGIES)

	@property
	def sweep_values(self) -> List[int]:
		return self.M_values if self.axis == "M" else self.N_values


class AllocationSection(AllocationConfig):
	M: int = Field(5, ge=1, description="links allocated on the w_T and P_T axes")
	w_T_values: List[float] = [20.0, 30.0, 40.0, 50.0, 60.0]
	P_T_values: List[float] = [0.2, 0.5, 1.0, 2.0, 4.0]
	M_values: List[int] = [2, 3, 4, 5, 6, 7, 8, 9, 10]
	axes: List[Literal["w_T", "P_T", "M"]] = ["w_T", "P_T", "M"]
	strategies: List[str] = ["proposed", "uniform", "random"]

	@field_validator("w_T_values", "P_T_values", "M_values", "axes")
	@classmethod
	def _check_ladder(cls, values: list) -> list:
		return _non_empty(values, "ladder")

	@field_validator("strategies")
	@classmethod
	def _check_strategies(cls, values: List[str]) -> List[str]:
		return _known(values, ALLOCATION_STRATEGIES)


class FusionSection(BaseModel):
	model_config = ConfigDict(frozen=True, extra="forbid")

	M: int = Field(3, ge=1)
	n_frames: int = Field(2000, ge=1)
	threshold: float = Field(0.5, gt=0, le=1)
	fixtures: FixtureConfig = FixtureConfig()
	baseline_allocation: Literal["uniform", "random"] = Field(
		"uniform", description="RB and power split for baseline selections; the proposed selection gets the proposed one")
	strategies: List[str] = ["proposed", "random", "proximity", "ego_only"]

	@field_validator("strategies")
	@classmethod
	def _check_strategies(cls, values: List[str]) -> List[str]:
		return _known(values, FUSION_STRATEGIES)


class CampaignSection(BaseModel):
	model_config = ConfigDict(frozen=True, extra="forbid")

	seed: int = Field(2024, ge=0)
	replications: int = Field(100, ge=1)
	workers: Union[int, Literal["auto"]] = "auto"
	output_dir: str = "results"

	@field_validator("workers")
	@classmethod
	def _check_workers(cls, value):
		if isinstance(value, int) and value < 1:
			raise ValueError(f"workers must be >= 1 or 'auto', got {value}")
		return value


class ExperimentConfig(BaseModel):
	model_config = ConfigDict(frozen=True, extra="forbid")

	scenario: ScenarioConfig = ScenarioConfig()
	selection: SelectionSection = SelectionSection()
	comm: CommConfig = CommConfig()
	allocation: AllocationSection = AllocationSection()
	fusion: FusionSection = FusionSection()
	campaign: CampaignSection = CampaignSection()

	def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[str] = None,
					   replications: Optional[int] = None) -> "ExperimentConfig":
		campaign = {}
		if seed is not None:
			campaign["seed"] = seed
		if output_dir is not None:
			campaign["output_dir"] = output_dir
		if replications is not None:
			campaign["replications"] = replications
		if not campaign:
			return self
		data = self.model_dump()
		data["campaign"].update(campaign)
		return ExperimentConfig.model_validate(data)


def load_config(path: Optional[str] = None) -> ExperimentConfig:
	"""Loads and validates an experiment file; every failure surfaces as ConfigError."""
	path = path or DEFAULT_CONFIG_PATH
	try:
		with open(path, 'r') as file:
			data = yaml.safe_load(file)
		return ExperimentConfig.model_validate(data or {})
	except FileNotFoundError:
		raise ConfigError(path, "file not found")
	except yaml.YAMLError as e:
		raise ConfigError(path, f"invalid YAML: {e}")
	except ValidationError as e:
		details = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
		raise ConfigError(path, details)
