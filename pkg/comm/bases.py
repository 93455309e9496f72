from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class CommConfig(BaseModel):
	"""
	C-V2X sidelink constants. Link-budget quantities are in dB / dBm,
	power budgets in watts.
	"""
	model_config = ConfigDict(frozen=True, extra="forbid")

	theta: float = Field(10.0, ge=1, description="transmission interval count factor")
	W_subCh: float = Field(5.0, ge=1, description="number of subchannels")
	CBR: float = Field(0.0, ge=0, lt=1, description="channel busy ratio")
	gamma: float = Field(3.0, ge=2, le=4, description="path-loss exponent")
	L0: float = Field(47.86, description="reference path loss (dB)")
	sigma_sh: float = Field(3.0, gt=0, description="shadowing standard deviation (dB)")
	shadow_mean: float = Field(0.0, description="shadowing mean (dB)")
	P_SEN: float = Field(-95.0, description="sensing power threshold (dBm)")
	R_ch: float = Field(1e5, gt=0, description="rate per RB (bit/s)")
	T: float = Field(0.1, gt=0, description="transmission interval (s)")
	P_T: float = Field(1.0, gt=0, description="total power budget (W)")
	P_min: Optional[float] = Field(None, gt=0, description="per-vehicle power floor (W); null derives it from P_T and M")


class LinkState(BaseModel):
	model_config = ConfigDict(frozen=True, extra="forbid")

	d: float = Field(gt=0, description="ego-helper distance (m)")
	P_tx: float = Field(description="transmit power (dBm)")
	w: float = Field(0.0, ge=0, description="allocated RBs, real-valued while optimizing")


class AllocationConfig(BaseModel):
	"""Settings of the Dinkelbach / Frank-Wolfe allocator."""
	model_config = ConfigDict(frozen=True, extra="forbid")

	epsilon: float = Field(1e-6, gt=0)
	k_max: int = Field(30, ge=1)
	j_max: int = Field(500, ge=1)
	gap_tol: float = Field(1e-6, gt=0)
	erf_mode: Literal["exact", "taylor"] = "exact"
	taylor_order: int = Field(0, ge=0)
	form: Literal["ratio", "sum"] = Field("ratio", description="'ratio' runs Dinkelbach on total throughput/energy, 'sum' runs FW on the per-vehicle sum")
