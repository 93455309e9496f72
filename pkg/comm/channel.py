"""
Closed-form C-V2X sidelink error model.

Link budget in dB: a packet is sensed when P_tx - PL(d) - SH >= P_SEN, with
PL(d) = L0 + 10*gamma*log10(d) and SH ~ Normal(shadow_mean, sigma_sh^2). The
sensing error is the Gaussian tail of that margin, the collision error comes from
M-1 contenders drawing uniformly among w_T resource blocks, and the two combine
multiplicatively. Energy is accounted in watts.
"""

import math

import numpy as np
from scipy.special import erfc, factorial

from comm.bases import CommConfig, LinkState
from comm.exceptions import LinkDeadError, PoolExhaustedError
from utils.rng import SeedLike, as_generator

SQRT2 = math.sqrt(2.0)
TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def dbm_to_watts(p_dbm):
	return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(p_watts):
	return 10.0 * np.log10(np.asarray(p_watts, dtype=float)) + 30.0


def rb_pool(config: CommConfig) -> float:
	"""w_T = theta * W_subCh * (1 - CBR), kept real-valued."""
	return config.theta * config.W_subCh * (1.0 - config.CBR)


def collision_prob(w_T: float, M: int) -> float:
	"""Probability that at least one of the other M-1 vehicles picks the same RB."""
	assert M >= 1, "M must be >= 1"
	if w_T < 1:
		raise PoolExhaustedError(w_T)
	return 1.0 - (1.0 - 1.0 / w_T) ** (M - 1)


def path_loss(config: CommConfig, d):
	return config.L0 + 10.0 * config.gamma * np.log10(d)


def sensing_margin(config: CommConfig, P_tx_dbm, d):
	"""Expected received power above the sensing threshold (dB)."""
	return P_tx_dbm - path_loss(config, d) - config.shadow_mean - config.P_SEN


def sensing_q(config: CommConfig, P_tx_dbm, d):
	return sensing_margin(config, P_tx_dbm, d) / (config.sigma_sh * SQRT2)


def sensing_error(config: CommConfig, link: LinkState) -> float:
	"""delta_SEN = (1 - erf(Q)) / 2, evaluated as erfc to keep the tail accurate."""
	return float(0.5 * erfc(sensing_q(config, link.P_tx, link.d)))


def erf_taylor(Q, order: int):
	"""Maclaurin series of erf truncated after the (-1)^n Q^(2n+1) / (n!(2n+1)) term with n = order."""
	assert order >= 0, "order must be >= 0"
	Q = np.asarray(Q, dtype=float)
	n = np.arange(order + 1)
	coefficients = (-1.0) ** n / (factorial(n) * (2 * n + 1))
	powers = Q[..., None] ** (2 * n + 1)
	return TWO_OVER_SQRT_PI * np.sum(coefficients * powers, axis=-1)


def erf_taylor_derivative(Q, order: int):
	Q = np.asarray(Q, dtype=float)
	n = np.arange(order + 1)
	coefficients = (-1.0) ** n / factorial(n)
	return TWO_OVER_SQRT_PI * np.sum(coefficients * Q[..., None] ** (2 * n), axis=-1)


def taylor_remainder_bound(Q, order: int):
	"""Alternating-series bound on |erf(Q) - erf_taylor(Q, order)|."""
	n = order + 1
	return TWO_OVER_SQRT_PI * np.abs(np.asarray(Q, dtype=float)) ** (2 * n + 1) / (math.factorial(n) * (2 * n + 1))


def sensing_error_from_q(Q, erf_mode: str = "exact", order: int = 0):
	if erf_mode == "exact":
		return 0.5 * erfc(Q)
	if erf_mode != "taylor":
		raise ValueError(f"Unknown erf mode '{erf_mode}', expected 'exact' or 'taylor'")
	return np.clip(0.5 * (1.0 - erf_taylor(Q, order)), 0.0, 1.0)


def sensing_error_taylor(config: CommConfig, link: LinkState, order: int) -> float:
	return float(sensing_error_from_q(sensing_q(config, link.P_tx, link.d), "taylor", order))


def total_error(delta_col: float, delta_sen: float) -> float:
	assert 0.0 <= delta_col <= 1.0, f"collision probability {delta_col} outside [0, 1]"
	assert 0.0 <= delta_sen <= 1.0, f"sensing error {delta_sen} outside [0, 1]"
	return delta_col * delta_sen


def throughput(config: CommConfig, link: LinkState, delta: float) -> float:
	"""zeta = R_ch * w * (1 - delta)"""
	return config.R_ch * link.w * (1.0 - delta)


def energy(config: CommConfig, link: LinkState, delta: float) -> float:
	"""Energy to deliver one interval's data, retransmissions included: P[W] * T / (1 - delta)."""
	if delta >= 1.0:
		raise LinkDeadError(delta)
	return float(dbm_to_watts(link.P_tx)) * config.T / (1.0 - delta)


def link_report(config: CommConfig, link: LinkState, M: int, w_T: float) -> dict:
	"""One per-link row: distance, power, RBs, the three error terms, throughput and energy."""
	delta_col = collision_prob(w_T, M)
	delta_sen = sensing_error(config, link)
	delta = total_error(delta_col, delta_sen)
	return {
		"d": link.d,
		"P_tx": link.P_tx,
		"w": link.w,
		"delta_col": delta_col,
		"delta_sen": delta_sen,
		"delta_er": delta,
		"throughput": throughput(config, link, delta),
		"energy": energy(config, link, delta),
	}


# --- Monte-Carlo cross-checks -------------------------------------------------

def simulate_collisions(w_T: float, M: int, trials: int, seed: SeedLike) -> float:
	"""Fraction of trials in which another vehicle draws the same RB as vehicle 0, over floor(w_T) blocks."""
	pool = int(math.floor(w_T))
	if pool < 1:
		raise PoolExhaustedError(w_T)
	if M == 1:
		return 0.0
	rng = as_generator(seed, "collisions")
	draws = rng.integers(0, pool, size=(trials, M))
	hits = np.any(draws[:, 1:] == draws[:, :1], axis=1)
	return float(hits.mean())


def sensing_error_monte_carlo(config: CommConfig, link: LinkState, n_packets: int, seed: SeedLike) -> float:
	"""Fraction of packets whose received power, under sampled shadowing, falls below P_SEN."""
	rng = as_generator(seed, "shadowing")
	shadowing = rng.normal(config.shadow_mean, config.sigma_sh, size=n_packets)
	received = link.P_tx - path_loss(config, link.d) - shadowing
	return float(np.mean(received < config.P_SEN))
