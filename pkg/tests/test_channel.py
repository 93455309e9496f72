import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.integrate import quad
from scipy.special import erf

from comm.bases import CommConfig, LinkState
from comm.channel import (collision_prob, dbm_to_watts, energy, erf_taylor, link_report, rb_pool, sensing_error,
						  sensing_error_from_q, sensing_error_monte_carlo, sensing_error_taylor, simulate_collisions,
						  taylor_remainder_bound, throughput, total_error, watts_to_dbm)
from comm.exceptions import LinkDeadError, PoolExhaustedError

CONFIG = CommConfig()
# at d = 1 m the path loss is L0, so this power puts the expected margin at zero
THRESHOLD_DBM = CONFIG.L0 + CONFIG.P_SEN


def _link(margin_db: float = 0.0, d: float = 1.0, w: float = 1.0) -> LinkState:
	return LinkState(d=d, P_tx=THRESHOLD_DBM + 10.0 * CONFIG.gamma * math.log10(d) + margin_db, w=w)


class TestResourcePool:

	def test_pool_size(self):
		assert rb_pool(CommConfig(theta=10, W_subCh=5, CBR=0.0)) == 50.0
		assert rb_pool(CommConfig(theta=10, W_subCh=5, CBR=0.5)) == 25.0
		assert rb_pool(CommConfig(CBR=0.999999)) == pytest.approx(0.0, abs=1e-3)

	def test_busy_ratio_must_be_below_one(self):
		with pytest.raises(ValidationError):
			CommConfig(CBR=1.0)

	def test_collision_probability(self):
		assert collision_prob(50, 1) == 0.0
		assert collision_prob(50, 2) == pytest.approx(0.02)
		assert collision_prob(50, 5) == pytest.approx(1 - 0.98 ** 4)
		assert collision_prob(50, 5) == pytest.approx(0.07763, abs=1e-5)

	def test_collision_monotonicity(self):
		by_M = [collision_prob(20, M) for M in range(1, 10)]
		by_pool = [collision_prob(w_T, 5) for w_T in (5, 10, 20, 40)]
		assert np.all(np.diff(by_M) > 0)
		assert np.all(np.diff(by_pool) < 0)

	def test_exhausted_pool(self):
		with pytest.raises(PoolExhaustedError):
			collision_prob(0.5, 3)

	def test_collisions_match_simulation(self):
		trials = 200000
		p = collision_prob(50, 5)
		simulated = simulate_collisions(50, 5, trials, seed=1)
		assert abs(simulated - p) < 4.0 * math.sqrt(p * (1 - p) / trials)


class TestSensingError:

	def test_zero_margin(self):
		assert sensing_error(CONFIG, _link(0.0)) == pytest.approx(0.5)

	def test_one_sigma_root_two(self):
		link = _link(CONFIG.sigma_sh * math.sqrt(2.0))
		assert sensing_error(CONFIG, link) == pytest.approx(0.5 * (1 - erf(1.0)), rel=1e-12)
		assert sensing_error(CONFIG, link) == pytest.approx(0.0786, abs=1e-4)

	def test_far_tail(self):
		assert sensing_error(CONFIG, _link(20.0 * CONFIG.sigma_sh)) < 1e-12

	def test_monotonicity(self):
		powers = [sensing_error(CONFIG, LinkState(d=100.0, P_tx=p)) for p in (0.0, 10.0, 20.0, 30.0)]
		distances = [sensing_error(CONFIG, LinkState(d=d, P_tx=20.0)) for d in (50.0, 200.0, 800.0, 3200.0)]
		exponents = [sensing_error(CommConfig(gamma=g), LinkState(d=100.0, P_tx=20.0)) for g in (2.0, 3.0, 4.0)]
		assert np.all(np.diff(powers) < 0)
		assert np.all(np.diff(distances) > 0)
		assert np.all(np.diff(exponents) > 0)

	def test_exact_erf_matches_quadrature(self):
		for Q in np.linspace(-4.0, 4.0, 17):
			integral, _ = quad(lambda t: math.exp(-t * t), 0.0, Q, epsabs=1e-14, epsrel=1e-14)
			expected = 0.5 * (1.0 - 2.0 / math.sqrt(math.pi) * integral)
			assert float(sensing_error_from_q(Q)) == pytest.approx(expected, abs=1e-10)

	def test_matches_shadowing_simulation(self):
		link = _link(2.0)
		exact = sensing_error(CONFIG, link)
		packets = 200000
		simulated = sensing_error_monte_carlo(CONFIG, link, packets, seed=3)
		assert abs(simulated - exact) < 4.0 * math.sqrt(exact * (1 - exact) / packets)


class TestTaylor:

	def test_zero_argument(self):
		for order in range(5):
			assert float(sensing_error_from_q(0.0, "taylor", order)) == 0.5

	def test_linear_truncation(self):
		approx = float(sensing_error_from_q(0.5, "taylor", 0))
		exact = float(sensing_error_from_q(0.5))
		assert approx == pytest.approx(0.5 * (1 - 1 / math.sqrt(math.pi)), abs=1e-12)
		assert approx == pytest.approx(0.2179, abs=1e-4)
		assert exact == pytest.approx(0.2398, abs=1e-4)
		assert abs(float(erf_taylor(0.5, 0)) - erf(0.5)) <= taylor_remainder_bound(0.5, 0)

	def test_high_order_converges(self):
		assert float(erf_taylor(1.0, 8)) == pytest.approx(erf(1.0), abs=1e-6)

	def test_remainder_bound_holds(self):
		Q = np.linspace(-1.0, 1.0, 41)
		for order in range(6):
			assert np.all(np.abs(erf_taylor(Q, order) - erf(Q)) <= taylor_remainder_bound(Q, order) + 1e-15)

	def test_clamped_to_unit_interval(self):
		assert float(sensing_error_from_q(3.0, "taylor", 0)) == 0.0
		assert float(sensing_error_from_q(-3.0, "taylor", 0)) == 1.0
		assert 0.0 <= sensing_error_taylor(CONFIG, _link(5.0), 2) <= 1.0

	def test_unknown_mode(self):
		with pytest.raises(ValueError):
			sensing_error_from_q(0.1, "pade")


class TestLinkQuantities:

	def test_total_error(self):
		assert total_error(0.0, 0.7) == 0.0
		assert total_error(0.02, 0.5) == pytest.approx(0.01)
		assert total_error(1.0, 1.0) == 1.0

	def test_throughput(self):
		config = CommConfig(R_ch=1000.0)
		assert throughput(config, LinkState(d=10.0, P_tx=20.0, w=0.0), 0.1) == 0.0
		assert throughput(config, LinkState(d=10.0, P_tx=20.0, w=10.0), 0.1) == pytest.approx(9000.0)
		assert throughput(config, LinkState(d=10.0, P_tx=20.0, w=20.0), 0.1) == pytest.approx(18000.0)

	def test_energy(self):
		link = LinkState(d=10.0, P_tx=30.0)  # 1 W
		assert energy(CONFIG, link, 0.0) == pytest.approx(CONFIG.T)
		assert energy(CONFIG, link, 0.5) == pytest.approx(2.0 * CONFIG.T)
		assert energy(CONFIG, link, 0.2) < energy(CONFIG, link, 0.4)
		with pytest.raises(LinkDeadError):
			energy(CONFIG, link, 1.0)

	def test_power_units(self):
		assert float(dbm_to_watts(30.0)) == pytest.approx(1.0)
		assert float(dbm_to_watts(0.0)) == pytest.approx(1e-3)
		assert float(watts_to_dbm(0.1)) == pytest.approx(20.0)

	def test_link_report(self):
		report = link_report(CONFIG, LinkState(d=80.0, P_tx=20.0, w=10.0), 5, 50.0)
		assert set(report) == {"d", "P_tx", "w", "delta_col", "delta_sen", "delta_er", "throughput", "energy"}
		assert report["delta_er"] == pytest.approx(report["delta_col"] * report["delta_sen"])
		assert report["throughput"] == pytest.approx(CONFIG.R_ch * 10.0 * (1 - report["delta_er"]))
