import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from comm.allocator import (Allocation, AllocationProblem, FwTrace, alloc_objective, allocate, allocate_baseline,
							default_min_power, dinkelbach_allocate, frank_wolfe, fw_linear_oracle, random_allocation,
							round_rbs, uniform_allocation)
from comm.bases import AllocationConfig, CommConfig
from comm.exceptions import AllocationConvergenceError, InfeasibleBudgetError

# sensing threshold far below any received power: every delta is zero in floating point
PERFECT = CommConfig(P_SEN=-400.0)


@pytest.fixture
def problem() -> AllocationProblem:
	return AllocationProblem(comm=CommConfig(), distances=np.array([40.0, 150.0, 350.0]))


@pytest.fixture
def perfect() -> AllocationProblem:
	return AllocationProblem(comm=PERFECT, distances=np.array([30.0, 60.0, 90.0]))


class TestAllocation:

	def test_default_power_floor(self):
		assert default_min_power(1.0, 5) == pytest.approx(2e-3)
		assert default_min_power(1.0, 20) == pytest.approx(1e-3)

	def test_uniform(self):
		problem = AllocationProblem(comm=CommConfig(), distances=np.array([50.0, 60.0, 70.0, 80.0]), w_T=40.0, P_T=20.0)
		alloc = allocate_baseline(problem, "uniform")
		np.testing.assert_allclose(alloc.P, [5.0, 5.0, 5.0, 5.0])
		np.testing.assert_allclose(alloc.w, [10.0, 10.0, 10.0, 10.0])

	def test_random_is_reproducible_and_feasible(self, problem):
		first = random_allocation(problem, 3)
		np.testing.assert_array_equal(first.P, random_allocation(problem, 3).P)
		for seed in range(20):
			assert random_allocation(problem, seed).is_feasible(problem.P_min, problem.P_T, problem.w_T)

	def test_unknown_baseline(self, problem):
		with pytest.raises(ValueError):
			allocate_baseline(problem, "greedy")

	def test_infeasible_floor(self):
		with pytest.raises(InfeasibleBudgetError):
			AllocationProblem(comm=CommConfig(P_min=0.5), distances=np.array([10.0, 20.0, 30.0]))

	def test_rounding_keeps_pool(self):
		counts = round_rbs(np.array([1.5, 1.5, 2.0]), 5.0)
		np.testing.assert_array_equal(counts, [2, 1, 2])
		assert round_rbs(np.array([10.3, 20.9, 18.8]), 50.0).sum() == 50


class TestObjective:

	def test_single_link_forms_agree(self):
		problem = AllocationProblem(comm=CommConfig(), distances=np.array([120.0]))
		alloc = Allocation(P=np.array([0.4]), w=np.array([problem.w_T]))
		assert alloc_objective(problem, alloc, "ratio") == pytest.approx(alloc_objective(problem, alloc, "sum"),
																		 rel=1e-12)

	def test_sum_form_scales_with_power(self, perfect):
		alloc = uniform_allocation(perfect)
		doubled = Allocation(P=2.0 * alloc.P, w=alloc.w)
		assert perfect.sum_of_ratios(doubled) == pytest.approx(0.5 * perfect.sum_of_ratios(alloc))

	def test_unknown_form(self, problem):
		with pytest.raises(ValueError):
			alloc_objective(problem, uniform_allocation(problem), "product")

	@pytest.mark.parametrize("form", ["ratio", "sum"])
	def test_gradient_matches_finite_differences(self, problem, form):
		h = 1e-6
		for seed in range(10):
			x = random_allocation(problem, seed)
			eta = problem.ratio(x)
			grad_P, grad_w = problem.gradient(x, eta, form)
			for i in range(problem.M):
				e = np.zeros(problem.M)
				e[i] = h
				fd_P = -(problem.value(Allocation(P=x.P + e, w=x.w), eta, form)
						 - problem.value(Allocation(P=x.P - e, w=x.w), eta, form)) / (2 * h)
				fd_w = -(problem.value(Allocation(P=x.P, w=x.w + e), eta, form)
						 - problem.value(Allocation(P=x.P, w=x.w - e), eta, form)) / (2 * h)
				assert grad_P[i] == pytest.approx(fd_P, rel=1e-5, abs=1e-6 * np.abs(grad_P).max())
				assert grad_w[i] == pytest.approx(fd_w, rel=1e-5, abs=1e-6 * np.abs(grad_w).max())


class TestLinearOracle:

	def test_all_blocks_to_smallest_gradient(self, problem):
		vertex = fw_linear_oracle(np.ones(3), np.array([-3.0, -1.0, -2.0]), problem)
		np.testing.assert_allclose(vertex.w, [problem.w_T, 0.0, 0.0])
		np.testing.assert_allclose(vertex.P, problem.P_min)

	def test_equal_power_gradients_pick_first(self, problem):
		vertex = fw_linear_oracle(-np.ones(3), np.zeros(3), problem)
		slack = problem.P_T - 3 * problem.P_min
		np.testing.assert_allclose(vertex.P, [problem.P_min + slack, problem.P_min, problem.P_min])
		np.testing.assert_allclose(vertex.w, [problem.w_T, 0.0, 0.0])

	def test_vertex_beats_random_points(self, problem):
		rng = np.random.default_rng(8)
		for _ in range(5):
			grad_P, grad_w = rng.normal(size=3), rng.normal(size=3)
			vertex = fw_linear_oracle(grad_P, grad_w, problem)
			best = grad_P @ vertex.P + grad_w @ vertex.w
			for _ in range(1000):
				x = random_allocation(problem, rng)
				assert best <= grad_P @ x.P + grad_w @ x.w + 1e-9


class TestFrankWolfe:

	def test_optimal_vertex_is_a_fixed_point(self, perfect):
		x0 = Allocation(P=np.full(3, perfect.P_min), w=np.array([perfect.w_T, 0.0, 0.0]))
		x, trace = frank_wolfe(perfect, 1.0, x0)
		assert len(trace.inner) == 1
		assert trace.inner[0]["fw_gap"] == pytest.approx(0.0, abs=1e-9)
		np.testing.assert_array_equal(x.P, x0.P)

	def test_step_schedule_and_feasibility(self, problem):
		x0 = uniform_allocation(problem)
		x, trace = frank_wolfe(problem, problem.ratio(x0), x0, j_max=50)
		assert [r["step"] for r in trace.inner] == [2.0 / (r["j"] + 2.0) for r in trace.inner]
		assert x.is_feasible(problem.P_min, problem.P_T, problem.w_T, rtol=1e-9)
		assert problem.value(x, problem.ratio(x0)) >= problem.value(x0, problem.ratio(x0))
		best = trace.best_gaps()
		assert np.all(np.diff(best) <= 0)

	def test_two_links_match_grid_search(self):
		problem = AllocationProblem(comm=CommConfig(), distances=np.array([60.0, 250.0]))
		alloc, _ = dinkelbach_allocate(problem)

		best = -np.inf
		for P1 in np.linspace(problem.P_min, problem.P_T - problem.P_min, 200):
			for w1 in np.linspace(0.0, problem.w_T, 200):
				# P2 at its floor or taking the rest of the budget
				for P2 in (problem.P_min, problem.P_T - P1):
					x = Allocation(P=np.array([P1, P2]), w=np.array([w1, problem.w_T - w1]))
					best = max(best, problem.ratio(x))
		assert problem.ratio(alloc) >= 0.99 * best


class TestDinkelbachAllocation:

	def test_beats_baselines(self, problem):
		alloc, trace = dinkelbach_allocate(problem)
		assert alloc.is_feasible(problem.P_min, problem.P_T, problem.w_T, rtol=1e-6)
		assert np.all(np.diff(trace.etas) >= -1e-9 * max(trace.etas))
		assert problem.ratio(alloc) >= problem.ratio(uniform_allocation(problem)) * (1 - 1e-9)
		for seed in range(10):
			assert problem.ratio(alloc) >= problem.ratio(random_allocation(problem, seed)) * (1 - 1e-9)
		assert trace.outer[-1]["F"] / problem.denominator(alloc) <= 1e-6 * max(1.0, trace.etas[-1])

	def test_perfect_channel_closed_form(self, perfect):
		alloc, _ = dinkelbach_allocate(perfect)
		expected = PERFECT.R_ch * perfect.w_T / (PERFECT.T * perfect.M * perfect.P_min)
		assert perfect.ratio(alloc) == pytest.approx(expected, rel=1e-6)
		np.testing.assert_allclose(alloc.P, perfect.P_min)

	def test_single_link_matches_scalar_search(self):
		problem = AllocationProblem(comm=CommConfig(), distances=np.array([200.0]))
		alloc, _ = dinkelbach_allocate(problem)
		assert alloc.w[0] == pytest.approx(problem.w_T)

		def negative_ratio(P):
			return -problem.ratio(Allocation(P=np.array([P]), w=np.array([problem.w_T])))

		search = minimize_scalar(negative_ratio, bounds=(problem.P_min, problem.P_T), method="bounded",
								 options={"xatol": 1e-10})
		assert problem.ratio(alloc) == pytest.approx(-search.fun, rel=1e-3)

	def test_non_convergence_carries_trace(self, perfect):
		with pytest.raises(AllocationConvergenceError) as info:
			dinkelbach_allocate(perfect, k_max=1)
		assert len(info.value.trace.outer) == 1

	def test_sum_form(self, problem):
		alloc, trace = allocate(problem, AllocationConfig(form="sum"))
		assert isinstance(trace, FwTrace)
		assert alloc.is_feasible(problem.P_min, problem.P_T, problem.w_T, rtol=1e-6)
		assert problem.sum_of_ratios(alloc) >= problem.sum_of_ratios(uniform_allocation(problem))

	def test_taylor_mode_near_threshold(self):
		distances = np.full(3, 80.0)
		exact = AllocationProblem(comm=CommConfig(), distances=distances)
		taylor = AllocationProblem(comm=CommConfig(), distances=distances, erf_mode="taylor", taylor_order=8)
		P = np.array([0.006, 0.0099, 0.015])
		assert np.all(np.abs(exact.q(P)) <= 1.0)
		np.testing.assert_allclose(taylor.delta(P), exact.delta(P), atol=1e-9)
		np.testing.assert_allclose(taylor.delta_gradient(P), exact.delta_gradient(P), rtol=1e-6)
