"""
Seeded experiment campaigns.

Each replication r draws its own scenario from derive_seed(campaign.seed, r) and
evaluates every sweep value and strategy on it. Replications are independent, so
they run serially or on a process pool with identical results.
"""

import multiprocessing as mp
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import psutil

from comm.allocator import Allocation, AllocationProblem, allocate, allocate_baseline, round_rbs
from comm.channel import rb_pool
from fusion.fixtures import generate_detections
from fusion.fusion import evaluate_frames, fuse_max_iou, simulate_drops
from fusion.records import DetectionRecord
from harness.config import ExperimentConfig
from harness.exceptions import ExperimentError
from harness.results import ResultTable, Sample
from scenario.bases import Scenario
from scenario.generator import count_overtakes, generate_scenario, trajectories
from selection.baselines import select_baseline
from selection.objective import (ObjectiveWeights, SelectionMask, TimeAggregates, assemble_qcqp, composite_G_D,
								 f1_location, f2_visual_range, f3_motion_blur, resolve_weights)
from selection.selector import dinkelbach_select, dual_bound, snapshot_select
from utils import logger
from utils.exceptions import SimulationError
from utils.rng import derive_seed, stream


def resolve_workers(workers) -> int:
	if workers == "auto":
		return max(1, psutil.cpu_count(logical=False) or 1)
	return int(workers)


def run_replications(worker: Callable[[ExperimentConfig, int], List[Sample]], config: ExperimentConfig,
					 name: str) -> ResultTable:
	n = config.campaign.replications
	workers = min(resolve_workers(config.campaign.workers), n)
	logger.system(f"{name}: {n} replications on {workers} worker(s), seed {config.campaign.seed}")

	if workers == 1:
		batches = [worker(config, r) for r in range(n)]
	else:
		with mp.Pool(workers) as pool:
			batches = pool.starmap(worker, [(config, r) for r in range(n)])

	return ResultTable.from_samples(sample for batch in batches for sample in batch)


def _scenario(config: ExperimentConfig, seed: int, n_helpers: Optional[int] = None) -> Scenario:
	scenario_config = config.scenario
	if n_helpers is not None:
		scenario_config = scenario_config.model_copy(update={"n_helpers": n_helpers})
	return generate_scenario(scenario_config, seed)


def _weights(config: ExperimentConfig, aggregates: TimeAggregates) -> ObjectiveWeights:
	return resolve_weights(config.selection.weights, aggregates, config.selection.range_emphasis)


def helper_distances(scenario: Scenario, indices) -> np.ndarray:
	"""Interval-averaged ego distance of the given helpers, at least 1 m."""
	X = trajectories(scenario)
	rows = np.asarray(list(indices), dtype=int) + 1
	distance = np.abs(X[rows] - X[0][None, :]).mean(axis=1)
	return np.maximum(distance, 1.0)


# --- selection ---------------------------------------------------------------

def select_mask(strategy: str, scenario: Scenario, aggregates: TimeAggregates, M: int, weights: ObjectiveWeights,
				config: ExperimentConfig, seed: int) -> Tuple[SelectionMask, Dict]:
	"""Mask chosen by `strategy`, with optimizer details for the proposed one."""
	section = config.selection
	if strategy == "proposed":
		mask, ratio, trace = dinkelbach_select(aggregates, scenario.camera, M, section.epsilon, section.k_max,
											   weights, section.n_cap)
		detail = {"iterations": len(trace), "etas": [state.eta for state in trace]}
		if section.dual_steps > 0:
			form = assemble_qcqp(aggregates, scenario.camera, trace[-1].eta, M, weights)
			certificate = dual_bound(form, steps=section.dual_steps, primal_value=trace[-1].F_value)
			detail["dual_bound"] = certificate.bound if certificate.is_finite else None
		return mask, detail
	if strategy == "snapshot":
		return snapshot_select(scenario, M, section.epsilon, section.k_max, weights, section.n_cap), {}
	return select_baseline(scenario, M, strategy, stream(seed, "baseline", M)), {}


def selection_metrics(aggregates: TimeAggregates, mask: SelectionMask, weights: ObjectiveWeights) -> Dict[str, float]:
	n_points = aggregates.n_points
	count = mask.count
	total_location = f1_location(aggregates, mask) / n_points
	total_range = float(mask.as_float() @ aggregates.Rbar) / n_points
	G, D = composite_G_D(aggregates, aggregates.camera, mask, weights)
	return {
		"selected": float(count),
		"total_location": total_location,
		"avg_location": total_location / count,
		"total_visual_range": total_range,
		"avg_visual_range": total_range / count,
		"f1": f1_location(aggregates, mask),
		"f2": f2_visual_range(aggregates, mask),
		"f3": f3_motion_blur(aggregates, mask),
		"objective": G / D,
	}


def selection_replication(config: ExperimentConfig, replication: int) -> List[Sample]:
	seed = derive_seed(config.campaign.seed, replication)
	section = config.selection
	samples = []
	try:
		scenario = None
		for value in section.sweep_values:
			if section.axis == "M":
				if scenario is None:
					scenario = _scenario(config, seed)
				M = value
			else:
				scenario = _scenario(config, seed, n_helpers=value)
				M = section.M_fixed
			aggregates = TimeAggregates.from_scenario(scenario)
			weights = _weights(config, aggregates)
			overtakes = count_overtakes(scenario)

			for strategy in section.strategies:
				mask, detail = select_mask(strategy, scenario, aggregates, M, weights, config, seed)
				metrics = selection_metrics(aggregates, mask, weights)
				detail.update({"mask": mask.to_list(), "M": M, "overtakes": overtakes})
				samples.append(Sample(f"selection_{section.axis}", value, strategy, replication, seed, metrics, detail))
	except SimulationError as e:
		raise ExperimentError.wrap("selection sweep", seed, e, replication) from e
	return samples


def _add_marginal_gains(table: ResultTable) -> ResultTable:
	"""Adds the objective decrease from the previous M of the ladder to each selection sample."""
	objective = {(s.strategy, s.replication, s.sweep_value): s.metrics["objective"]
				 for s in table.samples if s.sweep == "selection_M"}
	if not objective:
		return table
	ladder = sorted({key[2] for key in objective})
	previous = dict(zip(ladder[1:], ladder[:-1]))

	samples = []
	for sample in table.samples:
		prior = previous.get(sample.sweep_value)
		if sample.sweep == "selection_M" and prior is not None:
			gain = objective[(sample.strategy, sample.replication, prior)] - sample.metrics["objective"]
			sample = sample._replace(metrics={**sample.metrics, "marginal_gain": gain})
		samples.append(sample)
	return ResultTable.from_samples(samples)


def saturation_share(table: ResultTable, strategy: str = "proposed", early: Tuple[int, int] = (1, 2),
					 late: Tuple[int, int] = (3, 4)) -> float:
	"""Share of replications whose objective gain from late[0] to late[1] is below that from early[0] to early[1]."""
	series = table.per_replication("selection_M", strategy, "objective")
	hits = []
	for values in series.values():
		if not all(m in values for m in early + late):
			continue
		hits.append(values[late[0]] - values[late[1]] < values[early[0]] - values[early[1]])
	return float(np.mean(hits)) if hits else float("nan")


def run_selection_sweep(config: ExperimentConfig) -> ResultTable:
	table = _add_marginal_gains(run_replications(selection_replication, config, "selection sweep"))

	violations = 0
	proposed = table.per_replication(f"selection_{config.selection.axis}", "proposed", "objective")
	for strategy in config.selection.strategies:
		if strategy == "proposed" or not proposed:
			continue
		other = table.per_replication(f"selection_{config.selection.axis}", strategy, "objective")
		for r, values in other.items():
			violations += sum(1 for v, obj in values.items() if proposed[r][v] > obj * (1 + 1e-9))
	if violations:
		logger.warning(f"selection sweep: proposed objective above a baseline in {violations} case(s)")

	if config.selection.axis == "M":
		share = saturation_share(table)
		if np.isfinite(share):
			logger.result(f"selection sweep: diminishing gain (M 3->4 below M 1->2) in {share:.0%} of replications")
	logger.success(f"selection sweep: {len(table.rows)} rows")
	return table


# --- allocation --------------------------------------------------------------

def allocation_metrics(problem: AllocationProblem, alloc: Allocation) -> Dict[str, float]:
	rounded = Allocation(P=alloc.P, w=round_rbs(alloc.w, problem.w_T).astype(float))
	return {
		"throughput": problem.numerator(alloc),
		"energy": problem.denominator(alloc),
		"ratio": problem.ratio(alloc),
		"sum_ratio": problem.sum_of_ratios(alloc),
		"throughput_rounded": problem.numerator(rounded),
	}


def _allocation_points(config: ExperimentConfig) -> List[Tuple[str, float, int, float, float]]:
	"""(axis, value, M, w_T, P_T) for every configured sweep point."""
	section = config.allocation
	w_T = rb_pool(config.comm)
	P_T = config.comm.P_T
	points = []
	for axis in section.axes:
		if axis == "w_T":
			points += [(axis, v, section.M, v, P_T) for v in section.w_T_values]
		elif axis == "P_T":
			points += [(axis, v, section.M, w_T, v) for v in section.P_T_values]
		else:
			points += [(axis, v, v, w_T, P_T) for v in section.M_values]
	return points


def allocation_replication(config: ExperimentConfig, replication: int) -> List[Sample]:
	seed = derive_seed(config.campaign.seed, replication)
	section = config.allocation
	samples = []
	try:
		scenario = _scenario(config, seed)
		nearest = helper_distances(scenario, range(scenario.n_helpers))
		for point, (axis, value, M, w_T, P_T) in enumerate(_allocation_points(config)):
			# a Poisson helper count can fall short of M; the row keeps the link count actually used
			links = min(int(M), scenario.n_helpers)
			if links < M:
				logger.warning(f"allocation {axis}={value}: only {links} helper(s) for M={M} (seed {seed})")
			problem = AllocationProblem.from_config(config.comm, nearest[:links], section, w_T=w_T, P_T=P_T)

			for strategy in section.strategies:
				if strategy == "proposed":
					alloc, trace = allocate(problem, section)
					detail = {"iterations_outer": trace.iterations_outer, "iterations_inner": trace.iterations_inner}
				else:
					alloc = allocate_baseline(problem, strategy, stream(seed, "allocation", point))
					detail = {}
				metrics = allocation_metrics(problem, alloc)
				metrics.update({key: float(count) for key, count in detail.items()})
				metrics["links"] = float(links)
				detail.update(alloc.to_dict())
				samples.append(Sample(f"allocation_{axis}", value, strategy, replication, seed, metrics, detail))
	except SimulationError as e:
		raise ExperimentError.wrap("allocation sweep", seed, e, replication) from e
	return samples


def run_allocation_sweep(config: ExperimentConfig) -> ResultTable:
	table = run_replications(allocation_replication, config, "allocation sweep")
	if "proposed" in config.allocation.strategies:
		for axis in config.allocation.axes:
			proposed = table.per_replication(f"allocation_{axis}", "proposed", "ratio")
			for strategy in config.allocation.strategies:
				if strategy == "proposed":
					continue
				other = table.per_replication(f"allocation_{axis}", strategy, "ratio")
				below = sum(1 for r, vals in other.items() for v, x in vals.items() if proposed[r][v] < x * (1 - 1e-6))
				if below:
					logger.warning(f"allocation sweep ({axis}): proposed ratio below {strategy} in {below} case(s)")
	logger.success(f"allocation sweep: {len(table.rows)} rows")
	return table


# --- fusion ------------------------------------------------------------------

FUSION_METRICS = ("mean_iou", "precision", "recall", "f1")


def link_errors(config: ExperimentConfig, distances: np.ndarray, strategy: str, seed: int) -> np.ndarray:
	"""
	delta_Er of each selected link under the allocation paired with `strategy`: the
	proposed selection gets the proposed allocation, every baseline the configured split.
	"""
	if len(distances) == 0:
		return np.zeros(0)
	problem = AllocationProblem.from_config(config.comm, distances, config.allocation)
	if strategy == "proposed":
		alloc, _ = allocate(problem, config.allocation)
	else:
		alloc = allocate_baseline(problem, config.fusion.baseline_allocation, stream(seed, "allocation"))
	return problem.delta(alloc.P)


def _outcome_metrics(outcome) -> Dict[str, float]:
	return {metric: float(getattr(outcome, metric)) for metric in FUSION_METRICS}


def helper_rows(scenario: Scenario, ego: List[DetectionRecord], helpers: Dict[int, List[DetectionRecord]],
				object_ids: List[int], threshold: float, replication: int, seed: int) -> List[Sample]:
	"""Error-free ego alone, each helper alone and ego plus that helper, keyed by the helper's rank from the ego."""
	alone = _outcome_metrics(fuse_max_iou(ego, {}, (), object_ids, threshold))
	samples = []
	for rank, helper in enumerate(scenario.helpers, start=1):
		own = {helper.id: helpers[helper.id]}
		detail = {"helper": helper.id, "distance": helper.x0 - scenario.ego.x0}
		rows = {
			"ego_only": dict(alone),
			"helper_only": _outcome_metrics(fuse_max_iou([], own, {helper.id}, object_ids, threshold)),
			"ego_plus_helper": _outcome_metrics(fuse_max_iou(ego, own, {helper.id}, object_ids, threshold)),
		}
		for strategy, metrics in rows.items():
			samples.append(Sample("fusion_helper", rank, strategy, replication, seed, metrics, detail))
	return samples


def fusion_replication(config: ExperimentConfig, replication: int) -> List[Sample]:
	seed = derive_seed(config.campaign.seed, replication)
	section = config.fusion
	samples = []
	try:
		scenario = _scenario(config, seed)
		aggregates = TimeAggregates.from_scenario(scenario)
		weights = _weights(config, aggregates)
		ego, helpers = generate_detections(scenario, section.fixtures, stream(seed, "fixtures"))
		# every strategy is scored on the same objects, detected or not
		object_ids = list(range(section.fixtures.n_objects))

		for strategy in section.strategies:
			if strategy == "ego_only":
				indices: List[int] = []
			else:
				mask, _ = select_mask(strategy, scenario, aggregates, section.M, weights, config, seed)
				indices = list(mask.indices)

			ids = [scenario.helpers[i].id for i in indices]
			deltas = link_errors(config, helper_distances(scenario, indices), strategy, seed) if indices else np.zeros(0)
			# same drop stream for every strategy, so survival is coupled across them
			schedule = simulate_drops(dict(zip(ids, deltas)), section.n_frames, stream(seed, "drops"))
			averages = evaluate_frames(ego, {vid: helpers[vid] for vid in ids}, schedule, object_ids, section.threshold)
			metrics = {metric: getattr(averages, metric) for metric in FUSION_METRICS}
			metrics["mean_delta"] = float(deltas.mean()) if len(deltas) else 0.0
			detail = {"helpers": ids, "deltas": [float(d) for d in deltas]}
			samples.append(Sample("fusion", section.M, strategy, replication, seed, metrics, detail))

		samples += helper_rows(scenario, ego, helpers, object_ids, section.threshold, replication, seed)
	except SimulationError as e:
		raise ExperimentError.wrap("fusion experiment", seed, e, replication) from e
	return samples


def fusion_ranking(table: ResultTable, config: ExperimentConfig) -> List[str]:
	"""Fusion strategies by decreasing mean fused IoU."""
	M = config.fusion.M
	return sorted(config.fusion.strategies, key=lambda s: -table.get("fusion", M, s, "mean_iou").mean)


def run_fusion_experiment(config: ExperimentConfig) -> ResultTable:
	table = run_replications(fusion_replication, config, "fusion experiment")
	logger.result(f"fusion: mean fused IoU ranking {' > '.join(fusion_ranking(table, config))}")
	logger.success(f"fusion experiment: {len(table.rows)} rows")
	return table


CAMPAIGNS: Dict[str, Callable[[ExperimentConfig], ResultTable]] = {
	"selection": run_selection_sweep,
	"allocation": run_allocation_sweep,
	"fusion": run_fusion_experiment,
}
