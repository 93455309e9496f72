#!/usr/bin/env python3
"""
Cooperative perception lab
Helper selection and C-V2X resource allocation experiments
"""

import argparse
import sys
import traceback
from pathlib import Path

from comm.allocator import AllocationProblem, allocate, allocate_baseline, round_rbs
from comm.bases import LinkState
from comm.channel import link_report, watts_to_dbm
from harness.campaign import CAMPAIGNS, helper_distances, select_mask, selection_metrics
from harness.config import ExperimentConfig, load_config
from harness.exceptions import VerificationError
from harness.results import write_rows, write_table
from harness.verify import run_verification
from scenario.generator import generate_scenario, scenario_to_json
from selection.objective import TimeAggregates, resolve_weights
from utils import logger
from utils.exceptions import SimulationError
from utils.rng import derive_seed, stream


def cmd_generate(config: ExperimentConfig, args) -> int:
	out = Path(config.campaign.output_dir) / "scenarios"
	out.mkdir(parents=True, exist_ok=True)
	for i in range(args.count):
		seed = derive_seed(config.campaign.seed, i)
		scenario = generate_scenario(config.scenario, seed)
		path = out / f"scenario_{seed}.json"
		path.write_text(scenario_to_json(scenario))
		logger.info(f"scenario {i}: {scenario.n_helpers} helpers -> {path}")
	return 0


def cmd_select(config: ExperimentConfig, args) -> int:
	seed = config.campaign.seed
	scenario = generate_scenario(config.scenario, seed)
	aggregates = TimeAggregates.from_scenario(scenario)
	weights = resolve_weights(config.selection.weights, aggregates, config.selection.range_emphasis)
	M = args.M or config.selection.M_values[-1]

	rows = []
	for strategy in args.strategy or config.selection.strategies:
		mask, detail = select_mask(strategy, scenario, aggregates, M, weights, config, seed)
		metrics = selection_metrics(aggregates, mask, weights)
		rows.append({
			"seed": seed,
			"strategy": strategy,
			"M": M,
			"mask": mask.to_list(),
			"f1": metrics["f1"],
			"f2": metrics["f2"],
			"f3": metrics["f3"],
			"ratio": metrics["objective"],
			"dual_bound": detail.get("dual_bound"),
			"iterations": detail.get("iterations"),
		})
		logger.result(f"{strategy:>12}: helpers {list(mask.indices)} ratio {metrics['objective']:.6g}")

	path = write_rows(rows, Path(config.campaign.output_dir) / f"selection_{seed}", args.format)
	logger.success(f"selection written to {path}")
	return 0


def cmd_allocate(config: ExperimentConfig, args) -> int:
	seed = config.campaign.seed
	scenario = generate_scenario(config.scenario, seed)
	M = min(args.M or config.allocation.M, scenario.n_helpers)
	distances = helper_distances(scenario, range(M))
	problem = AllocationProblem.from_config(config.comm, distances, config.allocation)

	rows = []
	for strategy in config.allocation.strategies:
		if strategy == "proposed":
			alloc, trace = allocate(problem, config.allocation)
			logger.info(f"proposed: {trace.iterations_outer} outer / {trace.iterations_inner} inner iterations")
		else:
			alloc = allocate_baseline(problem, strategy, stream(seed, "allocation"))
		rbs = round_rbs(alloc.w, problem.w_T)
		for i in range(M):
			link = LinkState(d=float(distances[i]), P_tx=float(watts_to_dbm(alloc.P[i])), w=float(alloc.w[i]))
			row = {"seed": seed, "strategy": strategy, "vehicle": scenario.helpers[i].id}
			row.update(link_report(config.comm, link, M, problem.w_T))
			row["rb_rounded"] = int(rbs[i])
			rows.append(row)
		logger.result(f"{strategy:>9}: throughput {problem.numerator(alloc):.6g} bit/s, "
					  f"energy {problem.denominator(alloc):.6g} J, ratio {problem.ratio(alloc):.6g}")

	path = write_rows(rows, Path(config.campaign.output_dir) / f"allocation_{seed}", args.format)
	logger.success(f"allocation written to {path}")
	return 0


def _run_campaigns(config: ExperimentConfig, names, fmt: str) -> int:
	for name in names:
		table = CAMPAIGNS[name](config)
		paths = write_table(table, Path(config.campaign.output_dir), name, fmt)
		logger.success(f"{name}: wrote {len(paths)} file(s) to {config.campaign.output_dir}")
	return 0


def cmd_fuse(config: ExperimentConfig, args) -> int:
	return _run_campaigns(config, ["fusion"], args.format)


def cmd_sweep(config: ExperimentConfig, args) -> int:
	names = list(CAMPAIGNS) if args.campaign == "all" else [args.campaign]
	return _run_campaigns(config, names, args.format)


def cmd_verify(config: ExperimentConfig, args) -> int:
	report = run_verification(config, quick=args.quick)
	if not report.passed:
		raise VerificationError(report.failures)
	if report.reported:
		logger.warning(f"gating checks passed; reported only: {', '.join(report.reported)}")
	else:
		logger.success("all verification checks passed")
	return 0


COMMANDS = {
	"generate": cmd_generate,
	"select": cmd_select,
	"allocate": cmd_allocate,
	"fuse": cmd_fuse,
	"sweep": cmd_sweep,
	"verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
	common = argparse.ArgumentParser(add_help=False)
	common.add_argument("--config", help="experiment YAML file (default: config/default.yaml)")
	common.add_argument("--seed", type=int, help="override campaign.seed")
	common.add_argument("--out", help="override campaign.output_dir")
	common.add_argument("--format", choices=["csv", "json"], default="csv")
	verbosity = common.add_mutually_exclusive_group()
	verbosity.add_argument("--verbose", action="store_true", help="print optimizer iterations")
	verbosity.add_argument("--quiet", action="store_true", help="print errors only")

	parser = argparse.ArgumentParser(description="Helper selection and C-V2X allocation experiments")
	verbs = parser.add_subparsers(dest="command", required=True)

	generate = verbs.add_parser("generate", parents=[common], help="write seeded scenarios as JSON")
	generate.add_argument("--count", type=int, default=1)

	select = verbs.add_parser("select", parents=[common], help="select helpers for one scenario")
	select.add_argument("--M", type=int, help="cardinality bound (default: largest configured M)")
	select.add_argument("--strategy", action="append", help="repeatable; default: configured strategies")

	allocate_verb = verbs.add_parser("allocate", parents=[common], help="allocate power and RBs for one scenario")
	allocate_verb.add_argument("--M", type=int, help="number of links (default: allocation.M)")

	verbs.add_parser("fuse", parents=[common], help="run the fusion experiment")

	sweep = verbs.add_parser("sweep", parents=[common], help="run experiment campaigns")
	sweep.add_argument("--campaign", choices=list(CAMPAIGNS) + ["all"], default="all")

	verify = verbs.add_parser("verify", parents=[common], help="run the oracle checks")
	verify.add_argument("--quick", action="store_true", help="fewer instances per check")
	return parser


def main(argv=None) -> int:
	"""Runs one CLI verb: 0 on success, 1 on an error, 2 when verification fails"""
	args = build_parser().parse_args(argv)
	if args.quiet:
		logger.set_verbosity("quiet")
	elif args.verbose:
		logger.set_verbosity("verbose")
	else:
		logger.set_verbosity("normal")

	if not args.quiet:
		print("=" * 60)
		print("Cooperative perception lab")
		print("=" * 60)

	try:
		config = load_config(args.config).with_overrides(seed=args.seed, output_dir=args.out)
		return COMMANDS[args.command](config, args)
	except VerificationError as e:
		logger.error(str(e))
		return 2
	except SimulationError as e:
		logger.error(str(e))
		return 1
	except Exception as e:
		logger.error(f"Fatal error in main: {e}")
		# log stack trace
		logger.error(traceback.format_exc())
		return 1


if __name__ == "__main__":
	sys.exit(main())
