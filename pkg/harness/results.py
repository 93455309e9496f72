"""
Long-format result tables and their writers.

A campaign produces samples, one per (replication, sweep value, strategy), each
carrying a dict of metric values. Aggregation sorts samples by replication before
reducing, so serial and parallel runs give the same table.
"""

import json
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional

import pandas as pd

KEY_COLUMNS = ["sweep", "sweep_value", "strategy", "metric"]
TABLE_COLUMNS = KEY_COLUMNS + ["mean", "stddev", "count"]


class ResultRow(NamedTuple):
	sweep: str
	sweep_value: float
	strategy: str
	metric: str
	mean: float
	stddev: float
	count: int


class Sample(NamedTuple):
	sweep: str
	sweep_value: float
	strategy: str
	replication: int
	seed: int
	metrics: Dict[str, float]
	detail: Dict


def _native(value):
	"""numpy scalars back to int or float, so JSON and equality behave."""
	return value.item() if hasattr(value, "item") else value


class ResultTable:
	"""One row per (sweep, sweep_value, strategy, metric)."""
	def __init__(self, rows: List[ResultRow], samples: Optional[List[Sample]] = None):
		keys = [(r.sweep, r.sweep_value, r.strategy, r.metric) for r in rows]
		assert len(keys) == len(set(keys)), "duplicate (sweep, sweep_value, strategy, metric) rows"
		self.rows = rows
		self.samples = samples or []

	@classmethod
	def from_samples(cls, samples: Iterable[Sample]) -> "ResultTable":
		samples = sorted(samples, key=lambda s: (s.sweep, s.sweep_value, s.strategy, s.replication))
		values = pd.DataFrame(
			[(s.sweep, s.sweep_value, s.strategy, metric, float(value))
			 for s in samples for metric, value in s.metrics.items()],
			columns=KEY_COLUMNS + ["value"],
		)
		if values.empty:
			return cls([], samples)

		stats = values.groupby(KEY_COLUMNS, sort=True)["value"].agg(mean="mean", stddev="std", count="count")
		# a single sample has no spread
		stats["stddev"] = stats["stddev"].fillna(0.0)
		rows = [
			ResultRow(sweep, _native(value), strategy, metric, float(mean), float(stddev), int(count))
			for (sweep, value, strategy, metric), mean, stddev, count
			in zip(stats.index, stats["mean"], stats["stddev"], stats["count"])
		]
		return cls(rows, samples)

	def get(self, sweep: str, sweep_value: float, strategy: str, metric: str) -> ResultRow:
		for row in self.rows:
			if (row.sweep, row.sweep_value, row.strategy, row.metric) == (sweep, sweep_value, strategy, metric):
				return row
		raise KeyError(f"no row for {sweep}={sweep_value}, strategy={strategy}, metric={metric}")

	def series(self, sweep: str, strategy: str, metric: str) -> List[ResultRow]:
		return sorted((r for r in self.rows if (r.sweep, r.strategy, r.metric) == (sweep, strategy, metric)),
					  key=lambda r: r.sweep_value)

	def per_replication(self, sweep: str, strategy: str, metric: str) -> Dict[int, Dict[float, float]]:
		"""replication -> {sweep_value: metric value}"""
		out: Dict[int, Dict[float, float]] = {}
		for s in self.samples:
			if s.sweep == sweep and s.strategy == strategy and metric in s.metrics:
				out.setdefault(s.replication, {})[s.sweep_value] = s.metrics[metric]
		return out

	@property
	def sweeps(self) -> List[str]:
		return sorted({r.sweep for r in self.rows})

	@property
	def metrics(self) -> List[str]:
		return sorted({r.metric for r in self.rows})

	def to_records(self) -> List[Dict]:
		return [row._asdict() for row in self.rows]


def _format(value) -> str:
	if isinstance(value, float):
		return repr(value)
	return str(value)


def write_csv(table: ResultTable, path: Path) -> Path:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	pd.DataFrame(table.rows, columns=TABLE_COLUMNS).to_csv(path, index=False)
	return path


def write_json(table: ResultTable, path: Path) -> Path:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	with open(path, 'w') as f:
		json.dump(table.to_records(), f, indent=2)
	return path


def write_audit(table: ResultTable, path: Path) -> Path:
	"""Per-replication samples, enough to recompute every aggregated row."""
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	records = [sample._asdict() for sample in table.samples]
	with open(path, 'w') as f:
		json.dump(records, f, indent=2)
	return path


def write_gnuplot(table: ResultTable, directory: Path, prefix: str) -> List[Path]:
	"""
	One whitespace-separated file per (sweep, metric): the sweep value in the first
	column, then mean and stddev for each strategy.
	"""
	directory = Path(directory)
	directory.mkdir(parents=True, exist_ok=True)
	written = []
	for sweep in table.sweeps:
		sweep_rows = [r for r in table.rows if r.sweep == sweep]
		strategies = sorted({r.strategy for r in sweep_rows})
		for metric in sorted({r.metric for r in sweep_rows}):
			lookup = {(r.sweep_value, r.strategy): r for r in sweep_rows if r.metric == metric}
			values = sorted({v for v, _ in lookup})
			path = directory / f"{prefix}_{sweep}_{metric}.dat"
			with open(path, 'w') as f:
				header = " ".join(f"{s}_mean {s}_stddev" for s in strategies)
				f.write(f"# {sweep} {header}\n")
				for value in values:
					cells = []
					for strategy in strategies:
						row = lookup.get((value, strategy))
						cells += ["nan", "nan"] if row is None else [repr(row.mean), repr(row.stddev)]
					f.write(f"{_format(value)} {' '.join(cells)}\n")
			written.append(path)
	return written


def write_table(table: ResultTable, directory: Path, name: str, fmt: str = "csv") -> List[Path]:
	"""Writes the table in `fmt`, the audit JSON and the gnuplot files for campaign `name`."""
	directory = Path(directory)
	if fmt == "csv":
		paths = [write_csv(table, directory / f"{name}.csv")]
	elif fmt == "json":
		paths = [write_json(table, directory / f"{name}.json")]
	else:
		raise ValueError(f"Unknown output format '{fmt}', expected 'csv' or 'json'")
	paths.append(write_audit(table, directory / f"{name}_audit.json"))
	paths += write_gnuplot(table, directory / "plots", name)
	return paths


def write_rows(rows: List[Dict], path: Path, fmt: str = "csv") -> Path:
	"""Plain record rows (one per link, selection or scenario) as CSV or JSON."""
	path = Path(path).with_suffix(f".{fmt}")
	path.parent.mkdir(parents=True, exist_ok=True)
	if fmt == "json":
		with open(path, 'w') as f:
			json.dump(rows, f, indent=2)
		return path
	if fmt != "csv":
		raise ValueError(f"Unknown output format '{fmt}', expected 'csv' or 'json'")
	# list cells (masks, allocations) are kept as JSON text
	frame = pd.DataFrame(rows).map(lambda cell: json.dumps(cell) if isinstance(cell, list) else cell)
	frame.to_csv(path, index=False)
	return path
