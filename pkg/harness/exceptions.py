from typing import List, Optional

from utils.exceptions import SimulationError


class ConfigError(SimulationError):
	def __init__(self, path: str, reason: str):
		self.path = path
		self.reason = reason
		super().__init__(f"Invalid experiment configuration '{path}': {reason}")

	def __reduce__(self):
		return ConfigError, (self.path, self.reason)


class ExperimentError(SimulationError):
	"""A module error raised inside a replication, tagged with the replication seed"""
	def __init__(self, experiment: str, seed: int, cause_type: str, cause_message: str, replication: Optional[int] = None):
		self.experiment = experiment
		self.seed = seed
		self.cause_type = cause_type
		self.cause_message = cause_message
		self.replication = replication
		where = f"replication {replication}, " if replication is not None else ""
		super().__init__(f"{experiment} failed ({where}seed {seed}): {cause_type}: {cause_message}")

	@classmethod
	def wrap(cls, experiment: str, seed: int, cause: Exception, replication: Optional[int] = None) -> "ExperimentError":
		return cls(experiment, seed, type(cause).__name__, str(cause), replication)

	# crosses process boundaries when replications run on a pool
	def __reduce__(self):
		return ExperimentError, (self.experiment, self.seed, self.cause_type, self.cause_message, self.replication)


class VerificationError(SimulationError):
	def __init__(self, failures: List[str]):
		self.failures = failures
		super().__init__(f"{len(failures)} verification check(s) failed: {', '.join(failures)}")

	def __reduce__(self):
		return VerificationError, (self.failures,)
