"""
Named, splittable random streams.

Every consumer of randomness asks for a stream by name, so adding draws to one
stage (say, channel shadowing) never shifts the numbers another stage sees.
Streams are Philox generators keyed by numpy SeedSequence spawn keys.
"""

from typing import Dict, Union

import numpy as np

STREAMS: Dict[str, int] = {
	"positions": 0,
	"velocities": 1,
	"shadowing": 2,
	"drops": 3,
	"baseline": 4,
	"allocation": 5,
	"fixtures": 6,
	"instances": 7,
	"collisions": 8,
}

SeedLike = Union[int, np.random.Generator]


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
	"""
	Returns the generator for stream `name` under `seed`.

	:param seed: non-negative 64-bit seed.
	:param name: one of STREAMS.
	:param keys: extra non-negative integers (replication index, attempt, ...)
	"""
	if name not in STREAMS:
		raise ValueError(f"Unknown random stream '{name}', expected one of {list(STREAMS)}")
	assert seed >= 0, "seed must be non-negative"
	spawn_key = (STREAMS[name],) + tuple(int(k) for k in keys)
	seq = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
	return np.random.Generator(np.random.Philox(seq))


def as_generator(seed: SeedLike, name: str, *keys: int) -> np.random.Generator:
	"""Passes generators through untouched; turns integer seeds into the named stream."""
	if isinstance(seed, np.random.Generator):
		return seed
	return stream(int(seed), name, *keys)


def derive_seed(seed: int, *keys: int) -> int:
	"""Derives a child 63-bit integer seed (one per replication)."""
	seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
	return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
