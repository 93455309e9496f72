class SimulationError(Exception):
	"""Base class of every domain error raised by the library"""
	pass
