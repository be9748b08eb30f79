"""
Exception hierarchy for the swarm toolkit
"""

from typing import Optional, Tuple


class SwarmForgeError(Exception):
    """Base class for every error raised by swarmforge"""


class ShapeMismatchError(SwarmForgeError, ValueError):
    """Tensor shapes of state, hyper-parameters and bounds disagree"""


class InvalidHyperParametersError(SwarmForgeError, ValueError):
    """A hyper-parameter matrix violates its invariants"""


class HyperEncodingError(SwarmForgeError, ValueError):
    """A flat outer-swarm particle cannot be decoded into a hyper-parameter matrix"""


class NonFiniteFitnessError(SwarmForgeError):
    """A fitness evaluation returned NaN or infinity"""

    def __init__(self, index: Tuple[int, ...], value: float, problem: Optional[str] = None):
        self.index = tuple(int(i) for i in index)
        self.value = value
        self.problem = problem
        where = f" on {problem}" if problem else ""
        super().__init__(f"Non-finite fitness {value!r} for particle {self.index}{where}")


class PlacementError(SwarmForgeError):
    """Obstacle placement could not satisfy the overlap constraints"""


class MissingHypersError(SwarmForgeError, FileNotFoundError):
    """An evolved hyper-parameter file is required but absent"""


class InsufficientMemoryError(SwarmForgeError, MemoryError):
    """The requested swarm does not fit in available memory"""

    def __init__(self, required_bytes: int, available_bytes: int):
        self.required_bytes = int(required_bytes)
        self.available_bytes = int(available_bytes)
        super().__init__(
            f"Swarm needs about {self.required_bytes / 2**30:.2f} GiB "
            f"but only {self.available_bytes / 2**30:.2f} GiB is available"
        )
