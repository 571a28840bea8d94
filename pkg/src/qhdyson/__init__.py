"""Time-dependent Dyson maps and metrics for non-Hermitian Hamiltonians."""

__version__ = "0.1.0"

from .errors import ConfigInvalid, NumericalBreakdown, QHError  # noqa: E402
from .propagator import TimeGrid, Trajectory  # noqa: E402

__all__ = ["__version__", "ConfigInvalid", "NumericalBreakdown", "QHError", "TimeGrid", "Trajectory"]
