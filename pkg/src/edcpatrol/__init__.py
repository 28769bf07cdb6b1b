"""Patrolling policies for event detection and confirmation on graphs.

Submodules
----------
graph
    Metric closure, TSP tours and tour periods.
analytic
    Closed-form confirmation probabilities and policy optimizers.
sim
    Discrete-event Monte Carlo patrol simulator.
offline
    Offline feasibility search and the TSPTW reduction.
cli
    Command-line front end.
"""

from edcpatrol.errors import DisconnectedGraphError, SizeCapError, ValidationError
from edcpatrol.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "DisconnectedGraphError", "SizeCapError", "ValidationError"]
