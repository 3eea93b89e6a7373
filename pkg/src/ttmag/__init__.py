"""Two-qubit thermal machine used as a magnetometer.

A known qubit K (hot bath) and an unknown qubit U (cold bath) run a
two-stroke cycle. Sweeping the known field until the hot-bath heat changes
sign locates the point where both qubits have equal thermal populations,
from which the unknown field follows as ``omega_un = omega_k* T_c / T_h``.
"""

__version__ = "0.1.0"
