"""Exact steady states of a boundary-driven hardcore-boson flux ladder.

The engine exploits total-particle-number conservation: the unique steady
state is block-diagonal over number sectors, so the Lindblad generator is
solved on the block ansatz with matrix-free, block-tridiagonal application.
"""

__version__ = "0.1.0"

from .basis import SectorBasis, SiteIndex, enumerate_sector, hop, raise_lower
from .liouvillian import BlockDensityMatrix, BlockLiouvillian
from .model import DriveSpec, LadderSpec
from .steady import SolverConfig, evolve_to_steady, solve_linear_traced, solve_steady

__all__ = [
    "SectorBasis", "SiteIndex", "enumerate_sector", "hop", "raise_lower",
    "BlockDensityMatrix", "BlockLiouvillian", "DriveSpec", "LadderSpec",
    "SolverConfig", "solve_steady", "solve_linear_traced", "evolve_to_steady",
    "__version__",
]
