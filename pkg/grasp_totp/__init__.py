"""
Grasp TOTP - Core Package

Suction-cup grasp modeling and grasp-constrained time-optimal path
parameterization.

Main Components:
- Load distribution: minimum spring energy cup forces for a tool wrench
- Grasp constraints: suction-loss and slippage rows linear in (sdot^2, sddot)
- Planner: sequential LP over x = sdot^2 with kinematic and grasp limits
- Max-load search and stiffness weight fitting

Version: 0.1.0
"""

__version__ = "0.1.0"
__description__ = "Suction grasp failure constraints for time-optimal motion planning"

from .core.gripper import GripperModel, StiffnessWeights, SuctionCup
from .core.load_distribution import LoadDistribution, distribute_with_adjustment, solve_distribution
from .core.se3 import RigidTransform, Twist, Wrench
from .core.totp import KinematicLimits, TotpProblem, TotpSolution, max_load_search, solve_totp
from .exceptions import GraspPlanningError

__all__ = [
    "GripperModel",
    "StiffnessWeights",
    "SuctionCup",
    "LoadDistribution",
    "distribute_with_adjustment",
    "solve_distribution",
    "RigidTransform",
    "Twist",
    "Wrench",
    "KinematicLimits",
    "TotpProblem",
    "TotpSolution",
    "max_load_search",
    "solve_totp",
    "GraspPlanningError",
]
