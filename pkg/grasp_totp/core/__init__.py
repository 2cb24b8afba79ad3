"""
Numerical core: rigid-body algebra, gripper model, load distribution,
LP solver, path dynamics, grasp constraints, planner and calibration.
"""
