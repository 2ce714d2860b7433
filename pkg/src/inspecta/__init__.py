"""inspecta: deterministic quadrotor building-inspection simulator.

Visual-inertial state estimation, occupancy voxel mapping, sampling-based
motion planning and crack-triggered revisit planning, at desk scale.
"""

__version__ = "0.1.0"
