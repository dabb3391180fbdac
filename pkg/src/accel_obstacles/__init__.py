"""Velocity and acceleration obstacles for second-order collision avoidance."""

from .geometry import GEOM_EPS, Disk, Vec2, grow, homothety, homothety_disk
from .obstacle_maps import (
    MEMBER_EPS,
    TAU_MIN,
    MapKind,
    ObstacleMap,
    RelativeDynamics,
    SamplingPolicy,
    ao_temporal,
    boundary_polyline,
    build_map,
    membership,
    nao_temporal,
    nlvo_temporal,
    vo_temporal,
)
from .trajectories import (
    Circular,
    ConstAccel,
    Linear,
    Piecewise,
    Trajectory,
    TrajectoryDomainError,
    evaluate,
    predict_from_state,
)

__version__ = "0.1.0"
