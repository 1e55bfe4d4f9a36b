"""
Plants, disturbances, track geometry and task environments.
"""
from .environments import Environment, PointMassEnvironment, RacingEnvironment, make_environment
from .point_mass import point_mass_step
from .single_track import single_track_step
from .track import FrenetPose, TrackGeometry, from_frenet, to_frenet

__all__ = [
    'Environment',
    'FrenetPose',
    'PointMassEnvironment',
    'RacingEnvironment',
    'TrackGeometry',
    'from_frenet',
    'make_environment',
    'point_mass_step',
    'single_track_step',
    'to_frenet',
]
