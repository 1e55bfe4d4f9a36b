"""
Domain types, the sampled safe set and local convex-hull distances.
"""
from .errors import SitLmpcError
from .hull import hull_distance, hull_distances, hull_weights
from .safe_set import Dataset, SafeSet, build_dataset, cost_to_go, update_safe_set

__all__ = [
    'Dataset',
    'SafeSet',
    'SitLmpcError',
    'build_dataset',
    'cost_to_go',
    'hull_distance',
    'hull_distances',
    'hull_weights',
    'update_safe_set',
]
