"""Concrete group families, their geometry, and random walks on them."""
from .affine import AffineElement, SolElement, hyperbolic_distance
from .core import act, compose, family_of, height, identity_like, inverse, orbit_norm
from .free import FreeWord
from .lamplighter import LampElement, from_dl, to_dl, word_length
from .trees import (DLMove, DLVertex, TreeVertex, bfs_ball, busemann, confluence_height,
                    dl_distance, projection_to_ray, tree_distance)
from .walks import (Component, DriftEstimate, ParametricSpec, SamplePath, StepDistribution,
                    affine_walk, distribution_from_json, dl_walk, lamplighter_standard,
                    point_mass, simulate_walk, sol_walk, srw_free, srw_z, switch_walk,
                    switch_walk_switch, vertical_drift)

__all__ = [name for name in dir() if not name.startswith("_")]
