"""Random spherical polytopes P(A) = {x : <a, x> <= 1} and their polars conv(A).

Exact hulls and diameters, shadow paths, stitched paths and certified lower
bounds on graph distances, with a seeded experiment harness.
"""
from .hull import Hull, contains_origin, convex_hull, hull_vertex_graph, polar_vertex_graph
from .polytope_graph import VertexGraph, bfs_distance, diameter, extract_dual_walk
from .sampler import PointCloud, sample_poisson_sphere
from .sphere_geom import SphericalCap, cap_measure, greedy_separated_net, solve_epsilon

__version__ = "0.1.0"

__all__ = [
    "Hull",
    "PointCloud",
    "SphericalCap",
    "VertexGraph",
    "bfs_distance",
    "cap_measure",
    "contains_origin",
    "convex_hull",
    "diameter",
    "extract_dual_walk",
    "greedy_separated_net",
    "hull_vertex_graph",
    "polar_vertex_graph",
    "sample_poisson_sphere",
    "solve_epsilon",
]
