"""Numerical tolerances shared across the package.

Modules read these at call time, so assigning e.g. ``config.GEOM_TOL = 1e-10``
changes behaviour globally.
"""

UNIT_TOL = 1e-12
BISECT_TOL = 1e-12
GEOM_TOL = 1e-9
DUPLICATE_TOL = 1e-10
