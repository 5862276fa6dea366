"""Helmholtz scattering by penetrable polytopes.

Forward solves via the Lippmann-Schwinger equation, far-field analysis,
propagation-of-smallness bounds, complex-exponential special solutions and
desk-scale experiments on shape stability and corner scattering.
"""

from . import cgo, cli, fields, geom, rellich, solver, specfun, stability

__all__ = ["geom", "specfun", "fields", "solver", "rellich", "cgo",
           "stability", "cli"]
__version__ = "0.1.0"
