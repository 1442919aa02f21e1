"""Quasi-Monte Carlo uncertainty quantification for 2-D Helmholtz scattering.

Library layers, bottom up: `cutoffs` (radial profiles and PML stretching),
`randomfield` (affine coefficient fields), `pml` (complex coefficient
modification), `mesh` (polar-structured triangulations), `fem` (Lagrange
assembly and solves), `scattering` (plane-wave loads, far-field patterns,
verification oracle), `qmc` (CBC lattice rules and shifted estimates),
`analysis` (worked constants), `cli` (experiment orchestration).
"""

__version__ = "0.1.0"

from .cutoffs import CutoffPoly, RadialProfile
from .mesh import StarObstacle, TriMesh, mesh_annulus, mesh_disk, quad_rule
from .pml import PmlProfile, pml_coefficients
from .qmc import LatticeRule, PodWeights, cbc_construct, qmc_estimate
from .randomfield import ParamVector, RandomFieldSpec, sample_n
from .scattering import FarFieldPattern, LoadSpec, PlaneWave, far_field

__all__ = [
    "CutoffPoly", "RadialProfile", "StarObstacle", "TriMesh", "mesh_annulus",
    "mesh_disk", "quad_rule", "PmlProfile", "pml_coefficients", "LatticeRule",
    "PodWeights", "cbc_construct", "qmc_estimate", "ParamVector",
    "RandomFieldSpec", "sample_n", "FarFieldPattern", "LoadSpec", "PlaneWave",
    "far_field", "__version__",
]
