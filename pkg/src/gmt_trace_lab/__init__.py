"""gmt-trace-lab: numerical geometric measure theory for Sobolev trace questions.

Modules: ``geometry`` (implicit domains, voxels), ``measures`` (densities,
perimeter, Hausdorff estimates, rough trace), ``metric`` (boundary-weighted
geodesics), ``sobolev`` (grid functions, witnesses), ``wireframe`` (closed-form
analytics of the stacked-grid tube domain), ``planar`` (2D surveys, forest
domain), ``capacity`` (relative p-capacity upper bounds), ``cli``.
"""

from .errors import (
    DegenerateDomainError,
    DomainError,
    GmtError,
    PreconditionError,
    ResolutionError,
    ResourceError,
    ScaleError,
    SceneError,
    UnsupportedOperationError,
)
from .geometry import ImplicitDomain, VoxelDomain, build_domain, voxelize

__version__ = "0.1.0"

__all__ = [
    "DegenerateDomainError", "DomainError", "GmtError", "PreconditionError", "ResolutionError",
    "ResourceError", "ScaleError", "SceneError", "UnsupportedOperationError",
    "ImplicitDomain", "VoxelDomain", "build_domain", "voxelize", "__version__",
]
