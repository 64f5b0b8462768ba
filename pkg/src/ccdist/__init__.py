"""Sub-Riemannian distances, geodesics and heat kernels on step-two Carnot groups."""

from .errors import CCDistError, NumericalError, ValidationError
from .groups import Group, Point, Spectrum, heisenberg_group, n32_group, spectrum, star_group, validate_group
from .solver import Certificate, DistanceResult, distance_squared, maximize_phi
from .geodesics import Covector, exp_map, normal_geodesics_through
from .closed_form import htype_distance, n32_distance, star_distance
from .heat import heat_kernel, varadhan_estimate

__all__ = [
    "CCDistError",
    "Certificate",
    "Covector",
    "DistanceResult",
    "Group",
    "NumericalError",
    "Point",
    "Spectrum",
    "ValidationError",
    "distance_squared",
    "exp_map",
    "heat_kernel",
    "heisenberg_group",
    "htype_distance",
    "maximize_phi",
    "n32_distance",
    "n32_group",
    "normal_geodesics_through",
    "spectrum",
    "star_distance",
    "star_group",
    "validate_group",
    "varadhan_estimate",
]
__version__ = "0.1.0"
