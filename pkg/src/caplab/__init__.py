"""Random-walk range capacities on Z^d: kernels, solvers, campaigns."""

from .errors import CaplabError, NumericalError, OutputError, ValidationError
from .sites import SiteSet
from .lattice import WalkRecord, sample_walk, stream
from .green import GreenOracle, build_table, cross_term, default_oracle, \
    green_exact
from .capacity import (capacity_escape_mc, capacity_exact,
                       capacity_representation_mc, capacity_variational,
                       equilibrium_measure)
from .decomp import check_lower_bound, check_upper_bound, dyadic_decompose

__version__ = "0.1.0"

__all__ = [
    "CaplabError", "ValidationError", "NumericalError", "OutputError",
    "SiteSet", "WalkRecord", "sample_walk", "stream",
    "GreenOracle", "green_exact", "build_table", "default_oracle",
    "cross_term", "equilibrium_measure", "capacity_exact",
    "capacity_variational", "capacity_escape_mc",
    "capacity_representation_mc",
    "check_lower_bound", "check_upper_bound", "dyadic_decompose",
    "__version__",
]
