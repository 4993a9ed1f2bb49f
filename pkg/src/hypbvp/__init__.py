"""Bounded solutions of linear first-order hyperbolic systems on the strip [0,1] x R."""

from .expr import parse, evaluate, diff
from .problem import ProblemSpec, BoundaryOperatorSpec, ReflectionTerm
from .grid import Grid, GridFunction, Domain
from .characteristics import trace, domega_dx, domega_dt
from .operators import IntegralOperators, apply_R, apply_C, apply_D, apply_F, apply_D2_direct

__version__ = "0.1.0"
