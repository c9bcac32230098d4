"""Smoothing kernels, weak-derivative verification, and Sobolev norms on sampled grids."""

from .grid import (
    Box,
    Grid,
    GridFunction,
    Region,
    ae_equal,
    interior_region,
    lp_norm,
    make_grid,
    quadrature,
)
from .mollifier import Mollifier, MollifierProfile, UnitReport, scale, standard_bump, verify_unit
from .convolution import (
    ConvergenceTable,
    KernelReport,
    OrbitNet,
    compose,
    convergence_study,
    mollify,
    orbit,
)
from .weakdiff import (
    PairingResidual,
    TestFunction,
    commutation_residual,
    mollified_derivative,
    pair,
    test_function_catalog,
    verify_weak_derivative,
)
from .sobolev import (
    DerivativeFamily,
    MembershipReport,
    boundary_vanish_check,
    membership_report,
    sobolev_norm,
)
from .dynamics import (
    FlowCheck,
    NewtonTrace,
    VectorGridFunction,
    distributional_shadow,
    exponential_flow,
    invertibility_check,
    newton_net,
    section_pairing,
)
from .expr import EvalError, ParseError, evaluate, parse, to_source

__version__ = "0.1.0"

__all__ = [
    "Box",
    "Grid",
    "GridFunction",
    "Region",
    "make_grid",
    "quadrature",
    "lp_norm",
    "interior_region",
    "ae_equal",
    "MollifierProfile",
    "Mollifier",
    "UnitReport",
    "standard_bump",
    "scale",
    "verify_unit",
    "OrbitNet",
    "ConvergenceTable",
    "KernelReport",
    "mollify",
    "orbit",
    "convergence_study",
    "compose",
    "TestFunction",
    "PairingResidual",
    "pair",
    "test_function_catalog",
    "verify_weak_derivative",
    "mollified_derivative",
    "commutation_residual",
    "DerivativeFamily",
    "MembershipReport",
    "sobolev_norm",
    "membership_report",
    "boundary_vanish_check",
    "NewtonTrace",
    "FlowCheck",
    "VectorGridFunction",
    "newton_net",
    "invertibility_check",
    "exponential_flow",
    "distributional_shadow",
    "section_pairing",
    "parse",
    "evaluate",
    "to_source",
    "ParseError",
    "EvalError",
    "__version__",
]
