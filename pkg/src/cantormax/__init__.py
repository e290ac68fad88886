"""Randomized sparse Cantor constructions, exact intersection/correlation
combinatorics, and desk-scale maximal-operator experiments."""

from .core import (
    CantorLevel,
    CantorSet,
    DimensionReport,
    MultiIndex,
    alpha,
    build_deterministic,
    dim_bounds,
    dimension_limit_symbolic,
    interval_of,
)
from .correlation import (
    CorrelationReport,
    c0_constant,
    classify_A,
    lambda_exact,
    lambda_sigma,
    sup_lambda_tr,
    trivial_bound,
)
from .grids import DiscretizationGrid
from .intersect import (
    AffineTuple,
    IntersectionTuple,
    classify,
    enumerate_F,
    projection_multiplicity,
    proximity_check,
    symdiff_bound_check,
    tangency_counts,
)
from .maxops import (
    AdjointAssignment,
    MaximalQuery,
    average,
    differentiation_experiment,
    l1_divergence_demo,
    lp_norm,
    mk_operator,
    phi_star,
    restricted_maximal,
    restricted_type_ratio,
    unrestricted_maximal,
)
from .params import ConstructionParams, custom, fixed_dimension, one_dimensional
from .randomize import (
    GateReport,
    RngStream,
    azuma_bound,
    bernoulli_layer,
    bernstein_bound,
    boundedness_check,
    construct,
    gate_correlation,
    gate_counts,
    gate_deviation,
    verify_set,
)
from .stepfn import PiecewiseLinear, StepFunction, inner_product, product_integral

__version__ = "0.1.0"

__all__ = [
    "AdjointAssignment",
    "AffineTuple",
    "CantorLevel",
    "CantorSet",
    "ConstructionParams",
    "CorrelationReport",
    "DimensionReport",
    "DiscretizationGrid",
    "GateReport",
    "IntersectionTuple",
    "MaximalQuery",
    "MultiIndex",
    "PiecewiseLinear",
    "RngStream",
    "StepFunction",
    "alpha",
    "average",
    "azuma_bound",
    "bernoulli_layer",
    "bernstein_bound",
    "boundedness_check",
    "build_deterministic",
    "c0_constant",
    "classify",
    "classify_A",
    "construct",
    "custom",
    "differentiation_experiment",
    "dim_bounds",
    "dimension_limit_symbolic",
    "enumerate_F",
    "fixed_dimension",
    "gate_correlation",
    "gate_counts",
    "gate_deviation",
    "inner_product",
    "interval_of",
    "l1_divergence_demo",
    "lambda_exact",
    "lambda_sigma",
    "lp_norm",
    "mk_operator",
    "one_dimensional",
    "phi_star",
    "product_integral",
    "projection_multiplicity",
    "proximity_check",
    "restricted_maximal",
    "restricted_type_ratio",
    "sup_lambda_tr",
    "symdiff_bound_check",
    "tangency_counts",
    "trivial_bound",
    "unrestricted_maximal",
    "verify_set",
]
