"""Pseudoholomorphic discs in almost complex charts.

Spectral polar grids, the Cauchy-Green right inverse of d/dzetabar, a
frozen-inverse Newton solver for the nonlinear Cauchy-Riemann equation,
gluing of chart-local discs, disc attachment to tori of boundary circles,
and disc-functional envelopes with reference oracles.
"""
from .errors import (AttachmentError, ChartError, ConfigurationError, DivergenceError, GateError, GeometryError,
                     GluingError, InverseError, JHoloError, RangeError, ResolutionError, StructureError)
from .geometry import (DomainSpec, GoodPairDecomposition, GridFunction, PolarGrid, build_decomposition, build_grid,
                       lp_norm, sobolev_norm)
from .structures import ComplexMatrixField, catalog
from .dbar import cauchy_green, dbar_residual
from .crsolver import LQJReport, estimate_lqj, linearize, newton_solve, right_inverse
from .gluer import GluingProblem, cousin_glue
from .rh import attach_disc, build_preattachment, riemann_power
from .envelope import envelope_estimate, lelong_number_estimate, perron_oracle, poisson_functional
from .expr import parse_scalar_field

__version__ = "0.1.0"
