"""Cyclic (co)homology calculus for algebraic noncommutative tori."""

from .chains import (
    Chain,
    PeriodicChain,
    b_plus_B,
    boundary_b,
    ch_idempotent,
    ch_invertible,
    connes_B,
    generalized_trace,
)
from .cochains import (
    MultiDiff,
    E_cocycle,
    bracket,
    compose,
    cup,
    cyclic_contraction,
    derivation,
    derivations,
    hochschild_delta,
    lie_derivative,
    multiplication,
    parse_cochain,
)
from .functionals import Functional, ParityError, gamma, gamma_axes, pairing, parse_functional, tau1, tau2
from .invariant import (
    FunctionalTable,
    NonInvariantError,
    WedgeClass,
    gm_transport_wedge,
    homotopy_h,
    product_cycle,
    project_invariant,
    transport_tilde_chain,
    transport_tilde_functional,
)
from .kernels import BACKEND
from .ode import LinearFamily, ParamSection, affine_fit, dyson_transport, fd_derivative, nilpotent_transport
from .torus import (
    DeformationPoint,
    DimensionError,
    MatrixElement,
    SkewMatrix,
    TorusElement,
    delta,
    invert,
    mat_mul,
    mul,
    trace,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
