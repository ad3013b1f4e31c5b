"""Exact invariant Courant algebroids on torus bundles, their spinors and T-duals."""

from .coeff_ring import TrigScalar
from .exterior import THETA, THETA_TILDE, ComplexSignature, InvariantForm
from .qla import QuadraticLieAlgebra, SpinorModule
from .courant import (CourantData, IsoData, Residual, Section, build_from_base_data, check_action_compat,
                      check_compatibility, check_decomp_equations, decompose, dorfman, iso_relations,
                      transport_data)
from .spinor import DiracOperator, InvariantSpinor, SpinorSpace, gamma, spin_lift, spinor_pairing
from .tdual import DualityMaps, DualityPackage, compute_k_forms, dualize, verify_duality

__version__ = "0.1.0"
