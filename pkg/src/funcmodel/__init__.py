"""Desk-scale numerical laboratory for functional models of the family
L^kappa = A + alpha kappa alpha / 2 with finite-rank alpha."""

from .errors import (FuncModelError, ValidationError, SpectrumError,
                     DomainError, SingularPencilError, BoundaryConvergenceError)
from .operators import (OperatorBackend, PerturbationFactor, KappaParameter,
                        FamilyMember, build_family, apply_operator,
                        herglotz_M, apply_resolvent, compressed_resolvent)
from .charfn import (OperatorFunctionKind, kind_S, kind_theta, kind_numbered,
                     kind_theta_kappa, kind_for_member, chi_kappa, eval_charfn,
                     M_samples, G0_samples, M_boundary_samples,
                     G0_boundary_samples, S_boundary_samples,
                     resolvent_flow_samples, boundary_value,
                     contractivity_report, strauss_relation_check)
from .pg import SignatureProjections, pg_forward, pg_inverse
from .dilation import (ChannelFunction, DilationVector, interior_vector,
                       dilation_inner, dilation_norm, dilation_apply,
                       dilation_resolvent, dilation_compress_check,
                       domain_certificate)
from .modelspace import (AxisGrid, HardyProjector, ModelVector, SpectralWeight,
                         hardy_project, model_inner, model_norm_sq, project_to_K,
                         spectral_map_F, map_Phi, map_Phi_adjoint,
                         phi_norm_sq, cauchy_continuation)
from .spectral import (SmoothnessVerdict, SmoothSettings, ScatteringPair,
                       TimeLimitReport, SingularReport, smooth_flow,
                       model_resolvent, fpm_identity_residual,
                       smooth_membership, smooth_representative,
                       new_representation_residual, scattering_pair,
                       wave_operator_model, wave_operator_time, singular_report)
from .cli import parse_problem, run_command

__version__ = "0.1.0"
