"""Numerical toolkit for spectral Ricci lower bounds on warped products and tunnel surgery."""
from .errors import (AssemblyError, ConfigError, ConstructionError, DomainError,
                     InsufficientDataError, NoPositiveSolution, NotAdmissible,
                     PreconditionError, RadiusTooLarge, SchemaMismatch, SingularityError,
                     SolverDiverged, TunnelError)
from .green_radial import GreenSolution, green_asymptotics_check, green_solve, model_green
from .models import ModelManifold
from .neck_profile import build_cutoff, build_neck_profile, property_of_f_check, validate_neck
from .spectral import lambda1_radial, rayleigh_quotient, supersolution_defect
from .tunnel import (Surgery, TunnelAssembly, assemble_tunnel, curvature_agreement,
                     decomposed_curvature,
                     r0_search, region_defect_scan, toy_identity_defect)
from .warped_geometry import Params, WarpProfile, ricci_min

__version__ = "0.1.0"
