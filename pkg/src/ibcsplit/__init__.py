"""Classic and initial-boundary corrected Strang splitting for diffusion-reaction problems."""

__version__ = "0.1.0"

from .discretize import (AnalyticField, DiscreteOperator, EllipticCoefficients1D, FaceBC, Grid1D,
                         Grid2D, assemble_laplacian_2d, assemble_operator_1d,
                         boundary_data_from_trace, build_grid_1d, build_grid_2d)
from .flows import (BlowUpError, IbcStepContext, ReactionTerm, diffusion_halfstep,
                    reaction_flow_modified, reaction_flow_raw)
from .integrators import (ReferenceConfig, SchemeKind, classic_strang_step, ibc_strang_step,
                          integrate, reference_solve)
from .opfunc import AffineFlowResult, SpectralPlan, affine_flow, expm_action, phi1, plan_spectral

__all__ = [
    "AffineFlowResult", "AnalyticField", "BlowUpError", "DiscreteOperator", "EllipticCoefficients1D",
    "FaceBC", "Grid1D", "Grid2D", "IbcStepContext", "ReactionTerm", "ReferenceConfig", "SchemeKind",
    "SpectralPlan", "affine_flow", "assemble_laplacian_2d", "assemble_operator_1d",
    "boundary_data_from_trace", "build_grid_1d", "build_grid_2d", "classic_strang_step",
    "diffusion_halfstep", "expm_action", "ibc_strang_step", "integrate", "phi1", "plan_spectral",
    "reaction_flow_modified", "reaction_flow_raw", "reference_solve",
]
