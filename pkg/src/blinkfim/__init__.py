"""Fisher-information bounds for localizing blinking and cofluorescent point sources."""
from .fim import (Scenario, SymMatrix, fim_blinking, fim_blinking_expected, fim_cofluorescent,
                  fim_cofluorescent_1d, fim_functional, rotate_fim, rotation_matrix)
from .metrology import (efficiency, eigen_analysis, eigen_bounds, h_eig, h_ind, h_tot,
                        invert_info, saturated_efficiency)
from .model import AnisotropicGaussianPSF, Detection, GaussianPSF, SourceModel
from .qfim import beta, qfim_blinking_1d, qfim_cofluorescent_1d, qfim_pure_state
from .quadrature import QuadratureError, QuadratureSpec
from .sim import TrialBatch, mle_blinking, mle_cofluorescent, run_batch, sample_photons
from .theorems import Certificate, certify_theorem2, certify_theorem4, default_suite

__version__ = "0.1.0"
