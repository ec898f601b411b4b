"""Bipartite OAM state tomography from single-photon mutually unbiased bases."""
from .design import (build_complete_plan, build_overcomplete_plan, build_plan,
                     completeness_check, operator_basis, plan_size_mubs, plan_size_qst)
from .metrics import fidelity, linear_entropy, purity
from .mubs import build_mub_set, oam_labels, verify_unbiasedness
from .reconstruct import FitConfig, bootstrap, fit, linear_invert, rho_from_t
from .simulate import (SourceModel, normalize_probabilities, simulate_counts,
                       target_state)

__version__ = "0.1.0"
