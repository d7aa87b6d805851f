"""Bifurcation analysis of an epidemic model with treatment, recruitment and
risk perception."""

from .bifurcation import (
    BranchRow,
    HopfPoint,
    NoHopf,
    TbtDiagnostics,
    TranscriticalReport,
    UnfoldingParams,
    detect_transcritical,
    find_hopf,
    hopf_bisect,
    locate_tbt_point,
    sweep_branch,
    unfolding,
)
from .dynamics import (
    CycleResult,
    HomoclinicTable,
    NoCycle,
    SectionSpec,
    find_limit_cycle,
    homoclinic_proximity,
    integrate,
    limit_cycle,
    section_crossings,
)
from .equilibria import (
    Equilibrium,
    NoEndemic,
    classify,
    disease_free_equilibrium,
    eigenvalues_3x3,
    endemic_closed_form,
    endemic_constants,
    newton_equilibrium,
    r0,
)
from .errors import *  # noqa: F401,F403
from .model import (
    REFERENCE_PARAMS,
    CoreState,
    FullState,
    ModelParams,
    jacobian_analytic,
    jacobian_fd,
    rhs_full,
    rhs_reduced,
    theta,
)
from .normal_form import (
    JordanChains,
    TbtReport,
    bilinear_form_B,
    bt_quadratic_coeffs,
    bt_report,
    jordan_chains,
    reduced_fit_oracle,
)

__version__ = "0.1.0"
