"""Time integration, Poincaré sections and periodic orbits."""

from .cycles import (
    CycleResult,
    HomoclinicTable,
    NoCycle,
    find_limit_cycle,
    homoclinic_proximity,
    limit_cycle,
    model_section,
)
from .integrator import DormandPrince, Step, Trajectory, integrate
from .poincare import Crossing, SectionSpec, iter_crossings, section_crossings

__all__ = [
    "Crossing",
    "CycleResult",
    "DormandPrince",
    "HomoclinicTable",
    "NoCycle",
    "SectionSpec",
    "Step",
    "Trajectory",
    "find_limit_cycle",
    "homoclinic_proximity",
    "integrate",
    "iter_crossings",
    "limit_cycle",
    "model_section",
    "section_crossings",
]
