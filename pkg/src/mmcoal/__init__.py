"""
Multiple-merger coalescents: genealogy simulation under time-changing
population size, analytic recursions for sample-relationship quantities,
Cannings-model convergence checks and random-forest ABC model selection.
"""
from .measures import (
    Beta,
    BolthausenSznitman,
    Dirac,
    EldonWakeley,
    Kingman,
    beta_from_alpha,
    dust_profile,
    measure_from_dict,
    merger_rate,
    transition_distribution,
)
from .demography import (
    Constant,
    ExponentialGrowth,
    PiecewiseConstant,
    TimeScaleExponent,
    intensity,
    inverse_intensity,
)

__version__ = "0.1.0"
