"""Mallows ranking models: sampling, maximum likelihood, regeneration and
automatic model-size selection for top-t rankings."""

from .consensus import ConsensusResult, fit_center
from .estimation import (
    FittedModel,
    fit_gm_known_center,
    fit_igm,
    fit_phi,
    fit_theta_known_center,
    log_likelihood,
    mean_inversions_g,
    q_factorial,
)
from .io import ParseError, parse_rankings, write_rankings
from .permutation import (
    Permutation,
    components,
    compose,
    decode_inversion_table,
    identity,
    inversion_table,
    inversions,
    invert,
    kendall_tau,
    prefix_inversion_table,
    relative,
    splitting_times,
)
from .ranking import RankingDataset
from .regeneration import component_length_law, expected_component_length, q_pochhammer, renewal_monte_carlo
from .sampling import sample_gm, sample_igm_top_t, sample_mallows_phi, sample_p_shifted
from .selection import select_t

__version__ = "0.1.0"

__all__ = [
    "ConsensusResult",
    "FittedModel",
    "ParseError",
    "Permutation",
    "RankingDataset",
    "component_length_law",
    "components",
    "compose",
    "decode_inversion_table",
    "expected_component_length",
    "fit_center",
    "fit_gm_known_center",
    "fit_igm",
    "fit_phi",
    "fit_theta_known_center",
    "identity",
    "inversion_table",
    "inversions",
    "invert",
    "kendall_tau",
    "log_likelihood",
    "mean_inversions_g",
    "parse_rankings",
    "prefix_inversion_table",
    "q_factorial",
    "q_pochhammer",
    "relative",
    "renewal_monte_carlo",
    "sample_gm",
    "sample_igm_top_t",
    "sample_mallows_phi",
    "sample_p_shifted",
    "select_t",
    "splitting_times",
    "write_rankings",
    "__version__",
]
