"""Discrete Bayesian networks with Bernoulli-mixture CPD estimation."""
from .errors import GuardError, NetworkError
from .estimation import FitReport, PriorSpec, conventional_map, em_fit
from .inference import FamilyCountTable, expected_family_counts, family_posterior, observed_score
from .mixture import (
    MixtureNetwork,
    Submodel,
    bmn_log_likelihood,
    build_restricted_mbn,
    collapse,
    enumerate_substructures,
    mbn_log_likelihood,
)
from .network import (
    MISSING,
    Dataset,
    DiscreteNetwork,
    NodeSpec,
    ParentConfigCodec,
    dataset_score,
    joint_log_likelihood,
    random_cpts,
    sample,
)

__version__ = "0.1.0"
