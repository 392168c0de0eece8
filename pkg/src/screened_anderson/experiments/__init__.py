"""Probabilistic experiments: Wegner, initial length scales, multiscale analysis."""

from ._stats import Z95, Z99, wilson_interval
from .ils import (
    StrongDisorderConfig,
    StrongDisorderReport,
    ThinTailConfig,
    ThinTailExact,
    ThinTailReport,
    below_kappa_probability,
    ils_strong_disorder,
    ils_thin_exact,
    ils_thin_tail,
)
from .msa import (
    BoxProbe,
    CondSNSCheck,
    MSAParams,
    ScaleReport,
    SnsProbeReport,
    admissible_centers,
    interior_amplitudes,
    max_distant_subset,
    msa_run,
    nr_predicate,
    ns_predicate,
    sns_probe,
)
from .wegner import (
    WegnerConfig,
    WegnerReport,
    fit_wegner_constant,
    wegner_exact,
    wegner_experiment,
)

__all__ = [
    "Z95",
    "Z99",
    "wilson_interval",
    "StrongDisorderConfig",
    "StrongDisorderReport",
    "ThinTailConfig",
    "ThinTailExact",
    "ThinTailReport",
    "below_kappa_probability",
    "ils_strong_disorder",
    "ils_thin_exact",
    "ils_thin_tail",
    "BoxProbe",
    "CondSNSCheck",
    "MSAParams",
    "ScaleReport",
    "SnsProbeReport",
    "admissible_centers",
    "interior_amplitudes",
    "max_distant_subset",
    "msa_run",
    "nr_predicate",
    "ns_predicate",
    "sns_probe",
    "WegnerConfig",
    "WegnerReport",
    "fit_wegner_constant",
    "wegner_exact",
    "wegner_experiment",
]
