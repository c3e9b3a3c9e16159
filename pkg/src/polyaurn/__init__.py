"""Generalized Pólya urns: exact partition laws, exchangeability checks, samplers."""

from .exact import (
    AtomicBase,
    ExchangeabilityReport,
    atomic_sequence_probability,
    counterexample_report,
    eppf,
    exchangeability_check,
    expected_cluster_count_exact,
    rising_factorial,
    sequence_probability,
)
from .partitions import Partition, bell_number, canonicalize_labels, enumerate_label_sequences
from .samplers import (
    DiscreteMeasure,
    RngStreamSpec,
    SamplePath,
    sample_finite_dirichlet,
    sample_iid_from_measure,
    sample_stick_breaking,
    sample_urn_path,
)
from .schemes import (
    ConditionViolation,
    ParameterDomainError,
    PredictiveWeights,
    WeightScheme,
    custom_scheme,
    make_builtin_scheme,
    predictive_weights,
    scheme_from_config,
    validate_scheme,
)

__version__ = "0.1.0"
