"""Source-device-independent continuous-variable random number generation.

Simulation of homodyne quadrature measurements, certification of the
conditional min-entropy through an entropic uncertainty relation, and
two-universal hashing of the raw outcomes.
"""

__version__ = "0.1.0"

from .combinatorics import seed_cost, select_check_instants, unrank_combination
from .entropy import (
    EntropyReport,
    Estimator,
    analytic_entropies,
    classical_min_entropy,
    estimate_max_entropy,
    exact_report,
    max_entropy,
    min_entropy_lower_bound,
    overlap_constant,
    tail_error_bound,
)
from .errors import *  # noqa: F401,F403
from .extractor import ExtractorSpec, extract_stream, hash_block, output_length, random_matrix
from .protocol import ProtocolConfig, RunReport, certify, run_protocol, secure_rate
from .seeding import SeedPool
from .states import (
    DiscreteDistribution,
    GaussianState,
    Partition,
    Quadrature,
    SampleBlock,
    bin_probabilities,
    sample_quadrature,
)
