"""normforge: sparsify sums of semi-norm powers by importance sampling.

The package turns a sum N(x)^p = sum_i w_i N_i(x)^p of semi-norm powers
into a reweighted sum with few nonzero weights whose value stays within a
relative epsilon of the original everywhere, and ships the machinery that
makes this checkable: a log-concave sampler for the measure exp(-N(x)^phat),
per-term importance estimation, a homotopy driver for rounded norms, block
Lewis weights with certificates, and empirical/exact verification.
"""

from .norms import (
    Euclidean,
    GraphEdge,
    Hyperedge,
    Linear,
    Lovasz,
    LpImage,
    SumNorm,
    apply_weights,
    eval_sum,
    eval_term,
    load_instance,
    load_weights,
    save_weights,
)
from .submodular import CutFunction, SetFunction, lovasz_extension, sfm_sparsify
from .sampler import (
    RoundedNorm,
    SampleBatch,
    SamplerConfig,
    chord_endpoints,
    radial_resample,
    sample_mu,
    uniform_ball_walk,
)
from .weights import (
    ProbabilityVector,
    TauVector,
    augment_with_lewis,
    estimate_tau,
    exact_leverage_probs,
    to_probabilities,
)
from .sparsify import (
    SparsifierResult,
    SparsifyConfig,
    choose_M,
    homotopy_sparsify,
    sample_support,
    sparsify_once,
    sparsify_p_power,
)
from .lewis import BlockStructure, LewisResult, block_lewis_fixed_point, certify, sos_lp_probs
from .verify import VerificationReport, empirical_eps, exact_cut_eps, seminorm_suite

__version__ = "0.1.0"

__all__ = [
    "Linear", "GraphEdge", "Hyperedge", "LpImage", "Lovasz", "Euclidean",
    "SumNorm", "eval_term", "eval_sum", "apply_weights",
    "load_instance", "load_weights", "save_weights",
    "SetFunction", "CutFunction", "lovasz_extension", "sfm_sparsify",
    "SamplerConfig", "RoundedNorm", "SampleBatch",
    "chord_endpoints", "uniform_ball_walk", "radial_resample", "sample_mu",
    "TauVector", "ProbabilityVector", "estimate_tau", "to_probabilities",
    "exact_leverage_probs", "augment_with_lewis",
    "SparsifyConfig", "SparsifierResult", "choose_M", "sample_support",
    "sparsify_once", "homotopy_sparsify", "sparsify_p_power",
    "BlockStructure", "LewisResult", "block_lewis_fixed_point", "certify",
    "sos_lp_probs",
    "VerificationReport", "empirical_eps", "exact_cut_eps", "seminorm_suite",
    "__version__",
]
