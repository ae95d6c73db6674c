from ._cmimh import (
    Model,
    code_stats,
    evaluate,
    exact_jsd,
    exact_kl,
    exact_mi,
    exact_tc,
    generate_synthetic,
    hamming_distance,
    kl_bernoulli,
    skl_bernoulli,
)

__all__ = [
    "Model",
    "code_stats",
    "evaluate",
    "exact_jsd",
    "exact_kl",
    "exact_mi",
    "exact_tc",
    "generate_synthetic",
    "hamming_distance",
    "kl_bernoulli",
    "skl_bernoulli",
]
