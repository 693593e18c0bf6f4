from src.graphsampler.adjacency import normalize_adjacency  # noqa: F401
from src.graphsampler.bias import (  # noqa: F401
    analytic_bias,
    bias_ratio,
    bias_ratio_factor,
    empirical_bias,
    exact_bias,
    matched_icdf_temperature,
)
from src.graphsampler.cdfs import analytic_cdf, gumbel_cdf, icdf_cdf  # noqa: F401
from src.graphsampler.posterior import GraphPosterior, sample_graph  # noqa: F401
from src.graphsampler.reference import ReferenceDistribution  # noqa: F401
from src.graphsampler.rng import DrawCounter, make_generator  # noqa: F401
from src.graphsampler.samplers import (  # noqa: F401
    gumbel_relax,
    gumbel_sample,
    gumbel_samples,
    icdf_relax,
    icdf_sample,
    icdf_samples,
    relaxed_samples,
)
