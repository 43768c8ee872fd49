from .gibbs import (
    PriorSpec,
    conjugate_posterior_mean,
    gibbs_multivariate,
    gibbs_scale_mixture,
    gibbs_univariate,
)
from .metrics import component_mse, estimate_component_means, match_components, switch_rate
from .scenarios import (
    FISHERY_LIKE,
    SCENARIO_MEANS,
    LabeledSample,
    ScenarioSpec,
    generate_fishery_like,
    generate_scenario,
    generate_univariate,
)

__all__ = [
    "FISHERY_LIKE", "SCENARIO_MEANS", "LabeledSample", "PriorSpec", "ScenarioSpec",
    "component_mse", "conjugate_posterior_mean", "estimate_component_means",
    "generate_fishery_like", "generate_scenario", "generate_univariate",
    "gibbs_multivariate", "gibbs_scale_mixture", "gibbs_univariate", "match_components", "switch_rate",
]
