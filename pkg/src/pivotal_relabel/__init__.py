"""Post-hoc correction of label switching in MCMC output of finite mixtures
by pivotal units."""

from .chain_store import (
    ChainFormatError,
    Dataset,
    MixtureChain,
    load_chain,
    load_dataset,
    save_chain,
    save_dataset,
    validate_chain,
)
from .partitioning import (
    Partition,
    adjusted_rand,
    default_candidates,
    expected_binder_loss,
    expected_distance_mcmc,
    hclust_complete,
    partition_distance,
    select_partition,
)
from .pivotal import (
    IterationFilter,
    MUSError,
    NoValidIterationsError,
    PivotSet,
    RelabelResult,
    compute_filter,
    kept_proportion,
    pivotal_relabel,
    relabel,
    select_pivots,
    select_pivots_criterion,
    select_pivots_mus,
)
from .similarity import (
    GroupProbMatrix,
    SimilarityMatrix,
    dissimilarity,
    estimate_group_probs,
    estimate_similarity,
)

__version__ = "0.1.0"
