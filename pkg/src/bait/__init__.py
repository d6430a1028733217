"""Fisher-information batch active learning over fixed embeddings."""
from .baselines import STRATEGIES, select
from .bayes import BayesSetup, bayes_risk, brute_force_opt, greedy_alloc, val
from .embedding import (
    ClassProbabilities,
    EmbeddingPool,
    FisherFactor,
    InfoMatrix,
    fisher_factor_classification,
    fisher_pointwise_regression,
    global_fisher,
    gradient_embedding,
)
from .errors import ConfigError, DimensionError, NumericalError
from .kernels import BACKEND
from .selector import (
    InfoState,
    SelectionConfig,
    apply_update,
    greedy_trace_select,
    init_state,
    score_candidate,
    score_candidate_regression,
    select_batch,
)

__version__ = "0.1.0"
