"""Document-specific topic composition inference for spectral topic models."""

__version__ = "0.1.0"

from .model import (
    CompositionMatrix,
    Corpus,
    TopicModel,
    WordTopicPosterior,
    load_model,
    normalize_corpus,
    read_composition_tsv,
    read_corpus_tsv,
    read_dense_tsv,
    save_model,
    topic_marginals,
    word_topic_posterior,
    write_composition_tsv,
    write_corpus_tsv,
    write_dense_tsv,
)
from .simplex import project_simplex, project_simplex_columns
from .estimators import (
    TliConfig,
    TliInverse,
    spi_infer,
    tli_compute_inverse,
    tli_infer,
    tli_thresholds,
)
from .padd import (
    PaddConfig,
    PaddDiagnostics,
    PaddState,
    admm_dr_solve,
    dual_step,
    padd_infer,
)
from .synth import (
    DirichletPrior,
    FixedLength,
    LogisticNormalPrior,
    PoissonLength,
    SynthConfig,
    SynthOutput,
    sample_dirichlet,
    sample_document,
    sample_logistic_normal,
    synthesize,
)
from .metrics import (
    METRIC_ORDER,
    EvalReport,
    distribution_metrics,
    evaluate_compositions,
    hellinger,
    kl_divergence,
    l1_error,
    linf_error,
    nonsupport_mass,
    prior_distance,
    prominent_topics,
    random_baseline,
    set_prf,
    write_per_doc_tsv,
    write_report_tsv,
)
