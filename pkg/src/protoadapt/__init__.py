"""Few-shot adaptation of prototype-based classifiers over fixed embeddings.

Two adapters share one softmax linear probe: a deterministic point-estimate
trainer that pulls weight rows toward the class prototypes, and a Bayesian
variational trainer that learns a Gaussian posterior over the weights and
predicts by Monte Carlo averaging. The metrics module grades the resulting
confidence scores via calibration error and selective classification.
"""

from .bayes_adapter import (
    BayesConfig,
    GaussianPrior,
    VariationalPosterior,
    kl_diag_gaussian,
    neg_elbo,
    neg_elbo_gradient,
    predict_bayes,
    sample_weights,
    train_bayes,
)
from .data import (
    FewShotSplit,
    few_shot_sample,
    load_badf,
    read_badf,
    save_badf,
    synth_generate,
)
from .errors import (
    DataError,
    DivergenceError,
    FormatError,
    ParamError,
    ProtoadaptError,
    ShapeError,
)
from .map_adapter import MapConfig, map_gradient, map_objective, train_map
from .metrics import (
    CalibrationReport,
    CoverageReport,
    PredictionRecord,
    accuracy,
    aece,
    calibration_bins,
    coverage_at,
    ece,
    records_from_probs,
)
from .model import (
    FeatureSet,
    Prototypes,
    ce_gradient,
    cross_entropy,
    logits,
    predict_point,
    softmax_rows,
)

__version__ = "0.1.0"
