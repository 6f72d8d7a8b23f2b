"""Distance-based image anomaly detection over learned CAE embeddings.

Pipeline: an inception-style convolutional autoencoder turns images into
128-d embeddings (global average pool of the encoder output); a detector
fit on normal-class embeddings scores test examples by their (quantized or
exact) squared Euclidean distance to the nearest training embedding; AUC-ROC
measures the resulting ranking.
"""

from .cae import (
    Model,
    ModelSpec,
    build_model,
    extract_batch,
    extract_representation,
    forward,
    random_weights,
    reconstruction_error,
)
from .detector import DetectorConfig, DetectorState, fit, score, score_batch, score_re
from .evaluation import EvalReport, LabeledScores, SweepGrid, aggregate, auc_roc, sweep
from .pq import (
    PQCodebook,
    PQCodes,
    PQConfig,
    adc_distance,
    build_lut,
    encode,
    fit_codebook,
    kmeans,
    knn_exact,
    knn_quantized,
    reconstruct,
)

__version__ = "0.1.0"
