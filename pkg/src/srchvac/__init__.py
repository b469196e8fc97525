"""Sparse-representation activity classification with SVD projections, and
weighted-majority sensor fusion for desk occupancy."""

__version__ = "0.1.0"

from .classifier import (Dictionary, SrcClassifier, SrcDecision, SvmModel, build_dictionary,
                         classify, knn_classify, svm_classify, svm_train)
from .dataset import (Dataset, OccupancyTrace, load_uci_har, stratified_folds,
                      synth_occupancy)
from .errors import (ConfigError, DataError, FormatError, IngestionError, ParameterError,
                     SrcHvacError)
from .features import FeatureSeries, accel_max_magnitude, audio_zero_crossings
from .fusion import ExpertEnsemble, FusionPrediction, fuse_predict, learn_weights
from .projection import ProjectionMatrix, make_projection, signal_power, svd_projection
from .sparse import SparseSolution, basis_pursuit, min_l2_solution, svd
from .svr import SvrModel, svr_predict, svr_predict_class, svr_train

__all__ = [
    "__version__",
    "Dictionary", "SrcClassifier", "SrcDecision", "SvmModel", "build_dictionary", "classify",
    "knn_classify", "svm_classify", "svm_train",
    "Dataset", "OccupancyTrace", "load_uci_har", "stratified_folds", "synth_occupancy",
    "ConfigError", "DataError", "FormatError", "IngestionError", "ParameterError",
    "SrcHvacError",
    "FeatureSeries", "accel_max_magnitude", "audio_zero_crossings",
    "ExpertEnsemble", "FusionPrediction", "fuse_predict", "learn_weights",
    "ProjectionMatrix", "make_projection", "signal_power", "svd_projection",
    "SparseSolution", "basis_pursuit", "min_l2_solution", "svd",
    "SvrModel", "svr_predict", "svr_predict_class", "svr_train",
]
