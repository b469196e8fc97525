"""Weighted-majority fusion of per-modality occupancy experts.

Each expert casts a vote for a class; its vote counts with the expert's
weight, and a wrong vote during learning multiplies that weight by ``beta``.
Weights are learned on cross-validation folds and then frozen for testing.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .dataset import OccupancyTrace, stratified_folds, synth_subject_trace
from .errors import DataError, ParameterError
from .features import accel_max_magnitude, audio_zero_crossings
from .svr import SvrModel, svr_grid_search, svr_predict_class, svr_train


@dataclass(frozen=True, eq=False)
class ModalityExpert:
    """An SVR on standardised features of one modality."""

    model: SvrModel
    mean: np.ndarray
    scale: np.ndarray
    threshold: float = 0.5

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.scale

    def predict_class(self, x):
        return svr_predict_class(self.model, self.transform(x), self.threshold)


def _local_prediction(model, x) -> int:
    if hasattr(model, "predict_class"):
        return int(model.predict_class(x))
    if isinstance(model, SvrModel):
        return int(svr_predict_class(model, x))
    if callable(model):
        return int(model(x))
    raise ParameterError(f"cannot obtain a prediction from {type(model).__name__}")


@dataclass(frozen=True, eq=False)
class ExpertEnsemble:
    """Experts as ``(modality, model)`` pairs plus one weight each.

    ``model`` may be an :class:`SvrModel`, anything with ``predict_class``,
    or a plain callable returning a class index.
    """

    experts: tuple
    weights: np.ndarray = None
    beta: float = 0.5
    class_count: int = 2

    def __post_init__(self):
        experts = tuple((str(tag), model) for tag, model in self.experts)
        if not 0.0 <= self.beta < 1.0:
            raise ParameterError(f"beta must lie in [0, 1), got {self.beta}")
        if self.class_count < 2:
            raise ParameterError("class_count must be >= 2")
        w = np.ones(len(experts)) if self.weights is None else np.array(self.weights, dtype=float)
        if w.shape != (len(experts),):
            raise ParameterError(f"{len(experts)} experts but {w.size} weights")
        if np.any(w < 0):
            raise ParameterError("weights must be non-negative")
        w.setflags(write=False)
        object.__setattr__(self, "experts", experts)
        object.__setattr__(self, "weights", w)

    @property
    def modalities(self) -> tuple[str, ...]:
        return tuple(tag for tag, _ in self.experts)

    def with_weights(self, weights) -> "ExpertEnsemble":
        return replace(self, weights=np.asarray(weights, dtype=float))


@dataclass(frozen=True)
class FusionPrediction:
    global_prediction: int
    per_class_weight_sums: np.ndarray
    per_expert_predictions: tuple


def _features_for(ensemble: ExpertEnsemble, features, index=None):
    """One feature vector per expert, from a mapping keyed by modality or a
    sequence aligned with ``ensemble.experts``."""
    where = "" if index is None else f" (sample {index})"
    if isinstance(features, Mapping):
        out = []
        for tag in ensemble.modalities:
            if tag not in features or features[tag] is None:
                raise DataError(f"missing features for modality {tag!r}{where}")
            out.append(features[tag])
        return out
    features = list(features)
    if len(features) != len(ensemble.experts) or any(f is None for f in features):
        raise DataError(f"expected {len(ensemble.experts)} modality feature vectors, "
                        f"got {len(features)}{where}")
    return features


def _vote(ensemble: ExpertEnsemble, feats, weights, label=None) -> FusionPrediction:
    sigma = np.zeros(ensemble.class_count)
    local = []
    for j, ((tag, model), x) in enumerate(zip(ensemble.experts, feats)):
        lam = _local_prediction(model, x)
        if not 0 <= lam < ensemble.class_count:
            raise DataError(f"expert {tag!r} predicted class {lam} outside 0..{ensemble.class_count - 1}")
        if label is not None and lam != label:
            weights[j] *= ensemble.beta
        # the post-update weight is the one that votes
        sigma[lam] += weights[j]
        local.append((tag, lam))
    return FusionPrediction(int(np.argmax(sigma)), sigma, tuple(local))


def _check_label(ensemble, label, i):
    if int(label) != label or not 0 <= label < ensemble.class_count:
        raise DataError(f"label {label!r} of sample {i} outside 0..{ensemble.class_count - 1}")
    return int(label)


def run_online(ensemble: ExpertEnsemble, labeled_stream) -> tuple[ExpertEnsemble, list[FusionPrediction]]:
    """Single pass that both updates weights and predicts, sample by sample.

    Returns the ensemble with its final weights and the prediction made at
    every step (using the weights as updated on that step).
    """
    weights = ensemble.weights.copy()
    preds = []
    for i, (features, label) in enumerate(labeled_stream):
        label = _check_label(ensemble, label, i)
        feats = _features_for(ensemble, features, i)
        preds.append(_vote(ensemble, feats, weights, label))
    return ensemble.with_weights(weights), preds


def learn_weights(ensemble: ExpertEnsemble, labeled_stream) -> ExpertEnsemble:
    """Multiply the weight of every expert that errs on a sample by ``beta``.

    ``labeled_stream`` yields ``(features, true_label)`` in order, where
    ``features`` holds one vector per expert (see :func:`fuse_predict`).
    """
    return run_online(ensemble, labeled_stream)[0]


def fuse_predict(ensemble: ExpertEnsemble, per_modality_features) -> FusionPrediction:
    """Weighted vote with the ensemble's (frozen) weights; ties go to the
    lowest class index."""
    if not ensemble.experts:
        raise ParameterError("empty ensemble")
    feats = _features_for(ensemble, per_modality_features)
    return _vote(ensemble, feats, ensemble.weights.copy())


# --------------------------------------------------------------------------
# occupancy experiment

ACCEL_MODALITIES = ("accel_x", "accel_y", "accel_z")


@dataclass(frozen=True)
class FusionConfig:
    """Settings of the occupancy fusion experiment.

    Samples are audio windows of ``window_s`` seconds.  The accelerometer
    feature of a window is the vector of its per-segment statistics
    (``accel_kind``, default maximum magnitude); the audio feature is the
    window's zero-crossing count.  A window's label is its majority label.
    """

    modalities: tuple[str, ...] = ("accel_z", "audio_zcr")
    window_s: float = 5.0
    segment_len_s: float = 1.0
    accel_kind: str = "max"
    folds: int = 5
    beta: float = 0.5
    epsilon: float = 0.1
    Cs: tuple[float, ...] = (0.1, 1, 10, 100)
    gammas: tuple[float, ...] = (0.01, 0.1, 1, 10)
    grid_folds: int = 3
    threshold: float = 0.5
    seed: int = 0
    online: bool = False


def window_features(trace: OccupancyTrace, modality: str, window_s: float = 5.0,
                    segment_len_s: float = 1.0, kind: str = "max"):
    """Per-window feature matrix and majority labels for one modality."""
    if modality == "audio_zcr":
        values = audio_zero_crossings(trace.audio, trace.audio_rate, window_s).values
        F = values[:, None]
    elif modality in ACCEL_MODALITIES:
        per = window_s / segment_len_s
        if abs(per - round(per)) > 1e-9 or round(per) < 1:
            raise ParameterError("window_s must be a whole multiple of segment_len_s")
        per = int(round(per))
        values = accel_max_magnitude(trace.axis(modality), trace.accel_rate,
                                     segment_len_s, kind, modality).values
        count = values.size // per
        F = values[:count * per].reshape(count, per)
    else:
        raise ParameterError(f"unknown modality {modality!r}")
    secs = int(round(window_s))
    if abs(window_s - secs) > 1e-9:
        raise ParameterError("window_s must be a whole number of seconds")
    count = min(F.shape[0], trace.labels.size // secs)
    lab = trace.labels[:count * secs].reshape(count, secs).mean(axis=1)
    return F[:count], (lab >= 0.5).astype(int)


def train_modality_expert(F, labels, cfg: FusionConfig = FusionConfig(),
                          C: float | None = None, gamma: float | None = None) -> ModalityExpert:
    """Standardise ``F`` and fit an SVR on 0/1 targets; ``(C, gamma)`` come
    from a grid search unless both are given."""
    F = np.asarray(F, dtype=float)
    mean = F.mean(axis=0)
    scale = F.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (F - mean) / scale
    y = np.asarray(labels, dtype=float)
    if C is None or gamma is None:
        C, gamma, _ = svr_grid_search(Z, y, cfg.Cs, cfg.gammas, cfg.epsilon,
                                      cfg.grid_folds, cfg.seed, cfg.threshold)
    model = svr_train(Z, y, C, gamma, cfg.epsilon)
    return ModalityExpert(model, mean, scale, cfg.threshold)


@dataclass
class SourceScore:
    """Confusion counts of one prediction source (a modality or the fusion)."""

    confusion: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=int))

    def add(self, truth, pred):
        np.add.at(self.confusion, (np.asarray(truth, int), np.asarray(pred, int)), 1)

    def accuracy(self, cls: int | None = None) -> float:
        M = self.confusion
        if cls is None:
            total = M.sum()
            return float(np.trace(M) / total) if total else float("nan")
        row = M[cls].sum()
        return float(M[cls, cls] / row) if row else float("nan")

    def summary(self) -> dict:
        return {"occupied": self.accuracy(1), "unoccupied": self.accuracy(0),
                "overall": self.accuracy()}


@dataclass
class FusionReport:
    scores: dict[str, SourceScore]
    weights: dict[str, float]
    hyperparameters: dict[str, dict]
    experts: dict[str, ModalityExpert] = field(repr=False, default_factory=dict)

    def accuracy(self, source: str, which: str = "overall") -> float:
        return self.scores[source].summary()[which]

    def as_dict(self) -> dict:
        return {"accuracy": {k: s.summary() for k, s in self.scores.items()},
                "confusion": {k: s.confusion.tolist() for k, s in self.scores.items()},
                "weights": dict(self.weights),
                "hyperparameters": self.hyperparameters}


def _collect(trace, cfg):
    feats = {}
    labels = None
    for mod in cfg.modalities:
        F, lab = window_features(trace, mod, cfg.window_s, cfg.segment_len_s, cfg.accel_kind)
        feats[mod] = F
        if labels is None or lab.size < labels.size:
            labels = lab
    n = labels.size
    return {m: F[:n] for m, F in feats.items()}, labels


def run_fusion_experiment(trace: OccupancyTrace, config: FusionConfig | None = None,
                          test_trace: OccupancyTrace | None = None) -> FusionReport:
    """Train per-modality SVRs, learn fusion weights by cross-validation and
    score every modality and the fusion on held-out windows.

    Weights start at 1 and are updated on the validation windows of each of
    ``config.folds`` stratified folds in turn (SVRs refit on the other
    folds), carrying over between folds.  Final SVRs are then fitted on all
    training windows and evaluated with the frozen weights on
    ``test_trace``.  Without a test trace one stratified fold of ``trace``
    is held out for testing and the rest is used as above.  With
    ``config.online`` the test windows also update the weights as they
    are predicted.
    """
    cfg = config or FusionConfig()
    feats, labels = _collect(trace, cfg)
    if test_trace is None:
        outer = stratified_folds(labels, cfg.folds, cfg.seed)
        train_idx, test_idx = outer[0]
        test_feats = {m: F[test_idx] for m, F in feats.items()}
        test_labels = labels[test_idx]
        feats = {m: F[train_idx] for m, F in feats.items()}
        labels = labels[train_idx]
    else:
        test_feats, test_labels = _collect(test_trace, cfg)

    # hyperparameters once per modality on all training windows
    hyper = {}
    for mod in cfg.modalities:
        expert = train_modality_expert(feats[mod], labels, cfg)
        hyper[mod] = {"C": expert.model.C, "gamma": expert.model.gamma,
                      "epsilon": expert.model.epsilon}

    ensemble = ExpertEnsemble(tuple((m, None) for m in cfg.modalities), beta=cfg.beta)
    for tr, va in stratified_folds(labels, cfg.folds, cfg.seed):
        fold_experts = tuple(
            (m, train_modality_expert(feats[m][tr], labels[tr], cfg,
                                      hyper[m]["C"], hyper[m]["gamma"]))
            for m in cfg.modalities)
        ensemble = ExpertEnsemble(fold_experts, ensemble.weights, cfg.beta)
        stream = [({m: feats[m][i] for m in cfg.modalities}, labels[i]) for i in va]
        ensemble = learn_weights(ensemble, stream)

    final = {m: train_modality_expert(feats[m], labels, cfg, hyper[m]["C"], hyper[m]["gamma"])
             for m in cfg.modalities}
    ensemble = ExpertEnsemble(tuple(final.items()), ensemble.weights, cfg.beta)
    learned = dict(zip(cfg.modalities, ensemble.weights.tolist()))

    scores = {m: SourceScore() for m in cfg.modalities}
    scores["fusion"] = SourceScore()
    stream = [({m: test_feats[m][i] for m in cfg.modalities}, test_labels[i])
              for i in range(test_labels.size)]
    if cfg.online:
        _, preds = run_online(ensemble, stream)
    else:
        preds = [fuse_predict(ensemble, f) for f, _ in stream]
    for (f, y), p in zip(stream, preds):
        scores["fusion"].add([y], [p.global_prediction])
        for tag, lam in p.per_expert_predictions:
            scores[tag].add([y], [lam])
    return FusionReport(scores, learned, hyper, final)


def occupancy_benchmark(subjects: Sequence[int] = (0, 1, 2), seed: int = 0,
                        config: FusionConfig | None = None, block_s: int = 60,
                        blocks: int = 2, params=None,
                        trace_factory: Callable[..., OccupancyTrace] | None = None):
    """Per-subject fusion runs on synthetic desk traces.

    Each subject gets a training trace and an independent test trace; weights
    are learned separately for every subject.  Returns the per-subject
    reports and the confusion counts pooled over subjects.
    """
    cfg = config or FusionConfig(seed=seed)
    make = trace_factory or synth_subject_trace
    reports = {}
    pooled: dict[str, SourceScore] = {}
    for s in subjects:
        train = make(s, seed, block_s=block_s, blocks=blocks, params=params)
        test = make(s, seed + 1_000_003, block_s=block_s, blocks=blocks, params=params)
        rep = run_fusion_experiment(train, cfg, test)
        reports[s] = rep
        for k, sc in rep.scores.items():
            pooled.setdefault(k, SourceScore()).confusion += sc.confusion
    return reports, pooled


def summarize(pooled: Mapping[str, SourceScore]) -> dict[str, Any]:
    return {k: v.summary() for k, v in pooled.items()}
