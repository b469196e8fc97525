"""Experiment configuration files (TOML) and their validation."""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError
from ..projection import METHODS

EXPERIMENTS = {
    "har_engineered": "SRC / kNN / SVM on the 561 engineered HAR features versus retained dimension",
    "har_raw_axis": "SRC / kNN / SVM on single-axis raw accelerometer windows",
    "occupancy_single_modality": "per-modality SVR occupancy accuracy versus window length",
    "occupancy_fusion": "weighted-majority fusion of accelerometer and microphone experts",
    "projection_power_study": "signal power of each projection method versus retained dimension",
}

BASELINES = ("knn", "svm")
OCC_MODALITIES = ("accel_x", "accel_y", "accel_z", "audio_zcr")


@dataclass
class ExperimentConfig:
    experiment: str
    dataset_path: Path | None = None
    retained_fractions: list[float] = field(default_factory=lambda: [0.05, 0.10, 0.15, 0.20])
    projection_methods: list[str] = field(default_factory=lambda: ["svd_top_singular", "gaussian"])
    classifier_params: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: [0])
    # 0 selects the dataset's predefined train/test split
    folds: int = 0
    baselines: list[str] = field(default_factory=lambda: list(BASELINES))
    axes: list[str] = field(default_factory=lambda: ["x", "y", "z"])
    windows_s: list[float] = field(default_factory=lambda: [5.0])
    modalities: list[str] = field(default_factory=lambda: ["accel_z", "audio_zcr"])
    subjects: list[int] = field(default_factory=lambda: [0, 1, 2])

    def param(self, key, default=None):
        return self.classifier_params.get(key, default)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dataset_path"] = None if self.dataset_path is None else str(self.dataset_path)
        return d


# classifier_params keys and their defaults
PARAM_DEFAULTS = {
    "tol": 1e-4,                 # basis-pursuit residual bound
    "normalize_projected": True,
    "projection_source": "raw",  # SVD of raw or of normalised dictionary columns
    "max_per_class": 0,          # 0 keeps every training sample
    "knn_k": 5,
    "svm_C": 1.0,
    "svm_gamma": None,           # None means 1 / input dimension
    "baseline_projection": "none",
    "svr_epsilon": 0.1,
    "svr_C": None,               # None selects C and gamma by grid search
    "svr_gamma": None,
    "fusion_beta": 0.5,
    "fusion_online": False,
    "fusion_folds": 5,
    "block_s": 60,
    "blocks": 2,
    "power_dictionaries": 20,
    "power_shape": [50, 200],
}


def _fail(msg):
    raise ConfigError(msg)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check every field; raises :class:`ConfigError` naming the first problem."""
    from ..projection import retained_dim

    if cfg.experiment not in EXPERIMENTS:
        _fail(f"experiment: unknown {cfg.experiment!r}; choose from {sorted(EXPERIMENTS)}")
    if cfg.experiment.startswith("har_") and cfg.dataset_path is None:
        _fail("dataset_path: required for HAR experiments")
    if not cfg.seeds:
        _fail("seeds: at least one seed is required")
    if any(not isinstance(s, int) or isinstance(s, bool) for s in cfg.seeds):
        _fail("seeds: must be integers")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        _fail("seeds: duplicates")
    if not cfg.retained_fractions:
        _fail("retained_fractions: empty")
    for f in cfg.retained_fractions:
        if not isinstance(f, (int, float)) or not 0 < f <= 1:
            _fail(f"retained_fractions: {f!r} not in (0, 1]")
        # smallest ambient dimension in use: a raw window has 128 samples
        if retained_dim(128, f) < 1:
            _fail(f"retained_fractions: {f} leaves no dimension")
    for m in cfg.projection_methods:
        if m not in METHODS:
            _fail(f"projection_methods: unknown {m!r}; choose from {METHODS}")
    if not isinstance(cfg.folds, int) or cfg.folds == 1 or cfg.folds < 0:
        _fail("folds: 0 (predefined split) or an integer >= 2")
    for b in cfg.baselines:
        if b not in BASELINES:
            _fail(f"baselines: unknown {b!r}; choose from {BASELINES}")
    for a in cfg.axes:
        if a not in ("x", "y", "z"):
            _fail(f"axes: {a!r} is not one of x, y, z")
    for w in cfg.windows_s:
        if not isinstance(w, (int, float)) or w <= 0 or float(w) != int(w):
            _fail(f"windows_s: {w!r} must be a positive whole number of seconds")
    for m in cfg.modalities:
        if m not in OCC_MODALITIES:
            _fail(f"modalities: unknown {m!r}; choose from {OCC_MODALITIES}")
    if cfg.experiment == "occupancy_fusion" and len(cfg.modalities) < 1:
        _fail("modalities: fusion needs at least one modality")
    unknown = set(cfg.classifier_params) - set(PARAM_DEFAULTS)
    if unknown:
        _fail(f"classifier: unknown keys {sorted(unknown)}")
    merged = {**PARAM_DEFAULTS, **cfg.classifier_params}
    if not merged["tol"] > 0:
        _fail("classifier.tol must be positive")
    if merged["projection_source"] not in ("raw", "normalized"):
        _fail("classifier.projection_source: 'raw' or 'normalized'")
    if merged["baseline_projection"] not in ("none",) + METHODS:
        _fail(f"classifier.baseline_projection: 'none' or one of {METHODS}")
    if int(merged["knn_k"]) < 1:
        _fail("classifier.knn_k must be >= 1")
    if not 0 <= merged["fusion_beta"] < 1:
        _fail("classifier.fusion_beta must lie in [0, 1)")
    if int(merged["fusion_folds"]) < 2:
        _fail("classifier.fusion_folds must be >= 2")
    if int(merged["max_per_class"]) < 0:
        _fail("classifier.max_per_class must be >= 0")
    cfg.classifier_params = merged
    return cfg


def from_mapping(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    raw = dict(raw)
    params = raw.pop("classifier", {})
    if not isinstance(params, dict):
        _fail("[classifier] must be a table")
    known = set(ExperimentConfig.__dataclass_fields__) - {"classifier_params"}
    extra = set(raw) - known
    if extra:
        _fail(f"unknown top-level keys {sorted(extra)}")
    if "experiment" not in raw:
        _fail("experiment: missing")
    path = raw.get("dataset_path")
    if path is not None:
        path = Path(path).expanduser()
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        raw["dataset_path"] = path
    try:
        cfg = ExperimentConfig(**raw, classifier_params=dict(params))
    except TypeError as exc:
        _fail(str(exc))
    for name in ("retained_fractions", "projection_methods", "seeds", "baselines",
                 "axes", "windows_s", "modalities", "subjects"):
        if not isinstance(getattr(cfg, name), list):
            _fail(f"{name}: must be a list")
    return validate(cfg)


def load_config(path) -> ExperimentConfig:
    """Read a TOML experiment file; relative dataset paths resolve against
    the file's directory."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_mapping(raw, path.parent)
