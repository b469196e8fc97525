"""Experiment runners.  Each yields :class:`ResultRow` objects for one seed;
:func:`run_experiment` drives the sweep, logging rows as they complete."""
from __future__ import annotations

import hashlib
import json
import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..classifier import (SrcClassifier, build_dictionary, knn_predict, svm_predict,
                          svm_train)
from ..dataset import (Dataset, load_uci_har, read_occupancy_csv, stratified_folds,
                       synth_subject_trace)
from ..errors import DataError, FormatError, IngestionError
from ..fusion import FusionConfig, run_fusion_experiment, train_modality_expert, window_features
from ..projection import make_projection, retained_dim, signal_power
from ..sparse import svd
from .config import ExperimentConfig
from .results import ResultRow, RowLog

TEST_SEED_OFFSET = 1_000_003


def confusion_matrix(truth, pred, k: int) -> np.ndarray:
    M = np.zeros((k, k), dtype=int)
    np.add.at(M, (np.asarray(truth, int), np.asarray(pred, int)), 1)
    return M


# ---------------------------------------------------------------- parallel SRC

_WORKER: SrcClassifier | None = None


def _init_worker(clf):
    global _WORKER
    _WORKER = clf


def _predict_chunk(X):
    return _WORKER.predict(X)


def src_predict(clf: SrcClassifier, X, jobs: int = 1) -> np.ndarray:
    """Predict rows of ``X``; with ``jobs > 1`` chunks run in worker
    processes sharing one classifier (results are gathered in order)."""
    X = np.asarray(X)
    if jobs <= 1 or X.shape[0] < 2 * jobs:
        return clf.predict(X)
    chunks = np.array_split(X, 4 * jobs)
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(jobs, mp_context=ctx, initializer=_init_worker,
                             initargs=(clf,)) as pool:
        return np.concatenate(list(pool.map(_predict_chunk, chunks)))


# ---------------------------------------------------------------- context

class Context:
    """Per-run caches: loaded datasets, seed-independent results, and the
    hyperparameters actually used."""

    def __init__(self, cfg: ExperimentConfig, jobs: int = 1):
        self.cfg = cfg
        self.jobs = jobs
        self._data = {}
        self._memo = {}
        self.hyper: dict = {}

    def har(self, variant):
        if variant not in self._data:
            self._data[variant] = load_uci_har(self.cfg.dataset_path, variant)
        return self._data[variant]

    def memo(self, key, fn):
        if key is None:
            return fn()
        if key not in self._memo:
            self._memo[key] = fn()
        return self._memo[key]


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, (time.perf_counter() - t0) * 1e3


def _concat(a: Dataset, b: Dataset) -> Dataset:
    subj = None
    if a.subjects is not None and b.subjects is not None:
        subj = np.concatenate([a.subjects, b.subjects])
    return Dataset(np.vstack([a.X, b.X]), np.concatenate([a.y, b.y]), a.class_names, subj)


def _splits(cfg, train: Dataset, test: Dataset, seed: int):
    if cfg.folds == 0:
        yield -1, train, test
        return
    full = _concat(train, test)
    for f, (tr, te) in enumerate(stratified_folds(full, cfg.folds, seed)):
        yield f, full.subset(tr), full.subset(te)


# ---------------------------------------------------------------- HAR

def _har_rows(ctx: Context, seed: int):
    cfg = ctx.cfg
    p = cfg.classifier_params
    if cfg.experiment == "har_engineered":
        variants = [("engineered561", "")]
    else:
        variants = [(f"raw_{a}", a) for a in cfg.axes]
    sub = int(p["max_per_class"])
    for variant, axis in variants:
        train0, test0 = ctx.har(variant)
        for fold, train, test in _splits(cfg, train0, test0, seed):
            if sub:
                train = train.per_class_subsample(sub, seed)
            # results depend on the seed only through these
            seeded_split = fold >= 0 or sub > 0
            dictionary = build_dictionary(train)
            source = dictionary if p["projection_source"] == "raw" else dictionary.matrix
            n = dictionary.matrix.shape[0]
            base = dict(experiment=cfg.experiment, seed=seed, fold=fold, axis=axis)
            for frac in cfg.retained_fractions:
                d = retained_dim(n, frac)
                for method in cfg.projection_methods:
                    needs_seed = seeded_split or method != "svd_top_singular"
                    key = None if needs_seed else ("src", variant, fold, frac, method)

                    def run(method=method, d=d):
                        R = None if d >= n else make_projection(method, source, d, seed)
                        clf = SrcClassifier(dictionary, R, p["tol"], p["normalize_projected"])
                        pred, ms = _timed(lambda: src_predict(clf, test.X, ctx.jobs))
                        return confusion_matrix(test.y, pred, test.class_count), ms

                    M, ms = ctx.memo(key, run)
                    yield ResultRow.from_confusion(
                        M, method=f"src_{method}", retained_fraction=frac, d=d,
                        wall_time_ms=ms, **base)
            yield from _baseline_rows(ctx, train, test, source, seed, seeded_split,
                                      (variant, fold), base)


def _baseline_rows(ctx, train, test, source, seed, seeded_split, tag, base):
    cfg = ctx.cfg
    p = cfg.classifier_params
    n = train.dim
    bp = p["baseline_projection"]
    settings = [(None, None)] if bp == "none" else [
        (frac, retained_dim(n, frac)) for frac in cfg.retained_fractions]
    for frac, d in settings:
        for name in cfg.baselines:
            needs_seed = seeded_split or bp == "gaussian" or bp == "svd_random_columns"
            key = None if needs_seed else ("baseline", name, bp, frac) + tag

            def run(name=name, d=d):
                Xtr, Xte = train.X, test.X
                if d is not None and d < n:
                    R = make_projection(bp, source, d, seed).R
                    Xtr, Xte = Xtr @ R.T, Xte @ R.T
                tr = Dataset(Xtr, train.y, train.class_names)

                def fit_predict():
                    if name == "knn":
                        return knn_predict(tr, Xte, int(p["knn_k"]))
                    model = svm_train(tr, float(p["svm_C"]), p["svm_gamma"])
                    ctx.hyper.setdefault("svm", {"C": model.C, "gamma": model.gamma})
                    return svm_predict(model, Xte)

                pred, ms = _timed(fit_predict)
                return confusion_matrix(test.y, pred, test.class_count), ms

            M, ms = ctx.memo(key, run)
            yield ResultRow.from_confusion(M, method=name, retained_fraction=frac, d=d,
                                           wall_time_ms=ms, **base)


# ---------------------------------------------------------------- occupancy

def subject_traces(subject: int, seed: int, dataset_path=None, block_s: int = 60,
                   blocks: int = 2):
    """Training and test trace of one subject: read from
    ``<dataset_path>/subject_<id>/{train,test}`` or generated."""
    if dataset_path is not None:
        root = Path(dataset_path) / f"subject_{subject}"
        return read_occupancy_csv(root / "train"), read_occupancy_csv(root / "test")
    return (synth_subject_trace(subject, seed, block_s, blocks),
            synth_subject_trace(subject, seed + TEST_SEED_OFFSET, block_s, blocks))


def _fusion_config(p, seed, window_s, modalities) -> FusionConfig:
    return FusionConfig(modalities=tuple(modalities), window_s=float(window_s),
                        folds=int(p["fusion_folds"]), beta=float(p["fusion_beta"]),
                        epsilon=float(p["svr_epsilon"]), seed=seed,
                        online=bool(p["fusion_online"]))


def _occupancy_rows(ctx: Context, seed: int):
    cfg = ctx.cfg
    p = cfg.classifier_params
    for subject in cfg.subjects:
        train, test = subject_traces(subject, seed, cfg.dataset_path,
                                     int(p["block_s"]), int(p["blocks"]))
        for w in cfg.windows_s:
            fc = _fusion_config(p, seed, w, cfg.modalities)
            base = dict(experiment=cfg.experiment, seed=seed, window_s=float(w),
                        subject=subject)
            if cfg.experiment == "occupancy_fusion":
                rep, ms = _timed(lambda: run_fusion_experiment(train, fc, test))
                ctx.hyper.setdefault("svr", {})[f"s{seed}/subject{subject}/w{w}"] = rep.hyperparameters
                ctx.hyper.setdefault("fusion_weights", {})[f"s{seed}/subject{subject}/w{w}"] = rep.weights
                for src, score in rep.scores.items():
                    yield ResultRow.from_confusion(
                        score.confusion, method="fusion" if src == "fusion" else "svr",
                        axis=src, wall_time_ms=ms,
                        note=json.dumps({"weights": rep.weights}), **base)
                continue
            for mod in cfg.modalities:
                def run(mod=mod):
                    F, y = window_features(train, mod, fc.window_s)
                    Ft, yt = window_features(test, mod, fc.window_s)
                    C, g = p["svr_C"], p["svr_gamma"]
                    expert = train_modality_expert(F, y, fc, C, g)
                    pred = expert.predict_class(Ft)
                    return expert, confusion_matrix(yt, pred, 2)

                (expert, M), ms = _timed(run)
                ctx.hyper.setdefault("svr", {})[f"s{seed}/subject{subject}/w{w}/{mod}"] = {
                    "C": expert.model.C, "gamma": expert.model.gamma,
                    "epsilon": expert.model.epsilon}
                yield ResultRow.from_confusion(M, method="svr", axis=mod, wall_time_ms=ms,
                                               **base)


# ---------------------------------------------------------------- projection power

def _power_rows(ctx: Context, seed: int):
    cfg = ctx.cfg
    p = cfg.classifier_params
    if cfg.dataset_path is not None:
        train, _ = ctx.har("engineered561")
        mats = [(-1, build_dictionary(train).raw)]
    else:
        rows, cols = (int(v) for v in p["power_shape"])
        rng = np.random.default_rng([seed, 4242])
        mats = [(i, rng.standard_normal((rows, cols))) for i in range(int(p["power_dictionaries"]))]
    for idx, A in mats:
        S = svd(A).S
        n = A.shape[0]
        base = dict(experiment=cfg.experiment, seed=seed, fold=idx)
        for frac in cfg.retained_fractions:
            d = retained_dim(n, frac)
            yield ResultRow(method="top_d_sigma2_sum", retained_fraction=frac, d=d,
                            signal_power=float(np.sum(S[:d] ** 2)), **base)
            for method in cfg.projection_methods:
                if method == "gaussian" and d >= n:
                    continue
                (R, ms) = _timed(lambda: make_projection(method, A, d, seed))
                yield ResultRow(method=method, retained_fraction=frac, d=d,
                                signal_power=signal_power(R, A), wall_time_ms=ms, **base)


RUNNERS = {
    "har_engineered": _har_rows,
    "har_raw_axis": _har_rows,
    "occupancy_single_modality": _occupancy_rows,
    "occupancy_fusion": _occupancy_rows,
    "projection_power_study": _power_rows,
}


def fingerprint(cfg: ExperimentConfig) -> str:
    """Hash of everything but the seed list, so adding seeds resumes a run."""
    d = cfg.to_dict()
    d.pop("seeds")
    return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


def metadata(cfg: ExperimentConfig, ctx: Context | None = None) -> dict:
    return {"config": cfg.to_dict(), "version": __version__, "numpy": np.__version__,
            "fingerprint": fingerprint(cfg),
            "resolved_hyperparameters": {} if ctx is None else ctx.hyper}


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs: int = 1,
                   progress=None) -> tuple[list[ResultRow], dict]:
    """Run every seed of ``cfg``; returns the rows and the run metadata.

    With ``out_dir`` rows are appended to ``rows.jsonl`` as they finish and
    seeds already completed by an earlier run with the same configuration
    are skipped.
    """
    ctx = Context(cfg, jobs)
    runner = RUNNERS[cfg.experiment]
    log = RowLog(out_dir, fingerprint(cfg)) if out_dir is not None else None
    rows: list[ResultRow] = []
    try:
        for seed in cfg.seeds:
            if log is not None and log.done(seed):
                continue
            try:
                for row in runner(ctx, seed):
                    rows.append(row)
                    if log is not None:
                        log.append(row)
                    if progress is not None:
                        progress(row)
            except (DataError, FormatError, IngestionError) as exc:
                raise type(exc)(f"{cfg.experiment} (seed {seed}): {exc}") from exc
            if log is not None:
                log.finish_seed(seed)
    finally:
        if log is not None:
            log.close()
    if log is not None:
        rows = log.rows
    order = {s: i for i, s in enumerate(cfg.seeds)}
    rows = sorted((r for r in rows if r.seed in order), key=lambda r: order[r.seed])
    return rows, metadata(cfg, ctx)
