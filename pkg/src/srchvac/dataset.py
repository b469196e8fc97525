"""Dataset ingestion (UCI HAR text layout), synthetic occupancy traces and
stratified fold assignment.

The UCI HAR archive is laid out as::

    <root>/activity_labels.txt            (optional, "1 WALKING" ...)
    <root>/train/X_train.txt              561 engineered features per row
    <root>/train/y_train.txt              activity id 1..6 per row
    <root>/train/subject_train.txt        subject id per row (optional)
    <root>/train/Inertial Signals/total_acc_{x,y,z}_train.txt   128 samples per row

and mirrored under ``test/``.  Labels are shifted to ``0..5`` on load; the
human-readable names are kept in ``Dataset.class_names``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DataError, FormatError, IngestionError, ParameterError

HAR_CLASS_NAMES = (
    "WALKING",
    "WALKING_UPSTAIRS",
    "WALKING_DOWNSTAIRS",
    "SITTING",
    "STANDING",
    "LAYING",
)
HAR_VARIANTS = ("engineered561", "raw_x", "raw_y", "raw_z")
HAR_WINDOW = 128  # 2.56 s at 50 Hz


class LabeledSample(NamedTuple):
    features: np.ndarray
    label: int
    subject: int | None = None


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable labeled sample matrix.

    ``X`` holds one sample per row (shape ``(N, n)``), ``y`` the zero-based
    class of each row.
    """

    X: np.ndarray
    y: np.ndarray
    class_names: tuple[str, ...]
    subjects: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y)
        if X.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError(f"{X.shape[0]} samples but {y.size} labels")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.mod(y, 1) == 0):
                raise DataError("labels must be integers")
        y = y.astype(np.int64)
        k = len(self.class_names)
        if k < 2:
            raise DataError("a dataset needs at least two classes")
        if y.size and (y.min() < 0 or y.max() >= k):
            raise DataError(f"labels must lie in 0..{k - 1}")
        missing = np.setdiff1d(np.arange(k), y)
        if missing.size:
            raise DataError(f"classes without samples: {missing.tolist()}")
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains non-finite entries")
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.subjects is not None:
            s = np.asarray(self.subjects, dtype=np.int64)
            if s.shape != y.shape:
                raise DataError("subject vector length differs from label count")
            object.__setattr__(self, "subjects", _readonly(s))

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def __iter__(self) -> Iterator[LabeledSample]:
        for i in range(len(self)):
            subj = None if self.subjects is None else int(self.subjects[i])
            yield LabeledSample(self.X[i], int(self.y[i]), subj)

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        subj = None if self.subjects is None else self.subjects[index]
        return Dataset(self.X[index], self.y[index], self.class_names, subj)

    def per_class_subsample(self, max_per_class: int, seed: int) -> "Dataset":
        """Keep at most ``max_per_class`` randomly chosen rows of each class."""
        if max_per_class < 1:
            raise ParameterError("max_per_class must be >= 1")
        rng = np.random.default_rng(seed)
        keep = []
        for c in range(self.class_count):
            idx = np.flatnonzero(self.y == c)
            if idx.size > max_per_class:
                idx = np.sort(rng.choice(idx, max_per_class, replace=False))
            keep.append(idx)
        return self.subset(np.sort(np.concatenate(keep)))


# --------------------------------------------------------------------------
# UCI HAR text layout

def _parse_matrix(path: Path) -> np.ndarray:
    if not path.is_file():
        raise IngestionError(f"missing input file: {path}")
    try:
        a = np.loadtxt(path, dtype=float, ndmin=2)
    except ValueError:
        a = None
    if a is not None:
        return a
    # slow path, only to report where the file is broken
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                row = [float(t) for t in tokens]
            except ValueError:
                bad = next(t for t in tokens if not _is_float(t))
                raise FormatError(f"{path}:{lineno}: non-numeric token {bad!r}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise FormatError(
                    f"{path}:{lineno}: expected {width} columns, found {len(row)}")
            rows.append(row)
    return np.array(rows, dtype=float).reshape(len(rows), width or 0)


def _is_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _read_class_names(root: Path) -> tuple[str, ...]:
    path = root / "activity_labels.txt"
    if not path.is_file():
        return HAR_CLASS_NAMES
    names = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2 or not parts[0].isdigit():
                raise FormatError(f"{path}:{lineno}: expected '<id> <name>'")
            names[int(parts[0])] = parts[1]
    if sorted(names) != list(range(1, len(names) + 1)):
        raise FormatError(f"{path}: activity ids must be 1..k")
    return tuple(names[i] for i in range(1, len(names) + 1))


def parse_variant(variant: str) -> str:
    """Normalise ``raw_axis(X)`` / ``raw_x`` / ``x`` style names."""
    v = variant.strip().lower().replace(" ", "")
    if v in ("engineered", "engineered561", "561"):
        return "engineered561"
    for axis in "xyz":
        if v in (f"raw_{axis}", f"raw_axis({axis})", f"raw{axis}", axis):
            return f"raw_{axis}"
    raise ParameterError(f"unknown HAR variant {variant!r}; expected one of {HAR_VARIANTS}")


def _load_split(root: Path, split: str, variant: str, class_names) -> Dataset:
    base = root / split
    if variant == "engineered561":
        xpath = base / f"X_{split}.txt"
    else:
        axis = variant[-1]
        xpath = base / "Inertial Signals" / f"total_acc_{axis}_{split}.txt"
    ypath = base / f"y_{split}.txt"
    spath = base / f"subject_{split}.txt"
    for p in (xpath, ypath):
        if not p.is_file():
            raise IngestionError(f"missing input file: {p}")
    X = _parse_matrix(xpath)
    y = _parse_matrix(ypath)
    if y.shape[1] != 1:
        raise FormatError(f"{ypath}: expected one label per row")
    y = y[:, 0]
    if X.shape[0] != y.shape[0]:
        raise FormatError(f"{xpath} has {X.shape[0]} rows but {ypath} has {y.shape[0]}")
    expected = 561 if variant == "engineered561" else HAR_WINDOW
    if X.shape[1] != expected:
        raise FormatError(f"{xpath}: expected {expected} columns, found {X.shape[1]}")
    if not np.all(np.mod(y, 1) == 0) or y.min() < 1 or y.max() > len(class_names):
        raise FormatError(f"{ypath}: labels must be integers in 1..{len(class_names)}")
    subjects = None
    if spath.is_file():
        subjects = _parse_matrix(spath)[:, 0].astype(np.int64)
        if subjects.shape[0] != X.shape[0]:
            raise FormatError(f"{spath} has {subjects.shape[0]} rows, expected {X.shape[0]}")
    return Dataset(X, y.astype(np.int64) - 1, class_names, subjects)


def load_uci_har(dir_path, variant: str = "engineered561") -> tuple[Dataset, Dataset]:
    """Load the predefined train/test split of the UCI HAR dataset.

    Parameters
    ----------
    dir_path : path-like
        Root of the extracted archive (the directory holding ``train/`` and
        ``test/``).
    variant : str
        ``"engineered561"`` for the 561 engineered features, or
        ``"raw_x"``/``"raw_y"``/``"raw_z"`` for one 128-sample window of the
        total-acceleration channel.

    Returns
    -------
    (train, test) : tuple of Dataset
    """
    root = Path(dir_path)
    variant = parse_variant(variant)
    if not root.is_dir():
        raise IngestionError(f"HAR directory not found: {root}")
    names = _read_class_names(root)
    return (_load_split(root, "train", variant, names),
            _load_split(root, "test", variant, names))


def _write_matrix(path: Path, a: np.ndarray, fmt: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, a, fmt=fmt, delimiter="")


def write_uci_har(dir_path, train: Dataset, test: Dataset, variant: str = "engineered561"):
    """Write ``train``/``test`` in the UCI HAR text layout (inverse of
    :func:`load_uci_har` for one variant)."""
    root = Path(dir_path)
    variant = parse_variant(variant)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "activity_labels.txt", "w") as fh:
        for i, name in enumerate(train.class_names, 1):
            fh.write(f"{i} {name}\n")
    for split, ds in (("train", train), ("test", test)):
        base = root / split
        if variant == "engineered561":
            xpath = base / f"X_{split}.txt"
        else:
            xpath = base / "Inertial Signals" / f"total_acc_{variant[-1]}_{split}.txt"
        _write_matrix(xpath, ds.X, " %15.8e")
        _write_matrix(base / f"y_{split}.txt", (ds.y + 1)[:, None], "%d")
        if ds.subjects is not None:
            _write_matrix(base / f"subject_{split}.txt", ds.subjects[:, None], "%d")


# --------------------------------------------------------------------------
# stratified folds

def stratified_folds(ds, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split sample indices into ``k`` class-stratified folds.

    ``ds`` may be a :class:`Dataset` or a plain label vector.  Each class is
    shuffled with a seeded generator and dealt round-robin over the folds;
    the dealing position carries over between classes so fold sizes differ by
    at most one.  Returns ``(train_index, validation_index)`` pairs.
    """
    y = ds.y if isinstance(ds, Dataset) else np.asarray(ds, dtype=np.int64)
    if k < 2:
        raise ParameterError("k must be >= 2")
    classes, counts = np.unique(y, return_counts=True)
    if np.any(counts < k):
        bad = classes[counts < k].tolist()
        raise ParameterError(f"classes {bad} have fewer than k={k} samples")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.size, dtype=np.int64)
    offset = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(y == c))
        fold_of[idx] = (offset + np.arange(idx.size)) % k
        offset = (offset + idx.size) % k
    everything = np.arange(y.size)
    return [(everything[fold_of != f], everything[fold_of == f]) for f in range(k)]


# --------------------------------------------------------------------------
# synthetic occupancy traces

SCENARIOS = ("occupied_typing", "occupied_quiet", "unoccupied_idle", "unoccupied_device_vibration")
OCCUPIED = {"occupied_typing": 1, "occupied_quiet": 1,
            "unoccupied_idle": 0, "unoccupied_device_vibration": 0}


@dataclass(frozen=True, eq=False)
class OccupancyTrace:
    """Phone-on-desk sensor streams with a per-second occupancy label.

    ``accel`` has shape ``(3, duration * accel_rate)`` (x, y, z rows, m/s^2
    with gravity removed); ``audio`` is a normalised microphone signal.
    """

    accel: np.ndarray
    audio: np.ndarray
    labels: np.ndarray
    accel_rate: int = 50
    audio_rate: int = 48000

    def __post_init__(self):
        accel = np.asarray(self.accel, dtype=float)
        audio = np.asarray(self.audio, dtype=np.float32)
        labels = np.asarray(self.labels)
        n = labels.size
        if accel.shape != (3, n * self.accel_rate):
            raise DataError(
                f"accel shape {accel.shape} inconsistent with {n} s at {self.accel_rate} Hz")
        if audio.shape != (n * self.audio_rate,):
            raise DataError(
                f"audio length {audio.size} inconsistent with {n} s at {self.audio_rate} Hz")
        if not np.all((labels == 0) | (labels == 1)):
            raise DataError("occupancy labels must be 0 or 1")
        object.__setattr__(self, "accel", _readonly(accel))
        object.__setattr__(self, "audio", _readonly(audio))
        object.__setattr__(self, "labels", _readonly(labels.astype(np.int8)))

    @property
    def duration_s(self) -> int:
        return int(self.labels.size)

    def axis(self, name: str) -> np.ndarray:
        return self.accel["xyz".index(name.lower()[-1])]

    def to_csv(self, dir_path):
        """Write ``accel.csv``, ``audio.csv`` and ``labels.csv`` into ``dir_path``."""
        root = Path(dir_path)
        root.mkdir(parents=True, exist_ok=True)
        ta = np.arange(self.accel.shape[1]) / self.accel_rate
        with open(root / "accel.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "accel_x", "accel_y", "accel_z"])
            for t, x, y, z in zip(ta, *self.accel):
                w.writerow([f"{t:.6f}", repr(float(x)), repr(float(y)), repr(float(z))])
        t_audio = np.arange(self.audio.size) / self.audio_rate
        with open(root / "audio.csv", "w", newline="") as fh:
            fh.write("t_s,audio\n")
            np.savetxt(fh, np.column_stack([t_audio, self.audio]), fmt=["%.8f", "%.9g"],
                       delimiter=",")
        with open(root / "labels.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "label"])
            for t, lab in enumerate(self.labels):
                w.writerow([t, int(lab)])


def read_occupancy_csv(dir_path) -> OccupancyTrace:
    root = Path(dir_path)
    tables = {}
    for name in ("accel", "audio", "labels"):
        path = root / f"{name}.csv"
        if not path.is_file():
            raise IngestionError(f"missing input file: {path}")
        try:
            tables[name] = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
    accel, audio, labels = tables["accel"], tables["audio"], tables["labels"]
    accel_rate = int(round(1.0 / (accel[1, 0] - accel[0, 0])))
    audio_rate = int(round(1.0 / (audio[1, 0] - audio[0, 0])))
    return OccupancyTrace(accel[:, 1:].T, audio[:, 1], labels[:, 1].astype(int),
                          accel_rate=accel_rate, audio_rate=audio_rate)


@dataclass(frozen=True)
class GeneratorParams:
    """Signal-model constants of :func:`synth_occupancy`.

    Accelerations are in m/s^2 with gravity removed; audio is in normalised
    full-scale units.
    """

    accel_rate: int = 50
    audio_rate: int = 48000
    accel_noise: float = 0.004
    # typing: keystroke transients inside on/off typing bursts
    keystroke_rate: float = 5.0
    keystroke_amp: tuple[float, float] = (0.05, 0.15)
    keystroke_freq: float = 14.0
    keystroke_decay_s: float = 0.04
    typing_on_s: tuple[float, float] = (4.0, 15.0)
    typing_off_s: tuple[float, float] = (0.5, 2.0)
    # seated movement: rare, weak desk bumps
    fidget_rate: float = 0.05
    fidget_amp: tuple[float, float] = (0.005, 0.02)
    # desk devices
    hum_freq: float = 9.0
    idle_hum_amp: float = 0.002
    vibration_hum_amp: float = 0.012
    # audio
    mains_freq: float = 100.0
    mains_amp: float = 0.01
    audio_floor: tuple[float, float] = (0.0003, 0.0015)
    activity_amp: tuple[float, float] = (0.02, 0.2)
    activity_on_s: tuple[float, float] = (2.0, 8.0)
    activity_off_s: tuple[float, float] = (0.2, 1.5)
    distant_event_rate: float = 0.004
    distant_event_s: tuple[float, float] = (1.0, 3.0)


def _bursts(rng, duration, on_range, off_range):
    """Boolean mask per unit time of alternating on/off bursts (times in s)."""
    spans = []
    t = -rng.uniform(0, on_range[1])
    on = True
    while t < duration:
        length = rng.uniform(*(on_range if on else off_range))
        if on and t + length > 0:
            spans.append((max(t, 0.0), min(t + length, duration)))
        t += length
        on = not on
    return spans


def _add_transients(sig, rate, times, amps, freq, decay):
    n_tail = int(np.ceil(6 * decay * rate))
    t = np.arange(n_tail) / rate
    for t0, a in zip(times, amps):
        i0 = int(t0 * rate)
        if i0 >= sig.size:
            continue
        tail = a * np.exp(-t / decay) * np.sin(2 * np.pi * freq * t + np.pi / 2)
        seg = sig[i0:i0 + n_tail]
        seg += tail[:seg.size]


def synth_occupancy(scenario: str, duration_s: int, seed: int,
                    params: GeneratorParams | None = None) -> OccupancyTrace:
    """Generate a labeled phone-on-desk trace for one scenario.

    Occupied scenarios carry keystroke transients (``occupied_typing``) and
    broadband activity sound; unoccupied ones carry only a weak periodic
    device vibration, mains hum and a faint noise floor.  Pure in
    ``(scenario, duration_s, seed, params)``.
    """
    if scenario not in SCENARIOS:
        raise ParameterError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    if int(duration_s) != duration_s or duration_s < 10:
        raise ParameterError("duration_s must be an integer >= 10")
    duration_s = int(duration_s)
    p = params or GeneratorParams()
    rng = np.random.default_rng([int(seed), SCENARIOS.index(scenario)])
    na = duration_s * p.accel_rate
    nu = duration_s * p.audio_rate
    ta = np.arange(na) / p.accel_rate

    accel = rng.normal(0.0, p.accel_noise, size=(3, na))
    hum_amp = p.vibration_hum_amp if scenario == "unoccupied_device_vibration" else p.idle_hum_amp
    phase = rng.uniform(0, 2 * np.pi)
    hum = np.sin(2 * np.pi * p.hum_freq * ta + phase)
    accel += np.outer([0.15, 0.15, 1.0], hum_amp * hum)

    if scenario == "occupied_typing":
        for start, stop in _bursts(rng, duration_s, p.typing_on_s, p.typing_off_s):
            count = rng.poisson(p.keystroke_rate * (stop - start))
            times = np.sort(rng.uniform(start, stop, count))
            amps = rng.uniform(*p.keystroke_amp, count)
            for row, share in zip(accel, (0.3, 0.3, 1.0)):
                _add_transients(row, p.accel_rate, times, share * amps,
                                p.keystroke_freq, p.keystroke_decay_s)
    if scenario.startswith("occupied"):
        count = rng.poisson(p.fidget_rate * duration_s)
        times = np.sort(rng.uniform(0, duration_s, count))
        amps = rng.uniform(*p.fidget_amp, count)
        for row in accel:
            _add_transients(row, p.accel_rate, times, amps, p.keystroke_freq, 0.1)

    # audio is built per second to bound temporary memory
    audio = np.empty(nu, dtype=np.float32)
    sr = p.audio_rate
    tu = np.arange(sr) / sr
    mains_phase = rng.uniform(0, 2 * np.pi)
    active = np.zeros(duration_s * 10, dtype=bool)  # 100 ms resolution
    if scenario.startswith("occupied"):
        spans = _bursts(rng, duration_s, p.activity_on_s, p.activity_off_s)
    else:
        spans = []
        count = rng.poisson(p.distant_event_rate * duration_s)
        for t0 in rng.uniform(0, duration_s, count):
            spans.append((t0, min(duration_s, t0 + rng.uniform(*p.distant_event_s))))
    for start, stop in spans:
        active[int(start * 10):int(np.ceil(stop * 10))] = True
    floor = rng.uniform(*p.audio_floor)
    for s in range(duration_s):
        chunk = p.mains_amp * np.sin(2 * np.pi * p.mains_freq * (tu + s) + mains_phase)
        chunk += rng.normal(0.0, floor, sr)
        mask = np.repeat(active[s * 10:(s + 1) * 10], sr // 10)
        if mask.any():
            amp = rng.uniform(*p.activity_amp)
            chunk[mask] += rng.normal(0.0, amp, int(mask.sum()))
        audio[s * sr:(s + 1) * sr] = chunk
    labels = np.full(duration_s, OCCUPIED[scenario], dtype=np.int8)
    return OccupancyTrace(accel, audio, labels, p.accel_rate, p.audio_rate)


def concat_traces(traces: Sequence[OccupancyTrace]) -> OccupancyTrace:
    first = traces[0]
    for t in traces[1:]:
        if (t.accel_rate, t.audio_rate) != (first.accel_rate, first.audio_rate):
            raise ParameterError("cannot concatenate traces with different rates")
    return OccupancyTrace(np.concatenate([t.accel for t in traces], axis=1),
                          np.concatenate([t.audio for t in traces]),
                          np.concatenate([t.labels for t in traces]),
                          first.accel_rate, first.audio_rate)


def synth_subject_trace(subject: int, seed: int, block_s: int = 60, blocks: int = 2,
                        params: GeneratorParams | None = None) -> OccupancyTrace:
    """A desk-day for one synthetic subject: ``blocks`` blocks of every
    scenario, each ``block_s`` seconds long, in a seeded random order."""
    rng = np.random.default_rng([int(subject), int(seed), 7919])
    order = [s for s in SCENARIOS for _ in range(blocks)]
    rng.shuffle(order)
    block_seeds = rng.integers(0, 2**31 - 1, len(order))
    return concat_traces([synth_occupancy(sc, block_s, int(bs), params)
                          for sc, bs in zip(order, block_seeds)])
