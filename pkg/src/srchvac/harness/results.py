"""Result rows, incremental writers and summary statistics."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ..errors import ParameterError


@dataclass
class ResultRow:
    experiment: str
    method: str
    seed: int
    fold: int = -1
    retained_fraction: float | None = None
    d: int | None = None
    window_s: float | None = None
    axis: str = ""
    subject: int | None = None
    accuracy: float | None = None
    per_class_accuracy: list | None = None
    confusion: list | None = None
    signal_power: float | None = None
    wall_time_ms: float = 0.0
    note: str = ""

    @classmethod
    def from_confusion(cls, confusion, **kw) -> "ResultRow":
        M = np.asarray(confusion, dtype=int)
        rows = M.sum(axis=1)
        per = [float(M[i, i] / r) if r else None for i, r in enumerate(rows)]
        acc = float(np.trace(M) / M.sum()) if M.sum() else None
        return cls(accuracy=acc, per_class_accuracy=per, confusion=M.tolist(), **kw)

    def cell(self) -> tuple:
        """Grouping key: every coordinate except seed and fold."""
        return (self.experiment, self.method, self.retained_fraction, self.d,
                self.window_s, self.axis, self.subject)


COLUMNS = [f.name for f in fields(ResultRow)]
_LISTS = ("per_class_accuracy", "confusion")


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, list):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _row_to_csv(row: ResultRow) -> list[str]:
    return [_csv_value(getattr(row, c)) for c in COLUMNS]


def _parse_csv_row(rec: dict) -> ResultRow:
    kw = {}
    for f in fields(ResultRow):
        s = rec[f.name]
        if f.name in _LISTS:
            kw[f.name] = json.loads(s) if s else None
        elif f.name in ("experiment", "method", "axis", "note"):
            kw[f.name] = s
        elif f.name in ("seed", "fold"):
            kw[f.name] = int(s)
        elif f.name in ("d", "subject"):
            kw[f.name] = int(s) if s else None
        else:
            kw[f.name] = float(s) if s else None
    if kw["wall_time_ms"] is None:
        kw["wall_time_ms"] = 0.0
    return ResultRow(**kw)


def rows_to_csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(_row_to_csv(r))
    return buf.getvalue()


def rows_to_json_text(rows) -> str:
    return json.dumps([asdict(r) for r in rows], indent=1, sort_keys=False) + "\n"


def read_rows(path) -> list[ResultRow]:
    path = Path(path)
    if path.suffix == ".json":
        return [ResultRow(**rec) for rec in json.loads(path.read_text())]
    if path.suffix == ".jsonl":
        return [ResultRow(**json.loads(line)) for line in path.read_text().splitlines() if line]
    with open(path, newline="") as fh:
        return [_parse_csv_row(rec) for rec in csv.DictReader(fh)]


def sem(values) -> float:
    """Standard error of the mean (sample standard deviation / sqrt(n));
    zero for a single value."""
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size < 2:
        return 0.0
    return float(v.std(ddof=1) / math.sqrt(v.size))


def summarize(rows) -> list[dict]:
    """Mean and SEM across seeds (and folds) of every cell, in first-seen order."""
    cells: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        cells.setdefault(r.cell(), []).append(r)
    out = []
    for key, group in cells.items():
        rec = dict(zip(("experiment", "method", "retained_fraction", "d", "window_s",
                        "axis", "subject"), key))
        for metric in ("accuracy", "signal_power"):
            vals = [getattr(r, metric) for r in group if getattr(r, metric) is not None]
            rec[f"{metric}_mean"] = float(np.mean(vals)) if vals else None
            rec[f"{metric}_sem"] = sem(vals) if vals else None
        rec["n"] = len(group)
        out.append(rec)
    return out


def emit_results(rows, out_dir, fmt: str = "csv", metadata: dict | None = None) -> dict:
    """Write ``results.<fmt>``, ``summary.<fmt>`` and ``metadata.json``.

    Output is a pure function of ``rows`` and ``metadata``.  Returns the
    written paths.
    """
    rows = list(rows)
    if not rows:
        raise ParameterError("no result rows to emit")
    if fmt not in ("csv", "json"):
        raise ParameterError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"results": out / f"results.{fmt}", "summary": out / f"summary.{fmt}",
             "metadata": out / "metadata.json"}
    summary = summarize(rows)
    if fmt == "csv":
        paths["results"].write_text(rows_to_csv_text(rows))
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(summary[0]), lineterminator="\n")
        w.writeheader()
        for rec in summary:
            w.writerow({k: _csv_value(v) for k, v in rec.items()})
        paths["summary"].write_text(buf.getvalue())
    else:
        paths["results"].write_text(rows_to_json_text(rows))
        paths["summary"].write_text(json.dumps(summary, indent=1) + "\n")
    paths["metadata"].write_text(json.dumps(metadata or {}, indent=1, sort_keys=True,
                                            default=str) + "\n")
    return paths


class RowLog:
    """Append-only row log flushed after every row (``rows.jsonl``), plus a
    list of completed seeds so an interrupted sweep can resume."""

    def __init__(self, out_dir, fingerprint: str):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.path = self.dir / "rows.jsonl"
        self.done_path = self.dir / "completed_seeds.json"
        state = {}
        if self.done_path.exists():
            state = json.loads(self.done_path.read_text())
        if state.get("fingerprint") != fingerprint:
            # a different configuration: start over
            state = {"fingerprint": fingerprint, "seeds": []}
            self.path.write_text("")
        self.state = state
        kept = [r for r in self._read() if r.seed in self.state["seeds"]]
        self.rows = kept
        self.path.write_text("".join(json.dumps(asdict(r)) + "\n" for r in kept))
        self._save_state()
        self._fh = open(self.path, "a")

    def _read(self):
        if not self.path.exists():
            return []
        out = []
        for line in self.path.read_text().splitlines():
            try:
                out.append(ResultRow(**json.loads(line)))
            except (ValueError, TypeError):
                break  # torn final line from an interruption
        return out

    def _save_state(self):
        self.done_path.write_text(json.dumps(self.state, indent=1) + "\n")

    def done(self, seed: int) -> bool:
        return seed in self.state["seeds"]

    def append(self, row: ResultRow):
        self._fh.write(json.dumps(asdict(row)) + "\n")
        self._fh.flush()
        self.rows.append(row)

    def finish_seed(self, seed: int):
        self.state["seeds"].append(seed)
        self._save_state()

    def close(self):
        self._fh.close()
