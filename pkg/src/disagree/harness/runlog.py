"""Append-only metric log, persisted as CSV with a versioned header."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RUNLOG_VERSION = 1
VERSION_LINE = f"# disagree runlog v{RUNLOG_VERSION}"

COLUMNS = (
    "step",
    "round",
    "eval_return",
    "eval_goal_rate",
    "eval_interaction_rate",
    "intrinsic_mean",
    "intrinsic_class0",
    "intrinsic_class1",
    "interaction_rate",
    "episodes_done",
    "goal_rate",
    "first_extrinsic_step",
    "ensemble_loss",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_frac",
    "approx_kl",
    "grad_var",
    "objective",
    "wall_clock",
)
TIMING_COLUMNS = ("wall_clock",)
INT_COLUMNS = frozenset({"step", "round", "episodes_done", "first_extrinsic_step"})


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


@dataclass
class RunLog:
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, row: dict) -> None:
        unknown = set(row) - set(COLUMNS)
        if unknown:
            raise KeyError(f"unknown log columns: {sorted(unknown)}")
        if self.rows and row["step"] <= self.rows[-1]["step"]:
            raise ValueError(f"log steps must increase: {row['step']} after {self.rows[-1]['step']}")
        self.rows.append(dict(row))

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def label(self) -> str:
        return str(self.meta.get("config", {}).get("label", "")) or self.meta.get("source", "run")

    def column(self, name: str) -> np.ndarray:
        """Column as float array; blank cells become NaN."""
        if name not in COLUMNS:
            raise KeyError(f"unknown column {name!r}; known: {', '.join(COLUMNS)}")
        out = [row.get(name) for row in self.rows]
        return np.array([np.nan if v is None or v == "" else float(v) for v in out], dtype=np.float64)

    def to_csv(self, exclude: tuple[str, ...] = ()) -> str:
        cols = [c for c in COLUMNS if c not in exclude]
        buf = io.StringIO()
        buf.write(VERSION_LINE + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows:
            w.writerow([_fmt(row.get(c)) for c in cols])
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.write_text(self.to_csv())
        if self.meta:
            meta_path(path).write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "RunLog":
        path = Path(path)
        text = path.read_text()
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# disagree runlog v"):
            raise ValueError(f"{path}: missing runlog version line")
        version = int(lines[0].rsplit("v", 1)[1])
        if version != RUNLOG_VERSION:
            raise ValueError(f"{path}: runlog version {version}, expected {RUNLOG_VERSION}")
        reader = csv.DictReader(lines[1:])
        rows = []
        for rec in reader:
            rows.append({k: None if v == "" else int(v) if k in INT_COLUMNS else float(v)
                         for k, v in rec.items()})
        mp = meta_path(path)
        meta = json.loads(mp.read_text()) if mp.exists() else {}
        meta.setdefault("source", path.stem)
        return cls(rows, meta)


def meta_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")
