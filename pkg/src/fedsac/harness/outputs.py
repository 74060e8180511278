"""Files written for a run: config, metrics, per-round matrices, SVG heatmaps, final models."""

from __future__ import annotations

import csv
import io
import json
import os
from html import escape
from pathlib import Path

import numpy as np

from ..errors import InvalidInput, OutputError
from .config import ExperimentConfig, canonical_json
from .runner import SWEEP_COLUMNS, History

FLOAT_FMT = "%.9g"
ANNOTATE_MAX_N = 12
_CELL = 40


def _fmt(v: float) -> str:
    return FLOAT_FMT % v


def _prepare_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f"cannot create output directory {path}: {e}") from e
    if not os.access(path, os.W_OK):
        raise OutputError(f"output directory {path} is not writable")
    return path


def _write_text(path: Path, text: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from e


def _csv_text(rows, header=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def matrix_csv(m: np.ndarray) -> str:
    return _csv_text([[_fmt(v) for v in row] for row in np.asarray(m, dtype=np.float64)])


def metrics_csv(history: History) -> str:
    rows = []
    for rec in history:
        for i in rec.participants:
            rows.append([rec.round, int(i), _fmt(rec.per_client_accuracy[i])])
    return _csv_text(rows, ["round", "client", "accuracy"])


def heatmap_svg(m: np.ndarray, title: str = "") -> str:
    """Grid of grey cells, white at the matrix minimum and black at its maximum."""
    m = np.asarray(m, dtype=np.float64)
    rows, cols = m.shape
    lo, hi = float(m.min()), float(m.max())
    span = hi - lo if hi > lo else 1.0
    top = 24 if title else 0
    width, height = cols * _CELL, rows * _CELL + top
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">'
    ]
    if title:
        out.append(f'<text x="4" y="16" font-size="14">{escape(title)}</text>')
    annotate = max(rows, cols) <= ANNOTATE_MAX_N
    for r in range(rows):
        for c in range(cols):
            t = (m[r, c] - lo) / span
            g = int(round(255 * (1.0 - t)))
            x, y = c * _CELL, top + r * _CELL
            out.append(
                f'<rect x="{x}" y="{y}" width="{_CELL}" height="{_CELL}" fill="rgb({g},{g},{g})"/>'
            )
            if annotate:
                ink = "white" if g < 128 else "black"
                out.append(
                    f'<text x="{x + _CELL / 2}" y="{y + _CELL / 2 + 4}" font-size="10" '
                    f'text-anchor="middle" fill="{ink}">{m[r, c]:.2f}</text>'
                )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_outputs(history: History, cfg: ExperimentConfig, output_dir=None) -> Path:
    """Write the run directory and return its path.

    Matrices and heatmaps are written only for rounds whose record carries
    them (runs with matrix tracing on).
    """
    if len(history) == 0:
        raise InvalidInput("cannot emit outputs for an empty history")
    out = _prepare_dir(output_dir or cfg.output_dir)
    _write_text(out / "run_config.json", canonical_json(cfg))
    _write_text(out / "metrics.csv", metrics_csv(history))
    for rec in history:
        mats = {"W": rec.w, "S": rec.s, "C": rec.c}
        mats = {k: v for k, v in mats.items() if v is not None}
        if not mats:
            continue
        rdir = _prepare_dir(out / "matrices" / str(rec.round))
        for name, m in mats.items():
            _write_text(rdir / f"{name}.csv", matrix_csv(m))
            _write_text(out / f"heatmap_{name}_{rec.round}.svg", heatmap_svg(m, f"{name}, round {rec.round}"))
    models = {f"client_{i}": p.values for i, p in enumerate(history.final_models)}
    try:
        np.savez(out / "models.npz", **models)
    except OSError as e:
        raise OutputError(f"cannot write models to {out}: {e}") from e
    return out


SWEEP_ASSUMPTION = (
    "two clients, equal relative sizes, one local round from a common initial model, "
    "one aggregation with the configured alpha and beta"
)


def emit_sweep(rows: list[dict], cfg: ExperimentConfig, kind: str, output_dir=None) -> Path:
    """Write ``sweep.csv`` plus ``sweep_meta.json`` describing the protocol."""
    out = _prepare_dir(output_dir or cfg.output_dir)
    body = [[_fmt(r[c]) for c in SWEEP_COLUMNS] for r in rows]
    _write_text(out / "sweep.csv", _csv_text(body, SWEEP_COLUMNS))
    meta = {"kind": kind, "protocol": SWEEP_ASSUMPTION, "levels": [r["level"] for r in rows]}
    _write_text(out / "sweep_meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    _write_text(out / "run_config.json", canonical_json(cfg))
    return out


def compare_csv(curves: dict[str, np.ndarray]) -> str:
    """One row per round, one column per labelled mean-accuracy curve (blank past a curve's end)."""
    names = list(curves)
    length = max(len(v) for v in curves.values())
    rows = []
    for t in range(length):
        rows.append([t] + [_fmt(curves[n][t]) if t < len(curves[n]) else "" for n in names])
    return _csv_text(rows, ["round", *names])


def emit_compare(curves: dict[str, np.ndarray], path) -> Path:
    path = Path(path)
    _prepare_dir(path.parent)
    _write_text(path, compare_csv(curves))
    return path
