"""Result persistence: CSV, JSON, plot-data series and JSON-lines traces.

Path ``"-"`` (or ``None``) writes to standard output.  Nothing written here
carries a timestamp or host detail, so reruns with the same seed are
byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import OutputError

CSV_FIELDS = ("epsilon", "delta", "n", "k", "j", "trials", "mean_fraction", "ci_lo", "ci_hi", "seed")


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_text(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        p = Path(path)
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None


def render_csv(records, fields=CSV_FIELDS) -> str:
    """RFC-4180 CSV with LF line endings; rows sorted by ``n`` when present."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(fields)
    rows = list(records)
    if rows and all("n" in r for r in rows):
        rows.sort(key=lambda r: r["n"])
    for r in rows:
        writer.writerow([_cell(r.get(f)) for f in fields])
    return buf.getvalue()


def render_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def emit_results(records, fmt: str = "csv", path=None, *, fields=CSV_FIELDS) -> None:
    """Write ``records`` as ``csv`` or ``json`` to ``path``."""
    if fmt == "csv":
        _write_text(render_csv(records, fields), path)
    elif fmt == "json":
        _write_text(render_json(list(records)), path)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def write_json(obj, path=None) -> None:
    _write_text(render_json(obj), path)


def write_text(text: str, path=None) -> None:
    _write_text(text if text.endswith("\n") else text + "\n", path)


def write_plot_data(records, directory, x: str = "n", y: str = "mean_fraction", by=("epsilon", "delta", "k", "j")) -> list[Path]:
    """One two-column ``x,y`` file per curve; a curve is a distinct ``by`` tuple."""
    curves: dict[tuple, list] = {}
    for r in records:
        curves.setdefault(tuple(r.get(b) for b in by), []).append((r[x], r[y]))
    out = []
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {directory}: {exc.strerror or exc}") from None
    for key, pts in sorted(curves.items(), key=lambda kv: [_cell(v) for v in kv[0]]):
        name = "_".join(f"{b}{_cell(v)}" for b, v in zip(by, key) if v is not None) or "curve"
        path = d / f"{y}_vs_{x}_{name}.csv"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("x", "y"))
        for px, py in sorted(pts):
            writer.writerow((_cell(px), _cell(py)))
        _write_text(buf.getvalue(), path)
        out.append(path)
    return out


def write_trace(records, path=None) -> None:
    """JSON lines, one arrival per line with keys in a fixed order."""
    lines = [json.dumps(_plain(r), sort_keys=True) for r in records]
    _write_text("".join(line + "\n" for line in lines), path)


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from None
