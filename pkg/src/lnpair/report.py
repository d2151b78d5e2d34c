"""Deterministic text/CSV writers with the reproducibility header."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "yes" if v else "no"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def render_csv(header_lines, columns, rows) -> str:
    buf = io.StringIO()
    for ln in header_lines:
        buf.write(ln + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def render_text(header_lines, body: str) -> str:
    return "\n".join(list(header_lines) + [body]) + "\n"


def write_outputs(out_dir, files: dict) -> list[Path]:
    """Write {name: text} into ``out_dir``; returns the paths in name order."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in sorted(files):
        p = out / name
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(files[name])
        paths.append(p)
    return paths
