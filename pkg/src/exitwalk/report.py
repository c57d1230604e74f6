"""Deterministic writers for CSV tables, gnuplot data and the JSON summary.

Every file starts with provenance lines (tool version, config hash, seed).
Floats are written with ``repr`` so the text is reproducible bit for bit and
independent of locale.  Nothing time-dependent is ever written.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

SUMMARY_SCHEMA_VERSION = 1


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def provenance(version: str, config_hash: str, seed: int, comment: str = "#") -> list[str]:
    return [f"{comment} tool_version: {version}", f"{comment} config_hash: {config_hash}",
            f"{comment} seed: {seed}"]


def csv_text(rows: list[dict], header_lines: list[str]) -> str:
    columns = []
    for row in rows:
        for k in row:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    for line in header_lines:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def plot_text(plot, header_lines: list[str]) -> str:
    out = list(header_lines)
    out.append(f"# {plot.title}")
    out.append("# columns: " + " ".join(plot.columns))
    for i, (label, rows) in enumerate(plot.blocks):
        if i:
            out += ["", ""]
        out.append(f"# index {i}: {label}")
        out += [" ".join(fmt(v) for v in row) for row in rows]
    return "\n".join(out) + "\n"


def jsonable(x):
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def summary_text(summary: dict) -> str:
    return json.dumps(jsonable(summary), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def summary_schema() -> dict:
    """The JSON schema that ``summary.json`` follows."""
    return json.loads((Path(__file__).with_name("summary_schema.json")).read_text())
