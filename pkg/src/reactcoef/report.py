"""Plain-text artifacts: CSV tables, JSON manifests and field dumps."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def format_value(v) -> str:
    """Floats in scientific notation with 5 significant digits; others verbatim."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4e}"
    return str(v)


def table_csv(rows, columns=None) -> str:
    if not rows:
        return ""
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in columns])
    return buf.getvalue()


def write_text(path, text: str) -> Path:
    """Write UTF-8 text atomically (temporary file in the same directory, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def manifest_json(manifest: dict) -> str:
    return json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n"


def write_report(report: dict, out) -> list:
    """Write tables, iteration logs, field dumps and the manifest of a run under ``out``."""
    from .forward import dump_field
    from .inverse import history_csv

    out = Path(out)
    written = []
    for name, rows in report.get("tables", {}).items():
        written.append(write_text(out / f"{name}.csv", table_csv(rows)))
    for name, history in report.get("logs", {}).items():
        written.append(write_text(out / "logs" / f"{name}.csv", history_csv(history)))
    for name, f in report.get("fields", {}).items():
        for key in ("beta", "phi"):
            if key in f:
                written.append(write_text(out / "fields" / f"{name}_{key}.txt",
                                          dump_field(f["mesh"], f[key])))
    written.append(write_text(out / "manifest.json", manifest_json(report.get("manifest", {}))))
    return written
