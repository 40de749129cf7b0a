"""Deterministic, atomically written report files."""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from pathlib import Path
from typing import Union

from .scenarios import DiagnosticsReport, Scenario, SweepReport


def atomic_write(path: Union[str, Path], text: str) -> Path:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_") or "scenario"


def report_stem(sc_name: str, digest: str) -> str:
    return f"{safe_name(sc_name)}-{digest}"


def write_report(report: DiagnosticsReport, output_dir: Union[str, Path]) -> dict:
    """JSON verdict and CSV ledger named ``<name>-<scenario hash>``."""
    out = Path(output_dir)
    stem = report_stem(report.scenario["name"], report.digest)
    return {
        "verdict": atomic_write(out / f"{stem}.json", report.to_json() + "\n"),
        "ledger": atomic_write(out / f"{stem}-ledger.csv", report.ledger.to_csv()),
    }


def sweep_digest(template: Scenario, axes: dict) -> str:
    blob = json.dumps({"template": template.digest(), "axes": axes}, sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def write_sweep(sweep: SweepReport, template: Scenario, output_dir: Union[str, Path]) -> dict:
    """Aggregate JSON, per-point CSV and scaling CSV, plus each point's own report."""
    out = Path(output_dir)
    stem = report_stem(template.name, sweep_digest(template, sweep.axes)) + "-sweep"
    paths = {
        "summary": atomic_write(out / f"{stem}.json", sweep.to_json() + "\n"),
        "points": atomic_write(out / f"{stem}-points.csv", sweep.points_csv()),
        "scaling": atomic_write(out / f"{stem}-scaling.csv", sweep.scaling_csv()),
    }
    for rep in sweep.reports:
        if rep is not None:
            write_report(rep, out / stem)
    return paths
