"""Machine-readable run outputs: CSV data, YAML summaries, JSON manifests.

Data files are byte-deterministic given (config, seed); wall-clock timestamps
and environment versions live only in the manifest.
"""

from __future__ import annotations

import hashlib
import json
import platform
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np
import yaml

from .config import serialize_config
from .model import CriterionReport, EventSequence, ScenarioConfig, WeightRecord

EVENTS_HEADER = "path_id,coordinate,time"
WEIGHTS_HEADER = "path_id,log_weight,hit_zero,quad_err"


def format_time(value: float) -> str:
    return format(float(value), ".15g")


def write_events_csv(path: Path, sequences: Iterable[EventSequence]) -> Path:
    lines = [EVENTS_HEADER]
    for pid, seq in enumerate(sequences):
        for coord, times in enumerate(seq.jumps):
            for t in times:
                lines.append(f"{pid},{coord},{format_time(t)}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def write_weights_csv(path: Path, records: Iterable[WeightRecord]) -> Path:
    lines = [WEIGHTS_HEADER]
    for rec in records:
        lines.append(f"{rec.path_id},{rec.log_weight:.17g},{int(rec.hit_zero)},"
                     f"{rec.quadrature_error_estimate:.17g}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def criterion_to_dict(report: CriterionReport) -> dict:
    doc = asdict(report)
    doc["stability_flag"] = bool(report.stability_flag)
    return doc


def _clean(obj):
    if isinstance(obj, Mapping):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, CriterionReport):
        return criterion_to_dict(obj)
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    return obj


def write_summary(path: Path, checks: list[CriterionReport],
                  aggregates: Optional[Mapping] = None,
                  extra: Optional[Mapping] = None) -> Path:
    doc: dict = {"checks": [_clean(c) for c in checks]}
    if aggregates:
        doc["aggregates"] = _clean(aggregates)
    if extra:
        doc.update(_clean(extra))
    path = Path(path)
    path.write_text(yaml.safe_dump(doc, sort_keys=False, default_flow_style=False),
                    encoding="utf-8", newline="\n")
    return path


def config_digest(config: ScenarioConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()


def write_manifest(out_dir: Path, subcommand: str, config: ScenarioConfig,
                   outputs: list[str], extra: Optional[Mapping] = None) -> Path:
    from . import __version__

    doc = {
        "subcommand": subcommand,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "seed": config.master_seed,
        "config_sha256": config_digest(config),
        "pointtilt_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "outputs": sorted(outputs),
    }
    if extra:
        doc.update(_clean(extra))
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
