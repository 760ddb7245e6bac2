"""Writers for run outputs, from the per-round metrics CSV to the optional traces."""
from __future__ import annotations

import csv
import json
import math
import os
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import __version__
from .channel import channel_rows
from .config import ExperimentConfig, config_to_dict

METRICS_HEADER = (
    "round", "test_acc", "train_loss", "phase_obj", "anchor", "avg_tau",
    "mean_tx_power", "mean_up_misalign", "mean_down_misalign",
)
TRANSPORT_HEADER = (
    "round", "user", "tau", "feasible", "transmitted", "tx_power",
    "abs_h_up", "abs_h_up_hat", "abs_h_down", "abs_h_down_hat", "up_misalign", "down_misalign",
)
SCA_HEADER = ("round", "iteration", "objective")
CHANNEL_HEADER = ("round", "user", "link", "element", "re", "im")
OUTPUT_ENV = "RISOTA_OUTPUT_DIR"


def _fmt(x) -> str:
    """Shortest round-trip repr; fixed spellings for NaN and infinities keep files diffable."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _nanmean(a) -> float:
    a = np.asarray(a, dtype=float)
    a = a[np.isfinite(a)]
    return float(a.mean()) if a.size else float("nan")


def metrics_row(rec) -> list:
    return [
        str(rec.round), _fmt(rec.test_acc), _fmt(rec.train_loss), _fmt(rec.phase_obj),
        str(rec.anchor), _fmt(np.mean(rec.taus)), _fmt(np.mean(rec.tx_power)),
        _fmt(_nanmean(rec.mis_up)), _fmt(_nanmean(rec.mis_down)),
    ]


def _write_csv(path, header, rows: Iterable) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_metrics(records, path) -> Path:
    return _write_csv(path, METRICS_HEADER, (metrics_row(r) for r in records))


def write_transport_log(records, path) -> Path:
    def rows():
        for r in records:
            for i in range(len(r.taus)):
                yield [
                    r.round, i, int(r.taus[i]), int(r.feasible[i]), int(r.transmitted[i]),
                    _fmt(r.tx_power[i]), _fmt(abs(r.h_up[i])), _fmt(abs(r.h_up_hat[i])),
                    _fmt(abs(r.h_down[i])), _fmt(abs(r.h_down_hat[i])),
                    _fmt(r.mis_up[i]), _fmt(r.mis_down[i]),
                ]
    return _write_csv(path, TRANSPORT_HEADER, rows())


def write_sca_trace(records, path) -> Path:
    rows = ([r.round, j, _fmt(v)] for r in records for j, v in enumerate(r.sca_objectives))
    return _write_csv(path, SCA_HEADER, rows)


def write_channel_dump(realizations, path) -> Path:
    rows = ([t, i, link, n, _fmt(re), _fmt(im)]
            for ch in realizations for (t, i, link, n, re, im) in channel_rows(ch))
    return _write_csv(path, CHANNEL_HEADER, rows)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no NaN/inf literal; strings keep the file strictly parseable
        return x if math.isfinite(x) else _fmt(x)
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_json_safe(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def write_diagnostics(diag: dict, path) -> Path:
    """Accepts the dict from ``bounds.diagnostics`` or an ``ErrorDecomposition``."""
    if hasattr(diag, "as_dict"):
        diag = {"terms": diag.as_dict()}
    return write_json(diag, path)


@dataclass(frozen=True)
class RunManifest:
    config: dict
    seed: int
    version: str
    outputs: dict
    python: str = field(default_factory=platform.python_version)
    numpy: str = np.__version__

    def as_dict(self) -> dict:
        return {
            "config": self.config, "seed": self.seed, "version": self.version,
            "outputs": self.outputs, "python": self.python, "numpy": self.numpy,
        }


def output_dir(cfg: ExperimentConfig, override: Optional[str] = None) -> Path:
    """CLI flag beats the environment variable, which beats the config."""
    return Path(override or os.environ.get(OUTPUT_ENV) or cfg.output.directory)


def output_paths(cfg: ExperimentConfig, directory) -> dict:
    d = Path(directory)
    o = cfg.output
    paths = {"metrics": d / o.metrics, "diagnostics": d / o.diagnostics,
             "manifest": d / o.manifest}
    if o.transport_log:
        paths["transport_log"] = d / o.transport_log
    if o.sca_trace:
        paths["sca_trace"] = d / o.sca_trace
    return paths


def write_manifest(cfg: ExperimentConfig, paths: dict, path) -> RunManifest:
    manifest = RunManifest(config_to_dict(cfg), cfg.seed, __version__,
                           {k: str(v) for k, v in paths.items()})
    write_json(manifest.as_dict(), path)
    return manifest


def read_manifest_config(path) -> dict:
    return json.loads(Path(path).read_text())["config"]


def write_run_outputs(result, paths: dict) -> dict:
    """Writes everything except the manifest, which goes out before round 0."""
    write_metrics(result.records, paths["metrics"])
    write_diagnostics(result.diagnostics, paths["diagnostics"])
    if "transport_log" in paths:
        write_transport_log(result.records, paths["transport_log"])
    if "sca_trace" in paths:
        write_sca_trace(result.records, paths["sca_trace"])
    return paths
