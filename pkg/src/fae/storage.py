"""
Persistence

Long-format CSV datasets (sample_id, t, value[, label]), JSON sidecars,
model files and experiment reports.

Model file schema:
    {"schema_version": 1, "model": "fae" | "ae" | "fpca",
     "config": {...}, <family parameters>, "metadata": {...}}
where dense layers store {"shape": [rows, cols], "data": [row-major values]}.
"""
import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..config import get_settings
from .autoencoder import FaeModel
from .baseline_ae import AeModel
from .data import FunctionalDataset, FunctionalSample, MeanCurve
from .errors import ArgumentError, ConfigError, DataParseError
from .evaluation import ExperimentReport
from .fpca import FpcaModel

logger = logging.getLogger(__name__)
settings = get_settings()

REQUIRED_COLUMNS = ("sample_id", "t", "value")
PathLike = Union[str, Path]
FittedModel = Union[FaeModel, AeModel, FpcaModel]


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArgumentError(f"cannot create directory {path.parent}: {e}") from e
    return path


# ==================== Datasets ====================

def dataset_frame(dataset: FunctionalDataset, values: Optional[np.ndarray] = None) -> pd.DataFrame:
    ids = [s.sample_id if s.sample_id is not None else f"s{i:05d}" for i, s in enumerate(dataset)]
    frame = pd.DataFrame({
        "sample_id": np.repeat(np.array(ids, dtype=object), dataset.lengths),
        "t": dataset.times,
        "value": dataset.values if values is None else values,
    })
    labels = dataset.labels
    if labels is not None:
        frame["label"] = np.repeat(labels, dataset.lengths)
    return frame


def write_dataset_csv(dataset: FunctionalDataset, path: PathLike) -> Path:
    path = _prepare(path)
    try:
        dataset_frame(dataset).to_csv(path, index=False)
    except OSError as e:
        raise ArgumentError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote {len(dataset)} samples ({dataset.num_observations} rows) to {path}")
    return path


def _parse_floats(column: pd.Series, name: str) -> np.ndarray:
    try:
        parsed = column.astype(np.float64).to_numpy()
    except (TypeError, ValueError):
        parsed = None
    if parsed is None or not np.all(np.isfinite(parsed)):
        for position, raw in enumerate(column):
            try:
                value = float(raw)
            except (TypeError, ValueError):
                raise DataParseError(f"column {name!r}: cannot parse {raw!r} as a number", line=position + 2)
            if not np.isfinite(value):
                raise DataParseError(f"column {name!r}: non-finite value {raw!r}", line=position + 2)
    return parsed


def _parse_labels(column: pd.Series) -> List[Optional[int]]:
    labels: List[Optional[int]] = []
    for position, raw in enumerate(column):
        text = str(raw).strip()
        if text == "":
            labels.append(None)
            continue
        try:
            value = float(text)
        except ValueError:
            raise DataParseError(f"column 'label': cannot parse {raw!r} as an integer", line=position + 2)
        if not value.is_integer():
            raise DataParseError(f"column 'label': {raw!r} is not an integer", line=position + 2)
        labels.append(int(value))
    return labels


def read_dataset_csv(path: PathLike) -> FunctionalDataset:
    """Parse a long-format CSV; rows of one sample may come in any time order."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError as e:
        raise ArgumentError(f"dataset not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        found = re.search(r"line (\d+)", str(e))
        raise DataParseError(f"{path}: {e}", line=int(found.group(1)) if found else 1) from e

    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise DataParseError(f"missing column(s) {missing}; expected sample_id, t, value[, label]", line=1)
    if frame.empty:
        raise DataParseError("no data rows", line=2)

    ids = frame["sample_id"].astype(str).str.strip().to_numpy()
    for position, sample_id in enumerate(ids):
        if sample_id == "":
            raise DataParseError("empty sample_id", line=position + 2)
    times = _parse_floats(frame["t"], "t")
    values = _parse_floats(frame["value"], "value")
    labels = _parse_labels(frame["label"]) if "label" in frame.columns else [None] * len(frame)

    order: Dict[str, List[int]] = {}
    for position, sample_id in enumerate(ids):
        order.setdefault(sample_id, []).append(position)

    samples = []
    for sample_id, rows in order.items():
        rows = np.asarray(rows)
        rows = rows[np.argsort(times[rows], kind="stable")]
        sample_times = times[rows]
        duplicate = np.flatnonzero(np.diff(sample_times) == 0)
        if duplicate.size:
            raise DataParseError(
                f"sample {sample_id!r} repeats t={sample_times[duplicate[0]]!r}", line=int(rows[duplicate[0] + 1]) + 2
            )
        if rows.size < 2:
            raise DataParseError(f"sample {sample_id!r} has a single observation", line=int(rows[0]) + 2)
        sample_labels = {labels[r] for r in rows}
        if len(sample_labels) > 1:
            raise DataParseError(f"sample {sample_id!r} has conflicting labels", line=int(rows[-1]) + 2)
        samples.append(FunctionalSample(sample_times, values[rows], sample_labels.pop(), sample_id))

    dataset = FunctionalDataset(samples)
    logger.info(f"Read {len(dataset)} samples ({dataset.num_observations} rows) from {path}")
    return dataset


def sidecar_path(csv_path: PathLike) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_json(payload: Dict, path: PathLike) -> Path:
    path = _prepare(path)
    try:
        path.write_text(json.dumps(payload, indent=2))
    except OSError as e:
        raise ArgumentError(f"cannot write {path}: {e}") from e
    return path


def read_json(path: PathLike) -> Dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ArgumentError(f"file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise DataParseError(f"{path}: invalid JSON ({e.msg})", line=e.lineno) from e


def read_mean_curve(csv_path: PathLike) -> Optional[MeanCurve]:
    """Mean curve stored by `ingest --center`, if the dataset has one."""
    path = sidecar_path(csv_path)
    if not path.exists():
        return None
    payload = read_json(path).get("mean_curve")
    return None if payload is None else MeanCurve.from_dict(payload)


# ==================== Models ====================

_FAMILIES = {"fae": FaeModel, "ae": AeModel, "fpca": FpcaModel}


def model_kind(model: FittedModel) -> str:
    for kind, cls in _FAMILIES.items():
        if isinstance(model, cls):
            return kind
    raise ArgumentError(f"unknown model type {type(model).__name__}")


def save_model(model: FittedModel, path: PathLike, metadata: Optional[Dict] = None) -> Path:
    payload = {"schema_version": settings.config_schema_version, "model": model_kind(model)}
    payload.update(model.to_dict())
    payload["metadata"] = metadata or {}
    path = write_json(payload, path)
    logger.info(f"Saved {payload['model']} model to {path}")
    return path


def load_model(path: PathLike) -> FittedModel:
    payload = read_json(path)
    version = payload.get("schema_version")
    if version != settings.config_schema_version:
        raise ConfigError(f"{path}: unsupported schema_version {version!r}")
    kind = payload.get("model")
    if kind not in _FAMILIES:
        raise ConfigError(f"{path}: unknown model family {kind!r}")
    try:
        return _FAMILIES[kind].from_dict(payload)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"{path}: malformed {kind} model file ({e})") from e


def write_loss_log(history: Sequence[float], path: PathLike) -> Path:
    """Plain-text `epoch loss` lines."""
    path = _prepare(path)
    lines = [f"{epoch} {loss!r}" for epoch, loss in enumerate(history, start=1)]
    path.write_text("\n".join(lines) + ("\n" if lines else ""))
    return path


# ==================== Curves and reports ====================

def write_curves_csv(
    dataset: FunctionalDataset,
    times: np.ndarray,
    curves: np.ndarray,
    path: PathLike,
) -> Path:
    """One row per (sample, t) on the shared evaluation grid."""
    ids = [s.sample_id if s.sample_id is not None else f"s{i:05d}" for i, s in enumerate(dataset)]
    times = np.asarray(times, dtype=np.float64)
    frame = pd.DataFrame({
        "sample_id": np.repeat(np.array(ids, dtype=object), times.size),
        "t": np.tile(times, len(ids)),
        "value": np.asarray(curves).ravel(),
    })
    path = _prepare(path)
    frame.to_csv(path, index=False)
    return path


def write_weight_functions_csv(times: np.ndarray, weights: Dict[str, np.ndarray], path: PathLike) -> Path:
    """Columns t, <name>_1, <name>_2, ... for each (len(times), K) matrix."""
    frame = pd.DataFrame({"t": np.asarray(times, dtype=np.float64)})
    for name, matrix in weights.items():
        for k in range(matrix.shape[1]):
            frame[f"{name}_{k + 1}"] = matrix[:, k]
    path = _prepare(path)
    frame.to_csv(path, index=False)
    return path


def report_frame(report: ExperimentReport) -> pd.DataFrame:
    rows = []
    for result in report.replicates:
        rows.append({
            "model": report.model,
            "replicate": result.replicate,
            "seed": result.seed,
            "n_train": result.n_train,
            "n_test": result.n_test,
            "mse_p": result.mse_p,
            "p_classification": result.p_classification,
            "final_loss": result.final_loss,
        })
    return pd.DataFrame(rows)


def checkpoint_frame(report: ExperimentReport) -> pd.DataFrame:
    rows = [
        {"replicate": r.replicate, "epoch": c.epoch, "mse_p": c.mse_p, "p_classification": c.p_classification}
        for r in report.replicates for c in r.checkpoints
    ]
    return pd.DataFrame(rows, columns=["replicate", "epoch", "mse_p", "p_classification"])


def write_report(report: ExperimentReport, json_path: PathLike, csv_path: PathLike) -> None:
    json_path = _prepare(json_path)
    json_path.write_text(report.model_dump_json(indent=2))
    report_frame(report).to_csv(_prepare(csv_path), index=False)
    if any(r.checkpoints for r in report.replicates):
        checkpoint_frame(report).to_csv(Path(csv_path).with_name(Path(csv_path).stem + "_checkpoints.csv"), index=False)
    logger.info(f"Wrote report to {json_path} and {csv_path}")


def read_report(path: PathLike) -> ExperimentReport:
    return ExperimentReport.model_validate(read_json(path))
