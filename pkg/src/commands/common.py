"""Helpers shared by the subcommands: config files, grid specs, command echo."""
import argparse
import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ..config import get_settings
from ..fae.data import FunctionalDataset
from ..fae.errors import ArgumentError, ConfigError
from ..fae.quadrature import check_increasing
from ..fae.schemas import parse_model_config
from ..fae.storage import read_json

settings = get_settings()
logger = logging.getLogger(__name__)


def command_echo(args: argparse.Namespace) -> Dict:
    """Parsed arguments that reproduce the current run."""
    return {key: value for key, value in vars(args).items() if key != "handler"}


def load_config_file(path: str, model: Optional[str] = None, overrides: Optional[Dict] = None):
    """Read a model config JSON, default its `model` field and apply CLI overrides."""
    payload = read_json(path) if path else {}
    version = payload.pop("schema_version", settings.config_schema_version)
    if version != settings.config_schema_version:
        raise ConfigError(f"{path}: unsupported schema_version {version!r}")
    if model is not None:
        declared = payload.setdefault("model", model)
        if declared != model:
            raise ConfigError(f"{path} configures a {declared!r} model, not {model!r}")
    for key, value in (overrides or {}).items():
        if value is not None:
            payload[key] = value
    return parse_model_config(payload)


def parse_grid(spec: str, dataset: FunctionalDataset) -> np.ndarray:
    """Evaluation grid from a spec.

    observed          union of the dataset's observed times
    START:STOP:NUM    NUM equally spaced points
    refine:K          observed union grid with each gap split into K pieces
    """
    spec = (spec or "observed").strip()
    observed = dataset.union_grid()
    if spec == "observed":
        return observed
    if spec.startswith("refine:"):
        try:
            factor = int(spec.split(":", 1)[1])
        except ValueError:
            raise ArgumentError(f"bad grid spec {spec!r}: refine factor must be an integer")
        if factor < 1:
            raise ArgumentError("refine factor must be at least 1")
        pieces = [np.linspace(a, b, factor + 1)[:-1] for a, b in zip(observed[:-1], observed[1:])]
        return np.concatenate(pieces + [observed[-1:]])
    parts = spec.split(":")
    if len(parts) != 3:
        raise ArgumentError(f"bad grid spec {spec!r}; use observed, START:STOP:NUM or refine:K")
    try:
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ArgumentError(f"bad grid spec {spec!r}; START and STOP are numbers, NUM an integer")
    if num < 1:
        raise ArgumentError("grid needs at least one point")
    return check_increasing(np.linspace(start, stop, num), name="grid")


def parse_int_list(text: Optional[str]) -> List[int]:
    if not text:
        return []
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise ArgumentError(f"expected comma-separated integers, got {text!r}")


def parse_float_list(text: Optional[str]) -> List[float]:
    if not text:
        return []
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise ArgumentError(f"expected comma-separated numbers, got {text!r}")


def output_dir(path: Optional[str]) -> Path:
    return Path(path or settings.output_dir)
