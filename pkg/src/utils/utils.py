"""
Utility functions for config loading and validation, logging setup, grid field file I/O and asynchronous output writing.
"""

import contextvars
import logging
import os
import struct
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, Mapping

import aiofiles
import numpy as np
import pandas as pd
from omegaconf import DictConfig, ListConfig, OmegaConf
from pydantic import ValidationError
from pythonjsonlogger import jsonlogger

from models.config import RunConfig
from models.fields import DomainNest, GridSpec, LayeredProfile, Medium, ScalarField

logger = getLogger("sclab")

CONFIG_PATH = os.path.join(os.path.dirname(__file__), "config.yaml")
FIELD_MAGIC = "SCLAB-FIELD"
CSV_FLOAT_FORMAT = "%.12g"

run_context: contextvars.ContextVar[Dict[str, str]] = contextvars.ContextVar("run_context", default={})


def get_config(config_path: str = CONFIG_PATH) -> DictConfig | ListConfig:
    """
    Loads the configuration from a YAML file.

    Args:
        config_path (str): Path to the configuration YAML file.

    Returns:
        DictConfig | ListConfig: The loaded configuration.
    """
    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Config file not found: {config_path}")
    with open(config_path, "r", encoding="utf-8") as file:
        return OmegaConf.load(file)


def _resolve_preset(presets: Mapping[str, Any], name: str, seen: tuple[str, ...] = ()) -> DictConfig:
    if name in seen:
        raise ValueError(f"Preset inheritance cycle: {' -> '.join(seen + (name,))}")
    if name not in presets:
        raise ValueError(f"Unknown preset {name!r}; available: {', '.join(sorted(presets))}")
    preset = OmegaConf.create(OmegaConf.to_container(presets[name], resolve=True))
    base = preset.pop("base", None)
    if base is None:
        return preset
    return OmegaConf.merge(_resolve_preset(presets, base, seen + (name,)), preset)


def load_config(source: str | Path, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """
    Loads a run configuration from a YAML file or a preset name, merged over the packaged defaults.

    Args:
        source (str | Path): Path to a YAML document, or the name of a preset in the packaged config.
        overrides (Mapping | None): Extra keys merged last (e.g. the CLI seed).

    Returns:
        RunConfig: The validated configuration.

    Raises:
        FileNotFoundError: If a path-like source does not exist.
        ValueError: If the file is malformed, the preset is unknown or a constraint is violated.
    """
    config = get_config()
    presets = config.get("presets", {}) or {}
    path = Path(source)
    if path.is_file():
        try:
            user = OmegaConf.load(path)
        except Exception as e:
            logger.error(f"Malformed config {path}: {e}")
            raise ValueError(f"Malformed config {path}: {e}") from e
        if not isinstance(user, DictConfig):
            raise ValueError(f"Malformed config {path}: top level must be a mapping")
        base = user.pop("base", None)
        if base is not None:
            user = OmegaConf.merge(_resolve_preset(presets, str(base)), user)
        name = path.stem
    elif str(source) in presets:
        user = _resolve_preset(presets, str(source))
        name = str(source)
    elif path.suffix in (".yaml", ".yml") or os.sep in str(source):
        raise FileNotFoundError(f"Config file not found: {source}")
    else:
        raise ValueError(f"Unknown preset {str(source)!r}; available: {', '.join(sorted(presets))}")

    merged = OmegaConf.merge(config.defaults, {"name": name}, user, dict(overrides or {}))
    data = OmegaConf.to_container(merged, resolve=True)
    try:
        run_config = RunConfig.model_validate(data)
    except ValidationError as e:
        logger.error(f"Invalid config {name}: {e}")
        raise ValueError(f"Invalid config {name}: {e}") from e
    check_boundary_margin(run_config)
    logger.info(f"Loaded config {run_config.name} (dim={run_config.grid.dim}, T={run_config.T})")
    return run_config


def build_grid(config: RunConfig) -> GridSpec:
    return GridSpec.from_bounds(config.grid.lower, config.grid.upper, config.grid.spacing)


def build_medium(config: RunConfig, grid: GridSpec) -> Medium:
    """
    Builds the medium from the config, with precedence field_file > layered > constant.
    """
    medium = config.medium
    if medium.field_file is not None:
        c = load_field(medium.field_file, expected=grid)
        return Medium(c)
    if medium.layered is not None:
        profile = LayeredProfile(
            tuple(medium.layered.interfaces), tuple(medium.layered.speeds), medium.layered.axis
        )
        return Medium.from_layers(grid, profile)
    return Medium.constant(grid, float(medium.constant or 1.0))


def build_nest(config: RunConfig, grid: GridSpec, T: float | None = None) -> DomainNest:
    boxes = {name: (box.lower, box.upper) for name, box in config.domain.boxes().items()}
    return DomainNest.from_boxes(grid, boxes, config.T if T is None else T)


def check_boundary_margin(config: RunConfig) -> float:
    """
    Verifies the travel-time distance d(∂Υ, Θ̄) > 2T.

    Raises:
        ValueError: If the margin is violated.
    """
    from pipeline.geometry_depth import boundary_margin, compute_depth

    grid = build_grid(config)
    medium = build_medium(config, grid)
    nest = build_nest(config, grid)
    margin = boundary_margin(compute_depth(nest, medium))
    if not margin > 2 * config.T:
        logger.error(f"Boundary margin {margin:.6g} does not exceed 2T = {2 * config.T:.6g}")
        raise ValueError(
            f"Margin constraint violated: d(∂Υ, Θ̄) = {margin:.6g} must exceed 2T = {2 * config.T:.6g}"
        )
    return margin


def encode_field(field: ScalarField) -> bytes:
    """
    Serializes a field as a one-line text header followed by little-endian float64 values (C order).
    """
    grid = field.grid
    header = " ".join(
        [
            FIELD_MAGIC,
            f"dim={grid.dim}",
            "extent=" + ",".join(str(n) for n in grid.extent),
            f"spacing={grid.spacing!r}",
            "origin=" + ",".join(repr(o) for o in grid.origin),
        ]
    )
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    return header.encode("ascii") + b"\n" + payload


def decode_field(data: bytes, expected: GridSpec | None = None) -> ScalarField:
    """
    Raises:
        ValueError: If the header is malformed, the payload size is wrong or the grid differs from expected.
    """
    head, sep, payload = data.partition(b"\n")
    if not sep:
        raise ValueError("Field file has no header line")
    try:
        tokens = head.decode("ascii").split()
        if tokens[0] != FIELD_MAGIC:
            raise ValueError(f"Bad field header magic {tokens[0]!r}")
        items = dict(token.split("=", 1) for token in tokens[1:])
        extent = tuple(int(v) for v in items["extent"].split(","))
        origin = tuple(float(v) for v in items["origin"].split(","))
        grid = GridSpec(extent, float(items["spacing"]), origin)
        if int(items["dim"]) != grid.dim:
            raise ValueError("Header dimension disagrees with its extent")
    except (KeyError, IndexError, UnicodeDecodeError) as e:
        raise ValueError(f"Malformed field header: {e}") from e
    if expected is not None and grid != expected:
        raise ValueError(f"Field grid {grid} does not match expected grid {expected}")
    if len(payload) != 8 * grid.size:
        raise ValueError(f"Field payload has {len(payload)} bytes, expected {8 * grid.size}")
    values = np.frombuffer(payload, dtype="<f8").reshape(grid.shape)
    return ScalarField(grid, values)


def save_field(field: ScalarField, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_bytes(encode_field(field))
    except OSError as e:
        logger.error(f"Failed to write field {path}: {e}")
        raise
    logger.debug(f"Field written: {path}")


def load_field(path: str | Path, expected: GridSpec | None = None) -> ScalarField:
    """
    Loads a field written by save_field.

    Args:
        path (str | Path): Field file path.
        expected (GridSpec | None): When given, the header must describe exactly this grid.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: On header or grid mismatch.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Field file not found: {path}")
    return decode_field(path.read_bytes(), expected)


def frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


async def write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        async with aiofiles.open(path, mode="w", encoding="utf-8") as f:
            await f.write(text)
    except OSError as e:
        logger.error(f"Failed to write {path}: {e}")
        raise RuntimeError(f"Failed to write {path}: {e}") from e
    logger.info(f"File written: {path}")


async def write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        async with aiofiles.open(path, mode="wb") as f:
            await f.write(data)
    except OSError as e:
        logger.error(f"Failed to write {path}: {e}")
        raise RuntimeError(f"Failed to write {path}: {e}") from e
    logger.info(f"File written: {path}")


async def write_csv(path: str | Path, frame: pd.DataFrame) -> None:
    await write_text(path, frame_to_csv(frame))


class JSONFormatter(jsonlogger.JsonFormatter):  # type: ignore
    """
    Logging formatter that outputs records as JSON using python-json-logger.
    """

    def __init__(self, fmt: str | None = None) -> None:
        if fmt is None:
            fmt = "%(asctime)s %(name)s %(levelname)s %(message)s %(experiment)s %(run_id)s"
        super().__init__(fmt=fmt)


class JobStatusFilter(logging.Filter):
    """
    Logging filter that stamps records with the current run context (experiment, run_id).
    """

    def __init__(self) -> None:
        super().__init__()
        self.experiment = None
        self.run_id = None

    def filter(self, record: logging.LogRecord) -> bool:
        context = run_context.get()
        record.experiment = context.get("experiment", self.experiment)
        record.run_id = context.get("run_id", self.run_id)
        return True


def setup_logger(
    name: str, level: int | str = logging.INFO, json_format: bool = False
) -> logging.Logger:
    """
    Sets up a logger that streams logs to the console.

    Args:
        name (str): Name of the logger.
        level (int | str): Logging level (e.g., logging.INFO or "DEBUG").
        json_format (bool): Whether to format logs as JSON.

    Returns:
        logging.Logger: Configured logger instance.
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)
    logger.handlers.clear()
    has_filter = any(isinstance(f, JobStatusFilter) for f in logger.filters)
    if not has_filter:
        logger.addFilter(JobStatusFilter())

    handler = logging.StreamHandler()
    handler.setLevel(level)
    if json_format:
        formatter: logging.Formatter = JSONFormatter()
    else:
        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(experiment)s - %(run_id)s - %(message)s"
        )
    handler.setFormatter(formatter)
    logger.addHandler(handler)
    return logger
