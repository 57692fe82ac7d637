"""
Shared plumbing of the experiments: the numerical laboratory built from a config, the result
container, status transitions and asynchronous output writing.
"""

import asyncio
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from ulid import ULID

from models.config import RunConfig
from models.fields import CauchyData, DomainNest, GridSpec, Medium, ScalarField
from models.status import RunStatus
from pipeline.geometry_depth import DepthField, compute_depth
from pipeline.projections import Projector
from pipeline.pulses import source_data
from pipeline.scattering_control import ensure_supported_inside
from pipeline.wave_solver import Propagator
from utils.utils import build_grid, build_medium, build_nest, encode_field, run_context, write_bytes, write_csv, write_text

logger = getLogger("sclab")


@dataclass
class Laboratory:
    """
    Grid, medium, domains, propagator and projections of one configuration.
    """

    config: RunConfig
    grid: GridSpec
    medium: Medium
    nest: DomainNest
    propagator: Propagator
    depth: DepthField
    projector: Projector

    @classmethod
    def from_config(cls, config: RunConfig) -> "Laboratory":
        grid = build_grid(config)
        medium = build_medium(config, grid)
        nest = build_nest(config, grid)
        propagator = Propagator(medium, config.T, config.solver.cfl)
        depth = compute_depth(nest, medium)
        projector = Projector(
            propagator,
            depth,
            solver=config.solver.projection,
            rtol=config.solver.cg_rtol,
            maxiter=config.solver.cg_maxiter,
        )
        return cls(config, grid, medium, nest, propagator, depth, projector)

    def initial_data(self) -> CauchyData:
        """
        h₀ from the source section.

        Raises:
            ValueError: If the data is not supported in Θ.
        """
        h0 = source_data(self.config.source, self.medium)
        ensure_supported_inside(h0, self.projector)
        return h0

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.config.seed)


@dataclass
class ExperimentResult:
    """
    Everything an experiment produced.

    Attributes:
        experiment (str): Experiment name.
        run_id (str): ULID of the run.
        tables (dict[str, pd.DataFrame]): CSV tables by file stem.
        fields (dict[str, ScalarField]): Grid fields by file stem.
        plots (dict[str, str]): SVG documents by file stem.
        summary (dict[str, Any]): JSON-serializable headline numbers.
        passed (bool): False when a check inside the experiment failed.
        status (RunStatus | None): Final status.
    """

    experiment: str
    run_id: str
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)
    fields: dict[str, ScalarField] = field(default_factory=dict)
    plots: dict[str, str] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)
    passed: bool = True
    status: RunStatus | None = None


class Experiment(ABC):
    """
    Abstract base class of the command-line experiments.

    Args:
        config (RunConfig): Validated run configuration.
        run_id (str | None): Run identifier; a fresh ULID by default.
    """

    name = "experiment"

    def __init__(self, config: RunConfig, run_id: str | None = None) -> None:
        self.config = config
        self.run_id = run_id or str(ULID())
        self.status = RunStatus("started", run_id=self.run_id, experiment=self.name)

    @abstractmethod
    def _setup(self) -> None:
        """
        Build the laboratory and the initial data.
        """
        pass

    @abstractmethod
    def run(self) -> ExperimentResult:
        """
        Run the experiment's operations and collect its outputs.
        """
        pass

    @abstractmethod
    def _summarize(self, result: ExperimentResult) -> str:
        """
        One summary line for the log.
        """
        pass

    def _result(self) -> ExperimentResult:
        return ExperimentResult(self.name, self.run_id)

    def _transition(self, state: str, progress: int, message: str | None = None) -> None:
        self.status.advance(state, progress, message)
        logger.info(f"Status: {self.status.asdict()}")

    def execute(self) -> ExperimentResult:
        """
        Runs the experiment with status transitions started → running → succeeded|failed.

        Raises:
            ValueError: On invalid inputs.
            RuntimeError: On numerical failures.
        """
        token = run_context.set({"experiment": self.name, "run_id": self.run_id})
        try:
            self._transition("running", 10)
            self._setup()
            result = self.run()
            self._transition("succeeded", 100, self._summarize(result))
            result.status = self.status
            return result
        except Exception as e:
            self._transition("failed", self.status.progress, str(e))
            logger.error(f"Experiment {self.name} failed: {e}", exc_info=True)
            raise
        finally:
            run_context.reset(token)


def output_directory(root: str | Path, experiment: str, run_id: str) -> Path:
    return Path(root) / experiment / run_id


async def write_status(directory: str | Path, status: RunStatus) -> None:
    await write_text(Path(directory) / "status.json", json.dumps(status.asdict(), indent=2, sort_keys=True) + "\n")


async def write_result(result: ExperimentResult, root: str | Path) -> Path:
    """
    Writes tables (CSV), fields (binary), plots (SVG), summary and status into
    <root>/<experiment>/<run_id>/ concurrently.

    Returns:
        Path: The run directory.
    """
    directory = output_directory(root, result.experiment, result.run_id)
    tasks = [write_csv(directory / f"{stem}.csv", frame) for stem, frame in result.tables.items()]
    tasks += [write_bytes(directory / f"{stem}.field", encode_field(f)) for stem, f in result.fields.items()]
    tasks += [write_text(directory / f"{stem}.svg", svg) for stem, svg in result.plots.items()]
    tasks.append(
        write_text(directory / "summary.json", json.dumps(result.summary, indent=2, sort_keys=True, default=str) + "\n")
    )
    if result.status is not None:
        tasks.append(write_status(directory, result.status))
    await asyncio.gather(*tasks)
    return directory
