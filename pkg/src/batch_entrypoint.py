"""
Batch entrypoint for the scattering control laboratory.
Runs one experiment over several configurations concurrently and writes every run's outputs.
"""

import asyncio
import json
from pathlib import Path
from typing import Any, Dict, List

from experiments._base import Experiment, ExperimentResult, output_directory, write_result, write_status
from experiments.check import CheckExperiment
from experiments.control import ControlExperiment
from experiments.marchenko import MarchenkoExperiment
from experiments.rays import RaysExperiment
from experiments.simulate import SimulateExperiment
from models.config import RunConfig
from utils.utils import load_config, setup_logger

logger = setup_logger("sclab")

EXPERIMENTS: Dict[str, type[Experiment]] = {
    cls.name: cls
    for cls in (SimulateExperiment, ControlExperiment, MarchenkoExperiment, RaysExperiment, CheckExperiment)
}


async def execute_experiment(experiment: Experiment, out_dir: str | Path) -> ExperimentResult:
    """
    Run an experiment off the event loop and write its outputs.
    A failed run still leaves a status.json with state "failed".

    Args:
        experiment (Experiment): Configured experiment.
        out_dir (str | Path): Output root.

    Returns:
        ExperimentResult: The finished result.
    """
    try:
        result = await asyncio.to_thread(experiment.execute)
    except Exception:
        await write_status(output_directory(out_dir, experiment.name, experiment.run_id), experiment.status)
        raise
    directory = await write_result(result, out_dir)
    logger.info(f"Outputs of {experiment.name} ({experiment.run_id}) written to {directory}")
    return result


async def batch_handler_async(command: str, configs: List[RunConfig], out_dir: str | Path) -> Dict[str, Any]:
    """
    Asynchronous batch handler running all configurations concurrently.

    Args:
        command (str): Experiment name.
        configs (list[RunConfig]): Validated configurations.
        out_dir (str | Path): Output root.

    Returns:
        dict: Response with statusCode and body (JSON-encoded run summaries or error message).
            200 when every run succeeded and passed, 422 when a run finished but a check failed,
            400 on invalid inputs and 500 on numerical failures.
    """
    experiments = [EXPERIMENTS[command](config) for config in configs]
    try:
        results = await asyncio.gather(*(execute_experiment(e, out_dir) for e in experiments))
    except ValueError as e:
        logger.error(f"Invalid input during {command}: {e}", exc_info=True)
        return {"statusCode": 400, "body": json.dumps({"error": str(e)})}
    except Exception as e:
        logger.error(f"Error occurred during {command}: {e}", exc_info=True)
        return {"statusCode": 500, "body": json.dumps({"error": str(e)})}

    runs = [
        {
            "config": config.name,
            "run_id": result.run_id,
            "passed": result.passed,
            "directory": str(output_directory(out_dir, result.experiment, result.run_id)),
            "summary": result.summary,
        }
        for config, result in zip(configs, results)
    ]
    passed = all(result.passed for result in results)
    logger.info(f"{command} finished for {len(runs)} configuration(s), passed={passed}")
    return {"statusCode": 200 if passed else 422, "body": json.dumps({"runs": runs}, default=str)}


def batch_handler(
    command: str,
    sources: List[str],
    out_dir: str | Path | None = None,
    seed: int | None = None,
) -> Dict[str, Any]:
    """
    Synchronous entrypoint: loads the configurations and invokes the async handler.

    Args:
        command (str): One of EXPERIMENTS.
        sources (list[str]): Config paths or preset names.
        out_dir (str | Path | None): Output root; the first config's output.directory by default.
        seed (int | None): Seed override applied to every config.

    Returns:
        dict: Response with statusCode and body.
    """
    if command not in EXPERIMENTS:
        logger.error(f"Unknown experiment {command!r}")
        return {"statusCode": 400, "body": json.dumps({"error": f"Unknown experiment {command!r}"})}
    if not sources:
        logger.error("No configurations to run.")
        return {"statusCode": 400, "body": json.dumps({"error": "No configurations to run."})}
    overrides = {} if seed is None else {"seed": seed}
    try:
        configs = [load_config(source, overrides) for source in sources]
    except (FileNotFoundError, ValueError) as e:
        logger.error(f"Could not load configuration: {e}")
        return {"statusCode": 400, "body": json.dumps({"error": str(e)})}
    root = out_dir if out_dir is not None else configs[0].output.directory
    logger.info(f"Running {command} on {len(configs)} configuration(s) into {root}")
    return asyncio.run(batch_handler_async(command, configs, root))
