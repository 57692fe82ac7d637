"""
Tests for the command line and the batch entrypoint.
"""

import json

import pytest

import main
from batch_entrypoint import EXPERIMENTS, batch_handler, batch_handler_async
from experiments._base import Experiment, ExperimentResult


class ScriptedExperiment(Experiment):
    """Experiment whose outcome is set by the test."""

    name = "scripted"
    outcome: str = "pass"

    def _setup(self) -> None:
        pass

    def run(self) -> ExperimentResult:
        if self.outcome == "crash":
            raise RuntimeError("solver blew up")
        result = self._result()
        result.passed = self.outcome == "pass"
        result.summary = {"outcome": self.outcome}
        return result

    def _summarize(self, result: ExperimentResult) -> str:
        return self.outcome


def run_directories(root, experiment):
    return sorted(p for p in (root / experiment).iterdir() if p.is_dir())


def test_presets_command(capsys):
    assert main.main(["presets"]) == 0
    names = capsys.readouterr().out.split()
    assert "two-interface" in names
    assert "tiny-1d" in names


def test_simulate_command(tmp_path, capsys):
    assert main.main(["simulate", "tiny-1d", "--out", str(tmp_path)]) == 0
    runs = json.loads(capsys.readouterr().out)
    assert runs[0]["config"] == "tiny-1d"
    (directory,) = run_directories(tmp_path, "simulate")
    assert directory.name == runs[0]["run_id"]
    assert json.loads((directory / "status.json").read_text())["state"] == "succeeded"


def test_unknown_preset_is_invalid_input(tmp_path):
    assert main.main(["simulate", "no-such-preset", "--out", str(tmp_path)]) == 2


def test_failed_run_leaves_status(tmp_path):
    """
    Test that a run rejected during setup still writes status.json with state "failed".
    """
    assert main.main(["rays", "tiny-1d", "--out", str(tmp_path)]) == 2
    (directory,) = run_directories(tmp_path, "rays")
    status = json.loads((directory / "status.json").read_text())
    assert status["state"] == "failed"
    assert "rays" in status["message"]


def test_batch_handler_runs_every_config(tmp_path):
    response = batch_handler("simulate", ["tiny-1d", "tiny-zero"], tmp_path, seed=3)
    assert response["statusCode"] == 200
    runs = json.loads(response["body"])["runs"]
    assert [run["config"] for run in runs] == ["tiny-1d", "tiny-zero"]
    assert len(run_directories(tmp_path, "simulate")) == 2


def test_batch_handler_invalid_requests(tmp_path):
    assert batch_handler("unknown", ["tiny-1d"], tmp_path)["statusCode"] == 400
    assert batch_handler("simulate", [], tmp_path)["statusCode"] == 400


@pytest.mark.asyncio
@pytest.mark.parametrize("outcome, code", [("pass", 200), ("fail", 422), ("crash", 500)])
async def test_batch_handler_async_status_codes(monkeypatch, tiny_config, tmp_path, outcome, code):
    monkeypatch.setattr(ScriptedExperiment, "outcome", outcome)
    monkeypatch.setitem(EXPERIMENTS, "scripted", ScriptedExperiment)
    response = await batch_handler_async("scripted", [tiny_config], tmp_path)
    assert response["statusCode"] == code
    if outcome == "crash":
        assert json.loads(response["body"])["error"] == "solver blew up"
        (directory,) = run_directories(tmp_path, "scripted")
        assert json.loads((directory / "status.json").read_text())["state"] == "failed"
    else:
        assert json.loads(response["body"])["runs"][0]["summary"] == {"outcome": outcome}


def test_exit_codes():
    assert main.EXIT_CODES == {200: 0, 422: 1, 400: 2, 500: 1}
