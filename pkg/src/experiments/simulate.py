"""
Forward simulation: snapshots of the wave field and the energy history over [0, 2T].
"""

from logging import getLogger

import numpy as np
import pandas as pd

from experiments._base import Experiment, ExperimentResult, Laboratory
from models.fields import CauchyData
from utils.svg import heatmap, line_plot

logger = getLogger("sclab")


class SimulateExperiment(Experiment):
    """Propagates h₀ and records snapshots at the configured times."""

    name = "simulate"

    def _setup(self) -> None:
        self.lab = Laboratory.from_config(self.config)
        self.h0 = self.lab.initial_data()
        times = self.config.output.snapshot_times or [0.0, self.config.T, 2 * self.config.T]
        if any(t < 0 for t in times):
            raise ValueError(f"Snapshot times must be nonnegative, got {times}")
        self.times = sorted(times)

    def run(self) -> ExperimentResult:
        propagator = self.lab.propagator
        result = self._result()
        horizon = max(max(self.times), 2 * self.config.T)
        wanted = {propagator.steps_for(t): t for t in self.times}
        every = self.config.output.sample_every
        e0 = propagator.energy(self.h0)
        rows = []
        snapshots: dict[float, CauchyData] = {}
        for n, (t, u, v) in enumerate(propagator.stream(self.h0, horizon)):
            if n in wanted or n % every == 0:
                h = propagator.from_vectors(u, v)
                if n in wanted:
                    snapshots[wanted[n]] = h
                if n % every == 0:
                    energy = propagator.energy(h)
                    rows.append(
                        {
                            "t": t,
                            "energy": energy,
                            "kinetic_energy": propagator.kinetic_energy(h),
                            "boundary_energy": propagator.boundary_energy(h),
                            "relative_drift": abs(energy - e0) / e0 if e0 > 0 else abs(energy),
                        }
                    )
        result.tables["energy"] = pd.DataFrame(rows)
        for t, h in snapshots.items():
            result.fields[f"u_t{t:.4f}"] = h.u0
        result.plots.update(self._plots(snapshots))
        drift = float(result.tables["energy"]["relative_drift"].max()) if rows else 0.0
        result.summary = {
            "energy": e0,
            "max_relative_drift": drift,
            "snapshots": len(snapshots),
            "zero_data": bool(self.h0.is_zero()),
        }
        return result

    def _plots(self, snapshots: dict[float, CauchyData]) -> dict[str, str]:
        grid = self.lab.grid
        if grid.dim == 1:
            x = grid.coordinates()[0]
            series = {f"t={t:.3g}": (x, h.u0.values) for t, h in sorted(snapshots.items())}
            return {"snapshots": line_plot(series, "pressure snapshots")}
        return {f"u_t{t:.4f}": heatmap(h.u0.values, f"pressure at t={t:.3g}") for t, h in snapshots.items()}

    def _summarize(self, result: ExperimentResult) -> str:
        return (
            f"{len(result.fields)} snapshots, max energy drift {result.summary['max_relative_drift']:.3e}"
        )


def relative_drift(energies: np.ndarray) -> float:
    """max |E(t) − E(0)| / E(0) of an energy history."""
    if not energies.size or energies[0] == 0:
        return 0.0
    return float(np.max(np.abs(energies - energies[0])) / energies[0])
