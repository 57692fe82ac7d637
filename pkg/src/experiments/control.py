"""
Scattering control run: the Neumann iteration with its diagnostics, energy recovery against the
oracle, and optionally the operator-norm estimate of π*Rπ*R.
"""

from logging import getLogger

import numpy as np
import pandas as pd

from experiments._base import Experiment, ExperimentResult, Laboratory
from models.fields import CauchyData, ScalarField
from models.traces import IterationTrace
from pipeline.marchenko import operator_norm_estimate
from pipeline.scattering_control import hstar_membership_residuals, scattering_control_iterate
from utils.svg import line_plot
from utils.utils import load_field

logger = getLogger("sclab")


def is_diverging(trace: IterationTrace, window: int) -> bool:
    """No stabilization and a tail norm that kept growing over the last `window` steps."""
    if trace.stabilized or len(trace.records) <= window:
        return False
    tails = [r.tail_norm for r in trace.records[-window - 1 :]]
    return all(b > a for a, b in zip(tails, tails[1:]))


class ControlExperiment(Experiment):
    """Runs the scattering control series on h₀."""

    name = "control"

    def _setup(self) -> None:
        self.lab = Laboratory.from_config(self.config)
        self.h0 = self.lab.initial_data()

    def run(self) -> ExperimentResult:
        it = self.config.iteration
        result = self._result()
        trace = scattering_control_iterate(
            self.h0,
            self.lab.projector,
            it.k_max,
            oracle=it.oracle,
            keep_every=it.keep_every,
            stabilization_tol=it.stabilization_tol,
            stabilization_window=it.stabilization_window,
            ke_cross_check=it.ke_cross_check,
            snapshot_iterations=it.snapshot_iterations,
        )
        self.status.progress = 70
        result.tables["trace"] = trace.to_frame()
        for k in sorted(set(it.snapshot_iterations) & set(trace.iterates)):
            result.fields[f"h_k{k:03d}"] = trace.iterates[k].u0

        final = trace.records[-1]
        diverging = is_diverging(trace, it.stabilization_window)
        summary = {
            "iterations": len(trace.records),
            "stabilized_at": trace.stabilized_at,
            "diverging": diverging,
            "tail_norm": final.tail_norm,
            "recovered_energy": final.recovered_energy,
            "recovered_kinetic_energy": final.recovered_kinetic_energy,
        }
        if trace.oracle is not None:
            summary.update(
                {
                    "oracle_energy": trace.oracle.energy,
                    "oracle_kinetic_energy": trace.oracle.kinetic_energy,
                    "interior_mismatch": final.interior_mismatch,
                }
            )
        if trace.stabilized and not self.h0.is_zero():
            summary["hstar"] = hstar_membership_residuals(trace.final - self.h0, self.lab.projector).asdict()

        if self.config.norm.enabled:
            estimate = self._norm_estimate()
            result.tables["norm"] = pd.DataFrame(
                {"iteration": np.arange(len(estimate.history)), "estimate": estimate.history}
            )
            summary["operator_norm"] = estimate.estimate
            summary["operator_norm_converged"] = estimate.converged

        result.summary = summary
        result.plots["convergence"] = self._convergence_plot(trace)
        return result

    def _norm_estimate(self):
        norm = self.config.norm
        custom = None
        if norm.subspace == "custom":
            u0 = load_field(norm.custom_file, expected=self.lab.grid)  # type: ignore[arg-type]
            custom = CauchyData(u0, ScalarField.zeros(u0.grid))
        return operator_norm_estimate(
            self.lab.projector,
            norm.subspace,
            self.lab.rng(),
            iterations=norm.iterations,
            tol=norm.tol,
            pulses=norm.pulses,
            width=self.config.source.width,
            custom=custom,
        )

    def _convergence_plot(self, trace: IterationTrace) -> str:
        frame = trace.to_frame()
        k = frame["k"].to_numpy()
        series = {
            "tail_norm": (k, frame["tail_norm"].to_numpy()),
            "inside_norm": (k, frame["inside_norm"].to_numpy()),
            "increment": (k, frame["increment"].to_numpy()),
        }
        if trace.oracle is not None:
            series["interior_mismatch"] = (k, frame["interior_mismatch"].to_numpy(dtype=float))
        return line_plot(series, "scattering control convergence", log_y=True)

    def _summarize(self, result: ExperimentResult) -> str:
        s = result.summary
        if s["stabilized_at"] is not None:
            state = f"stabilized at k={s['stabilized_at']}"
        elif s["diverging"]:
            state = "tail_norm diverging (no stabilization)"
        else:
            state = "not stabilized"
        return f"{s['iterations']} iterations, {state}, E={s['recovered_energy']:.6g}"
