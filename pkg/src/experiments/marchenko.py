"""
Focusing tails in 1D: pressure and velocity tails of r₀, the Rose tail driven by the estimated
reflection response, their equivalence, and the matched-filter arrivals of the Rose tail.
"""

from logging import getLogger

import numpy as np
import pandas as pd

from experiments._base import Experiment, ExperimentResult, Laboratory
from models.traces import BoundaryTrace
from pipeline.marchenko import (
    cauchy_to_boundary,
    detect_arrivals,
    ensure_clear_boundary,
    even_term_identity_residual,
    marchenko_pair,
    pressure_tail_iterate,
    reflection_response,
    rose_cauchy_equivalence_check,
    velocity_tail_iterate,
)
from pipeline.scattering_control import scattering_control_iterate
from utils.svg import line_plot

logger = getLogger("sclab")


def arrival_window(width: float) -> float:
    return 3.0 * width


class MarchenkoExperiment(Experiment):
    """Builds Cauchy and Rose tails of the same focusing data r₀ = h₀."""

    name = "marchenko"

    def _setup(self) -> None:
        if self.config.grid.dim != 1:
            raise ValueError("The Marchenko experiment is one-dimensional")
        self.lab = Laboratory.from_config(self.config)
        self.r0 = self.lab.initial_data()
        m = self.config.marchenko
        ensure_clear_boundary(self.r0, self.lab.propagator, m.boundary)
        width = self.config.source.width
        self.kernel = reflection_response(
            self.lab.propagator,
            m.probe_width if m.probe_width is not None else width / 2,
            width,
            regularization=m.regularization,
            condition_threshold=m.condition_threshold,
            boundary=m.boundary,
        )

    def run(self) -> ExperimentResult:
        m = self.config.marchenko
        propagator = self.lab.propagator
        projector = self.lab.projector
        result = self._result()

        pressure = pressure_tail_iterate(self.r0, projector, m.k_max)
        pair = marchenko_pair(self.r0, projector, self.kernel, m.k_max, m.boundary, pressure)
        equivalence = rose_cauchy_equivalence_check(pair, propagator, m.boundary)
        self.status.progress = 60
        mapped = cauchy_to_boundary(pair.k_tail, propagator, m.boundary)
        incoming: BoundaryTrace = pair.meta["incoming"]
        result.tables["tails"] = pd.DataFrame(
            {"s": pair.k_rose.times, "incoming": incoming.values, "rose": pair.k_rose.values, "cauchy": mapped.values}
        )
        result.tables["kernel"] = self.kernel.to_frame()
        result.tables["pressure_terms"] = pressure.to_frame()
        result.fields["pressure_tail"] = pair.k_tail.u0
        summary = {
            "rose_cauchy_equivalence": equivalence,
            "pressure_residuals": pressure.residuals,
            "kernel_condition": self.kernel.condition,
            "rose_norm": pair.k_rose.norm(),
        }

        if m.velocity:
            velocity = velocity_tail_iterate(self.r0, projector, m.k_max)
            control = scattering_control_iterate(self.r0, projector, m.k_max // 2, oracle=False, keep_every=1)
            result.tables["velocity_terms"] = velocity.to_frame()
            result.fields["velocity_tail"] = velocity.tail.u0
            summary["velocity_residuals"] = velocity.residuals
            summary["even_term_identity"] = even_term_identity_residual(pressure, velocity, control, projector)

        arrivals = []
        if not self.r0.is_zero():
            arrivals = detect_arrivals(pair.k_rose, incoming, arrival_window(self.config.source.width))
        result.tables["arrivals"] = pd.DataFrame(
            {"s": [a.time for a in arrivals], "amplitude": [a.amplitude for a in arrivals]}
        )
        summary["arrivals"] = len(arrivals)
        result.summary = summary
        result.plots["tails"] = line_plot(
            {
                "rose": (pair.k_rose.times, pair.k_rose.values),
                "cauchy": (mapped.times, mapped.values),
                "incoming": (incoming.times, incoming.values),
            },
            "boundary traces of the tails",
        )
        result.plots["terms"] = line_plot(
            {"pressure": (np.arange(len(pressure.term_norms)), pressure.term_norms)}, "tail term norms", log_y=True
        )
        return result

    def _summarize(self, result: ExperimentResult) -> str:
        s = result.summary
        return (
            f"Rose↔Cauchy residual {s['rose_cauchy_equivalence']:.3e}, "
            f"{s['arrivals']} arrivals, harmonicity {s['pressure_residuals'].get('harmonicity', 0.0):.3e}"
        )
