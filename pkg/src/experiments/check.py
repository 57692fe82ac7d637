"""
Acceptance suite: property checks applicable to a configuration, reported as a pass/fail table.
"""

from dataclasses import dataclass
from logging import getLogger
from typing import Callable

import numpy as np
import pandas as pd

from experiments._base import Experiment, ExperimentResult, Laboratory
from experiments.rays import build_layered_model, source_covectors
from experiments.simulate import relative_drift
from models.fields import CauchyData
from models.rays import LayeredModel
from models.traces import IterationTrace
from pipeline.escapability import constructive_tail, mdt_residual
from pipeline.marchenko import (
    ensure_clear_boundary,
    marchenko_pair,
    operator_norm_estimate,
    pressure_tail_iterate,
    reflection_response,
    rose_cauchy_equivalence_check,
    velocity_tail_iterate,
)
from pipeline.pulses import random_field_data
from pipeline.ray_tracing import direct_crossings, direct_transmission, symbol_from_covectors, trace_rays
from pipeline.scattering_control import (
    MONOTONE_SLACK,
    diamond_data,
    hstar_membership_residuals,
    interior_field_recovery,
    minimal_norm_neumann_check,
    scattering_control_iterate,
)
from pipeline.symbol_calculus import (
    flux_residual,
    layered_scattering_series,
    random_symbol_norm_check,
    ray_path_sums,
    symbol_neumann_iterate,
)
from pipeline.wave_solver import diamond_vanishing_check, translation_convergence

logger = getLogger("sclab")

ENERGY_DRIFT = 1e-6
PROJECTION_TOLERANCE = 1e-9
MISMATCH_TOLERANCE = 1e-2
HSTAR_TOLERANCE = 1e-4
RECOVERY_TOLERANCE = 0.05
ROSE_TOLERANCE = 1e-3
FOCUS_TOLERANCE = 1e-3
SYMBOL_TOLERANCE = 1e-12
LEMMA_TOLERANCE = 1e-8
DIAMOND_TOLERANCE = 1e-3
ADT_TOLERANCE = 1e-2
NEUMANN_TOLERANCE = 1e-8
ORDER_TOLERANCE = 1.0


@dataclass
class CheckOutcome:
    check: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


def random_contraction(rng: np.random.Generator, dim: int, radius: float = 0.9) -> np.ndarray:
    """Symmetric matrix with spectrum uniform in [−radius, radius]."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return (q * rng.uniform(-radius, radius, dim)) @ q.T


class CheckExperiment(Experiment):
    """Runs every acceptance check the configuration supports."""

    name = "check"

    def _setup(self) -> None:
        self.lab = Laboratory.from_config(self.config)
        self.h0 = self.lab.initial_data()
        self.outcomes: list[CheckOutcome] = []
        self.trace: IterationTrace | None = None

    def _record(self, check: str, value: float, threshold: float, detail: str = "") -> None:
        passed = bool(np.isfinite(value) and value <= threshold)
        self.outcomes.append(CheckOutcome(check, float(value), threshold, passed, detail))
        logger.info(f"Check {check}: {value:.3e} (≤ {threshold:.1e}) {'PASS' if passed else 'FAIL'}")

    def _guarded(self, check: str, body: Callable[[], None]) -> None:
        try:
            body()
        except (ValueError, RuntimeError) as e:
            logger.error(f"Check {check} raised: {e}")
            self.outcomes.append(CheckOutcome(check, float("nan"), float("nan"), False, str(e)))

    def _sample_data(self) -> CauchyData:
        if not self.h0.is_zero():
            return self.h0
        return random_field_data(self.lab.grid, self.lab.rng(), self.lab.nest.theta)

    def propagator_soundness(self) -> None:
        propagator = self.lab.propagator
        h = self._sample_data()
        energies = np.array(
            [propagator.energy(propagator.from_vectors(u, v)) for _, u, v in propagator.stream(h, 2 * self.config.T)]
        )
        self._record("energy_drift", relative_drift(energies), ENERGY_DRIFT)
        back = propagator.reflect(propagator.reflect(h))
        scale = propagator.norm(h) or 1.0
        self._record("reflection_involution", propagator.norm(back - h) / scale, ENERGY_DRIFT)
        errors = translation_convergence()
        ratio = errors[0] / errors[1]
        self._record("dalembert_order", abs(ratio - 4.0), ORDER_TOLERANCE, f"ratio {ratio:.3f}")

    def projection_correctness(self) -> None:
        propagator = self.lab.propagator
        projector = self.lab.projector
        rng = self.lab.rng()
        idempotence = adjoint = pythagoras = 0.0
        for _ in range(self.config.check.random_fields):
            f = random_field_data(self.lab.grid, rng)
            g = random_field_data(self.lab.grid, rng)
            scale = propagator.inner(f, f) or 1.0
            pf = projector.project_inside(f)
            idempotence = max(idempotence, propagator.norm(projector.project_inside(pf) - pf) ** 2 / scale)
            pg = projector.project_inside(g)
            adjoint = max(
                adjoint,
                abs(propagator.inner(pf, g) - propagator.inner(f, pg)) / np.sqrt(scale * (propagator.inner(g, g) or 1.0)),
            )
            outside = projector.project_outside(f)
            pythagoras = max(
                pythagoras,
                abs(propagator.inner(f, f) - propagator.inner(pf, pf) - propagator.inner(outside, outside)) / scale,
            )
        self._record("projection_idempotence", idempotence, PROJECTION_TOLERANCE)
        self._record("projection_self_adjoint", adjoint, PROJECTION_TOLERANCE)
        self._record("projection_pythagoras", pythagoras, PROJECTION_TOLERANCE)

    def control_behaviour(self) -> None:
        it = self.config.iteration
        trace = scattering_control_iterate(
            self.h0,
            self.lab.projector,
            it.k_max,
            oracle=True,
            keep_every=it.keep_every,
            stabilization_tol=it.stabilization_tol,
            stabilization_window=it.stabilization_window,
        )
        self.trace = trace
        h0_norm = self.lab.propagator.norm(self.h0)
        inside = [r.inside_norm for r in trace.records]
        worst_rise = max((b - a for a, b in zip(inside, inside[1:])), default=0.0)
        self._record("inside_norm_monotone", max(worst_rise, 0.0) / h0_norm, MONOTONE_SLACK)
        final = trace.records[-1]
        if final.interior_mismatch is not None:
            self._record("interior_mismatch", final.interior_mismatch, MISMATCH_TOLERANCE)
        if trace.oracle is not None and trace.oracle.energy > 0:
            self._record(
                "energy_recovery",
                abs(final.recovered_energy - trace.oracle.energy) / trace.oracle.energy,
                RECOVERY_TOLERANCE,
            )
            if trace.oracle.kinetic_energy > 0:
                self._record(
                    "kinetic_energy_recovery",
                    abs(final.recovered_kinetic_energy - trace.oracle.kinetic_energy) / trace.oracle.kinetic_energy,
                    RECOVERY_TOLERANCE,
                )
            self._recovery_checks(trace)
        if trace.stabilized:
            report = hstar_membership_residuals(trace.final - self.h0, self.lab.projector)
            self._record("tail_admissibility", report.worst / h0_norm, HSTAR_TOLERANCE)

    def _recovery_checks(self, trace: IterationTrace) -> None:
        assert trace.oracle is not None
        projector = self.lab.projector
        propagator = self.lab.propagator
        T = self.config.T
        scale = propagator.norm(trace.oracle.h_dt)
        mismatches = [
            propagator.norm(interior_field_recovery(trace, s, projector) - trace.oracle.h_dt) / scale
            for s in (0.0, T / 2, T)
        ]
        self._record("recovery_s_independence", max(mismatches), MISMATCH_TOLERANCE, "s ∈ {0, T/2, T}")

        layered = self.config.medium.layered
        source = self.config.source
        forward_pulse = source.kind == "pulse" and source.direction == "forward"
        if self.config.grid.dim == 1 and layered is not None and forward_pulse:
            model = LayeredModel(tuple(layered.interfaces), tuple(layered.speeds))
            crossings = direct_crossings(model, source.center[0], T)
            d0 = float(self.lab.depth.values[self.lab.grid.nearest_index(source.center)])
            # Every primary must have left Θ_T, so that h_DT is the direct arrival alone.
            if all(d0 + 2 * t - T <= T - 3 * source.width for t, _ in crossings):
                expected = float(direct_transmission(model, source.center[0], T))
                ratio = trace.oracle.energy / propagator.energy(self.h0)
                self._record(
                    "direct_transmission_ratio", abs(ratio - expected) / expected, ADT_TOLERANCE, f"{ratio:.6f}"
                )

    def diamond(self) -> None:
        if self.trace is None:
            return
        data = diamond_data(self.trace, self.lab.projector)
        report = diamond_vanishing_check(data, self.lab.propagator, self.lab.depth.d)
        self._record("diamond_vanishing", report.relative, DIAMOND_TOLERANCE)

    def operator_norm(self) -> None:
        norm = self.config.norm
        estimate = operator_norm_estimate(
            self.lab.projector,
            norm.subspace if norm.subspace != "custom" else "full",
            self.lab.rng(),
            iterations=norm.iterations,
            tol=norm.tol,
            pulses=norm.pulses,
            width=self.config.source.width,
        )
        self._record("operator_norm", estimate.estimate, 1.0 + 1e-6, norm.subspace)

    def marchenko(self) -> None:
        m = self.config.marchenko
        width = self.config.source.width
        kernel = reflection_response(
            self.lab.propagator,
            m.probe_width if m.probe_width is not None else width / 2,
            width,
            m.regularization,
            m.condition_threshold,
            m.boundary,
        )
        pressure = pressure_tail_iterate(self.h0, self.lab.projector, m.k_max)
        self._record("pressure_harmonicity", pressure.residuals["harmonicity"], FOCUS_TOLERANCE)
        self._record("pressure_match", pressure.residuals["match"], FOCUS_TOLERANCE)
        velocity = velocity_tail_iterate(self.h0, self.lab.projector, m.k_max)
        self._record("velocity_focus", velocity.residuals["velocity"], FOCUS_TOLERANCE)
        self._record("velocity_match", velocity.residuals["match"], FOCUS_TOLERANCE)
        ensure_clear_boundary(self.h0, self.lab.propagator, m.boundary)
        pair = marchenko_pair(self.h0, self.lab.projector, kernel, m.k_max, m.boundary, pressure)
        equivalence = rose_cauchy_equivalence_check(pair, self.lab.propagator, m.boundary)
        self._record("rose_cauchy_equivalence", equivalence, ROSE_TOLERANCE)

    def microlocal(self) -> None:
        rays = self.config.rays
        assert rays is not None
        model = build_layered_model(rays)
        sources = source_covectors(rays, model)
        p = sources[0][0].p if sources else 0
        self._record("flux_conservation", flux_residual(model, p), SYMBOL_TOLERANCE)
        T = self.config.T
        gap = 0.0
        for eta, _ in sources:
            series, _ = layered_scattering_series(model, eta, 2 * T, rays.max_events)
            sums = ray_path_sums(trace_rays(model, eta, 2 * T, rays.max_events))
            for key in set(series) | set(sums):
                gap = max(gap, abs(complex(series.get(key, 0)) - complex(sums.get(key, 0))))
        self._record("ray_series_agreement", gap, SYMBOL_TOLERANCE)
        ratio = random_symbol_norm_check(model, self.lab.rng(), trials=self.config.check.random_symbols, T=T, p=p)
        self._record("symbol_norm_bound", max(ratio - 1.0, 0.0), SYMBOL_TOLERANCE)
        if sources and rays.exact:
            h0 = symbol_from_covectors(p, list(sources))
            report = constructive_tail(h0, model, T, rays.max_events)
            residual = mdt_residual(h0, report.tail, model, T, rays.max_events)
            self._record("constructive_tail_residual", residual, 0.0, f"support {report.tail.support_size}")
            iteration = symbol_neumann_iterate(h0, model, T, rays.neumann_k_max, rays.max_events, report.tail)
            self._record(
                "symbol_neumann_residual", iteration.residuals[-1], NEUMANN_TOLERANCE, f"k = {rays.neumann_k_max}"
            )

    def minimal_norm_lemma(self) -> None:
        rng = self.lab.rng()
        worst = 0.0
        for _ in range(self.config.check.random_matrices):
            dim = int(rng.integers(2, 13))
            comparison = minimal_norm_neumann_check(random_contraction(rng, dim), rng.standard_normal(dim))
            worst = max(worst, comparison.difference)
        self._record("minimal_norm_lemma", worst, LEMMA_TOLERANCE)

    def run(self) -> ExperimentResult:
        result = self._result()
        one_d = self.config.grid.dim == 1
        self._guarded("propagator", self.propagator_soundness)
        self._guarded("projections", self.projection_correctness)
        self.status.progress = 30
        if not self.h0.is_zero():
            self._guarded("control", self.control_behaviour)
            self._guarded("diamond", self.diamond)
            if one_d and self.config.medium.field_file is None:
                self._guarded("marchenko", self.marchenko)
        self.status.progress = 60
        if self.config.norm.enabled:
            self._guarded("operator_norm", self.operator_norm)
        if self.config.rays is not None:
            self._guarded("microlocal", self.microlocal)
        self._guarded("minimal_norm_lemma", self.minimal_norm_lemma)

        frame = pd.DataFrame([vars(o) for o in self.outcomes])
        result.tables["checks"] = frame
        result.passed = all(o.passed for o in self.outcomes)
        result.summary = {
            "checks": len(self.outcomes),
            "failed": [o.check for o in self.outcomes if not o.passed],
            "passed": result.passed,
        }
        return result

    def _summarize(self, result: ExperimentResult) -> str:
        failed = result.summary["failed"]
        return f"{result.summary['checks']} checks, " + (f"failed: {', '.join(failed)}" if failed else "all passed")


def format_table(frame: pd.DataFrame) -> str:
    """Fixed-width pass/fail table for the console."""
    lines = [f"{'check':<30} {'value':>12} {'threshold':>12}  result"]
    for row in frame.itertuples(index=False):
        lines.append(
            f"{row.check:<30} {row.value:>12.3e} {row.threshold:>12.1e}  {'PASS' if row.passed else 'FAIL'}"
        )
    return "\n".join(lines)
