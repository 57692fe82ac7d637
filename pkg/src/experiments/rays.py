"""
Layered ray experiment: broken-ray fans, cotangent-depth diagrams, the scattering-series
cross-check, escapability of the sources, the constructive tail and the symbol Neumann iteration.
"""

from dataclasses import replace
from fractions import Fraction
from logging import getLogger
from typing import Any

import pandas as pd

from experiments._base import Experiment, ExperimentResult
from models.config import RaysConfig
from models.rays import Covector, LayeredModel, Number, Scalar, SymbolVector, exact_key
from pipeline.escapability import EscapabilityClassifier, constructive_tail, mdt_residual
from pipeline.ray_tracing import depth_profile, make_covector, symbol_from_covectors, trace_rays
from pipeline.symbol_calculus import flux_residual, layered_scattering_series, ray_path_sums, symbol_neumann_iterate
from utils.svg import line_plot

logger = getLogger("sclab")

MAX_PROFILES = 12


def _number(value: float, exact: bool) -> Number:
    return Fraction(str(value)) if exact else float(value)


def build_layered_model(rays: RaysConfig) -> LayeredModel:
    exact = rays.exact
    return LayeredModel(
        interfaces=tuple(_number(z, exact) for z in rays.interfaces),
        speeds=tuple(_number(c, exact) for c in rays.speeds),
        boundary=_number(rays.boundary, exact),
        boundary_prime=None if rays.boundary_prime is None else _number(rays.boundary_prime, exact),
        boundary_dprime=None if rays.boundary_dprime is None else _number(rays.boundary_dprime, exact),
        glancing_deg=rays.glancing_deg,
        convention=rays.convention,
    )


def source_covectors(rays: RaysConfig, model: LayeredModel) -> list[tuple[Covector, Scalar]]:
    p = _number(rays.slowness, rays.exact)
    out = []
    for s in rays.sources:
        cov = make_covector(model, _number(s.z, rays.exact), s.mode, p)
        out.append((replace(cov, x=s.x), _number(s.amplitude, rays.exact)))
    return out


def real_part(a: Scalar) -> float:
    return float(a.real) if isinstance(a, complex) else float(a)


def imag_part(a: Scalar) -> float:
    return float(a.imag) if isinstance(a, complex) else 0.0


def symbol_frame(vector: SymbolVector) -> pd.DataFrame:
    rows = [
        {
            "z": float(e.covector.z),
            "mode": e.covector.mode.value,
            "layer": e.covector.layer,
            "amplitude": real_part(e.amplitude),
            "amplitude_imag": imag_part(e.amplitude),
            "exact": str(e.amplitude) if isinstance(e.amplitude, Fraction) else "",
        }
        for _, e in sorted(vector.entries.items(), key=lambda item: (float(item[0][0]), item[0][1]))
    ]
    return pd.DataFrame(rows, columns=["z", "mode", "layer", "amplitude", "amplitude_imag", "exact"])


class RaysExperiment(Experiment):
    """Microlocal analysis of the `rays` section."""

    name = "rays"

    def _setup(self) -> None:
        if self.config.rays is None:
            raise ValueError("The rays experiment needs a 'rays' section in the config")
        self.rays = self.config.rays
        self.model = build_layered_model(self.rays)
        self.sources = source_covectors(self.rays, self.model)
        self.T: Number = _number(self.config.T, self.rays.exact)
        self.p = _number(self.rays.slowness, self.rays.exact)

    def run(self) -> ExperimentResult:
        result = self._result()
        budget = self.rays.max_events
        duration = 2 * self.T
        ray_rows: list[dict[str, Any]] = []
        profiles = {}
        series_gap = 0.0
        truncated = glancing = 0.0
        for n, (eta, amp) in enumerate(self.sources):
            fan = trace_rays(self.model, eta, duration, budget)
            truncated += fan.truncated_mass
            glancing += fan.glancing_mass
            for j, ray in enumerate(fan.rays):
                end = ray.segments[-1].end
                ray_rows.append(
                    {
                        "source": n,
                        "ray": j,
                        "path": ray.path or "-",
                        "events": len(ray.events),
                        "amplitude": real_part(amp * ray.amplitude),
                        "amplitude_imag": imag_part(amp * ray.amplitude),
                        "end_z": float(end.z),
                        "end_t": float(end.t),
                        "alive": ray.alive,
                        "termination": ray.termination,
                    }
                )
                if len(profiles) < MAX_PROFILES:
                    profile = depth_profile(self.model, ray, self.model.boundary, 120, budget)
                    if profile:
                        t, d = zip(*profile)
                        profiles[f"s{n} {ray.path or 'direct'}"] = (t, d)
            series, _ = layered_scattering_series(self.model, eta, duration, budget)
            sums = ray_path_sums(fan)
            for key in set(series) | set(sums):
                series_gap = max(series_gap, abs(complex(series.get(key, 0)) - complex(sums.get(key, 0))))
        result.tables["rays"] = pd.DataFrame(ray_rows)
        if profiles:
            result.plots["depth_diagram"] = line_plot(profiles, "cotangent depth along broken rays")

        classifier = EscapabilityClassifier(self.model, self.T, budget)
        classes = []
        for n, (eta, _) in enumerate(self.sources):
            c = classifier.classify(eta)
            classes.append(
                {
                    "source": n,
                    "z": float(eta.z),
                    "mode": eta.mode.value,
                    "returning": c.returning,
                    "plus": c.plus.kind if c.plus else "",
                    "minus": c.minus.kind if c.minus else "",
                    "unclassified": c.unclassified,
                }
            )
        result.tables["escapability"] = pd.DataFrame(classes)

        summary: dict[str, Any] = {
            "rays": len(ray_rows),
            "truncated_mass": truncated,
            "glancing_mass": glancing,
            "series_agreement": series_gap,
            "flux_residual": flux_residual(self.model, self.p),
        }
        if self.sources:
            summary.update(self._tail(result))
        result.summary = summary
        return result

    def _tail(self, result: ExperimentResult) -> dict[str, Any]:
        budget = self.rays.max_events
        h0 = symbol_from_covectors(self.p, list(self.sources))
        try:
            report = constructive_tail(h0, self.model, self.T, budget)
        except ValueError as e:
            logger.warning(f"No constructive tail: {e}")
            return {"tail_error": str(e)}
        tail = report.tail
        result.tables["tail"] = symbol_frame(tail)
        residual = mdt_residual(h0, tail, self.model, self.T, budget)
        iteration = symbol_neumann_iterate(h0, self.model, self.T, self.rays.neumann_k_max, budget, tail)
        result.tables["symbol_iteration"] = pd.DataFrame(
            {
                "k": range(len(iteration.norms)),
                "norm": iteration.norms,
                "inside_norm": iteration.inside_norms,
                "residual": iteration.residuals,
            }
        )
        return {
            "tail_support": tail.support_size,
            "tail_returning_segments": report.returning,
            "mdt_residual": residual,
            "neumann_residual": iteration.residuals[-1] if iteration.residuals else None,
            "tail_exact": [str(e.amplitude) for e in tail.entries.values()] if self.rays.exact else [],
            "tail_depths": [str(exact_key(e.covector.z)) for e in tail.entries.values()],
        }

    def _summarize(self, result: ExperimentResult) -> str:
        s = result.summary
        tail = s.get("tail_error") or f"tail support {s.get('tail_support')}, residual {s.get('mdt_residual')}"
        return f"{s['rays']} rays, series agreement {s['series_agreement']:.3e}, {tail}"
