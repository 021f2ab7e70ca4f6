"""Moment reports that put the analytic, quadrature, and Monte-Carlo routes side by side."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import quad
from .analytic import MomentRequest, MomentValue, limit_moment
from .special_fn import stirling2
from .sim import SimConfig, simulate_limit


@dataclass
class MomentReport:
    model: dict
    k: int
    analytic: MomentValue
    quadrature: dict | None = None
    monte_carlo: dict | None = None
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"model": self.model, "k": self.k, "analytic": {**self.analytic.to_dict(),
                                                               "threshold": self.analytic.threshold}}
        if self.quadrature is not None:
            out["quadrature"] = self.quadrature
        if self.monte_carlo is not None:
            out["monte_carlo"] = self.monte_carlo
        if self.errors:
            out["errors"] = self.errors
        return out


def _rel(a: float | None, b: float | None) -> float | None:
    if a is None or b is None or not math.isfinite(b) or b == 0:
        return None
    return abs(a - b) / abs(b)


def quadrature_block(model, value: MomentValue, k: int, spec: quad.QuadSpec) -> dict:
    """Psi(1..k) by quadrature; terms beyond the integral's finiteness region stay null.

    Raises QuadratureError with ``partial`` attached when an integral fails.
    """
    gamma = getattr(model, "gamma", None)
    terms: list[float | None] = []
    try:
        for l in range(1, k + 1):
            if gamma is not None and gamma >= 1.0 / (l + 1):
                terms.append(None)
            else:
                terms.append(quad.psi_l_numeric(model, l, spec))
    except quad.QuadratureError as exc:
        exc.partial = {"psi_terms": terms}
        raise
    assembled = None
    if all(t is not None for t in terms):
        assembled = math.fsum(stirling2(k, l) * t for l, t in enumerate(terms, start=1))
    return {
        "psi_terms": terms,
        "value": assembled,
        "rel_errors": [_rel(t, c) for t, c in zip(terms, value.psi_terms)],
        "value_rel_error": _rel(assembled, value.value),
    }


def monte_carlo_block(model, k: int, config: SimConfig) -> dict:
    sample = simulate_limit(model, config)
    summary = sample.summary(k)
    m, se = summary["moments"][-1], summary["std_errors"][-1]
    return {
        "replications": summary["replications"],
        "seed": config.seed,
        "workers": config.workers,
        "moments": summary["moments"],
        "std_errors": summary["std_errors"],
        "ci95": [m - 1.96 * se, m + 1.96 * se],
    }


def build_moment_report(model, k: int, *, verify: bool = False, sim_config: SimConfig | None = None,
                        spec: quad.QuadSpec = quad.DEFAULT_SPEC) -> MomentReport:
    value = limit_moment(MomentRequest(model, k))
    report = MomentReport(model.to_dict(), k, value)
    if verify:
        report.quadrature = quadrature_block(model, value, k, spec)
    if sim_config is not None:
        report.monte_carlo = monte_carlo_block(model, k, sim_config)
    return report
