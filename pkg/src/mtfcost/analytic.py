"""Closed-form limiting moments of the stationary search cost.

The k-th limiting moment is sum_l a_l^(k) Psi(l), where a_l^(k) are Stirling
numbers of the second kind and Psi(l) is the l-th moment of the Poisson
mixing parameter.  Divergence is reported through ``MomentValue.finite``,
never raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .special_fn import log_pochhammer, pochhammer, stirling2
from .subordinator import (
    GammaExponent,
    GenGammaExponent,
    PitmanYorMixture,
    StableExponent,
)

_LOG_SPACE_RATIO = 1e3


def finiteness_threshold(k: int) -> float:
    """gamma must be strictly below this for the k-th moment to be finite."""
    return 1.0 / (k + 1)


def is_finite_order(gamma: float, k: int) -> bool:
    return gamma < finiteness_threshold(k)


def _check_orders(l: int, k: int | None) -> int:
    if l < 1:
        raise ValueError(f"l must be a positive integer, got {l}")
    k = l if k is None else k
    if k < l:
        raise ValueError(f"need k >= l, got k={k}, l={l}")
    return k


def _stable_factor(gamma: float, l: int) -> float:
    # (l!)^2 / (1/gamma - l - 1)_l
    return math.factorial(l) ** 2 / pochhammer(1.0 / gamma - l - 1.0, l)


def psi_l_gengamma(gamma: float, u: float, l: int, k: int | None = None, mass: float = 1.0) -> float:
    """Psi(l) for psi(s) = mass((u+s)^gamma - u^gamma)/gamma; ``inf`` off the finite region.

    The finiteness test uses the moment order ``k`` (defaults to ``l``).
    """
    k = _check_orders(l, k)
    if not is_finite_order(gamma, k):
        return math.inf
    beta = mass * u**gamma / gamma
    tail = sum(beta**m / math.factorial(m) for m in range(l + 1))
    return _stable_factor(gamma, l) * tail


def psi_l_stable(gamma: float, l: int, k: int | None = None) -> float:
    return psi_l_gengamma(gamma, 0.0, l, k)


def psi_l_pitman_yor(gamma: float, theta: float, l: int, k: int | None = None) -> float:
    """Psi(l) = l! (theta/gamma + 1)_l / (1/gamma - l - 1)_l for gamma < 1/(k+1)."""
    k = _check_orders(l, k)
    if not is_finite_order(gamma, k):
        return math.inf
    a = theta / gamma + 1.0
    b = 1.0 / gamma - l - 1.0
    if theta / gamma > _LOG_SPACE_RATIO:
        return math.exp(math.lgamma(l + 1) + log_pochhammer(a, l) - log_pochhammer(b, l))
    return math.factorial(l) * pochhammer(a, l) / pochhammer(b, l)


def psi_l_gamma(theta: float, l: int) -> float:
    """Psi(l) = l! theta^l for the gamma subordinator with mass theta."""
    _check_orders(l, None)
    return math.factorial(l) * theta**l


def moment_dirichlet(theta: float, k: int) -> float:
    """Limiting k-th moment for Dirichlet(theta) weights: sum_l a_l^(k) l! theta^l."""
    if theta < 0:
        raise ValueError("theta must be non-negative")
    return float(sum(stirling2(k, l) * psi_l_gamma(theta, l) for l in range(1, k + 1)))


def psi_l_closed(model, l: int, k: int | None = None) -> float:
    """Dispatch Psi(l) on the model type."""
    if isinstance(model, GenGammaExponent):
        return psi_l_gengamma(model.gamma, model.u, l, k, mass=model.mass)
    if isinstance(model, StableExponent):
        return psi_l_stable(model.gamma, l, k)
    if isinstance(model, GammaExponent):
        _check_orders(l, k)
        return psi_l_gamma(model.mass, l)
    if isinstance(model, PitmanYorMixture):
        return psi_l_pitman_yor(model.gamma, model.theta, l, k)
    raise TypeError(f"no closed form for {type(model).__name__}")


@dataclass(frozen=True)
class MomentRequest:
    model: GenGammaExponent | StableExponent | GammaExponent | PitmanYorMixture
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"moment order must be a positive integer, got {self.k}")


@dataclass(frozen=True)
class MomentValue:
    finite: bool
    value: float | None
    psi_terms: list[float] = field(default_factory=list)
    threshold: float | None = None

    def to_dict(self) -> dict:
        return {
            "finite": self.finite,
            "value": self.value,
            "psi_terms": [t if math.isfinite(t) else None for t in self.psi_terms],
        }


def limit_moment(request: MomentRequest) -> MomentValue:
    k = request.k
    terms = [psi_l_closed(request.model, l, k) for l in range(1, k + 1)]
    threshold = None if isinstance(request.model, GammaExponent) else finiteness_threshold(k)
    if not all(math.isfinite(t) for t in terms):
        return MomentValue(False, None, terms, threshold)
    value = math.fsum(stirling2(k, l) * t for l, t in enumerate(terms, start=1))
    return MomentValue(True, value, terms, threshold)
