"""Numerical quadrature for the search-cost integrals.

All double integrals over (x, y) in (0, inf)^2 are evaluated after the change
of variables e = psi(x), v = psi(x + y) - psi(x).  The outer weight then
becomes exp(-e)/psi'(x), truncated at ``QuadSpec.e_max``, and the inner
measure -psi''(x+y) dy turns into curvature(b) dv with b = psi^{-1}(e + v).
Each axis is integrated with adaptive Gauss-Kronrod (QUADPACK).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from .analytic import is_finite_order
from .special_fn import stirling2
from .subordinator import DomainError, LaplaceExponent, PitmanYorMixture

log = logging.getLogger(__name__)

MAX_FINITE_N = 200


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to converge; ``estimate`` holds the partial value."""

    def __init__(self, message: str, estimate: float = math.nan, abserr: float = math.nan):
        super().__init__(message)
        self.estimate = estimate
        self.abserr = abserr


@dataclass(frozen=True)
class QuadSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    # outer integral over e = psi(x) is cut here; the dropped tail weighs < e^{-e_max}
    e_max: float = 40.0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 10:
            raise ValueError("max_subdivisions must be at least 10")


DEFAULT_SPEC = QuadSpec()

# QUADPACK diagnostics that mean the answer cannot be trusted; scipy only
# reports them through the message text
_FATAL = ("The maximum number of subdivisions", "Extremely bad integrand",
          "The integral is probably divergent")


def _quad(f: Callable[[float], float], a: float, b: float, spec: QuadSpec,
          rel: float | None = None) -> float:
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, _info, *msg = integrate.quad(
            f, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol if rel is None else rel,
            limit=spec.max_subdivisions, full_output=1,
        )
    if msg:
        text = str(msg[0])
        if text.startswith(_FATAL):
            raise QuadratureError(f"quadrature on [{a}, {b}]: {text.splitlines()[0]}", val, err)
        log.debug("quadrature on [%s, %s]: %s (err %.3g)", a, b, text.splitlines()[0], err)
    return val


def _inner(f: Callable[[float], float], scale: float, spec: QuadSpec, rel: float) -> float:
    # the inner integrand varies on the scale e near v=0; split there and at 1
    cuts = sorted({c for c in (scale, 1.0) if c > 0})
    total, lo = 0.0, 0.0
    for c in cuts:
        total += _quad(f, lo, c, spec, rel)
        lo = c
    return total + _quad(f, lo, math.inf, spec, rel)


def _nested(exponent: LaplaceExponent,
            inner: Callable[[float, float, float], float],
            spec: QuadSpec) -> float:
    """int_0^{e_max} exp(-e)/psi'(x) int_0^inf inner(e, v, b) dv de."""
    rel_inner = spec.rel_tol * 1e-2

    def outer(e: float) -> float:
        x = exponent.psi_inverse(e)
        if x == 0.0 and not math.isfinite(exponent.psi_prime_at_zero):
            return 0.0
        inv_slope = 1.0 / exponent.psi_prime(x)

        def f(v: float) -> float:
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                b = exponent.psi_inverse(e + v)
                return inner(e, v, b)

        return math.exp(-e) * inv_slope * _inner(f, e, spec, rel_inner)

    return _quad(outer, 0.0, spec.e_max, spec)


def _guard_gamma(exponent, l: int):
    gamma = getattr(exponent, "gamma", None)
    if gamma is not None and not is_finite_order(gamma, l):
        raise DomainError(
            f"Psi({l}) diverges for gamma={gamma} >= 1/{l + 1}; use integrability_diagnostic to probe"
        )


def mixture_nodes(model: PitmanYorMixture, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Generalized Gauss-Laguerre nodes/weights for E[F(Z)], Z ~ Gamma(theta/gamma, 1)."""
    alpha = model.mixing_shape - 1.0
    z, w = special.roots_genlaguerre(m, alpha)
    w = w / math.exp(special.gammaln(model.mixing_shape))
    return z, w


def _mix(model: PitmanYorMixture, fn: Callable[[LaplaceExponent], float], m: int) -> float:
    z, w = mixture_nodes(model, m)
    return float(sum(wi * fn(model.conditional(zi)) for zi, wi in zip(z, w)))


# --- limiting law -------------------------------------------------------------


def laplace_limit(exponent, s: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """phi_S(s) = iint f(x,y) exp(-(1-e^{-s})[psi(x+y)-psi(x)]) dx dy."""
    if s < 0:
        raise DomainError("s must be non-negative")
    if isinstance(exponent, PitmanYorMixture):
        return _mix(exponent, lambda ex: laplace_limit(ex, s, spec), 32)
    c = -math.expm1(-s)
    return _nested(exponent, lambda e, v, b: math.exp(-c * v) * exponent.curvature(b), spec)


def laplace_limit_printed(exponent: LaplaceExponent, s: float,
                          spec: QuadSpec = DEFAULT_SPEC) -> float:
    """The limiting transform in the untransformed (x, y) coordinates:
    -iint psi''(x+y) exp(-psi(x+y)) exp(-e^{-s}[psi(x) - psi(x+y)]) dx dy.

    Meant as a cross-check of :func:`laplace_limit` for exponents with a
    finite psi'(0); the stable family's corner singularity defeats it.
    """
    q = math.exp(-s)

    def outer(x: float) -> float:
        px = exponent.psi(x)
        sigma = 1.0 / exponent.curvature(x)

        def f(t: float) -> float:
            b = x + sigma * t
            pb = exponent.psi(b)
            return -exponent.psi_second(b) * math.exp(-pb - q * (px - pb))

        return sigma * _inner(f, 1.0, spec, spec.rel_tol * 1e-2)

    # psi^{-1}(e_max) can be astronomically large; cover [0, x_max] in decades
    x_max = min(exponent.psi_inverse(spec.e_max), 1e300)
    edges = [0.0] + [10.0**p for p in range(-6, int(math.log10(x_max)) + 1)] + [x_max]
    return math.fsum(_quad(outer, a, b, spec) for a, b in zip(edges, edges[1:]) if b > a)


def psi_l_numeric(exponent, l: int, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Psi(l) = -iint [psi(x+y)-psi(x)]^l psi''(x+y) e^{-psi(x)} dx dy."""
    if l < 1:
        raise ValueError("l must be a positive integer")
    _guard_gamma(exponent, l)
    if isinstance(exponent, PitmanYorMixture):
        # conditional Psi(l) is a degree-l polynomial in Z: l+1 nodes integrate it exactly
        return _mix(exponent, lambda ex: psi_l_numeric(ex, l, spec), l + 1)
    return _nested(exponent, lambda e, v, b: v**l * exponent.curvature(b), spec)


def mixing_density_mass(exponent: LaplaceExponent, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Total mass of f(x,y) = -psi''(x+y) e^{-psi(x)}; equals 1 for infinite activity.

    The inner integral runs over y directly rather than over v, so this is not
    just ``laplace_limit`` at 0.
    """
    rel_inner = spec.rel_tol * 1e-2

    def outer(e: float) -> float:
        x = exponent.psi_inverse(e)
        if x == 0.0 and not math.isfinite(exponent.psi_prime_at_zero):
            return 0.0
        # y = sigma*t with sigma = psi'/(-psi'') at x, the local decay length;
        # dividing by psi'(x) keeps the inner integrand O(1) so abs_tol stays meaningful
        sigma = 1.0 / exponent.curvature(x)
        scale = sigma / exponent.psi_prime(x)
        inner = _inner(lambda t: -exponent.psi_second(x + sigma * t) * scale, 1.0, spec, rel_inner)
        return math.exp(-e) * inner

    return _quad(outer, 0.0, spec.e_max, spec)


# --- finite n -------------------------------------------------------------------


def _check_n(n: int, cap: int | None = None):
    if int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n}")
    if cap is not None and n > cap:
        raise DomainError(f"n={n} exceeds the cost guard {cap}")


def laplace_finite_n(exponent, n: int, s: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """phi_{S_n}(s) for n items with equal time steps 1/n.

    n iint phi_n''(x+t) h^{n-1} dx dt with phi_n = exp(-psi/n) and
    h = phi_n(x+t) + e^{-s}(phi_n(x) - phi_n(x+t)).
    """
    _check_n(n, MAX_FINITE_N)
    if s < 0:
        raise DomainError("s must be non-negative")
    if isinstance(exponent, PitmanYorMixture):
        return _mix(exponent, lambda ex: laplace_finite_n(ex, n, s, spec), 32)
    q = math.exp(-s)

    def inner(e, v, b):
        # n phi_n'' = [psi'^2/n - psi''] phi_n; weights folded with dv = psi'(b) dt
        slope = exponent.psi_prime(b) if b > 0 else exponent.psi_prime_at_zero
        log_h = (n - 1) * math.log1p(q * math.expm1(v / n)) if v / n < 700 else (n - 1) * (
            math.log(q) + v / n)
        return (slope / n + exponent.curvature(b)) * math.exp(-v + log_h)

    return _nested(exponent, inner, spec)


def finite_n_moment_kernel(exponent, n: int, l: int, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """M_{l,n}(0), the l-th factorial-moment kernel of S_n."""
    _check_n(n)
    if not 1 <= l < n:
        raise DomainError(f"need 1 <= l < n, got l={l}, n={n}")
    if isinstance(exponent, PitmanYorMixture):
        return _mix(exponent, lambda ex: finite_n_moment_kernel(ex, n, l, spec), 32)
    coef = l * math.prod(range(n - l, n)) / n

    def inner(e, v, b):
        slope = exponent.psi_prime(b) if b > 0 else exponent.psi_prime_at_zero
        return slope * math.exp(-2.0 * v / n) * (-math.expm1(-v / n)) ** (l - 1)

    return coef * _nested(exponent, inner, spec)


def finite_n_moment(exponent, n: int, k: int, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """E[S_n^k] = sum_l a_l^(k) M_{l,n}(0)."""
    if k >= n:
        raise DomainError(f"need k < n, got k={k}, n={n}")
    return math.fsum(stirling2(k, l) * finite_n_moment_kernel(exponent, n, l, spec)
                     for l in range(1, k + 1))


def integrability_diagnostic(exponent, n: int, l: int, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """I_n(l); boundedness in n is the hypothesis behind moment convergence."""
    _check_n(n)
    if not 1 <= l < n:
        raise DomainError(f"need 1 <= l < n, got l={l}, n={n}")
    if isinstance(exponent, PitmanYorMixture):
        return _mix(exponent, lambda ex: integrability_diagnostic(ex, n, l, spec), 32)

    def inner(e, v, b):
        slope = exponent.psi_prime(b) if b > 0 else exponent.psi_prime_at_zero
        return slope * math.exp(-2.0 * v / n) * v ** (l - 1)

    return _nested(exponent, inner, spec)


def two_item_laplace(exponent: LaplaceExponent, s: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """E[exp(-s S_2)] for two items, from P(S_2 = 1) = 2 E[p_1 p_2].

    Uses 1/(w1+w2)^2 = int t e^{-t(w1+w2)} dt, which collapses the
    expectation to (1/2) int t psi'(t)^2 e^{-psi(t)} dt, then substitutes e = psi(t).
    """
    def f(e: float) -> float:
        t = exponent.psi_inverse(e)
        if t == 0.0:
            return 0.0
        return 0.5 * t * exponent.psi_prime(t) * math.exp(-e)

    p1 = _quad(f, 0.0, spec.e_max, spec)
    return 1.0 - p1 * -math.expm1(-s)
