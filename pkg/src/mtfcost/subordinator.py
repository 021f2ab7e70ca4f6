"""Laplace exponents of the subordinators that drive the request weights.

Three families are shipped: the generalized gamma (tempered stable) family,
its untempered gamma-stable member with the ``s**gamma`` normalization, and
the gamma subordinator (Dirichlet weights).  Each exposes psi, its first two
derivatives and closed-form inverses of psi and psi'.  Methods broadcast over
numpy arrays; scalar input gives a Python float back.

The Pitman-Yor weights are not a single subordinator but a gamma-mixture of
generalized gamma ones; :class:`PitmanYorMixture` carries that construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

GAMMA_MIN = 1e-4
GAMMA_MAX = 1.0 - 1e-4


class DomainError(ValueError):
    """Argument outside the domain of a Laplace-exponent operation."""


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _check_nonneg(s, name="s"):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise DomainError(f"{name} must be non-negative")
    return s


def _check_gamma(gamma):
    if not (GAMMA_MIN <= gamma <= GAMMA_MAX):
        raise DomainError(f"gamma must lie in [{GAMMA_MIN}, {GAMMA_MAX}], got {gamma}")


def _check_mass(mass):
    if not np.all(np.asarray(mass) > 0):
        raise DomainError(f"mass must be positive, got {mass}")


class LaplaceExponent:
    """Common surface: psi, psi', psi'', their inverses, and JSON round-trip."""

    family: str = ""

    def psi(self, s):
        raise NotImplementedError

    def psi_prime(self, s):
        raise NotImplementedError

    def psi_second(self, s):
        raise NotImplementedError

    def psi_inverse(self, e):
        raise NotImplementedError

    def psi_prime_inverse(self, v):
        raise NotImplementedError

    def curvature(self, s):
        """-psi''(s)/psi'(s), evaluated without forming the ratio."""
        raise NotImplementedError

    @property
    def psi_prime_at_zero(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class GenGammaExponent(LaplaceExponent):
    """psi(s) = mass * ((u + s)**gamma - u**gamma) / gamma.

    ``mass`` is the time-scaling multiplier; it may be an array when a
    mixture is sampled in one vectorized pass.
    """

    gamma: float
    u: float = 0.0
    mass: float = 1.0
    family = "gg"

    def __post_init__(self):
        _check_gamma(self.gamma)
        if self.u < 0:
            raise DomainError(f"u must be non-negative, got {self.u}")
        _check_mass(self.mass)

    def psi(self, s):
        s = _check_nonneg(s)
        g, u = self.gamma, self.u
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if u > 0:
                # expm1 form keeps relative accuracy for s << u; the plain
                # difference has no cancellation once s > u
                near = u**g * np.expm1(g * np.log1p(s / u)) / g
                val = np.where(s <= u, near, ((u + s) ** g - u**g) / g)
            else:
                val = s**g / g
        return _out(self.mass * val)

    def psi_prime(self, s):
        s = _check_nonneg(s)
        if self.u == 0 and np.any(s == 0):
            raise DomainError("psi' is infinite at s=0 when u=0")
        return _out(self.mass * (self.u + s) ** (self.gamma - 1.0))

    def psi_second(self, s):
        s = _check_nonneg(s)
        if self.u == 0 and np.any(s == 0):
            raise DomainError("psi'' is infinite at s=0 when u=0")
        g = self.gamma
        return _out(self.mass * (g - 1.0) * (self.u + s) ** (g - 2.0))

    def psi_inverse(self, e):
        e = _check_nonneg(e, "e")
        g, u = self.gamma, self.u
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if u > 0:
                ug, a = u**g, g * e / self.mass
                near = u * np.expm1(np.log1p(a / ug) / g)
                val = np.where(a <= ug, near, (ug + a) ** (1.0 / g) - u)
            else:
                val = (g * e / self.mass) ** (1.0 / g)
        return _out(val)

    def psi_prime_inverse(self, v):
        v = np.asarray(v, dtype=float)
        top = self.mass * self.u ** (self.gamma - 1.0) if self.u > 0 else np.inf
        if np.any(v <= 0) or np.any(v > top * (1 + 1e-15)):
            raise DomainError(f"v must lie in (0, {top}]")
        g, u = self.gamma, self.u
        with np.errstate(over="ignore", divide="ignore"):
            if u > 0:
                near = u * np.expm1(np.log(v / top) / (g - 1.0))
                val = np.where(v >= top * 0.5 ** (1.0 - g), near, (v / self.mass) ** (1.0 / (g - 1.0)) - u)
            else:
                val = (v / self.mass) ** (1.0 / (g - 1.0))
        return _out(np.maximum(val, 0.0))

    def curvature(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return _out((1.0 - self.gamma) / (self.u + s))

    @property
    def psi_prime_at_zero(self) -> float:
        return float(self.mass * self.u ** (self.gamma - 1.0)) if self.u > 0 else math.inf

    @property
    def tilt_index(self) -> float:
        """mass * u**gamma / gamma: the only combination the limiting law depends on."""
        return float(self.mass * self.u**self.gamma / self.gamma)

    def to_dict(self):
        return {"family": self.family, "gamma": self.gamma, "u": self.u, "mass": float(self.mass)}


@dataclass(frozen=True)
class StableExponent(LaplaceExponent):
    """psi(s) = mass * s**gamma."""

    gamma: float
    mass: float = 1.0
    family = "stable"

    def __post_init__(self):
        _check_gamma(self.gamma)
        _check_mass(self.mass)

    def psi(self, s):
        s = _check_nonneg(s)
        return _out(self.mass * s**self.gamma)

    def psi_prime(self, s):
        s = _check_nonneg(s)
        if np.any(s == 0):
            raise DomainError("psi' of a stable exponent is infinite at 0")
        return _out(self.mass * self.gamma * s ** (self.gamma - 1.0))

    def psi_second(self, s):
        s = _check_nonneg(s)
        if np.any(s == 0):
            raise DomainError("psi'' of a stable exponent is infinite at 0")
        g = self.gamma
        return _out(self.mass * g * (g - 1.0) * s ** (g - 2.0))

    def psi_inverse(self, e):
        e = _check_nonneg(e, "e")
        with np.errstate(over="ignore"):
            return _out((e / self.mass) ** (1.0 / self.gamma))

    def psi_prime_inverse(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v <= 0) or np.any(~np.isfinite(v)):
            raise DomainError("v must be positive and finite")
        with np.errstate(over="ignore"):
            return _out((v / (self.mass * self.gamma)) ** (1.0 / (self.gamma - 1.0)))

    def curvature(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return _out((1.0 - self.gamma) / s)

    @property
    def psi_prime_at_zero(self) -> float:
        return math.inf

    def to_dict(self):
        return {"family": self.family, "gamma": self.gamma, "u": 0.0, "mass": float(self.mass)}


@dataclass(frozen=True)
class GammaExponent(LaplaceExponent):
    """psi(s) = mass * log(1 + s); normalized increments are Dirichlet(mass)."""

    mass: float = 1.0
    family = "gamma"

    def __post_init__(self):
        _check_mass(self.mass)

    @property
    def theta(self) -> float:
        return float(self.mass)

    def psi(self, s):
        s = _check_nonneg(s)
        return _out(self.mass * np.log1p(s))

    def psi_prime(self, s):
        s = _check_nonneg(s)
        return _out(self.mass / (1.0 + s))

    def psi_second(self, s):
        s = _check_nonneg(s)
        return _out(-self.mass / (1.0 + s) ** 2)

    def psi_inverse(self, e):
        e = _check_nonneg(e, "e")
        with np.errstate(over="ignore"):
            return _out(np.expm1(e / self.mass))

    def psi_prime_inverse(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v <= 0) or np.any(v > self.mass * (1 + 1e-15)):
            raise DomainError(f"v must lie in (0, {self.mass}]")
        return _out(np.maximum(self.mass / v - 1.0, 0.0))

    def curvature(self, s):
        s = np.asarray(s, dtype=float)
        return _out(1.0 / (1.0 + s))

    @property
    def psi_prime_at_zero(self) -> float:
        return float(self.mass)

    def to_dict(self):
        return {"family": self.family, "gamma": None, "u": None, "mass": float(self.mass)}


@dataclass(frozen=True)
class PitmanYorMixture:
    """Pitman-Yor(gamma, theta) weights as a generalized gamma subordinator
    run for a random time Z ~ Gamma(theta/gamma, 1).

    Given Z = z the increments over a time step dt have Laplace transform
    exp(-z dt ((1+s)**gamma - 1)), i.e. a GenGammaExponent with u=1 and
    mass = gamma*z.
    """

    gamma: float
    theta: float
    family = "py"

    def __post_init__(self):
        _check_gamma(self.gamma)
        if not self.theta > 0:
            raise DomainError(f"theta must be positive, got {self.theta}")

    @property
    def mixing_shape(self) -> float:
        return self.theta / self.gamma

    def conditional(self, z) -> GenGammaExponent:
        z = np.asarray(z, dtype=float) if np.ndim(z) else float(z)
        return GenGammaExponent(self.gamma, u=1.0, mass=self.gamma * z)

    def sample_z(self, rng: np.random.Generator, size=None):
        return rng.gamma(self.mixing_shape, 1.0, size=size)

    def to_dict(self):
        return {"family": self.family, "gamma": self.gamma, "theta": self.theta}


Model = LaplaceExponent | PitmanYorMixture


def psi(exponent: LaplaceExponent, s):
    return exponent.psi(s)


def psi_prime(exponent: LaplaceExponent, s):
    return exponent.psi_prime(s)


def psi_second(exponent: LaplaceExponent, s):
    return exponent.psi_second(s)


def psi_inverse(exponent: LaplaceExponent, e):
    return exponent.psi_inverse(e)


def psi_prime_inverse(exponent: LaplaceExponent, v):
    return exponent.psi_prime_inverse(v)


def model_from_dict(d: dict[str, Any]):
    """Inverse of ``to_dict`` for every shipped family."""
    family = d.get("family")
    if family == "gg":
        return GenGammaExponent(float(d["gamma"]), u=float(d.get("u") or 0.0),
                                mass=float(d.get("mass") or 1.0))
    if family == "stable":
        if d.get("u"):
            raise DomainError("stable family has no tempering parameter")
        return StableExponent(float(d["gamma"]), mass=float(d.get("mass") or 1.0))
    if family == "gamma":
        return GammaExponent(float(d["mass"]))
    if family == "py":
        return PitmanYorMixture(float(d["gamma"]), float(d["theta"]))
    raise DomainError(f"unknown family {family!r}")
