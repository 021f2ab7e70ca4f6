"""Monte-Carlo engines for the stationary search cost.

Weights are kept in log space: increments of a subordinator over a time step
1/n are routinely smaller than the smallest double once n is in the
thousands, and only their ratios matter for the search cost.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .subordinator import (
    GammaExponent,
    GenGammaExponent,
    LaplaceExponent,
    PitmanYorMixture,
    StableExponent,
)

REJECTION_CAP = 10_000_000
# cap on rows * n held in memory at once by the batched samplers
BATCH_CELLS = 1 << 21
POISSON_EXACT_MAX = 1e12


class SamplingError(ArithmeticError):
    """A sampler could not produce a valid draw (rejection cap, overflow)."""


@dataclass(frozen=True)
class WeightVector:
    """Unnormalized weights w_1..w_n, stored as logs."""

    log_weights: np.ndarray

    def __post_init__(self):
        lw = np.asarray(self.log_weights, dtype=float)
        if lw.ndim != 1 or lw.size < 1:
            raise ValueError("log_weights must be a non-empty 1-d array")
        if not np.all(np.isfinite(lw)):
            raise ValueError("weights must be strictly positive and finite")
        object.__setattr__(self, "log_weights", lw)

    @classmethod
    def from_weights(cls, weights) -> "WeightVector":
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        return cls(np.log(w))

    @property
    def n(self) -> int:
        return self.log_weights.size

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def total(self) -> float:
        return float(np.exp(logsumexp(self.log_weights)))

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_weights - logsumexp(self.log_weights))

    def scaled(self) -> np.ndarray:
        """Weights divided by their maximum: same search-cost law, no overflow."""
        return np.exp(self.log_weights - self.log_weights.max())


@dataclass(frozen=True)
class SimConfig:
    replications: int
    seed: int
    workers: int = 1
    burn_in: int | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.burn_in is not None and self.burn_in < 1:
            raise ValueError("burn_in must be >= 1")

    def burn_in_for(self, n: int) -> int:
        return self.burn_in if self.burn_in is not None else default_burn_in(n)


def default_burn_in(n: int) -> int:
    return max(1, math.ceil(50 * n * math.log(n)))


@dataclass
class MomentEstimates:
    moments: list[float]
    std_errors: list[float]
    count: int

    def to_dict(self):
        return {"count": self.count, "moments": self.moments, "std_errors": self.std_errors}


@dataclass
class SearchCostSample:
    draws: np.ndarray
    model: dict
    n: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(self.draws.mean())

    def summary(self, k: int = 2) -> dict:
        est = estimate_moments(self.draws, k)
        return {
            "model": self.model,
            "n": self.n if self.n is not None else "limit",
            "replications": int(self.draws.size),
            "mean": est.moments[0],
            "mean_se": est.std_errors[0],
            "moments": est.moments,
            "std_errors": est.std_errors,
            **self.extra,
        }


def make_rng(seed: int, worker: int = 0, workers: int = 1) -> np.random.Generator:
    """Generator for one worker: Philox stream keyed by (seed, worker index)."""
    ss = np.random.SeedSequence(seed).spawn(workers)[worker]
    return np.random.Generator(np.random.Philox(ss))


# --- increment samplers -----------------------------------------------------------


def _open_uniform(rng, size):
    # (0, 1]
    return 1.0 - rng.random(size)


def log_positive_stable(gamma: float, log_scale, size, rng: np.random.Generator) -> np.ndarray:
    """log of a positive stable variate with Laplace transform exp(-c s^gamma),
    log_scale = log(c)/gamma.  Kanter's representation: one uniform angle, one
    exponential."""
    u = np.pi * _open_uniform(rng, size)
    e = rng.standard_exponential(size)
    g = gamma
    log_zolotarev = (g * np.log(np.sin(g * u)) + (1 - g) * np.log(np.sin((1 - g) * u))
                     - np.log(np.sin(u))) / (1 - g)
    return (1 - g) / g * (log_zolotarev - np.log(e)) + log_scale


def log_gamma_variates(shape, size, rng: np.random.Generator) -> np.ndarray:
    """log of Gamma(shape, 1) variates, stable for shape << 1.

    Uses G(a) = G(a+1) * U^{1/a}, so log G(a) never underflows.
    """
    shape = np.broadcast_to(np.asarray(shape, dtype=float), size)
    return np.log(rng.gamma(shape + 1.0, 1.0, size)) + np.log(_open_uniform(rng, size)) / shape


def log_tempered_stable(gamma: float, c, u: float, size, rng: np.random.Generator) -> np.ndarray:
    """log-variates with Laplace transform exp(-c ((u+s)^gamma - u^gamma)).

    Exponential tilting by rejection: propose a positive stable with scale c,
    accept with probability exp(-u X).
    """
    log_scale = np.broadcast_to(np.log(np.asarray(c, dtype=float)) / gamma, size)
    out = log_positive_stable(gamma, log_scale, size, rng)
    if u == 0:
        return out
    pending = np.log(_open_uniform(rng, size)) >= -u * np.exp(out)
    proposals, rounds = out.size, 0
    flat, flat_scale, flat_pending = out.reshape(-1), log_scale.reshape(-1), pending.reshape(-1)
    while flat_pending.any():
        idx = np.flatnonzero(flat_pending)
        # several proposals per pending slot, growing each round; the first
        # accepted one in a row is still an exact rejection-sampling draw
        per = max(1, min(2**rounds, BATCH_CELLS // idx.size))
        rounds += 1
        proposals += idx.size * per
        if proposals > REJECTION_CAP + out.size:
            raise SamplingError(
                f"tempered stable rejection exceeded {REJECTION_CAP} proposals; "
                "acceptance rate exp(-c u^gamma) is too small for these parameters"
            )
        cand = log_positive_stable(gamma, np.repeat(flat_scale[idx], per).reshape(idx.size, per),
                                   (idx.size, per), rng)
        ok = np.log(_open_uniform(rng, (idx.size, per))) < -u * np.exp(cand)
        hit = ok.any(axis=1)
        flat[idx[hit]] = cand[hit, ok.argmax(axis=1)[hit]]
        flat_pending[idx[hit]] = False
    return out


def _log_increments(exponent: LaplaceExponent, n: int, size, rng) -> np.ndarray:
    """Increments over time steps 1/n; ``exponent.mass`` may be an array
    broadcastable against ``size`` (one mass per row)."""
    mass = np.asarray(exponent.mass, dtype=float)
    if isinstance(exponent, GammaExponent):
        return log_gamma_variates(mass / n, size, rng)
    if isinstance(exponent, StableExponent):
        scale = np.broadcast_to(np.log(mass / n) / exponent.gamma, size)
        return log_positive_stable(exponent.gamma, scale, size, rng)
    if isinstance(exponent, GenGammaExponent):
        c = np.broadcast_to(mass / (n * exponent.gamma), size)
        return log_tempered_stable(exponent.gamma, c, exponent.u, size, rng)
    raise TypeError(f"no increment sampler for {type(exponent).__name__}")


def sample_log_weight_rows(model, n: int, rows: int, rng: np.random.Generator) -> np.ndarray:
    """``rows`` independent weight vectors of length n, as a (rows, n) log array.

    For Pitman-Yor each row gets its own Z ~ Gamma(theta/gamma, 1).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if isinstance(model, PitmanYorMixture):
        z = model.sample_z(rng, rows)
        return _log_increments(model.conditional(z[:, None]), n, (rows, n), rng)
    return _log_increments(model, n, (rows, n), rng)


def sample_weights(model, n: int, rng: np.random.Generator) -> WeightVector:
    return WeightVector(sample_log_weight_rows(model, n, 1, rng)[0])


# --- finite-n search cost ---------------------------------------------------------------


def _pick(cum: np.ndarray, rng) -> np.ndarray:
    """Row-wise inverse-CDF pick from unnormalized cumulative sums (rows, n)."""
    target = _open_uniform(rng, cum.shape[0]) * cum[:, -1]
    idx = (cum < target[:, None]).sum(axis=1)
    return np.minimum(idx, cum.shape[1] - 1)


def _exact_rows(w: np.ndarray, rng) -> np.ndarray:
    """One stationary search cost per row of scaled weights ``w`` (rows, n).

    Exponential embedding: the requested item R has been idle for T ~ Exp(w_R);
    every other item j has been requested within that window with probability
    1 - exp(-w_j T), independently.
    """
    rows = np.arange(w.shape[0])
    r = _pick(np.cumsum(w, axis=1), rng)
    t = rng.standard_exponential(w.shape[0]) / w[rows, r]
    ahead = rng.random(w.shape) < -np.expm1(-w * t[:, None])
    ahead[rows, r] = False
    return ahead.sum(axis=1)


def _row_batches(total: int, n: int):
    step = max(1, BATCH_CELLS // n)
    for start in range(0, total, step):
        yield min(step, total - start)


def sample_search_cost_exact(weights: WeightVector, rng: np.random.Generator, size: int | None = None):
    """Stationary search cost for fixed weights; an int, or an array if ``size`` is given."""
    w = weights.scaled()
    count = 1 if size is None else size
    parts = [_exact_rows(np.broadcast_to(w, (m, w.size)), rng) for m in _row_batches(count, w.size)]
    draws = np.concatenate(parts)
    return int(draws[0]) if size is None else draws


class MoveToFrontList:
    """Literal Move-to-Front list; ``request`` returns the 0-based depth found."""

    def __init__(self, n: int):
        self.items = list(range(n))

    def request(self, item: int) -> int:
        pos = self.items.index(item)
        self.items.insert(0, self.items.pop(pos))
        return pos


def _chain_rows(w: np.ndarray, burn_in: int, rng) -> np.ndarray:
    """Search cost after ``burn_in`` MtF moves from the identity order, one chain per row of ``w``.

    The list order is tracked through each item's last request time:
    requested items sit in order of recency, never requested ones below them
    in their initial order (the same state as :class:`MoveToFrontList`).
    """
    count, n = w.shape
    cum = np.cumsum(w, axis=1)
    rows = np.arange(count)
    last = np.full((count, n), -1, dtype=np.int64)
    for step in range(burn_in):
        last[rows, _pick(cum, rng)] = step
    req = _pick(cum, rng)
    mine = last[rows, req]
    seen = last >= 0
    above_seen = (last > mine[:, None]).sum(axis=1)
    above_unseen = seen.sum(axis=1) + (~seen & (np.arange(n)[None, :] < req[:, None])).sum(axis=1)
    return np.where(mine >= 0, above_seen, above_unseen)


def sample_search_cost_chain(weights: WeightVector, config: SimConfig, rng: np.random.Generator,
                             size: int | None = None):
    """Search cost of the request after ``burn_in`` MtF moves from the identity order;
    ``size`` chains run side by side."""
    count = 1 if size is None else size
    w = weights.scaled()
    draws = _chain_rows(np.broadcast_to(w, (count, w.size)), config.burn_in_for(weights.n), rng)
    return int(draws[0]) if size is None else draws


# --- limiting law ---------------------------------------------------------------------------


def limit_mixture_draws(model, size: int, rng: np.random.Generator):
    """(x, y, lam) from the Poisson-mixing law f(x,y) = -psi''(x+y) e^{-psi(x)}.

    X = psi^{-1}(E) with E ~ Exp(1) has density psi'(x) e^{-psi(x)}; given X,
    Y = psi'^{-1}(U psi'(X)) - X has density -psi''(X+y)/psi'(X).
    """
    if isinstance(model, PitmanYorMixture):
        exponent = model.conditional(model.sample_z(rng, size))
    else:
        exponent = model
    e = rng.standard_exponential(size)
    e = np.where(e > 0, e, np.finfo(float).tiny)
    u = _open_uniform(rng, size)
    x = exponent.psi_inverse(e)
    b = exponent.psi_prime_inverse(u * exponent.psi_prime(x))
    b = np.maximum(b, x)
    lam = np.maximum(exponent.psi(b) - e, 0.0)
    return x, b - x, lam


def _poisson(lam: np.ndarray, rng) -> np.ndarray:
    if not np.all(np.isfinite(lam)):
        raise SamplingError("non-finite Poisson mean in the limit sampler")
    big = lam > POISSON_EXACT_MAX
    out = rng.poisson(np.where(big, 0.0, lam))
    if big.any():
        # numpy's Poisson refuses huge means; the normal approximation is exact to 1e-6 there
        approx = np.rint(lam[big] + np.sqrt(lam[big]) * rng.standard_normal(big.sum()))
        if np.any(approx > np.iinfo(np.int64).max):
            raise SamplingError("search cost draw overflows int64")
        out[big] = approx.astype(np.int64)
    return out


def sample_limit_search_cost(model, rng: np.random.Generator, size: int | None = None):
    count = 1 if size is None else size
    _, _, lam = limit_mixture_draws(model, count, rng)
    draws = _poisson(lam, rng)
    return int(draws[0]) if size is None else draws


# --- estimation ------------------------------------------------------------------------------


def estimate_moments(draws, k: int) -> MomentEstimates:
    """Raw moments m_j = mean(draws^j), j <= k, with i.i.d. standard errors
    (for a sample mean these coincide with the jackknife standard errors)."""
    d = np.asarray(draws, dtype=float)
    if d.size == 0:
        raise ValueError("no draws")
    if k < 1:
        raise ValueError("k must be >= 1")
    top = float(d.max(initial=0.0))
    if top > 0 and 2 * k * math.log(top) > 700:
        raise SamplingError(f"draws^{2 * k} overflows double precision (max draw {top:.3g})")
    moments, ses = [], []
    for j in range(1, k + 1):
        p = d**j
        moments.append(float(p.mean()))
        ses.append(float(p.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0)
    return MomentEstimates(moments, ses, int(d.size))


def empirical_laplace(draws, s: float) -> tuple[float, float]:
    """Mean of exp(-s*draws) and its standard error."""
    v = np.exp(-s * np.asarray(draws, dtype=float))
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


# --- parallel drivers ----------------------------------------------------------------------


def _split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (i < extra) for i in range(parts)]


def run_parallel(task: Callable[[int, np.random.Generator], np.ndarray], config: SimConfig) -> np.ndarray:
    """Run ``task(count, rng)`` on each worker's share; results joined in worker order.

    Output depends only on (seed, workers, replications), not on scheduling.
    """
    counts = _split(config.replications, config.workers)
    rngs = [make_rng(config.seed, i, config.workers) for i in range(config.workers)]
    if config.workers == 1:
        return np.asarray(task(counts[0], rngs[0]))
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        parts = list(pool.map(task, counts, rngs))
    return np.concatenate(parts)


def _model_dict(model) -> dict:
    return model.to_dict()


def simulate_limit(model, config: SimConfig) -> SearchCostSample:
    def task(count, rng):
        if count == 0:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([sample_limit_search_cost(model, rng, m)
                               for m in _row_batches(count, 1)])

    return SearchCostSample(run_parallel(task, config), _model_dict(model))


def simulate_finite_n(model, n: int, config: SimConfig, engine: str = "exact") -> SearchCostSample:
    """One stationary draw per replication, each with its own fresh weight vector."""
    if engine not in ("exact", "chain"):
        raise ValueError(f"unknown engine {engine!r}")

    def task(count, rng):
        out = []
        for m in _row_batches(count, n):
            logw = sample_log_weight_rows(model, n, m, rng)
            w = np.exp(logw - logw.max(axis=1, keepdims=True))
            if engine == "exact":
                out.append(_exact_rows(w, rng))
            else:
                out.append(_chain_rows(w, config.burn_in_for(n), rng))
        return np.concatenate(out) if out else np.empty(0, dtype=np.int64)

    extra = {"engine": engine}
    if engine == "chain":
        extra["burn_in"] = config.burn_in_for(n)
    return SearchCostSample(run_parallel(task, config), _model_dict(model), n=n, extra=extra)
