"""Increments and paths of Levy subordinators.

Three families are supported: a pure positive drift, a totally skewed
positive beta-stable law, and the sum of the two. Stable variates use
Kanter's representation, which is exact.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ParameterError, ResourceError

STABLE = "stable"
DRIFT_ONLY = "drift_only"
STABLE_WITH_DRIFT = "stable_with_drift"
KINDS = (STABLE, DRIFT_ONLY, STABLE_WITH_DRIFT)

MAX_STEPS = 10**9


@dataclass(frozen=True)
class SubordinatorSpec:
    kind: str
    beta: float = None
    theta: float = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown subordinator kind {self.kind!r}")
        if self.kind in (STABLE, STABLE_WITH_DRIFT):
            if self.beta is None or not 0.0 < self.beta < 1.0:
                raise ParameterError(f"beta must lie in (0, 1), got {self.beta}")
        if self.kind in (DRIFT_ONLY, STABLE_WITH_DRIFT):
            if self.theta is None or not self.theta > 0.0:
                raise ParameterError(f"theta must be positive, got {self.theta}")

    @classmethod
    def stable(cls, beta):
        return cls(STABLE, beta=beta)

    @classmethod
    def drift_only(cls, theta):
        return cls(DRIFT_ONLY, theta=theta)

    @classmethod
    def stable_with_drift(cls, beta, theta):
        return cls(STABLE_WITH_DRIFT, beta=beta, theta=theta)

    @property
    def has_stable(self):
        return self.kind in (STABLE, STABLE_WITH_DRIFT)

    @property
    def has_drift(self):
        return self.kind in (DRIFT_ONLY, STABLE_WITH_DRIFT)

    def laplace_exponent(self, r):
        """phi(r) such that E exp(-r D(t)) = exp(-t phi(r))."""
        r = np.asarray(r, dtype=float)
        phi = np.zeros_like(r)
        if self.has_stable:
            phi = phi + r**self.beta
        if self.has_drift:
            phi = phi + self.theta * r
        return phi if phi.ndim else float(phi)

    def as_dict(self):
        return {"kind": self.kind, "beta": self.beta, "theta": self.theta}


@dataclass(frozen=True)
class SubordinatorPath:
    """D sampled on the operational grid t_i = i * delta.

    ``increments`` is stored as the first difference of ``cumulative`` so the
    two arrays agree exactly in floating point.
    """

    delta: float
    cumulative: np.ndarray

    @property
    def increments(self):
        return np.diff(self.cumulative)

    def __len__(self):
        return len(self.cumulative)


def standard_stable(beta, size, rng):
    """Standard positive beta-stable variates, E exp(-r S) = exp(-r**beta)."""
    # U in (0, pi], never 0
    u = math.pi * (1.0 - rng.random(size))
    w = rng.standard_exponential(size)
    a = np.sin(beta * u) / np.sin(u) ** (1.0 / beta)
    b = (np.sin((1.0 - beta) * u) / w) ** ((1.0 - beta) / beta)
    return a * b


def sample_increments(spec, delta, size, rng):
    """``size`` i.i.d. draws distributed as D(delta)."""
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    h = np.zeros(size)
    if spec.has_stable:
        h = h + delta ** (1.0 / spec.beta) * standard_stable(spec.beta, size, rng)
    if spec.has_drift:
        h = h + spec.theta * delta
    return h


def sample_increment(spec, delta, rng):
    """One draw distributed as D(delta)."""
    return float(sample_increments(spec, delta, 1, rng)[0])


def sample_path_until(spec, delta, horizon, rng, multiple_of=1, max_steps=MAX_STEPS):
    """Sample D on the grid i * delta until it first exceeds ``horizon``.

    The returned path holds D(t_0..t_{N+1}) with D(t_N) <= horizon < D(t_{N+1}).
    With ``multiple_of`` > 1 the path is extended past the stopping index until
    its number of increments is a multiple of that value, so that every
    coarsening by a divisor still reaches past the horizon.
    """
    if not horizon > 0:
        raise ParameterError(f"horizon must be positive, got {horizon}")
    if multiple_of < 1:
        raise ParameterError(f"multiple_of must be >= 1, got {multiple_of}")
    blocks = []
    carry = 0.0
    n_total = 0
    block = 1024
    stop = None
    while True:
        h = sample_increments(spec, delta, block, rng)
        cum = np.cumsum(np.concatenate(([carry], h)))[1:]
        blocks.append(cum)
        if stop is None:
            hit = np.flatnonzero(cum > horizon)
            if hit.size:
                # number of increments up to and including the first crossing
                stop = n_total + int(hit[0]) + 1
        n_total += block
        carry = float(cum[-1])
        if stop is not None:
            needed = -(-stop // multiple_of) * multiple_of
            if n_total >= needed:
                break
        if n_total >= max_steps:
            raise ResourceError(f"subordinator path exceeded {max_steps} steps")
        block = min(2 * block, 1 << 20)
    cumulative = np.concatenate(([0.0], *blocks))[: needed + 1]
    return SubordinatorPath(delta=float(delta), cumulative=cumulative)


def laplace_statistics(samples, spec, time, r):
    """Compare the empirical Laplace transform of ``samples`` with exp(-time phi(r))."""
    values = np.exp(-r * np.asarray(samples, dtype=float))
    n = values.size
    if np.all(values == values[0]):
        # degenerate law (pure drift): avoid rounding in mean/std
        empirical, std = float(values[0]), 0.0
    else:
        empirical, std = float(np.mean(values)), float(np.std(values, ddof=1))
    return LaplaceCheck(
        empirical=empirical,
        analytic=math.exp(-time * spec.laplace_exponent(r)),
        std_error=std / math.sqrt(n),
    )


@dataclass(frozen=True)
class LaplaceCheck:
    empirical: float
    analytic: float
    std_error: float

    @property
    def z_score(self):
        diff = abs(self.empirical - self.analytic)
        if self.std_error == 0.0:
            return 0.0 if diff == 0.0 else math.inf
        return diff / self.std_error

    def passed(self, n_sigma=3.0):
        return abs(self.empirical - self.analytic) <= n_sigma * self.std_error


def validate_laplace(spec, delta, r, n_samples, rng):
    if n_samples < 1000:
        raise ParameterError(f"n_samples must be >= 1000, got {n_samples}")
    samples = sample_increments(spec, delta, n_samples, rng)
    return laplace_statistics(samples, spec, delta, r)
