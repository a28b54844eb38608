"""Truncation policy: growth envelope mu, kappa(delta) = delta**-eps, projection pi_delta."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, ParameterError

ENVELOPE_SAFETY = 2.0


@dataclass(frozen=True)
class TruncationPolicy:
    """Bundle (mu, mu^-1, kappa, kappa_hat) defining the truncated coefficients.

    ``mu`` must dominate sup_t sup_{|x|<=u} |f(t,x)| v |g(t,x)| for u >= 1.
    """

    mu: Callable
    mu_inv: Callable
    epsilon: float = 0.25
    kappa_hat: float = 1.0
    label: str = "custom"

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 0.25:
            raise ParameterError(f"epsilon must lie in (0, 1/4], got {self.epsilon}")
        if self.kappa_hat < 1.0:
            raise ParameterError(f"kappa_hat must be >= 1, got {self.kappa_hat}")

    @classmethod
    def power_law(cls, M, alpha, epsilon=0.25, kappa_hat=1.0):
        """mu(u) = 2 M u^(alpha+2)."""
        if not M > 0:
            raise ParameterError(f"M must be positive, got {M}")
        power = alpha + 2.0
        return cls(
            mu=lambda u: 2.0 * M * np.asarray(u, dtype=float) ** power,
            mu_inv=lambda v: (np.asarray(v, dtype=float) / (2.0 * M)) ** (1.0 / power),
            epsilon=epsilon,
            kappa_hat=kappa_hat,
            label=f"2*{M!r}*u^{power!r}",
        )

    @classmethod
    def for_model(cls, model, epsilon=0.25, kappa_hat=1.0, rng=None):
        """Use the model's own envelope if it has one, else a fitted power law."""
        if model.mu is not None:
            return cls(model.mu, model.mu_inv, epsilon, kappa_hat, label=f"{model.name} envelope")
        M = ENVELOPE_SAFETY * estimate_growth_constant(model, rng=rng)
        return cls.power_law(M, model.alpha, epsilon, kappa_hat)

    @property
    def max_delta(self):
        """Largest step for which kappa(delta) >= mu(1)."""
        return min(1.0, float(self.mu(1.0)) ** (-1.0 / self.epsilon))

    def kappa(self, delta):
        if not 0.0 < delta <= 1.0:
            raise DomainError(f"delta must lie in (0, 1], got {delta}")
        k = delta ** (-self.epsilon)
        # keep delta^(1/4) kappa <= kappa_hat exact in floating point (epsilon = 1/4 rounds)
        while delta**0.25 * k > self.kappa_hat:
            k = float(np.nextafter(k, 0.0))
        return k

    def radius(self, delta):
        """mu^-1(kappa(delta)), the radius of the truncation ball."""
        k = self.kappa(delta)
        floor = float(self.mu(1.0))
        if k < floor:
            raise ConfigurationError(
                f"kappa({delta})={k:.6g} is below mu(1)={floor:.6g}; "
                f"use delta <= {self.max_delta:.6g} or a larger epsilon"
            )
        return float(self.mu_inv(k))

    def truncate_state(self, delta, x):
        return project(x, self.radius(delta))


def project(x, radius):
    """Radial projection of x (shape (..., d)) onto the closed ball of ``radius``."""
    x = np.asarray(x, dtype=float)
    norm = np.sqrt((x * x).sum(axis=-1, keepdims=True))
    outside = norm > radius
    if not np.any(outside):
        return x
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(outside, x * (radius / norm), x)
    # a rescaled vector may land one ulp outside the ball
    ynorm = np.sqrt(np.sum(y * y, axis=-1, keepdims=True))
    over = outside & (ynorm > radius)
    while np.any(over):
        y = np.where(over, y * (1.0 - 2.0**-52), y)
        ynorm = np.sqrt(np.sum(y * y, axis=-1, keepdims=True))
        over = outside & (ynorm > radius)
    return y


def truncated_coefficients(policy, delta, model, verify=True, rng=None):
    """Return (f_delta, g_delta) with f_delta(t, x) = f(t, pi_delta(x)).

    With ``verify`` the model's envelope is first checked on a probe grid.
    """
    if verify:
        verify_envelope(model, policy.mu, rng=rng)
    r = policy.radius(delta)

    def f_delta(t, x):
        return model.drift(t, project(x, r))

    def g_delta(t, x):
        return model.diffusion(t, project(x, r))

    return f_delta, g_delta


def _ball_probes(model, n, max_radius, rng):
    """Points spread over norms in [0, max_radius] and times over the domain."""
    a, b = model.time_domain
    t = rng.uniform(a, b, n)
    t[: n // 20] = a
    t[n // 20: n // 10] = b
    direction = rng.standard_normal((n, model.dim_state))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    norms = np.concatenate((
        rng.uniform(0.0, 1.0, n // 2),
        np.exp(rng.uniform(0.0, np.log(max_radius), n - n // 2)),
    ))
    return t, direction * norms[:, None], norms


def coefficient_norms(model, t, x):
    f = model.drift(t, x)
    g = model.diffusion(t, x)
    fn = np.sqrt(np.sum(f * f, axis=-1))
    gn = np.sqrt(np.sum(g * g, axis=(-2, -1)))
    return fn, gn


def verify_envelope(model, mu, n_probes=20000, max_radius=100.0, rng=None):
    """Check |f| v |g| <= mu(max(|x|, 1)) on random probes; raise on violation."""
    rng = np.random.default_rng(0) if rng is None else rng
    t, x, norms = _ball_probes(model, n_probes, max_radius, rng)
    fn, gn = coefficient_norms(model, t, x)
    size = np.maximum(fn, gn)
    bound = np.asarray(mu(np.maximum(norms, 1.0)), dtype=float)
    bad = np.flatnonzero(~(size <= bound * (1.0 + 1e-12)))
    if bad.size:
        i = bad[np.argmax(size[bad] - bound[bad])]
        raise ConfigurationError(
            f"model {model.name!r} exceeds its growth envelope at t={t[i]!r}, "
            f"x={x[i].tolist()}: |coefficient|={size[i]:.6g} > mu={bound[i]:.6g}"
        )


def estimate_growth_constant(model, n_probes=20000, max_radius=100.0, rng=None):
    """max of (|f| v |g|) / (1 + |x|^(alpha+1)) over random probes."""
    rng = np.random.default_rng(0) if rng is None else rng
    t, x, norms = _ball_probes(model, n_probes, max_radius, rng)
    fn, gn = coefficient_norms(model, t, x)
    ratio = np.maximum(fn, gn) / (1.0 + norms ** (model.alpha + 1.0))
    return max(float(np.max(ratio)), np.finfo(float).tiny)
