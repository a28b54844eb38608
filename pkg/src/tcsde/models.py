"""SDE models dY = f(t, Y) dE(t) + g(t, Y) dB(E(t)).

Coefficients are vectorised: ``drift(t, x)`` takes ``t`` of shape ``(...)`` and
``x`` of shape ``(..., d)`` and returns ``(..., d)``; ``diffusion`` returns
``(..., d, m)``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class SdeModel:
    name: str
    dim_state: int
    dim_noise: int
    drift: Callable
    diffusion: Callable
    alpha: float
    gamma_f: float
    gamma_g: float
    time_domain: tuple
    initial_state: np.ndarray
    mu: Optional[Callable] = None
    mu_inv: Optional[Callable] = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        for label, gamma in (("gamma_f", self.gamma_f), ("gamma_g", self.gamma_g)):
            if not 0.0 < gamma <= 1.0:
                raise ParameterError(f"{label} must lie in (0, 1], got {gamma}")
        a, b = self.time_domain
        if not b > a:
            raise ParameterError(f"empty time domain {self.time_domain}")
        y0 = np.asarray(self.initial_state, dtype=float).reshape(self.dim_state)
        object.__setattr__(self, "initial_state", y0)

    @property
    def horizon(self):
        a, b = self.time_domain
        return b - a

    def model_time(self, rho):
        """Map real time rho >= 0 into the coefficient time domain, clipping at its end."""
        a, b = self.time_domain
        return np.minimum(a + np.asarray(rho, dtype=float), b)


def _hump(t, a, b):
    # (t - a)(b - t), clipped at 0 against rounding just outside [a, b]
    return np.maximum((t - a) * (b - t), 0.0)


def _ipow(x, n):
    out = x
    for _ in range(n - 1):
        out = out * x
    return out


def example1():
    """Scalar model with drift sqrt(t(1-t)) x^2 - 2 x^5 and noise (t(1-t))^(1/4) x^2."""

    def drift(t, x):
        s = np.sqrt(_hump(np.asarray(t, dtype=float), 0.0, 1.0))[..., None]
        return s * x * x - 2.0 * _ipow(x, 5)

    def diffusion(t, x):
        s = np.sqrt(np.sqrt(_hump(np.asarray(t, dtype=float), 0.0, 1.0)))[..., None]
        return (s * x * x)[..., None]

    return SdeModel(
        name="example1",
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusion=diffusion,
        alpha=4.0,
        gamma_f=0.5,
        gamma_g=0.25,
        time_domain=(0.0, 1.0),
        initial_state=np.array([2.0]),
        mu=lambda u: 3.0 * np.asarray(u, dtype=float) ** 5,
        mu_inv=lambda v: (np.asarray(v, dtype=float) / 3.0) ** 0.2,
    )


def example2(initial_state=(1.0, 1.0)):
    """Two-dimensional model with cross-coupled quintic drift on t in [1, 2]."""

    def drift(t, x):
        c = _hump(np.asarray(t, dtype=float), 1.0, 2.0) ** 0.2
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack(
            (c * x1 * x1 - 2.0 * _ipow(x2, 5),
             c * x2 * x2 - 2.0 * _ipow(x1, 5)),
            axis=-1,
        )

    def diffusion(t, x):
        c = _hump(np.asarray(t, dtype=float), 1.0, 2.0) ** 0.4
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack((c * x2 * x2, c * x1 * x1), axis=-1)[..., None]

    return SdeModel(
        name="example2",
        dim_state=2,
        dim_noise=1,
        drift=drift,
        diffusion=diffusion,
        alpha=4.0,
        gamma_f=0.2,
        gamma_g=0.4,
        time_domain=(1.0, 2.0),
        initial_state=np.asarray(initial_state, dtype=float),
        mu=lambda u: 3.0 * np.asarray(u, dtype=float) ** 5,
        mu_inv=lambda v: (np.asarray(v, dtype=float) / 3.0) ** 0.2,
        notes={"initial_state": "chosen here, absent from the source example",
               "mu": "3 u^5 reused from example1"},
    )


def linear_test(rate=1.0, initial_state=1.0):
    """f = -rate * x, g = 0; explicit Euler gives Y0 (1 - rate delta)^n."""

    def drift(t, x):
        return -rate * x

    def diffusion(t, x):
        return np.zeros(np.shape(x) + (1,))

    return SdeModel(
        name="linear-test",
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusion=diffusion,
        alpha=0.0,
        gamma_f=1.0,
        gamma_g=1.0,
        time_domain=(0.0, 1.0),
        initial_state=np.array([initial_state]),
        mu=lambda u: rate * np.asarray(u, dtype=float),
        mu_inv=lambda v: np.asarray(v, dtype=float) / rate,
    )


def zero_model(initial_state=1.0):
    def drift(t, x):
        return np.zeros_like(x)

    def diffusion(t, x):
        return np.zeros(np.shape(x) + (1,))

    return SdeModel(
        name="zero",
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusion=diffusion,
        alpha=0.0,
        gamma_f=1.0,
        gamma_g=1.0,
        time_domain=(0.0, 1.0),
        initial_state=np.array([initial_state]),
        mu=lambda u: np.asarray(u, dtype=float),
        mu_inv=lambda v: np.asarray(v, dtype=float),
    )


def cubic_control():
    """Negative control f = x^3, g = 0: not one-sided Lipschitz, not Khasminskii."""

    def drift(t, x):
        return x * x * x

    def diffusion(t, x):
        return np.zeros(np.shape(x) + (1,))

    return SdeModel(
        name="cubic-control",
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusion=diffusion,
        alpha=2.0,
        gamma_f=1.0,
        gamma_g=1.0,
        time_domain=(0.0, 1.0),
        initial_state=np.array([0.5]),
    )


MODELS = {
    "example1": example1,
    "example2": example2,
    "linear-test": linear_test,
    "zero": zero_model,
    "cubic-control": cubic_control,
}


def get_model(name):
    try:
        return MODELS[name]()
    except KeyError:
        raise ParameterError(
            f"unknown model {name!r}; choose from {', '.join(MODELS)}"
        ) from None
