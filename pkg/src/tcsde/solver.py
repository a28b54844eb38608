"""Truncated Euler-Maruyama on the random grid rho_n, plus a plain EM comparator.

X_{n+1} = X_n + f_delta(rho_n, X_n) delta + g_delta(rho_n, X_n) dW_n,
with dW_n ~ N(0, delta I_m) indexed by the operational step n.

The recursion is vectorised over a batch of independent paths; results for a
path depend only on its own inputs and on the batch it runs in, so callers
that need bit-reproducibility must fix the batch composition.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalOverflowError, ParameterError
from .truncation import project

TRUNCATED_EM = "truncated_em"
PLAIN_EM = "plain_em"
SCHEMES = (TRUNCATED_EM, PLAIN_EM)

BLOWUP_THRESHOLD = 1e15


@dataclass
class Trajectory:
    grid: object
    states: np.ndarray
    scheme: str
    blowup_index: int = None
    max_coefficient_norm: float = 0.0
    kappa: float = field(default=np.inf)

    @property
    def blew_up(self):
        return self.blowup_index is not None

    @property
    def within_truncation_bound(self):
        """Every coefficient evaluation stayed below kappa(delta)."""
        return self.max_coefficient_norm <= self.kappa * (1.0 + 1e-12)


def _check_scheme(scheme):
    if scheme not in SCHEMES:
        raise ParameterError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def _coefficients(policy, delta, model, scheme):
    if scheme == PLAIN_EM:
        return model.drift, model.diffusion
    r = policy.radius(delta)
    return (lambda t, x: model.drift(t, project(x, r)),
            lambda t, x: model.diffusion(t, project(x, r)))


def em_step(policy, delta, model, t, x, dW, scheme=TRUNCATED_EM):
    """One step from state ``x`` at coefficient time ``t`` with Brownian increment ``dW``."""
    _check_scheme(scheme)
    f, g = _coefficients(policy, delta, model, scheme)
    x = np.asarray(x, dtype=float)
    dW = np.asarray(dW, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = x + f(t, x) * delta + np.einsum("...ij,...j->...i", g(t, x), dW)
    if not np.all(np.isfinite(out)):
        if scheme == TRUNCATED_EM:
            raise AssertionError(f"truncated step produced non-finite state at t={t}, x={x}")
        raise NumericalOverflowError(f"non-finite state at t={t}, x={x}", t=t, x=x)
    return out


def run_paths(policy, model, grids, brownian_increments, scheme=TRUNCATED_EM):
    """Run the scheme on several grids (all with the same delta) as one batch."""
    _check_scheme(scheme)
    P = len(grids)
    if P == 0:
        return []
    delta = grids[0].delta
    if any(gr.delta != delta for gr in grids):
        raise ParameterError("all grids in a batch must share the same delta")
    d, m = model.dim_state, model.dim_noise
    n_steps = np.array([gr.n_steps for gr in grids])
    n_max = int(n_steps.max())
    # longest paths first: the live set at step n is then a prefix of the batch
    order = np.argsort(-n_steps, kind="stable")
    n_sorted = n_steps[order]
    live_count = np.searchsorted(-n_sorted, -np.arange(n_max), side="left")

    times = np.zeros((max(n_max, 1), P))
    dws = np.zeros((max(n_max, 1), P, m))
    for q, p in enumerate(order):
        gr = grids[p]
        n = gr.n_steps
        dw = np.asarray(brownian_increments[p], dtype=float).reshape(-1, m)
        if len(dw) < n:
            raise ParameterError(f"path {p} needs {n} Brownian increments, got {len(dw)}")
        times[:n, q] = model.model_time(gr.rho[:n])
        dws[:n, q] = dw[:n]

    track = scheme == TRUNCATED_EM
    radius = policy.radius(delta) if track else np.inf
    kappa = policy.kappa(delta) if track else np.inf
    f, g = model.drift, model.diffusion
    states = np.empty((n_max + 1, P, d))
    x = np.broadcast_to(model.initial_state, (P, d)).copy()
    states[0] = x
    blowup = np.full(P, -1)
    alive = np.ones(P, dtype=bool)
    coef_max = np.zeros(P)

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_max):
            c = live_count[n]
            xs = x[:c]
            t = times[n, :c]
            if track:
                xp = project(xs, radius)
                fx = f(t, xp)
                gx = g(t, xp)
                fn = (fx * fx).sum(axis=-1)
                gn = (gx * gx).sum(axis=(-2, -1))
                np.maximum(coef_max[:c], np.maximum(fn, gn), out=coef_max[:c])
            else:
                fx = f(t, xs)
                gx = g(t, xs)
            xs += fx * delta + np.einsum("pij,pj->pi", gx, dws[n, :c])
            if not track:
                bad = alive[:c] & ~(np.all(np.isfinite(xs), axis=-1)
                                    & (np.max(np.abs(xs), axis=-1) <= BLOWUP_THRESHOLD))
                if bad.any():
                    idx = np.flatnonzero(bad)
                    blowup[idx] = n + 1
                    alive[idx] = False
                    states[n + 1, :c] = xs
                    # freeze blown paths at their last recorded state
                    xs[idx] = states[n, idx]
                    continue
            states[n + 1, :c] = xs

    if track:
        coef_max = np.sqrt(coef_max)

    out = [None] * P
    for q, p in enumerate(order):
        n = int(n_sorted[q])
        b = int(blowup[q])
        kept = states[: (b + 1 if b >= 0 else n + 1), q].copy()
        if track and not np.all(np.isfinite(kept)):
            raise AssertionError("truncated EM produced a non-finite state")
        out[p] = Trajectory(
            grid=grids[p],
            states=kept,
            scheme=scheme,
            blowup_index=b if b >= 0 else None,
            max_coefficient_norm=float(coef_max[q]),
            kappa=kappa,
        )
    return out


def run_path(policy, model, grid, brownian_increments, scheme=TRUNCATED_EM):
    return run_paths(policy, model, [grid], [brownian_increments], scheme)[0]


def evaluate_step_interpolant(traj, t):
    """X_bar(t) = X_{rho_i} for t in [rho_i, rho_{i+1})."""
    grid = traj.grid
    if not 0.0 <= t <= grid.horizon:
        raise DomainError(f"t must lie in [0, {grid.horizon}], got {t}")
    i = int(np.searchsorted(grid.rho, t, side="right")) - 1
    if i >= len(traj.states):
        raise DomainError(f"trajectory blew up before t={t}")
    return traj.states[i]
