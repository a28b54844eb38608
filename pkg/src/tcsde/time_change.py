"""Discretised inverse subordinator E_delta and the random real-time grid."""

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DomainError, ParameterError
from .subordinator import SubordinatorPath


@dataclass(frozen=True)
class TimeChangeGrid:
    """Real-time grid rho_0 = 0 < rho_1 < ... < rho_{N+1}, rho_N <= T < rho_{N+1}."""

    delta: float
    rho: np.ndarray
    horizon: float

    @property
    def n_steps(self):
        """N, the index of the last grid point inside [0, T]."""
        return len(self.rho) - 2

    @property
    def usable(self):
        """The grid points rho_0..rho_N that lie in [0, T]."""
        return self.rho[:-1]


def build_grid(path, horizon):
    cum = path.cumulative
    stop = int(np.searchsorted(cum, horizon, side="right"))
    if stop >= len(cum):
        raise CoverageError(
            f"path ends at D={cum[-1]!r}, which does not exceed T={horizon!r}"
        )
    return TimeChangeGrid(delta=path.delta, rho=cum[: stop + 1], horizon=float(horizon))


def _index(grid, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > grid.horizon):
        raise DomainError(f"t must lie in [0, {grid.horizon}]")
    # right-continuous: t == rho_i belongs to [rho_i, rho_{i+1})
    return np.searchsorted(grid.rho, t, side="right") - 1


def evaluate_E(grid, t):
    """E_delta(t) = i * delta for t in [rho_i, rho_{i+1})."""
    i = _index(grid, t)
    out = i * grid.delta
    return float(out) if np.ndim(out) == 0 else out


def coarsen(fine, k):
    """Path with step k * delta whose points are every k-th point of ``fine``.

    Coarse values are copied from the fine cumulative sequence rather than
    re-summed, so coarse grid points coincide bit-for-bit with fine ones.
    A trailing partial block is dropped.
    """
    k = int(k)
    if k < 1:
        raise ParameterError(f"coarsening factor must be >= 1, got {k}")
    if k == 1:
        return fine
    return SubordinatorPath(delta=k * fine.delta, cumulative=fine.cumulative[::k].copy())
