"""Coupled Monte Carlo estimation of strong errors and their convergence order.

For each trajectory one fine subordinator path and one fine Brownian path are
drawn. Every coarse step k * delta_fine reuses them: the coarse grid keeps
every k-th fine grid point and the coarse Brownian increments are block sums
of the fine ones. The fine truncated-EM solution stands in for the exact one.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
import math
import os

import numpy as np

from . import rng as rngmod
from .errors import ExperimentError, ParameterError
from .models import get_model
from .solver import PLAIN_EM, TRUNCATED_EM, run_paths
from .subordinator import SubordinatorSpec, sample_path_until
from .time_change import build_grid, coarsen
from .truncation import TruncationPolicy

# paths per batch; fixed so results do not depend on the number of threads
CHUNK_SIZE = 50
THREADS_ENV = "TCSDE_THREADS"
MAX_FAILURE_FRACTION = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "example1"
    subordinator: SubordinatorSpec = field(default_factory=lambda: SubordinatorSpec.stable(0.9))
    epsilon: float = 0.25
    pbar: float = 2.0
    delta_fine: float = 1e-5
    deltas: tuple = (1e-2, 1e-3, 1e-4)
    n_paths: int = 100
    horizon: float = None
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        if not 0.0 < self.epsilon <= 0.25:
            raise ParameterError(f"epsilon must lie in (0, 1/4], got {self.epsilon}")
        if self.pbar < 2:
            raise ParameterError(f"pbar must be >= 2, got {self.pbar}")
        if not self.delta_fine > 0:
            raise ParameterError(f"delta_fine must be positive, got {self.delta_fine}")
        if self.n_paths < 1:
            raise ParameterError(f"n_paths must be >= 1, got {self.n_paths}")
        if any(a <= b for a, b in zip(self.deltas, self.deltas[1:])):
            raise ParameterError("deltas must be strictly decreasing")
        self.factors  # validates multiples

    @property
    def factors(self):
        """Integer ratios delta / delta_fine."""
        out = []
        for d in self.deltas:
            k = round(d / self.delta_fine)
            if k < 1 or abs(k * self.delta_fine - d) > 1e-9 * d:
                raise ParameterError(
                    f"delta {d!r} is not an integer multiple of delta_fine {self.delta_fine!r}"
                )
            out.append(int(k))
        return tuple(out)

    def resolved_horizon(self, model):
        return model.horizon if self.horizon is None else float(self.horizon)

    def as_dict(self):
        d = asdict(self)
        d["subordinator"] = self.subordinator.as_dict()
        d["deltas"] = list(self.deltas)
        return d


@dataclass(frozen=True)
class Regression:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class DeltaRecord:
    delta: float
    mean_sup_error: float
    std_error: float
    n_blowups: int
    pbar: float

    @property
    def rms_error(self):
        """(E sup |Y - X_bar|^pbar)^(1/pbar)."""
        return self.mean_sup_error ** (1.0 / self.pbar)


@dataclass
class ErrorReport:
    config: ExperimentConfig
    records: list
    regression: Regression
    n_failures: int = 0
    per_path: np.ndarray = None


def regress_loglog(points):
    """Least squares fit of log2(error) against log2(delta)."""
    pts = list(points)
    if len(pts) < 2:
        raise ParameterError("need at least two points")
    delta = np.array([p[0] for p in pts], dtype=float)
    err = np.array([p[1] for p in pts], dtype=float)
    if np.any(delta <= 0) or np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise ParameterError("log-log regression needs positive finite values")
    x, y = np.log2(delta), np.log2(err)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise ParameterError("step sizes must not all be equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return Regression(slope, intercept, r2)


def thread_count(requested=None):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


def _chunks(n, size=CHUNK_SIZE):
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def _block_sum(dw, k):
    if k == 1:
        return dw
    return dw.reshape(-1, k, dw.shape[-1]).sum(axis=1)


def _sup_errors_chunk(config, model, policy, indices):
    """Per-path sup errors |X_fine - X_coarse|^pbar for one batch of paths."""
    T = config.resolved_horizon(model)
    factors = config.factors
    lcm = math.lcm(*factors) if factors else 1
    m = model.dim_noise
    fine_paths, fine_dw = [], []
    for i in indices:
        sub_rng, bm_rng = rngmod.path_streams(config.seed, i)
        path = sample_path_until(config.subordinator, config.delta_fine, T, sub_rng,
                                 multiple_of=lcm)
        fine_paths.append(path)
        n = len(path) - 1
        fine_dw.append(bm_rng.standard_normal((n, m)) * math.sqrt(config.delta_fine))

    fine_grids = [build_grid(p, T) for p in fine_paths]
    fine = run_paths(policy, model, fine_grids, fine_dw, TRUNCATED_EM)

    errors = np.zeros((len(indices), len(factors)))
    for j, k in enumerate(factors):
        grids = [build_grid(coarsen(p, k), T) for p in fine_paths]
        dws = [_block_sum(dw, k) for dw in fine_dw]
        coarse = run_paths(policy, model, grids, dws, TRUNCATED_EM)
        for q, (ft, ct) in enumerate(zip(fine, coarse)):
            errors[q, j] = sup_error(ft, ct, k, config.pbar)
    return errors


def sup_error(fine_traj, coarse_traj, k, pbar):
    """sup over fine grid points in [0, T] of |X_bar_fine - X_bar_coarse|^pbar.

    Exact for the two step interpolants: the coarse grid point rho'_j is the
    fine point rho_{jk}, so fine point i lies in coarse interval i // k.
    """
    xf = fine_traj.states
    idx = np.arange(len(xf)) // k
    diff = xf - coarse_traj.states[idx]
    return float(np.max(np.sqrt(np.sum(diff * diff, axis=-1)))) ** pbar


def coupled_sup_error(config, path_index):
    """Sup errors of one trajectory, keyed by delta."""
    model = get_model(config.model)
    policy = TruncationPolicy.for_model(model, config.epsilon)
    errs = _sup_errors_chunk(config, model, policy, [path_index])[0]
    return dict(zip(config.deltas, errs.tolist()))


def _map_chunks(fn, chunks, threads):
    if threads <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def run_experiment(config, threads=None):
    model = get_model(config.model)
    policy = TruncationPolicy.for_model(model, config.epsilon)
    for d in (config.delta_fine, *config.deltas):
        policy.radius(d)  # fail fast on an inadmissible step

    chunks = _chunks(config.n_paths)
    parts = _map_chunks(lambda c: _sup_errors_chunk(config, model, policy, c),
                        chunks, thread_count(threads))
    per_path = np.concatenate(parts, axis=0)

    ok = np.all(np.isfinite(per_path), axis=1)
    n_fail = int(np.sum(~ok))
    if n_fail > MAX_FAILURE_FRACTION * config.n_paths:
        raise ExperimentError(f"{n_fail} of {config.n_paths} trajectories failed")
    good = per_path[ok]
    records = []
    for j, d in enumerate(config.deltas):
        col = good[:, j]
        std = float(np.std(col, ddof=1)) / math.sqrt(len(col)) if len(col) > 1 else 0.0
        records.append(DeltaRecord(d, float(np.mean(col)), std, 0, config.pbar))
    positive = [(r.delta, r.rms_error) for r in records if r.rms_error > 0]
    if len(positive) >= 2:
        reg = regress_loglog(positive)
    else:
        reg = Regression(math.nan, math.nan, math.nan)
    return ErrorReport(config, records, reg, n_fail, per_path)


@dataclass(frozen=True)
class MomentRecord:
    delta: float
    max_sup_state: float
    sup_moment: float
    plain_max_sup_state: float
    plain_blowups: int


def moment_boundedness_experiment(config, deltas=None, threads=None):
    """Compare sup_n |X_n| of truncated and plain EM across step sizes.

    Each step size gets its own independent paths (streams keyed by path index
    and step index); both schemes share the same inputs.
    """
    model = get_model(config.model)
    policy = TruncationPolicy.for_model(model, config.epsilon)
    deltas = tuple(config.deltas if deltas is None else deltas)
    T = config.resolved_horizon(model)
    p = config.pbar

    def chunk(indices, j, delta):
        grids, dws = [], []
        for i in indices:
            sub_rng, bm_rng = rngmod.path_streams(config.seed, i, j + 1)
            path = sample_path_until(config.subordinator, delta, T, sub_rng)
            grids.append(build_grid(path, T))
            dws.append(bm_rng.standard_normal((len(path) - 1, model.dim_noise))
                       * math.sqrt(delta))
        trunc = run_paths(policy, model, grids, dws, TRUNCATED_EM)
        plain = run_paths(policy, model, grids, dws, PLAIN_EM)
        sup_t = [float(np.max(np.linalg.norm(t.states, axis=-1))) for t in trunc]
        sup_p = [float(np.max(np.linalg.norm(t.states[: t.blowup_index or None], axis=-1)))
                 if not t.blew_up else math.inf for t in plain]
        return sup_t, sup_p

    threads = thread_count(threads)
    records = []
    for j, delta in enumerate(deltas):
        policy.radius(delta)
        parts = _map_chunks(lambda c: chunk(c, j, delta), _chunks(config.n_paths), threads)
        sup_t = np.concatenate([a for a, _ in parts])
        sup_p = np.concatenate([b for _, b in parts])
        finite = sup_p[np.isfinite(sup_p)]
        records.append(MomentRecord(
            delta=delta,
            max_sup_state=float(np.max(sup_t)),
            sup_moment=float(np.mean(sup_t**p)),
            plain_max_sup_state=float(np.max(finite)) if finite.size else math.nan,
            plain_blowups=int(np.sum(~np.isfinite(sup_p))),
        ))
    return records
