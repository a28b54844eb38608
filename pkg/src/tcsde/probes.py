"""Numerical screening of the four structural conditions on (f, g).

Each probe estimates a sup-type constant from random points, so it yields a
lower bound on the true constant. A probe passes when its estimate looks
stable: under more samples (local Lipschitz), under a doubled ball radius
(monotonicity, Khasminskii) or under finer time separations (Holder). These
are screening tests, not proofs.

Ball probes are drawn in the unit ball and then scaled by the radius, so the
estimates at radius R and 2R use the same normalised points.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, ParameterError

DOUBLING_TOLERANCE = 1.2
RADIUS_GROWTH_TOLERANCE = 0.05
HOLDER_SCALES = tuple(10.0**-k for k in range(1, 9))


@dataclass
class AssumptionReport:
    assumption: str
    constant_estimate: float
    max_violation_statistic: float
    witness: dict
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "assumption": self.assumption,
            "constant_estimate": self.constant_estimate,
            "max_violation_statistic": self.max_violation_statistic,
            "witness": self.witness,
            "passed": self.passed,
            "details": self.details,
        }


def _unit_ball(rng, n, d):
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return v * rng.random((n, 1)) ** (1.0 / d)


def _unit_pairs(rng, n, d):
    """Half independent pairs, half close pairs (where ratio sups often sit)."""
    x = _unit_ball(rng, n, d)
    y = _unit_ball(rng, n, d)
    half = n // 2
    near = x[:half] + 1e-3 * rng.standard_normal((half, d))
    norm = np.linalg.norm(near, axis=-1, keepdims=True)
    y[:half] = np.where(norm > 1.0, near / norm, near)
    return x, y


def _times(rng, model, n):
    a, b = model.time_domain
    t = rng.uniform(a, b, n)
    t[: n // 20] = a
    t[n // 20: n // 10] = b
    return t


def _norm(v, axes=-1):
    return np.sqrt(np.sum(v * v, axis=axes))


def _finite(model, values, t, x):
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ModelError(f"model {model.name!r} is not finite at t={t[i]!r}, x={x[i].tolist()}",
                         witness={"t": float(t[i]), "x": x[i].tolist()})


def _pair_witness(t, x, y, i):
    return {"t": float(t[i]), "x": x[i].tolist(), "y": y[i].tolist()}


def _lipschitz_ratio(model, t, x, y):
    df = _norm(model.drift(t, x) - model.drift(t, y))
    dg = _norm(model.diffusion(t, x) - model.diffusion(t, y), (-2, -1))
    a = model.alpha
    denom = (1.0 + _norm(x) ** a + _norm(y) ** a) * _norm(x - y)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.maximum(df, dg) / denom
    ratio = np.where(denom > 0, ratio, 0.0)
    _finite(model, ratio, t, x)
    return ratio


def probe_assumption_1(model, n_probes=10_000, ball_radius=3.0, rng=None):
    """Local Lipschitz: |f(t,x)-f(t,y)| v |g(t,x)-g(t,y)| <= L(1+|x|^a+|y|^a)|x-y|."""
    if n_probes < 1000:
        raise ParameterError("n_probes must be >= 1000")
    rng = np.random.default_rng(0) if rng is None else rng
    n = 2 * n_probes
    x, y = _unit_pairs(rng, n, model.dim_state)
    x, y = ball_radius * x, ball_radius * y
    t = _times(rng, model, n)
    ratio = _lipschitz_ratio(model, t, x, y)
    half = float(np.max(ratio[:n_probes]))
    full = float(np.max(ratio))
    stat = full - DOUBLING_TOLERANCE * half
    i = int(np.argmax(ratio))
    return AssumptionReport(
        assumption="local_lipschitz",
        constant_estimate=full,
        max_violation_statistic=stat,
        witness=_pair_witness(t, x, y, i),
        passed=bool(np.isfinite(full) and stat <= 0.0),
        details={"estimate_n": half, "estimate_2n": full, "n_probes": n_probes,
                 "ball_radius": ball_radius},
    )


def _radius_doubling(name, stat_fn, model, n_probes, ball_radius, rng, pairs):
    d = model.dim_state
    if pairs:
        ux, uy = _unit_pairs(rng, n_probes, d)
    else:
        ux, uy = _unit_ball(rng, n_probes, d), None
    t = _times(rng, model, n_probes)
    estimates, witnesses = [], []
    for radius in (ball_radius, 2.0 * ball_radius):
        args = (radius * ux,) if uy is None else (radius * ux, radius * uy)
        values = stat_fn(t, *args)
        _finite(model, values, t, args[0])
        i = int(np.argmax(values))
        estimates.append(float(values[i]))
        w = {"t": float(t[i]), "x": args[0][i].tolist()}
        if uy is not None:
            w["y"] = args[1][i].tolist()
        witnesses.append(w)
    k_r, k_2r = estimates
    stat = (k_2r - k_r) - RADIUS_GROWTH_TOLERANCE * abs(k_r)
    growth = k_2r / k_r if k_r > 0 else (np.inf if k_2r > 0 else 1.0)
    return AssumptionReport(
        assumption=name,
        constant_estimate=k_2r,
        max_violation_statistic=float(stat),
        witness=witnesses[1],
        passed=bool(np.isfinite(k_2r) and stat <= 0.0),
        details={"estimate_radius": k_r, "estimate_double_radius": k_2r,
                 "growth_ratio": float(growth), "ball_radius": ball_radius,
                 "n_probes": n_probes},
    )


def probe_assumption_2(model, p=3.0, n_probes=10_000, ball_radius=3.0, rng=None):
    """Monotonicity: (x-y)'(f(x)-f(y)) + (5p-1)/2 |g(x)-g(y)|^2 <= K |x-y|^2."""
    if not p > 2:
        raise ParameterError(f"p must exceed 2, got {p}")
    rng = np.random.default_rng(1) if rng is None else rng
    c = (5.0 * p - 1.0) / 2.0

    def stat(t, x, y):
        dx = x - y
        df = model.drift(t, x) - model.drift(t, y)
        dg = model.diffusion(t, x) - model.diffusion(t, y)
        num = np.sum(dx * df, axis=-1) + c * np.sum(dg * dg, axis=(-2, -1))
        den = np.sum(dx * dx, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(den > 0, num / den, -np.inf)

    return _radius_doubling("monotonicity", stat, model, n_probes, ball_radius, rng, pairs=True)


def probe_assumption_3(model, q=3.0, n_probes=10_000, ball_radius=3.0, rng=None):
    """Khasminskii: x'f(t,x) + (5q-1)/2 |g(t,x)|^2 <= K1 (1 + |x|^2)."""
    if not q > 2:
        raise ParameterError(f"q must exceed 2, got {q}")
    rng = np.random.default_rng(2) if rng is None else rng
    c = (5.0 * q - 1.0) / 2.0

    def stat(t, x):
        f = model.drift(t, x)
        g = model.diffusion(t, x)
        num = np.sum(x * f, axis=-1) + c * np.sum(g * g, axis=(-2, -1))
        return num / (1.0 + np.sum(x * x, axis=-1))

    return _radius_doubling("khasminskii", stat, model, n_probes, ball_radius, rng, pairs=False)


def probe_assumption_4(model, n_probes=10_000, rng=None, ball_radius=3.0,
                       gamma_f=None, gamma_g=None):
    """Holder in time: |f(s,x)-f(t,x)| <= H1 (1+|x|^(a+1)) |s-t|^gamma_f, same for g.

    Separations run over a ladder 1e-1 .. 1e-8; a third of the pairs sit at
    each end of the time domain, where non-smooth time factors are worst.
    Passes when the estimate over the four finest separations stays within
    DOUBLING_TOLERANCE of the estimate over the four coarsest.
    """
    rng = np.random.default_rng(3) if rng is None else rng
    gf = model.gamma_f if gamma_f is None else gamma_f
    gg = model.gamma_g if gamma_g is None else gamma_g
    a, b = model.time_domain
    scales = [h for h in HOLDER_SCALES if h < b - a]
    per = max(n_probes // len(scales), 3)
    x = ball_radius * _unit_ball(rng, per, model.dim_state)
    u = rng.random(per)
    weight = 1.0 + _norm(x) ** (model.alpha + 1.0)
    third = per // 3

    h_f, h_g, wit = [], [], []
    for h in scales:
        t = a + u * (b - a - h)
        t[:third] = a
        t[third: 2 * third] = b - h
        s = t + h
        df = _norm(model.drift(s, x) - model.drift(t, x)) / (weight * h**gf)
        dg = _norm(model.diffusion(s, x) - model.diffusion(t, x), (-2, -1)) / (weight * h**gg)
        _finite(model, df, t, x)
        _finite(model, dg, t, x)
        h_f.append(float(np.max(df)))
        h_g.append(float(np.max(dg)))
        i = int(np.argmax(np.maximum(df, dg)))
        wit.append({"s": float(s[i]), "t": float(t[i]), "x": x[i].tolist()})

    half = len(scales) // 2

    def excess(values):
        return max(values[half:]) - DOUBLING_TOLERANCE * max(values[:half])

    stat = max(excess(h_f), excess(h_g))
    H1, H2 = max(h_f), max(h_g)
    best = int(np.argmax(np.maximum(h_f, h_g)))
    return AssumptionReport(
        assumption="holder_time",
        constant_estimate=max(H1, H2),
        max_violation_statistic=float(stat),
        witness=wit[best],
        passed=bool(np.isfinite(stat) and stat <= 0.0),
        details={"H1": H1, "H2": H2, "gamma_f": gf, "gamma_g": gg,
                 "scales": scales, "H1_by_scale": h_f, "H2_by_scale": h_g},
    )


def probe_all(model, n_probes=10_000, ball_radius=3.0, p=3.0, q=3.0, seed=0):
    """Run all four probes with independent seeded streams."""
    from .rng import stream

    return {
        "assumption_1": probe_assumption_1(model, n_probes, ball_radius, stream(seed, 1)),
        "assumption_2": probe_assumption_2(model, p, n_probes, ball_radius, stream(seed, 2)),
        "assumption_3": probe_assumption_3(model, q, n_probes, ball_radius, stream(seed, 3)),
        "assumption_4": probe_assumption_4(model, n_probes, stream(seed, 4), ball_radius),
    }
