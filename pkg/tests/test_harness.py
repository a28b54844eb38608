import math

import numpy as np
import pytest

from tcsde import harness, models
from tcsde.errors import ExperimentError, ParameterError
from tcsde.harness import (
    ExperimentConfig,
    coupled_sup_error,
    moment_boundedness_experiment,
    regress_loglog,
    run_experiment,
    sup_error,
)
from tcsde.rng import path_streams
from tcsde.solver import run_path
from tcsde.subordinator import SubordinatorSpec, sample_path_until
from tcsde.time_change import build_grid, coarsen
from tcsde.truncation import TruncationPolicy

SMALL = dict(delta_fine=1e-4, deltas=(1e-2, 1e-3), n_paths=8)


def test_regress_exact_quarter_power():
    pts = [(d, d**0.25) for d in (1e-2, 1e-3, 1e-4)]
    reg = regress_loglog(pts)
    assert reg.slope == pytest.approx(0.25, abs=1e-12)
    assert reg.r_squared == pytest.approx(1.0, abs=1e-12)


def test_regress_linear_with_constant():
    reg = regress_loglog([(d, 3.0 * d) for d in (0.5, 0.1, 0.01, 0.003)])
    assert reg.slope == pytest.approx(1.0, abs=1e-12)
    assert reg.intercept == pytest.approx(math.log2(3.0), abs=1e-12)


def test_regress_two_points():
    reg = regress_loglog([(0.1, 0.2), (0.01, 0.05)])
    assert reg.slope == pytest.approx(math.log2(0.2 / 0.05) / math.log2(0.1 / 0.01), rel=1e-14)
    assert reg.r_squared == 1.0


@pytest.mark.parametrize("pts", [[(0.1, 0.0), (0.01, 0.1)], [(0.1, -1.0), (0.01, 0.1)],
                                 [(0.1, 1.0)], [(0.1, 1.0), (0.1, 2.0)]])
def test_regress_rejects(pts):
    with pytest.raises(ParameterError):
        regress_loglog(pts)


def test_regress_noisy_r2_in_unit_interval():
    rng = np.random.default_rng(0)
    d = np.logspace(-4, -1, 10)
    reg = regress_loglog(zip(d, d**0.5 * np.exp(rng.normal(0, 0.3, 10))))
    assert 0.0 <= reg.r_squared <= 1.0


@pytest.mark.parametrize("kwargs", [
    dict(epsilon=0.3), dict(epsilon=0.0), dict(pbar=1.5), dict(n_paths=0),
    dict(deltas=(1e-3, 1e-2)), dict(deltas=(1.5e-5,)), dict(delta_fine=0.0),
])
def test_config_validation(kwargs):
    with pytest.raises(ParameterError):
        ExperimentConfig(**kwargs)


def test_config_factors_and_dict():
    cfg = ExperimentConfig()
    assert cfg.factors == (1000, 100, 10)
    d = cfg.as_dict()
    assert d["subordinator"] == {"kind": "stable", "beta": 0.9, "theta": None}
    assert d["deltas"] == [1e-2, 1e-3, 1e-4] and d["seed"] == 42


def test_k1_control_is_bit_identical():
    model = models.example1()
    policy = TruncationPolicy.for_model(model)
    sub_rng, bm_rng = path_streams(42, 0)
    path = sample_path_until(SubordinatorSpec.stable(0.9), 1e-3, 1.0, sub_rng)
    dw = bm_rng.standard_normal((len(path) - 1, 1)) * math.sqrt(1e-3)
    fine = run_path(policy, model, build_grid(path, 1.0), dw)
    coarse = run_path(policy, model, build_grid(coarsen(path, 1), 1.0), harness._block_sum(dw, 1))
    np.testing.assert_array_equal(fine.states, coarse.states)
    assert sup_error(fine, coarse, 1, 2.0) == 0.0
    cfg = ExperimentConfig(delta_fine=1e-3, deltas=(1e-3,), n_paths=1)
    assert coupled_sup_error(cfg, 0) == {1e-3: 0.0}


def test_zero_model_has_zero_error():
    cfg = ExperimentConfig(model="zero", **SMALL)
    rep = run_experiment(cfg)
    assert all(r.mean_sup_error == 0.0 and r.std_error == 0.0 for r in rep.records)
    assert math.isnan(rep.regression.slope)


def test_linear_model_order_one():
    cfg = ExperimentConfig(model="linear-test", subordinator=SubordinatorSpec.drift_only(1.0),
                           delta_fine=1e-4, deltas=(1e-2, 1e-3), n_paths=2)
    rep = run_experiment(cfg)
    assert rep.regression.slope == pytest.approx(1.0, abs=0.1)
    # the sup sits in the first coarse interval, where the coarse path is frozen at Y0
    for rec, k in zip(rep.records, cfg.factors):
        assert rec.rms_error == pytest.approx(1 - (1 - 1e-4) ** (k - 1), rel=1e-9)


def test_report_fields_consistent():
    cfg = ExperimentConfig(**SMALL)
    rep = run_experiment(cfg)
    assert rep.per_path.shape == (8, 2)
    for j, rec in enumerate(rep.records):
        assert rec.mean_sup_error == pytest.approx(np.mean(rep.per_path[:, j]), rel=1e-15)
        assert rec.rms_error == pytest.approx(math.sqrt(rec.mean_sup_error), rel=1e-15)
        assert rec.n_blowups == 0
    assert rep.n_failures == 0


def test_single_path_matches_batched_run():
    cfg = ExperimentConfig(**SMALL)
    rep = run_experiment(cfg)
    one = coupled_sup_error(cfg, 3)
    np.testing.assert_array_equal(list(one.values()), rep.per_path[3])


def test_reproducible_across_thread_counts(monkeypatch):
    cfg = ExperimentConfig(delta_fine=1e-4, deltas=(1e-2, 1e-3), n_paths=120)
    a = run_experiment(cfg, threads=1)
    b = run_experiment(cfg, threads=3)
    np.testing.assert_array_equal(a.per_path, b.per_path)
    monkeypatch.setenv(harness.THREADS_ENV, "2")
    assert harness.thread_count() == 2
    c = run_experiment(cfg)
    np.testing.assert_array_equal(a.per_path, c.per_path)
    assert a.regression == b.regression == c.regression


def test_error_decreases_with_delta():
    cfg = ExperimentConfig(delta_fine=1e-4, deltas=(1e-2, 1e-3, 2e-4), n_paths=50)
    rep = run_experiment(cfg)
    errs = [r.mean_sup_error for r in rep.records]
    stds = [r.std_error for r in rep.records]
    inversions = [i for i in range(2) if errs[i + 1] > errs[i]]
    assert len(inversions) <= 1
    for i in inversions:
        assert errs[i + 1] - errs[i] <= stds[i] + stds[i + 1]


def test_failures_raise(monkeypatch):
    def broken(config, model, policy, indices):
        return np.full((len(indices), len(config.deltas)), np.nan)

    monkeypatch.setattr(harness, "_sup_errors_chunk", broken)
    with pytest.raises(ExperimentError):
        run_experiment(ExperimentConfig(**SMALL))


def test_moments_zero_model():
    cfg = ExperimentConfig(model="zero", pbar=3.0, **SMALL)
    recs = moment_boundedness_experiment(cfg)
    for r in recs:
        assert r.sup_moment == 1.0 and r.max_sup_state == 1.0
        assert r.plain_blowups == 0


def test_moments_example1_bounded():
    cfg = ExperimentConfig(n_paths=20, **{k: v for k, v in SMALL.items() if k != "n_paths"})
    recs = moment_boundedness_experiment(cfg, deltas=(1e-2, 1e-3, 1e-4))
    sups = [r.max_sup_state for r in recs]
    assert max(sups) / min(sups) <= 10
    assert all(np.isfinite(r.sup_moment) for r in recs)
