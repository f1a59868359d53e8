from __future__ import annotations

import numpy as np
import pytest

from stochclifford.process import (
    PathConfig,
    ProcessPath,
    bm_square_compensated,
    bm_square_minus_t,
    drifted,
    first_hit,
    first_hit_indices,
    mart_norm_estimate,
    martingale_test,
    paravector_norm_squared,
    quadratic_covariation,
    reduce_ensemble,
    reflect_path,
    sample_bm,
    sample_ensemble,
)


def config(n=2, steps=20, seed=11, start=None):
    return PathConfig(n, start or (0.0,) * (n + 1), 1.0, steps, seed)


def test_sample_bm_is_deterministic():
    a, b = sample_bm(config()), sample_bm(config())
    np.testing.assert_array_equal(a.states, b.states)
    assert not np.array_equal(a.states, sample_bm(config(seed=12)).states)


def test_path_zero_of_ensemble_is_sample_bm():
    ens = sample_ensemble(config(), 10)
    np.testing.assert_array_equal(ens.states[0], sample_bm(config()).states)


def test_ensemble_is_thread_independent():
    a = sample_ensemble(config(), 300, threads=1, block_size=64)
    b = sample_ensemble(config(), 300, threads=4, block_size=64)
    np.testing.assert_array_equal(a.states, b.states)


def test_decomposition_is_consistent():
    ens = sample_ensemble(config(start=(1.0, 2.0, 3.0)), 5)
    np.testing.assert_allclose(ens.states, ens.states[:, :1] + ens.martingale_part + ens.fv_part)


def test_increment_moments():
    cfg = config(n=1, steps=4)
    mom = reduce_ensemble(cfg, 40000, lambda e: np.diff(e.states, axis=1).reshape(len(e), -1))
    assert np.all(np.abs(mom.mean) < 4 * mom.stderr)
    np.testing.assert_allclose(mom.variance, cfg.dt, rtol=0.05)


def test_bad_configs_raise():
    with pytest.raises(ValueError):
        PathConfig(0, (0.0,), 1.0, 10)
    with pytest.raises(ValueError):
        PathConfig(2, (0.0, 0.0), 1.0, 10)
    with pytest.raises(ValueError):
        PathConfig(1, (0.0, 0.0), -1.0, 10)
    with pytest.raises(ValueError):
        PathConfig(1, (0.0, 0.0), 1.0, 0)
    with pytest.raises(ValueError):
        ProcessPath(np.array([0.0, 0.5, 0.4]), np.zeros((3, 2)))


def test_bm_passes_martingale_test():
    ens = sample_ensemble(config(steps=10), 20000)
    assert martingale_test(ens, 0.5, 1.0).passed


def test_drifted_control_fails_martingale_test():
    ens = sample_ensemble(config(steps=10), 20000)
    assert not martingale_test(ens, 0.5, 1.0, process=drifted(1, 1.0)).passed


def test_clifford_square_minus_t_drifts():
    # E[B^2(t) - B^2(s)] = (1 - n)(t - s) in Cl(n), so B^2 - t is not a martingale
    n = 2
    ens = sample_ensemble(config(n=n, steps=10), 40000)
    bad = martingale_test(ens, 0.5, 1.0, process=bm_square_minus_t)
    assert not bad.passed
    one = [e for e in bad.entries if e.functional == "one" and e.component == 0][0]
    assert one.mean == pytest.approx(-n * 0.5, abs=5 * one.stderr)
    assert martingale_test(ens, 0.5, 1.0, process=bm_square_compensated).passed


def test_martingale_test_rejects_bad_times():
    ens = sample_ensemble(config(steps=10), 10)
    with pytest.raises(ValueError):
        martingale_test(ens, 0.8, 0.5)
    with pytest.raises(ValueError):
        martingale_test(ens, 0.25, 0.55)


def test_quadratic_covariation():
    ens = sample_ensemble(config(n=1, steps=2000), 1)
    path = ens.path(0)
    np.testing.assert_allclose(quadratic_covariation(path, 0, 0)[-1], 1.0, atol=0.15)
    assert abs(quadratic_covariation(path, 0, 1)[-1]) < 0.15
    assert quadratic_covariation(path, 1, 1)[0] == 0.0
    with pytest.raises(IndexError):
        quadratic_covariation(path, 0, 2)


def test_reflect_path():
    path = sample_bm(config(steps=10))
    ref = reflect_path(path, 4)
    np.testing.assert_array_equal(ref.states[:5], path.states[:5])
    np.testing.assert_allclose(ref.states[7] - path.states[4], path.states[4] - path.states[7])
    # reflecting twice returns the original path
    np.testing.assert_allclose(reflect_path(ref, 4).states, path.states)
    with pytest.raises(IndexError):
        reflect_path(path, 11)


def test_first_hit():
    times = np.linspace(0.0, 1.0, 5)
    states = np.array([[0.0, 0.0], [0.5, 0.0], [1.5, 0.0], [0.2, 0.0], [2.0, 0.0]])
    path = ProcessPath(times, states)
    hit = first_hit(path, lambda x: x[..., 0] > 1.0)
    assert (hit.stop_index, hit.stop_reason, hit.stop_time) == (2, "boundary-hit", 0.5)
    miss = first_hit(path, lambda x: x[..., 0] > 5.0)
    assert (miss.stop_index, miss.stop_reason) == (4, "time-exhausted")


def test_first_hit_indices_matches_scalar_version():
    ens = sample_ensemble(config(n=1, steps=50), 30)
    region = lambda x: x[..., 1] > 0.5  # noqa: E731
    idx, hit = first_hit_indices(ens, region)
    for i in range(len(ens)):
        stopped = first_hit(ens.path(i), region)
        assert stopped.stop_index == idx[i]
        assert (stopped.stop_reason == "boundary-hit") == hit[i]


def test_mart_norm_estimate_obeys_doob_bound():
    # E[|B(T)|^2] <= E[sup |B|^2] <= 4 E[|B(T)|^2] with E[|B(T)|^2] = (n+1) T
    ens = sample_ensemble(config(n=2, steps=100), 4000)
    est = mart_norm_estimate(ens)
    assert np.sqrt(3.0) * 0.95 <= est <= 2.0 * np.sqrt(3.0)
    assert mart_norm_estimate(ens, t_max=0.5) < est
    with pytest.raises(ValueError):
        mart_norm_estimate([])


def test_paravector_norm_squared_matches_euclidean():
    x = np.random.default_rng(0).normal(size=(5, 4))
    np.testing.assert_allclose(paravector_norm_squared(x), np.sum(x * x, axis=-1))


def test_path_csv():
    text = sample_bm(config(n=1, steps=2)).to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "t,x_0,x_1"
    assert len(lines) == 4
