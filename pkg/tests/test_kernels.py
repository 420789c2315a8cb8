"""The numba loop kernels and the numpy kernels must agree."""
import numpy as np
import pytest

from recaudit import kernels
from recaudit._accel import NUMBA_ENABLED, backend
from recaudit.louvain import louvain

from conftest import random_weight_matrix


def test_backend_reported():
    assert backend() in ("numba", "numpy")
    assert (backend() == "numba") == NUMBA_ENABLED


@pytest.mark.parametrize("seed", range(5))
def test_coexposure_counts_agree(seed):
    rng = np.random.default_rng(seed)
    x = (rng.random((15, 40)) < 0.3).astype(np.int8)
    assert np.array_equal(kernels.coexposure_counts_loop(x), kernels.coexposure_counts_numpy(x))


@pytest.mark.parametrize("seed", range(5))
def test_barrat_agree(seed):
    rng = np.random.default_rng(seed)
    w = random_weight_matrix(rng, 14).astype(np.float64)
    a = w > 2
    assert np.allclose(kernels.barrat_numerators_loop(w * a, a), kernels.barrat_numerators_numpy(w * a, a), atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_local_move_agree(seed):
    rng = np.random.default_rng(seed)
    adj = random_weight_matrix(rng, 20, max_w=5).astype(np.float64)
    order = rng.permutation(20).astype(np.int64)
    c1 = np.arange(20, dtype=np.int64)
    c2 = c1.copy()
    m1 = kernels.louvain_local_move_loop(adj, order, 1.0, c1)
    m2 = kernels.louvain_local_move_numpy(adj, order, 1.0, c2)
    assert m1 == m2 and np.array_equal(c1, c2)


@pytest.mark.parametrize("seed", range(3))
def test_aggregate_agree(seed):
    rng = np.random.default_rng(seed)
    adj = random_weight_matrix(rng, 12).astype(np.float64)
    comm = rng.integers(0, 4, 12).astype(np.int64)
    agg = kernels.aggregate_adjacency_loop(adj, comm, 4)
    assert np.allclose(agg, kernels.aggregate_adjacency_numpy(adj, comm, 4))
    assert agg.sum() == pytest.approx(adj.sum())


@pytest.mark.parametrize("seed", range(3))
def test_sim_step_agree(seed):
    rng = np.random.default_rng(seed)
    x = rng.random((30, 21))
    x /= x.sum(1, keepdims=True)
    gender = np.repeat([0, 1], 15).astype(np.int64)
    n1, p1 = kernels.sim_step_loop(x, gender, 0.2, 0.05, 0.1)
    n2, p2 = kernels.sim_step_numpy(x, gender, 0.2, 0.05, 0.1)
    assert np.allclose(n1, n2, atol=1e-13) and np.allclose(p1, p2, atol=1e-13)


@pytest.mark.parametrize("seed", range(3))
def test_sample_categorical_agree(seed):
    rng = np.random.default_rng(seed)
    p = rng.random((10, 7))
    p /= p.sum(1, keepdims=True)
    u = rng.random((10, 50))
    assert np.array_equal(kernels.sample_categorical_loop(p, u), kernels.sample_categorical_numpy(p, u))


def test_louvain_same_partition_both_backends(monkeypatch):
    rng = np.random.default_rng(4)
    adj = random_weight_matrix(rng, 30, max_w=4).astype(np.float64)
    results = []
    for move, agg in ((kernels.louvain_local_move_loop, kernels.aggregate_adjacency_loop),
                      (kernels.louvain_local_move_numpy, kernels.aggregate_adjacency_numpy)):
        monkeypatch.setattr(kernels, "louvain_local_move", move)
        monkeypatch.setattr(kernels, "aggregate_adjacency", agg)
        results.append(louvain(adj, seed=3))
    assert np.array_equal(results[0], results[1])


def test_env_flag_forces_numpy():
    import os
    import subprocess
    import sys

    code = ("from recaudit import kernels, _accel; "
            "print(_accel.backend(), kernels.coexposure_counts is kernels.coexposure_counts_numpy)")
    env = dict(os.environ, RECAUDIT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout
    assert out.split() == ["numpy", "True"]


def test_numpy_backend_simulation_matches(tmp_path):
    """A short simulation agrees across backends to rounding error."""
    import os
    import subprocess
    import sys

    code = ("import numpy as np; from recaudit.simulator import SimConfig, run_simulation; "
            "t = run_simulation(SimConfig(n_agents=20, n_steps=30, seed=2, record_sources=True)); "
            f"np.save(r'{tmp_path}/' + __import__('recaudit._accel').__dict__['_accel'].backend() + '.npy', t.final)")
    for flag in ("0", "1"):
        env = dict(os.environ, RECAUDIT_DISABLE_NUMBA=flag)
        subprocess.run([sys.executable, "-c", code], env=env, check=True)
    a, b = np.load(tmp_path / "numba.npy"), np.load(tmp_path / "numpy.npy")
    assert np.allclose(a, b, atol=1e-12)
