import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from parmor import siggen
from parmor.errors import AliasedSampling, DuplicateFrequency, ObservabilityFailure


def test_single_block():
    g = siggen.from_frequencies([1.0])
    assert g.nu == 2
    assert np.array_equal(g.S, [[0.0, 1.0], [-1.0, 0.0]])
    assert np.array_equal(g.L.ravel(), [1.0, 1.0])


def test_step_generator():
    g = siggen.from_frequencies([], include_zero=True)
    assert g.nu == 1 and np.array_equal(g.S, [[0.0]]) and np.array_equal(g.L.ravel(), [1.0])
    om = siggen.omega_trajectory(g, [0.0, 3.0, 100.0])
    assert np.all(om == 1.0)


def test_benchmark_interp_grid():
    f = siggen.log_grid(0, 3.1, 50)
    assert f[0] == pytest.approx(1.0) and f[-1] == pytest.approx(10**3.1)
    assert f[-1] == pytest.approx(1258.9, abs=0.1)
    g = siggen.from_frequencies(f)
    assert g.nu == 100
    ev = g.eigenvalues()
    assert np.allclose(np.asarray(ev).real, 0) and len(set(np.round(ev, 9))) == 100


def test_log_grid_edges():
    assert np.allclose(siggen.log_grid(0, 1, 2), [1, 10])
    assert np.allclose(siggen.log_grid(2, 5, 1), [100])
    assert np.allclose(siggen.parse_interp_grid("0:1:2"), [1, 10])
    with pytest.raises(ValueError):
        siggen.parse_interp_grid("0:1")


def test_duplicates_and_observability():
    with pytest.raises(DuplicateFrequency):
        siggen.from_frequencies([1.0, 1.0])
    with pytest.raises(DuplicateFrequency):
        siggen.from_frequencies([0.0], include_zero=True)
    with pytest.raises(ObservabilityFailure):
        siggen.from_frequencies([1.0, 2.0], L=[1.0, 1.0, 0.0, 0.0])
    with pytest.raises(ObservabilityFailure):
        siggen.from_frequencies([1.0], omega0=[0.0, 0.0])


def test_trajectory_initial_and_rotation():
    g = siggen.from_frequencies([1.0])
    assert np.allclose(siggen.omega_trajectory(g, [0.0]), [[1.0, 1.0]])
    ref = sla.expm(g.S * np.pi / 2) @ np.ones(2)
    assert np.allclose(siggen.omega_trajectory(g, [np.pi / 2])[0], ref, atol=1e-14)
    assert np.allclose(ref, [1.0, -1.0])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.integers(1, 6))
def test_norm_conserved_and_orthogonal(seed, m):
    rng = np.random.default_rng(seed)
    freqs = np.sort(rng.uniform(0.1, 100, m))
    if np.min(np.diff(freqs), initial=1.0) < 1e-6:
        return
    g = siggen.from_frequencies(freqs)
    t = rng.uniform(0, 50, 40)
    om = siggen.omega_trajectory(g, t)
    assert np.max(np.abs(np.linalg.norm(om, axis=1) - np.linalg.norm(g.omega0))) <= 1e-12 * np.sqrt(g.nu) * 10
    E = g.expm(float(t[0]))
    assert np.linalg.norm(E.T @ E - np.eye(g.nu)) <= 1e-12


def test_sampling_rank_and_aliasing():
    g = siggen.from_frequencies([1.0, 2.0])
    t = np.linspace(0, 3, 8)
    assert np.linalg.matrix_rank(siggen.check_sampling(g, t)) == 4
    with pytest.raises(AliasedSampling):
        siggen.check_sampling(g, np.pi * np.arange(8))


def test_input_signal():
    g = siggen.from_frequencies([2.0])
    t = np.linspace(0, 1, 5)
    assert np.allclose(siggen.input_signal(g, t), 2 * np.cos(2 * t))


def test_save_load(tmp_path):
    g = siggen.from_frequencies([1.0, 5.0], include_zero=True)
    siggen.save_generator(g, tmp_path / "g.json")
    h = siggen.load_generator(tmp_path / "g.json")
    assert np.array_equal(h.S, g.S) and np.array_equal(h.L, g.L) and np.array_equal(h.omega0, g.omega0)
