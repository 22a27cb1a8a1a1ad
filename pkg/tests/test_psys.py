import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parmor import psys
from parmor.errors import NonAnalyticCoefficient, ParameterOutOfRange, SingularShift
from parmor.psys import CoefficientFunction, ParametricLTI


class TestCoefficientFunction:
    def test_tabulated_node_exact(self):
        f = CoefficientFunction.tabulated([0.0, 0.5, 1.0], [1.0, 3.0, -2.0])
        assert f(0.5) == 3.0 and f(0.25) == pytest.approx(2.0)
        with pytest.raises(ParameterOutOfRange):
            f(1.5)
        with pytest.raises(NonAnalyticCoefficient):
            f.taylor(0.5, 2)

    @pytest.mark.parametrize(
        "f",
        [
            CoefficientFunction.polynomial([1.0, -2.0, 0.5, 3.0]),
            CoefficientFunction.sinusoid(1.3, 2.0, 0.4),
            CoefficientFunction.exponential(-1.5, 2.0),
        ],
    )
    def test_taylor_remainder(self, f):
        p0, M = 0.3, 3
        c = f.taylor(p0, M)
        errs = []
        for d in (1e-1, 5e-2):
            approx = sum(ck * d**k for k, ck in enumerate(c))
            errs.append(abs(f(p0 + d) - approx))
        # remainder is O(d^(M+1)); halving d shrinks it by about 16
        assert errs[1] <= errs[0] / 8 + 1e-14

    def test_roundtrip(self):
        for f in (
            CoefficientFunction.polynomial([1, 2]),
            CoefficientFunction.sinusoid(1, 2, 3),
            CoefficientFunction.exponential(0.5, 2),
            CoefficientFunction.tabulated([0, 1], [2, 3]),
        ):
            assert CoefficientFunction.from_dict(f.to_dict()) == f


class TestBenchmark:
    def test_dimensions_full(self):
        sysm = psys.make_benchmark(500)
        assert sysm.n == 1000
        a, b = psys.benchmark_coefficients(500)
        assert (a[0], a[-1], b[0], b[-1]) == (-1000.0, -10.0, 10.0, 1000.0)

    def test_small_k(self):
        a, b = psys.benchmark_coefficients(1)
        assert a[0] == -1000.0 and b[0] == 10.0
        a, b = psys.benchmark_coefficients(2)
        assert list(a) == [-1000.0, -10.0] and list(b) == [10.0, 1000.0]

    def test_eval_at_zero_and_center(self):
        sysm = psys.make_benchmark(3)
        a, b = psys.benchmark_coefficients(3)
        A = sysm.A(0.55)
        for i in range(3):
            blk = A[2 * i : 2 * i + 2, 2 * i : 2 * i + 2]
            assert np.allclose(blk, [[0.55 * a[i], b[i]], [-b[i], 0.55 * a[i]]])
        B, C = sysm.B(0.55), sysm.C(0.55)
        assert np.allclose(B.ravel(), [2, 0] * 3) and np.allclose(C.ravel(), [1, 0] * 3)

    def test_eval_at_zero_unrestricted(self):
        sysm = psys.make_benchmark(2, param_interval=(0.0, 1.0))
        a_only = sysm.A(0.0)
        assert np.allclose(np.diag(a_only), 0.0)

    def test_out_of_range(self, bench2):
        with pytest.raises(ParameterOutOfRange):
            bench2.eval(1.5)

    def test_spectrum(self):
        for k in (1, 4, 10):
            sysm = psys.make_benchmark(k)
            a, b = psys.benchmark_coefficients(k)
            for p in (0.1, 0.55, 1.0):
                ev = np.sort_complex(np.linalg.eigvals(sysm.A(p)))
                ref = np.sort_complex(np.concatenate([p * a + 1j * b, p * a - 1j * b]))
                assert np.allclose(ev, ref, atol=1e-8)


class TestTransfer:
    def test_single_block_dc(self):
        sysm = psys.make_benchmark(1, a_range=(-10.0, -10.0), b_range=(10.0, 10.0))
        A = np.array([[-10.0, 10.0], [-10.0, -10.0]])
        a, b, c, d = A.ravel()
        inv = np.array([[d, -b], [-c, a]]) / (a * d - b * c)
        ref = (np.array([[1.0, 0.0]]) @ (-inv) @ np.array([[2.0], [0.0]])).item()
        assert psys.transfer(sysm, 1.0, 0.0) == pytest.approx(ref, rel=1e-13)
        assert ref == pytest.approx(0.1)

    def test_dense_oracle(self, bench2):
        A, B, C = bench2.eval(0.1)
        ref = (C @ np.linalg.solve(10j * np.eye(4) - A, B)).item()
        assert psys.transfer(bench2, 0.1, 10j) == pytest.approx(ref, rel=1e-12)

    def test_singular_shift(self):
        sysm = ParametricLTI.affine([[0.0]], [[1.0]], [[1.0]], param_interval=(0, 1))
        with pytest.raises(SingularShift):
            psys.transfer(sysm, 0.5, 0.0)

    @settings(max_examples=30, deadline=None)
    @given(p=st.floats(0.1, 1.0), re=st.floats(-5, 5), im=st.floats(-2000, 2000))
    def test_conjugate_symmetry(self, p, re, im):
        sysm = psys.make_benchmark(3)
        s = complex(re, im)
        w = psys.transfer(sysm, p, s)
        wc = psys.transfer(sysm, p, s.conjugate())
        assert abs(wc - np.conj(w)) <= 1e-12 * abs(w) + 1e-300

    def test_affine_symbolic(self):
        A0 = np.array([[-1.0, 0.3], [0.0, -2.0]])
        A1 = np.array([[0.5, 0.0], [1.0, -1.0]])
        B0 = np.array([[1.0], [0.0]])
        B1 = np.array([[0.0], [1.0]])
        C0 = np.array([[1.0, 1.0]])
        sysm = ParametricLTI.affine(
            A0,
            B0,
            C0,
            A_terms=[(CoefficientFunction.sinusoid(1, 1), A1)],
            B_terms=[(CoefficientFunction.polynomial([0, 0, 1]), B1)],
            param_interval=(0, 1),
        )
        p, s = 0.7, 1 + 2j
        A = A0 + np.sin(p) * A1
        B = B0 + p**2 * B1
        ref = (C0 @ np.linalg.solve(s * np.eye(2) - A, B)).item()
        assert psys.transfer(sysm, p, s) == pytest.approx(ref, rel=1e-12)


def test_stability_grid():
    rep = psys.check_stability_grid(psys.make_benchmark(4), [0.1, 0.55, 1.0])
    assert rep.passed
    sc = ParametricLTI.affine([[-0.5]], [[1.0]], [[1.0]], A_terms=[(CoefficientFunction.identity(), [[1.0]])],
                              param_interval=(0, 1))
    rep = psys.check_stability_grid(sc, [0.0, 0.25, 1.0])
    assert not rep.passed and rep.failures == [1.0]
    with pytest.warns(UserWarning):
        assert psys.check_stability_grid(sc, []).passed


def test_interval_invariant():
    with pytest.raises(ValueError):
        ParametricLTI.affine([[-1.0]], [[1.0]], [[1.0]], param_interval=(1, 1))


def test_save_load_roundtrip(tmp_path):
    sysm = psys.make_benchmark(5)
    path = tmp_path / "s.json"
    psys.save_system(sysm, path)
    back = psys.load_system(path)
    for p in (0.1, 0.4, 1.0):
        for m1, m2 in zip(sysm.eval(p), back.eval(p)):
            assert np.allclose(m1, m2, rtol=1e-12, atol=0)


def test_passivity_spec():
    assert psys.DissipativitySpec.passivity()(0.3) == (0.0, 0.5, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert psys.DissipativitySpec.l2_gain(2.0)(0.0) == (-1.0, 0.0, 4.0)
