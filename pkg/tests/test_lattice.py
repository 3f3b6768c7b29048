"""Lattice/torus functions, transforms, operator applications, norms."""

import math

import numpy as np
import pytest
import scipy.integrate

from fraclat.kernel import FracParams, kernel_1d, kernel_lattice_mass
from fraclat.lattice import (
    LatticeFunction,
    StepProfile,
    TorusFunction,
    apply_frac_lattice,
    apply_frac_torus_pointwise,
    apply_frac_torus_spectral,
    dft,
    idft,
    periodize,
    repeat,
    sobolev_norm,
    symbol,
    transference_check,
)


def random_torus(N, d, seed, sup_one=False):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((2 * N + 1,) * d)
    if sup_one:
        vals /= np.abs(vals).max()
    return TorusFunction(N, d, vals)


class TestDFT:
    def test_delta(self):
        N = 4
        vals = np.zeros(9)
        vals[4] = 1.0  # delta at index 0
        hat = dft(TorusFunction(N, 1, vals))
        assert np.abs(hat - 1.0 / 9.0).max() < 1e-15

    def test_roundtrip(self):
        for d in (1, 2):
            v = random_torus(4, d, 11)
            back = idft(dft(v), 4, d)
            assert np.abs(back.real - v.values).max() < 1e-13

    def test_parseval_direct_sum_oracle(self):
        N = 4
        v = random_torus(N, 1, 5)
        n = 2 * N + 1
        # direct O(n^2) transform as the oracle
        hat_direct = np.array([
            sum(v.values[j + N] * complex(math.cos(2 * math.pi * m * j / n),
                                          -math.sin(2 * math.pi * m * j / n))
                for j in range(-N, N + 1)) / n
            for m in range(-N, N + 1)])
        hat = dft(v)
        assert np.abs(hat - hat_direct).max() < 1e-13
        assert np.sum(np.abs(v.values) ** 2) == pytest.approx(
            n * np.sum(np.abs(hat) ** 2), rel=1e-12)


class TestSymbol:
    def test_zero(self):
        assert symbol(FracParams(0.5, 1.0, 2), [0.0, 0.0]) == 0.0

    def test_peak(self):
        p = FracParams(0.5, 1.0, 3)
        xi = [math.pi] * 3
        assert symbol(p, xi) == pytest.approx((4.0 * 3) ** 0.5, rel=1e-13)

    def test_continuum_limit(self):
        p = FracParams(0.5, 1e-3, 2)
        xi = [1.0, 2.0]
        assert abs(symbol(p, xi) / (1.0 + 4.0) ** 0.5 - 1.0) < 0.01

    def test_periodicity(self):
        p = FracParams(0.3, 0.7, 1)
        assert symbol(p, [1.1]) == pytest.approx(
            symbol(p, [1.1 + 2.0 * math.pi / 0.7]), rel=1e-10)


class TestApplyLattice:
    def test_constant_profile_killed(self):
        p = FracParams(0.5)
        const = LatticeFunction(p, {}, StepProfile(0, 0, 3.3, 3.3))
        for j in range(-4, 5):
            assert apply_frac_lattice(const, j) == pytest.approx(0.0, abs=1e-13)

    def test_delta_single_term(self):
        p = FracParams(0.5)
        u = LatticeFunction(p, {(0,): 1.0})
        assert apply_frac_lattice(u, 5) == pytest.approx(-kernel_1d(p, 5), rel=1e-13)
        assert apply_frac_lattice(u, 0) == pytest.approx(
            kernel_lattice_mass(p), rel=1e-12)

    def test_step_slab_value(self):
        # two-sided step vanishing on {-1,0,1}: operator at 1 is -8/(5 pi)
        p = FracParams(0.5)
        step = LatticeFunction(p, {}, StepProfile(0, 2, -1.0, 1.0))
        assert apply_frac_lattice(step, 1) == pytest.approx(
            -8.0 / (5.0 * math.pi), rel=1e-12)
        assert apply_frac_lattice(step, 0) == 0.0
        assert apply_frac_lattice(step, -1) == pytest.approx(
            8.0 / (5.0 * math.pi), rel=1e-12)

    def test_step_brute_oracle(self):
        p = FracParams(0.5)
        step = LatticeFunction(p, {}, StepProfile(0, 2, -1.0, 1.0))
        j = 3
        uj = step.value(j)
        R = 200000
        brute = sum((uj - step.value(m)) * kernel_1d(p, j - m)
                    for m in range(j - R, j + R + 1) if m != j)
        # brute truncation alone contributes ~ 2*tail(R)
        assert abs(apply_frac_lattice(step, j) - brute) < 1e-5

    def test_step_profile_2d_truncated(self):
        p = FracParams(0.5, 1.0, 2)
        step = LatticeFunction(p, {}, StepProfile(0, 2, -1.0, 1.0))
        val = apply_frac_lattice(step, (0, 3), tol=0.05)
        assert abs(val) < 1e-10  # odd symmetry in the step axis

    def test_step_profile_2d_unreachable_tolerance(self):
        from fraclat.kernel import ToleranceError

        p = FracParams(0.5, 1.0, 2)
        step = LatticeFunction(p, {}, StepProfile(0, 2, -1.0, 1.0))
        with pytest.raises(ToleranceError):
            apply_frac_lattice(step, (1, 0), tol=1e-12)


class TestApplyTorus:
    def test_plane_wave_eigenfunction(self):
        N, k0, s = 6, 3, 0.5
        n = 2 * N + 1
        h = 2.0 * math.pi / n
        j = np.arange(-N, N + 1)
        v = TorusFunction(N, 1, np.cos(2.0 * math.pi * k0 * j / n))
        lam = (4.0 / h ** 2 * math.sin(math.pi * k0 / n) ** 2) ** s
        out = apply_frac_torus_spectral(v, s)
        assert np.abs(out.values - lam * v.values).max() < 1e-12

    def test_constant_killed(self):
        v = TorusFunction(4, 1, np.full(9, 2.2))
        assert np.abs(apply_frac_torus_spectral(v, 0.5).values).max() < 1e-13
        assert np.abs(apply_frac_torus_pointwise(v, 0.5).values).max() < 1e-13

    def test_semigroup_property(self):
        v = random_torus(5, 1, 3)
        a = apply_frac_torus_spectral(apply_frac_torus_spectral(v, 0.25), 0.25)
        b = apply_frac_torus_spectral(v, 0.5)
        assert np.abs(a.values - b.values).max() < 1e-12

    @pytest.mark.parametrize("d,N", [(1, 8), (2, 4)])
    def test_pointwise_matches_spectral(self, d, N):
        for s in (0.25, 0.5, 0.75):
            v = random_torus(N, d, 7, sup_one=True)
            a = apply_frac_torus_pointwise(v, s, tol=1e-11)
            b = apply_frac_torus_spectral(v, s)
            assert np.abs(a.values - b.values).max() < 1e-10

    def test_self_adjoint_and_nonnegative(self):
        N = 6
        u = random_torus(N, 1, 1)
        v = random_torus(N, 1, 2)
        lu = apply_frac_torus_spectral(u, 0.5)
        lv = apply_frac_torus_spectral(v, 0.5)
        lhs = float(np.sum(lu.values * v.values))
        rhs = float(np.sum(u.values * lv.values))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)
        assert float(np.sum(lv.values * v.values)) >= -1e-12


class TestPeriodizeRepeat:
    def test_copy_inside(self):
        p = FracParams(0.5)
        u = LatticeFunction(p, {(2,): 1.5, (-3,): -0.5})
        v = periodize(u, 4)
        assert v.value(2) == 1.5 and v.value(-3) == -0.5
        assert v.values.sum() == pytest.approx(1.0)

    def test_wraparound(self):
        p = FracParams(0.5)
        u = LatticeFunction(p, {(9,): 2.0})  # 9 = 2N+1 for N=4
        v = periodize(u, 4)
        assert v.value(0) == 2.0

    def test_mass_preserved(self):
        p = FracParams(0.5, 1.0, 2)
        rng = np.random.default_rng(0)
        u = LatticeFunction(p, {(int(a), int(b)): float(rng.standard_normal())
                                for a in range(-6, 7) for b in range(-6, 7)})
        v = periodize(u, 3)
        assert v.values.sum() == pytest.approx(sum(u.support.values()), rel=1e-12)

    def test_repeat_periodicity(self):
        v = random_torus(4, 1, 9)
        rv = repeat(v)
        rng = np.random.default_rng(1)
        for _ in range(10):
            m = int(rng.integers(-40, 40))
            assert rv.value(m) == rv.value(m + 9) == rv.value(m - 18)
        for j in range(-4, 5):
            assert rv.value(j) == v.values[j + 4]

    def test_repeat_constant(self):
        v = TorusFunction(3, 1, np.full(7, 1.7))
        rv = repeat(v)
        assert rv.value(123) == 1.7


class TestTransference:
    @pytest.mark.parametrize("d,N,tol", [(1, 6, 1e-8), (2, 3, 1e-6)])
    def test_wrapped(self, d, N, tol):
        n = 2 * N + 1
        h = 2.0 * math.pi / n
        params = FracParams(0.5, h, d)
        rng = np.random.default_rng(13)
        v = TorusFunction(N, d, rng.standard_normal((n,) * d))
        phi = LatticeFunction(params, {
            tuple(int(c) - 1 for c in idx): float(rng.standard_normal())
            for idx in np.ndindex(*(3,) * d)})
        assert transference_check(v, phi, tol=tol) <= tol

    def test_constant_v(self):
        N = 4
        n = 9
        params = FracParams(0.5, 2.0 * math.pi / n, 1)
        v = TorusFunction(N, 1, np.full(n, 1.0))
        phi = LatticeFunction(params, {(0,): 1.0, (1,): -2.0})
        # both sides vanish: the operator kills constants (left side by
        # summing the operator of phi over all of Z, right side directly)
        assert transference_check(v, phi, tol=1e-8) <= 1e-10

    def test_direct_mode(self):
        N = 6
        n = 13
        params = FracParams(0.5, 2.0 * math.pi / n, 1)
        rng = np.random.default_rng(4)
        v = TorusFunction(N, 1, rng.standard_normal(n))
        phi = LatticeFunction(params, {(k,): float(rng.standard_normal())
                                       for k in range(-3, 4)})
        d_direct = transference_check(v, phi, tol=1.0, method="direct",
                                      direct_radius=60000)
        assert d_direct < 2e-3
        assert transference_check(v, phi, tol=1e-8) < d_direct

    def test_mesh_mismatch_rejected(self):
        v = random_torus(4, 1, 0)
        phi = LatticeFunction(FracParams(0.5, 1.0, 1), {(0,): 1.0})
        with pytest.raises(ValueError):
            transference_check(v, phi)

    def test_unreachable_tolerance(self):
        from fraclat.kernel import ToleranceError

        n = 9
        params = FracParams(0.5, 2.0 * math.pi / n, 1)
        rng = np.random.default_rng(6)
        v = TorusFunction(4, 1, rng.standard_normal(n))
        phi = LatticeFunction(params, {(0,): 1.0, (2,): -1.0})
        with pytest.raises(ToleranceError):
            transference_check(v, phi, tol=1e-17)


class TestSobolevNorm:
    def test_r0_is_l2(self):
        p = FracParams(0.5)
        u = LatticeFunction(p, {(0,): 3.0, (2,): 4.0})
        assert sobolev_norm(u, 0.0) == pytest.approx(5.0, rel=1e-12)

    def test_monotone_in_r(self):
        p = FracParams(0.5)
        u = LatticeFunction(p, {(0,): 1.0, (1,): -0.3})
        assert (sobolev_norm(u, -0.8) <= sobolev_norm(u, -0.2)
                <= sobolev_norm(u, 0.3) <= sobolev_norm(u, 0.8)
                <= sobolev_norm(u, 1.5))

    def test_delta_quadrature_oracle(self):
        # r = 1, h = 1, d = 1 delta: squared norm is
        # h (h/2pi) int (1 + sin(h xi)^2/h^2) dxi over the frequency cell
        h = 1.0
        val, _ = scipy.integrate.quad(
            lambda xi: 1.0 + math.sin(h * xi) ** 2 / h ** 2,
            -math.pi / h, math.pi / h)
        ref = math.sqrt(h * (h / (2.0 * math.pi)) * val)
        u = LatticeFunction(FracParams(0.5, h, 1), {(0,): 1.0})
        assert sobolev_norm(u, 1.0) == pytest.approx(ref, rel=1e-12)

    def test_torus_r0(self):
        v = random_torus(5, 1, 8)
        assert sobolev_norm(v, 0.0) == pytest.approx(
            math.sqrt(v.h * float(np.sum(v.values ** 2))), rel=1e-12)

    def test_consistency_lattice_vs_periodized(self):
        # support well inside a large torus: same multiplier, same norm
        n = 2 * 24 + 1
        h = 2.0 * math.pi / n
        p = FracParams(0.5, h, 1)
        u = LatticeFunction(p, {(0,): 1.0, (1,): 2.0, (-2,): -1.0})
        v = periodize(u, 24)
        assert sobolev_norm(u, 1.0) == pytest.approx(sobolev_norm(v, 1.0), rel=1e-6)


class TestSerialization:
    def test_torus_roundtrip(self):
        v = random_torus(3, 2, 21)
        w = TorusFunction.from_json(v.to_json())
        assert w.N == v.N and w.d == v.d
        assert np.array_equal(w.values, v.values)

    def test_lattice_roundtrip(self):
        p = FracParams(0.4, 0.5, 1)
        u = LatticeFunction(p, {(2,): 1.25, (-1,): -0.5},
                            StepProfile(0, 2, -1.0, 1.0))
        w = LatticeFunction.from_json(u.to_json())
        assert w.support == u.support
        assert w.profile == u.profile
        assert w.params == u.params
