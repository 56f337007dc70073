import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose
from scipy.integrate import quad

from sectorops.radial import (FOUR_PI, ExtrapolationError, GridMismatchError,
                              GridSizingError, RadialProfile, apply_lambda,
                              boundary_data, default_ladder,
                              discrete_asymmetry, has_compact_support,
                              inner_product, kinetic_form, lambda_form,
                              make_grid, profile_from_callable,
                              read_profile_csv, richardson_limit,
                              simpson_weights, write_profile_csv)


def cusp_family(b, a=1.0):
    return lambda r: (1.0 + b * r + r**2) * np.exp(-a * r**2)


def cusp_family_d1(b, a=1.0):
    def d1(r):
        poly = 1.0 + b * r + r**2
        return (b + 2 * r - 2 * a * r * poly) * np.exp(-a * r**2)
    return d1


class TestMakeGrid:
    def test_integer_grid(self):
        g = make_grid(10.0, 11)
        assert_allclose(g.nodes, np.arange(11.0))
        assert g.spacing == 1.0

    def test_eight_nodes(self):
        g = make_grid(1.0, 8)
        assert g.spacing == pytest.approx(1.0 / 7.0)

    def test_too_few_nodes(self):
        with pytest.raises(GridSizingError):
            make_grid(10.0, 5)

    def test_bad_extent(self):
        with pytest.raises(GridSizingError):
            make_grid(-1.0, 64)


class TestInnerProduct:
    def test_gaussian_against_closed_form(self):
        # 4 pi int exp(-2 r^2) r^2 dr = pi * sqrt(pi / 8)
        expected = np.pi * np.sqrt(np.pi / 8.0)
        for n, tol in [(129, 1e-6), (513, 1e-9)]:
            g = make_grid(10.0, n)
            f = profile_from_callable(g, lambda r: np.exp(-r**2))
            assert inner_product(f, f) == pytest.approx(expected, rel=tol)
        assert expected == pytest.approx(1.9687012432, rel=1e-9)

    def test_zero(self):
        g = make_grid(10.0, 65)
        z = RadialProfile(g, np.zeros(65))
        assert inner_product(z, z) == 0

    def test_mixed_against_quadrature_oracle(self):
        g = make_grid(12.0, 1025)
        f = profile_from_callable(g, lambda r: r * np.exp(-r**2))
        h = profile_from_callable(g, lambda r: np.exp(-r**2))
        oracle, _ = quad(lambda r: FOUR_PI * r * np.exp(-2 * r**2) * r**2,
                         0, np.inf)
        assert inner_product(f, h) == pytest.approx(oracle, rel=1e-8)

    def test_grid_mismatch(self):
        f = profile_from_callable(make_grid(10.0, 65), np.exp)
        h = profile_from_callable(make_grid(10.0, 129), np.exp)
        with pytest.raises(GridMismatchError):
            inner_product(f, h)

    @settings(max_examples=25, deadline=None)
    @given(arrays(np.float64, (2, 16), elements=st.floats(-5, 5)),
           arrays(np.float64, (2, 16), elements=st.floats(-5, 5)))
    def test_conjugate_symmetry_exact(self, fv, gv):
        g = make_grid(4.0, 16)
        f = RadialProfile(g, fv[0] + 1j * fv[1])
        h = RadialProfile(g, gv[0] + 1j * gv[1])
        assert inner_product(f, h) == np.conj(inner_product(h, f))


class TestApplyLambda:
    def test_affine_annihilated_exactly(self):
        g = make_grid(10.0, 11)
        f = RadialProfile(g, 2.0 + 3.0 * g.nodes)
        out = apply_lambda(f)
        assert np.all(out.values[1:-1] == 0)

    def test_cubic_interior_value(self):
        g = make_grid(10.0, 11)
        f = RadialProfile(g, g.nodes**3)
        out = apply_lambda(f)
        # phi'' / r^2 = 6 / r, value 3 at r = 2; exact for cubics
        assert out.values[2] == pytest.approx(3.0, rel=1e-13)

    def test_against_symbolic_derivative(self):
        g = make_grid(8.0, 513)
        f = profile_from_callable(g, cusp_family(1.0))
        import sympy as sy
        r = sy.symbols("r", positive=True)
        expr = sy.diff((1 + r + r**2) * sy.exp(-(r**2)), r, 2) / r**2
        rr = g.nodes[1:-1]
        exact = sy.lambdify(r, expr, "numpy")(rr)
        got = apply_lambda(f).values[1:-1]
        # second-difference error carries a 1/r^2 amplification from the
        # singular prefactor; away from the origin it is plain O(h^2)
        bound = 3.0 * g.spacing**2 * (1.0 + 1.0 / rr**2)
        assert np.all(np.abs(got.real - exact) <= bound)


class TestBoundaryData:
    def test_cusp_family(self):
        g = make_grid(10.0, 2049)
        f = profile_from_callable(g, cusp_family(2.0))
        bd = boundary_data(f)
        assert bd.value_b == 1.0
        assert bd.deriv_c == pytest.approx(8 * np.pi, rel=1e-4)

    def test_constant(self):
        g = make_grid(10.0, 65)
        bd = boundary_data(RadialProfile(g, np.full(65, 5.0)))
        assert bd.value_b == 5.0
        assert bd.deriv_c == 0.0

    def test_exponential(self):
        g = make_grid(10.0, 2049)
        f = profile_from_callable(g, lambda r: np.exp(-r))
        bd = boundary_data(f)
        assert bd.value_b == 1.0
        assert bd.deriv_c == pytest.approx(-4 * np.pi, rel=1e-4)


class TestForms:
    def test_lambda_form_against_quadrature_oracle(self):
        g = make_grid(10.0, 2049)
        f = profile_from_callable(g, cusp_family(0.0))
        d1 = cusp_family_d1(0.0)
        oracle, _ = quad(lambda r: d1(r) ** 2, 0, np.inf)
        assert lambda_form(f, f) == pytest.approx(-FOUR_PI * oracle, rel=1e-4)

    def test_lambda_form_constant_zero(self):
        g = make_grid(10.0, 65)
        f = RadialProfile(g, np.full(65, 3.0))
        assert lambda_form(f, f) == 0

    def test_kinetic_form_against_quadrature_oracle(self):
        g = make_grid(10.0, 1025)
        f = profile_from_callable(g, lambda r: np.exp(-r**2))
        oracle, _ = quad(lambda r: (2 * r * np.exp(-r**2)) ** 2 * r**2,
                         0, np.inf)
        assert kinetic_form(f, f) == pytest.approx(FOUR_PI * oracle, rel=1e-5)

    def test_kinetic_linear_ramp(self):
        # f = r on [0, r_max]: 4 pi int r^2 dr = 4 pi r_max^3 / 3, up to the
        # midpoint-rule quadrature of r^2 over cells
        g = make_grid(3.0, 257)
        f = RadialProfile(g, g.nodes.astype(complex))
        assert kinetic_form(f, f) == pytest.approx(FOUR_PI * 9.0, rel=1e-4)

    @settings(max_examples=25, deadline=None)
    @given(arrays(np.float64, (2, 16), elements=st.floats(-3, 3)),
           arrays(np.float64, (2, 16), elements=st.floats(-3, 3)))
    def test_hermitian_and_signed(self, fv, gv):
        g = make_grid(4.0, 16)
        f = RadialProfile(g, fv[0] + 1j * fv[1])
        h = RadialProfile(g, gv[0] + 1j * gv[1])
        assert lambda_form(f, h) == np.conj(lambda_form(h, f))
        assert kinetic_form(f, h) == np.conj(kinetic_form(h, f))
        assert lambda_form(f, f).real <= 0
        assert lambda_form(f, f).imag == 0
        assert kinetic_form(f, f).real >= 0


class TestDiscreteAsymmetry:
    def test_cusp_pair_against_analytic(self):
        g = make_grid(10.0, 2049)
        f = profile_from_callable(g, cusp_family(1.0))
        h = profile_from_callable(g, cusp_family(0.0))
        val = discrete_asymmetry(f, h)
        assert val == pytest.approx(FOUR_PI, rel=2e-3)

    def test_equal_real_profiles_vanish(self):
        g = make_grid(10.0, 513)
        f = profile_from_callable(g, cusp_family(0.7))
        assert discrete_asymmetry(f, f) == 0

    def test_zero_boundary_data_pair(self):
        g = make_grid(10.0, 1025)
        f = profile_from_callable(g, lambda r: r**2 * np.exp(-r**2))
        val = discrete_asymmetry(f, f.__class__(g, f.values.copy()))
        assert abs(val) < 1e-3

    def test_matches_boundary_data_formula(self):
        g = make_grid(10.0, 2049)
        f = profile_from_callable(g, cusp_family(1.3, a=0.8))
        h = profile_from_callable(g, cusp_family(-0.4, a=1.1))
        bf, bh = boundary_data(f), boundary_data(h)
        expected = (np.conj(bf.deriv_c) * bh.value_b
                    - np.conj(bf.value_b) * bh.deriv_c)
        assert discrete_asymmetry(f, h) == pytest.approx(expected, rel=5e-3)

    def test_refinement_order(self):
        errs = []
        for n in (257, 513, 1025):
            g = make_grid(10.0, n)
            f = profile_from_callable(g, cusp_family(1.0))
            h = profile_from_callable(g, cusp_family(0.0))
            errs.append(abs(discrete_asymmetry(f, h) - FOUR_PI))
        order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
        assert min(order) >= 1.8

    def test_noise_fails_to_contract(self):
        g = make_grid(10.0, 513)
        rng = np.random.default_rng(0)
        f = RadialProfile(g, rng.normal(size=513))
        h = RadialProfile(g, rng.normal(size=513))
        with pytest.raises(ExtrapolationError):
            discrete_asymmetry(f, h)


class TestRichardson:
    def test_polynomial_ladder_recovered(self):
        eps = default_ladder(10.0)
        vals = 2.5 + 3.0 * eps - 2.0 * eps**2 + 0.7 * eps**3
        limit, diag = richardson_limit(eps, vals)
        assert limit == pytest.approx(2.5, abs=1e-12)
        assert diag.contracted

    def test_noise_flagged(self):
        eps = default_ladder(10.0)
        rng = np.random.default_rng(1)
        vals = 1.0 + rng.normal(scale=0.1, size=eps.size)
        _, diag = richardson_limit(eps, vals)
        assert not diag.contracted

    def test_needs_three_levels(self):
        with pytest.raises(ValueError):
            richardson_limit([0.1, 0.05], [1.0, 1.0])


class TestValidatorsAndIO:
    def test_compact_support(self):
        g = make_grid(10.0, 129)
        assert has_compact_support(
            profile_from_callable(g, lambda r: np.exp(-r**2)))
        assert not has_compact_support(
            profile_from_callable(g, lambda r: np.exp(-0.01 * r)))

    def test_simpson_weights_positive_and_exact(self):
        for n in (9, 10):
            w = simpson_weights(n, 0.5)
            assert np.all(w > 0)
            x = np.linspace(0, 0.5 * (n - 1), n)
            assert np.sum(w * x**2) == pytest.approx((0.5 * (n - 1))**3 / 3,
                                                     rel=1e-3)

    def test_profile_csv_round_trip(self, tmp_path):
        g = make_grid(5.0, 33)
        f = RadialProfile(g, np.exp(-g.nodes**2) + 1j * g.nodes)
        path = tmp_path / "profile.csv"
        write_profile_csv(path, f)
        back = read_profile_csv(path)
        assert_allclose(back.values, f.values, rtol=0, atol=1e-12)
        assert back.grid.n_nodes == 33
