import numpy as np
import pytest
import scipy.special
from hypothesis import given
from hypothesis import strategies as st

from ldsim.bessel import bessel_k0, bessel_k1, yukawa_green

# Reference values computed from the integral representation below and
# cross-checked against Abramowitz & Stegun 9.8 tables.
K0_AT_1 = 0.42102443824070834
K1_AT_1 = 0.6019072301972346


def k_oracle(r: float, nu: int) -> float:
    """K_nu(r) = int_0^inf exp(-r cosh t) cosh(nu t) dt.

    The integrand is even in t and decays double-exponentially, so the
    trapezoid rule on a truncated range is accurate to near machine
    precision; this shares no code with the series/asymptotic implementation.
    """
    t_max = float(np.arccosh(750.0 / r)) if r < 750.0 else 1.0
    t = np.linspace(0.0, t_max, 20001)
    f = np.exp(-r * np.cosh(t)) * np.cosh(nu * t)
    return float(np.trapezoid(f, t))


class TestOracle:
    # guard the oracle itself before trusting it
    @pytest.mark.parametrize("r", [0.1, 1.0, 5.0, 12.0, 25.0])
    def test_oracle_matches_scipy(self, r):
        assert k_oracle(r, 0) == pytest.approx(float(scipy.special.k0(r)), rel=1e-12)
        assert k_oracle(r, 1) == pytest.approx(float(scipy.special.k1(r)), rel=1e-12)

    def test_frozen_references(self):
        assert k_oracle(1.0, 0) == pytest.approx(K0_AT_1, rel=1e-13)
        assert k_oracle(1.0, 1) == pytest.approx(K1_AT_1, rel=1e-13)


class TestBesselK:
    def test_values_at_one(self):
        assert float(bessel_k0(1.0)) == pytest.approx(K0_AT_1, rel=1e-10)
        assert float(bessel_k1(1.0)) == pytest.approx(K1_AT_1, rel=1e-10)

    @pytest.mark.parametrize("nu,fn", [(0, bessel_k0), (1, bessel_k1)])
    def test_absolute_tolerance_contract(self, nu, fn):
        # |result - K_nu(r)| <= tol everywhere, including across the series/
        # asymptotic switch, where the series cancellation is worst but the
        # function itself is ~1e-5.
        rs = np.concatenate(
            [
                np.geomspace(1e-3, 9.0, 25),
                np.array([9.999999, 10.0, 10.000001, 12.0, 20.0, 30.0]),
            ]
        )
        vals = fn(rs, tol=1e-10)
        for r, v in zip(rs, vals):
            assert abs(v - k_oracle(float(r), nu)) <= 1e-10, f"r={r}"

    @pytest.mark.parametrize("nu,fn", [(0, bessel_k0), (1, bessel_k1)])
    def test_relative_accuracy_away_from_switch(self, nu, fn):
        # cancellation grows like e^{2r}*eps toward the switch radius; away
        # from the window the result is accurate in the relative sense too
        for r in np.geomspace(1e-3, 2.0, 12):
            assert float(fn(r)) == pytest.approx(k_oracle(float(r), nu), rel=1e-11)
        for r in (15.0, 20.0, 30.0):
            assert float(fn(r)) == pytest.approx(k_oracle(r, nu), rel=1e-11)
        for r in (5.0, 8.0, 9.5, 10.5, 12.0):
            assert float(fn(r)) == pytest.approx(k_oracle(r, nu), rel=5e-8)

    def test_vectorized_matches_scalar(self):
        # batch evaluation shares the adaptive stopping across elements, so
        # agreement is to tolerance rather than bit-exact
        rs = np.array([0.5, 1.0, 2.0, 15.0])
        scal = [float(bessel_k0(r)) for r in rs]
        assert np.allclose(bessel_k0(rs), scal, rtol=1e-12, atol=0.0)

    def test_rejects_nonpositive_radius(self):
        for bad in (0.0, -1.0):
            with pytest.raises(ValueError):
                bessel_k0(bad)
            with pytest.raises(ValueError):
                bessel_k1(np.array([1.0, bad]))

    def test_derivative_identity(self):
        # K0' = -K1, checked by central differences (consistency, not
        # precision; larger r amplifies series noise through the cancellation)
        h = 1e-4
        for r in (0.5, 2.0, 5.0):
            fd = (float(bessel_k0(r + h)) - float(bessel_k0(r - h))) / (2 * h)
            assert fd == pytest.approx(-float(bessel_k1(r)), rel=1e-6)

    @given(st.floats(1e-3, 50.0))
    def test_positive_and_ordered(self, r):
        k0 = float(bessel_k0(r))
        k1 = float(bessel_k1(r))
        assert k0 > 0 and k1 > 0
        assert k1 > k0  # strict for all finite r

    @given(st.floats(1e-3, 40.0), st.floats(1e-3, 40.0))
    def test_strictly_decreasing(self, a, b):
        lo, hi = sorted((a, b))
        if hi - lo < 1e-9:
            return
        assert float(bessel_k0(lo)) > float(bessel_k0(hi))
        assert float(bessel_k1(lo)) > float(bessel_k1(hi))


class TestYukawaGreen:
    def test_scaling_of_k0(self):
        assert float(yukawa_green(1.0)) == pytest.approx(K0_AT_1 / (2 * np.pi), rel=1e-10)

    def test_far_field_negligible(self):
        assert 0.0 < float(yukawa_green(20.0)) <= 1e-9

    def test_monotone(self):
        v = yukawa_green(np.array([0.5, 1.0, 2.0]))
        assert v[0] > v[1] > v[2]
