import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acoustic_dmpc.bspline import BSpline, fit_values, ideal_line_coeffs
from acoustic_dmpc.errors import ArgumentError, DegenerateError
from acoustic_dmpc.imputation import (
    Extrapolation,
    ExtrapolationMethod,
    compensate_delay,
    extrapolate,
    extrapolate_jerk,
    extrapolate_velocity,
    impute_missing,
    imputation_matrix,
)

JERK = ExtrapolationMethod(Extrapolation.JERK)
VEL = ExtrapolationMethod(Extrapolation.VELOCITY)


def near_line(rng, n=6, d=1.0, k=1.0, noise=0.05):
    return BSpline(0.0, d, ideal_line_coeffs(0.0, k, n) + rng.normal(0.0, noise, n + 3))


def parabola(a, n=6, k=1.0, d=1.0):
    t = np.linspace(0.0, n * d, 60)
    return fit_values(t, k * t / d + 0.5 * a * t**2, 0.0, n, d)


class TestJerk:
    def test_line_stays_line(self):
        out = extrapolate_jerk(BSpline(0.0, 2.0, ideal_line_coeffs(1.0, 3.0, 5)))
        np.testing.assert_allclose(out.coeffs, ideal_line_coeffs(1.0, 3.0, 6), atol=1e-12)

    def test_taylor_endpoint(self):
        sp = parabola(0.3)
        v = sp.derivative(1)(sp.t_end)
        expected = sp(sp.t_end) + v * 1.0 + 0.3 / 2.0
        assert extrapolate_jerk(sp)(sp.t_end + 1.0) == pytest.approx(expected, abs=1e-9)

    def test_domain_preserved_and_seam_continuity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            sp = BSpline(0.0, 1.5, rng.normal(size=9))
            out = extrapolate_jerk(sp)
            assert out.n_intervals == 7
            t = np.linspace(sp.t0, sp.t_end, 301)
            np.testing.assert_allclose(out(t), sp(t), atol=1e-12)
            te = sp.t_end
            for order in (1, 2):
                assert out.derivative(order)(te) == pytest.approx(sp.derivative(order)(te), abs=1e-9)
            # third derivative of the new interval equals the old last one
            assert out.derivative(3)(te + 1.0) == pytest.approx(sp.derivative(3)(te - 0.1), abs=1e-8)

    def test_degenerate(self):
        with pytest.raises(DegenerateError):
            extrapolate_jerk(BSpline(0.0, 1.0, [0.0, 1.0, 2.0], degree=2))


class TestVelocity:
    def test_line_fixed_point(self):
        out = extrapolate_velocity(BSpline(0.0, 1.0, ideal_line_coeffs(2.0, 0.5, 4)))
        np.testing.assert_allclose(out.coeffs, ideal_line_coeffs(2.0, 0.5, 5), atol=1e-8)

    def test_closer_to_constant_velocity(self):
        sp = parabola(0.4)
        te = sp.t_end
        oracle = sp(te) + sp.derivative(1)(te) * 1.0
        e_vel = abs(extrapolate_velocity(sp)(te + 1.0) - oracle)
        e_jerk = abs(extrapolate_jerk(sp)(te + 1.0) - oracle)
        assert e_vel < e_jerk

    def test_terminal_slope_close(self):
        # least squares with two samples per interval only approximately
        # reproduces the imposed slope at the new end
        for a in (0.1, 0.2, 0.5):
            sp = parabola(a)
            s = sp.derivative(1)(sp.t_end)
            out = extrapolate_velocity(sp)
            assert abs(out.derivative(1)(out.t_end) - s) / s < 0.02

    def test_least_squares_optimal(self):
        sp = parabola(0.3)
        out = extrapolate_velocity(sp)
        t = np.arange(13) * 0.5
        y = sp(t)
        h = np.array([0.5, 1.0])
        t_all = np.concatenate([t, 6.0 + h])
        y_all = np.concatenate([y, y[-1] + sp.derivative(1)(6.0) * h])
        base = np.sum((out(t_all) - y_all) ** 2)
        rng = np.random.default_rng(1)
        for _ in range(20):
            other = out.with_coeffs(out.coeffs + 1e-3 * rng.normal(size=10))
            assert np.sum((other(t_all) - y_all) ** 2) >= base

    def test_ripples_near_the_end(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            sp = near_line(rng)
            out = extrapolate_velocity(sp)
            head = np.linspace(0.0, 0.8 * sp.t_end, 200)
            tail = np.linspace(0.8 * sp.t_end, sp.t_end, 50)
            assert np.abs(out(head) - sp(head)).max() <= np.abs(out(tail) - sp(tail)).max()

    def test_method_validation(self):
        with pytest.raises(ArgumentError):
            ExtrapolationMethod(Extrapolation.VELOCITY, 1)
        assert ExtrapolationMethod("jerk").kind is Extrapolation.JERK
        assert extrapolate(parabola(0.1), JERK).n_intervals == 7


class TestImpute:
    def test_identity(self):
        sp = parabola(0.2)
        assert impute_missing(sp, 0.0) is sp
        assert compensate_delay(sp, 0.0) is sp

    @pytest.mark.parametrize("age", [0.3, 1.0, 2.5, 4.0])
    def test_line_any_age(self, age):
        sp = BSpline(0.0, 1.0, ideal_line_coeffs(1.0, 2.0, 6))
        out = impute_missing(sp, age)
        assert out.t0 == pytest.approx(age) and out.n_intervals == 6
        t = np.linspace(out.t0, out.t_end, 50)
        np.testing.assert_allclose(out(t), 1.0 + 2.0 * t, atol=1e-9)

    def test_tau_adds_to_age(self):
        sp = parabola(0.2)
        a = impute_missing(sp, 1.0, VEL, tau=1.0)
        b = impute_missing(sp, 2.0, VEL)
        np.testing.assert_allclose(a.coeffs, b.coeffs)

    def test_compositional_jerk(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            sp = near_line(rng)
            a = impute_missing(sp, 2.0, JERK)
            b = impute_missing(impute_missing(sp, 1.0, JERK), 1.0, JERK)
            np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-11)

    def test_compositional_velocity_near_line(self):
        # the refit window moves with each application, so velocity
        # extrapolation composes only approximately
        rng = np.random.default_rng(4)
        for _ in range(20):
            sp = near_line(rng, noise=0.05)
            a = impute_missing(sp, 2.0, VEL)
            b = impute_missing(impute_missing(sp, 1.0, VEL), 1.0, VEL)
            t = np.linspace(a.t0, a.t_end, 100)
            assert np.abs(a(t) - b(t)).max() < 2e-3

    def test_latency_line_one_interval(self):
        sp = BSpline(0.0, 2.0, ideal_line_coeffs(0.0, 1.0, 5))
        out = compensate_delay(sp, 2.0)
        assert out.domain == (2.0, 12.0)
        np.testing.assert_allclose(out.coeffs, ideal_line_coeffs(1.0, 1.0, 5), atol=1e-10)

    def test_latency_half_interval_overlap(self):
        rng = np.random.default_rng(5)
        sp = near_line(rng, noise=0.01)
        out = compensate_delay(sp, 0.5)
        t = np.linspace(0.5, sp.t_end, 200)
        assert np.abs(out(t) - sp(t)).max() < 5e-3

    def test_negative_age(self):
        with pytest.raises(ArgumentError):
            impute_missing(parabola(0.1), -1.0)

    def test_matrix_matches_function(self):
        rng = np.random.default_rng(6)
        sp = near_line(rng, d=2.0)
        for age in (2.0, 4.0, 1.3):
            M = imputation_matrix(6, 2.0, age, None)
            np.testing.assert_allclose(M @ sp.coeffs, impute_missing(sp, age).coeffs, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 20.0), st.integers(3, 10), st.floats(0.2, 5.0), st.sampled_from([JERK, VEL]))
def test_horizon_preserved(age, n, d, method):
    sp = BSpline(0.0, d, ideal_line_coeffs(0.0, d, n) + np.linspace(0, 0.1, n + 3) ** 2)
    out = impute_missing(sp, age, method)
    assert out.n_intervals == n
    assert out.t_end - out.t0 == pytest.approx(n * d)
    assert out.t0 == pytest.approx(age)


def test_acceptance_style_tradeoff_sample():
    # compact version of the open-loop trade-off used in the acceptance suite
    rng = np.random.default_rng(7)
    wins = 0
    for _ in range(30):
        sp = parabola(rng.uniform(0.1, 0.5) * rng.choice([-1, 1]))
        te = sp.t_end
        oracle = sp(te) + sp.derivative(1)(te)
        wins += abs(extrapolate_velocity(sp)(te + 1) - oracle) < abs(extrapolate_jerk(sp)(te + 1) - oracle)
    assert wins == 30
