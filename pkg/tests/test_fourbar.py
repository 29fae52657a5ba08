import math

import numpy as np
import pytest
from scipy.optimize import brentq

from tridigit.errors import (AllSingular, CalibrationInfeasible, EmptyStroke,
                             NonPositiveSpeed, SingularConfiguration,
                             UnreachableClosure)
from tridigit.fourbar import (Branch, DriveParameters, ForceCurve, GripMode,
                              MechanismState, TridigitalGeometry,
                              calibrate_stroke, closing_time, closure_residual,
                              force_curve, force_variation, grip_force,
                              opening_distance, opening_rate, select_branch,
                              solve_fourbar)

from conftest import feasible_angles, random_feasible_geometry, variplus_geometry


# ----------------------------------------------------------------- oracles --

def closure_oracle(geom, theta_f_deg):
    """Independent closure solve: bracketed bisection on the signed residual
    |PQ|^2 - l_r^2 over theta_t in (-180, 180]."""
    a, b = math.radians(geom.alpha_deg), math.radians(geom.beta_deg)
    tf = math.radians(theta_f_deg)
    P = geom.l_1 * np.array([math.cos(tf + a), math.sin(tf + a)])

    def g(tt_deg):
        tt = math.radians(tt_deg)
        Q = np.array([geom.d_ab + geom.l_2 * math.cos(tt + b),
                      geom.l_2 * math.sin(tt + b)])
        return float((P - Q) @ (P - Q)) - geom.l_r ** 2

    grid = np.linspace(-180.0, 180.0, 2881)
    vals = [g(x) for x in grid]
    roots = []
    for x0, x1, f0, f1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if f0 * f1 < 0.0:
            roots.append(brentq(g, x0, x1, xtol=1e-13))
    return roots


def opening_oracle(geom, theta_f_deg, theta_t_deg):
    """Second, independently written coordinate construction of d(MT)."""
    tf, tt = math.radians(theta_f_deg), math.radians(theta_t_deg)
    mx = geom.l_f * math.cos(tf)
    my = geom.l_f * math.sin(tf)
    tx = geom.d_ab + geom.l_th * math.cos(tt)
    ty = geom.l_th * math.sin(tt)
    return math.hypot(mx - tx, my - ty)


def fd_opening_rate(geom, theta_f_deg, h_rad=1e-5):
    hd = math.degrees(h_rad)
    state = lambda t: opening_distance(geom, MechanismState(
        t, solve_fourbar(geom, t)))
    return (state(theta_f_deg + hd) - state(theta_f_deg - hd)) / (2 * h_rad)


PARALLELOGRAM = TridigitalGeometry(110.0, 60.0, 10.0, 10.0, 50.0, 50.0,
                                   0.0, 0.0, Branch.NEGATIVE)


class TestSolveFourbar:
    def test_parallelogram_copies_crank_angle(self):
        for tf in np.linspace(10.0, 170.0, 25):
            tt = solve_fourbar(PARALLELOGRAM, float(tf))
            assert abs(tt - tf) < 1e-9

    def test_variplus_against_bisection_oracle(self, variplus):
        mid = 70.0  # mid-stroke finger angle
        solved = {branch: solve_fourbar(variplus, mid, branch)
                  for branch in Branch}
        roots = closure_oracle(variplus, mid)
        assert len(roots) == 2
        for tt in solved.values():
            tt_norm = (tt + 180.0) % 360.0 - 180.0
            assert min(abs(tt_norm - r) for r in roots) < 1e-8

    def test_rod_too_long_never_closes(self):
        geom = TridigitalGeometry(75, 52, 14, 13, 80.0, 43.8, 8, 180)
        for tf in np.linspace(-180.0, 180.0, 73):
            with pytest.raises(UnreachableClosure):
                solve_fourbar(geom, float(tf))

    def test_residual_below_tolerance_on_random_geometries(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            geom = random_feasible_geometry(rng)
            for tf in feasible_angles(geom, rng, 8):
                tt = solve_fourbar(geom, float(tf))
                assert closure_residual(geom, tf, tt) < 1e-9

    def test_feasibility_check(self):
        geom = TridigitalGeometry(75, 52, 14, 13, 80.0, 43.8, 8, 180)
        with pytest.raises(UnreachableClosure):
            geom.validate_feasible()
        variplus_geometry().validate_feasible()

    def test_select_branch_contains_contact(self, variplus):
        assert select_branch(variplus) is Branch.POSITIVE


class TestOpening:
    def test_coincident_contact_is_zero(self, variplus):
        # thumb angle aimed exactly at the circle-intersection contact point
        x = (variplus.l_f**2 + variplus.d_ab**2 - variplus.l_th**2) / (2 * variplus.d_ab)
        y = math.sqrt(variplus.l_f**2 - x*x)
        tf = math.degrees(math.atan2(y, x))
        tt = math.degrees(math.atan2(y, x - variplus.d_ab))
        d = opening_distance(variplus, MechanismState(tf, tt))
        assert d < 1e-9

    def test_full_open_matches_published_aperture(self, variplus):
        cal = calibrate_stroke(variplus, 110.0, 0.37, 150.0)
        d = opening_distance(variplus, MechanismState(
            cal.theta_open_deg, solve_fourbar(variplus, cal.theta_open_deg)))
        assert 100.0 <= d <= 120.0

    def test_mid_stroke_against_independent_construction(self, variplus):
        tf = 70.0
        tt = solve_fourbar(variplus, tf)
        d = opening_distance(variplus, MechanismState(tf, tt))
        assert abs(d - opening_oracle(variplus, tf, tt)) < 1e-12

    def test_lateral_requires_axis(self, variplus):
        state = MechanismState(70.0, 50.0, GripMode.LATERAL)
        with pytest.raises(ValueError):
            opening_distance(variplus, state)

    def test_monotonic_on_calibrated_stroke(self, variplus):
        cal = calibrate_stroke(variplus, 110.0, 0.37, 150.0)
        ts = np.linspace(cal.theta_min_deg, cal.theta_max_deg, 400)
        ds = [opening_distance(variplus, MechanismState(
            float(t), solve_fourbar(variplus, float(t)))) for t in ts]
        assert np.all(np.diff(ds) > 0)

    def test_continuity_by_refinement(self, variplus):
        cal = calibrate_stroke(variplus, 110.0, 0.37, 150.0)
        for n in (100, 200, 400):
            ts = np.linspace(cal.theta_min_deg, cal.theta_max_deg, n)
            ds = np.array([opening_distance(variplus, MechanismState(
                float(t), solve_fourbar(variplus, float(t)))) for t in ts])
            step = ts[1] - ts[0]
            assert np.max(np.abs(np.diff(ds))) < 3.0 * step  # mm per deg bound


class TestGripForce:
    def test_zero_torque_zero_force(self, variplus):
        state = MechanismState(70.0, solve_fourbar(variplus, 70.0))
        f = grip_force(variplus, state, DriveParameters(0.0, 150.0))
        assert f == 0.0

    def test_linearity_in_torque(self, variplus):
        state = MechanismState(65.0, solve_fourbar(variplus, 65.0))
        f1 = grip_force(variplus, state, DriveParameters(3000.0, 150.0))
        f2 = grip_force(variplus, state, DriveParameters(6000.0, 150.0))
        assert abs(f2 - 2.0 * f1) < 1e-9

    def test_matches_finite_difference_oracle(self, variplus):
        state = MechanismState(70.0, solve_fourbar(variplus, 70.0))
        f = grip_force(variplus, state, DriveParameters(6000.0, 150.0))
        fd = abs(fd_opening_rate(variplus, 70.0))
        assert abs(f - 6000.0 / fd) / f < 1e-6

    def test_virtual_work_consistency_random(self):
        rng = np.random.default_rng(1234)
        drive = DriveParameters(6000.0, 150.0)
        for _ in range(15):
            geom = random_feasible_geometry(rng)
            for tf in feasible_angles(geom, rng, 4):
                rate = float(opening_rate(geom, float(tf)))
                if abs(rate) < 5.0:
                    continue
                state = MechanismState(float(tf), solve_fourbar(geom, float(tf)))
                f = grip_force(geom, state, drive)
                fd = fd_opening_rate(geom, float(tf))
                assert abs(f * abs(fd) - drive.tau_in_nmm) / drive.tau_in_nmm < 1e-6

    def test_singular_configuration_raises(self, variplus):
        cal = calibrate_stroke(variplus, 110.0, 0.37, 150.0)
        state = MechanismState(cal.theta_closed_deg,
                               solve_fourbar(variplus, cal.theta_closed_deg))
        with pytest.raises(SingularConfiguration):
            grip_force(variplus, state, DriveParameters(6000.0, 150.0))

    def test_uniform_scaling_property(self, variplus):
        s = 2.37
        scaled = TridigitalGeometry(
            variplus.l_f * s, variplus.l_th * s, variplus.l_1 * s,
            variplus.l_2 * s, variplus.l_r * s, variplus.d_ab * s,
            variplus.alpha_deg, variplus.beta_deg, variplus.branch)
        drive = DriveParameters(6000.0, 150.0)
        tf = 70.0
        st1 = MechanismState(tf, solve_fourbar(variplus, tf))
        st2 = MechanismState(tf, solve_fourbar(scaled, tf))
        assert abs(solve_fourbar(scaled, tf) - solve_fourbar(variplus, tf)) < 1e-9
        d1 = opening_distance(variplus, st1)
        d2 = opening_distance(scaled, st2)
        assert abs(d2 - s * d1) < 1e-9
        f1 = grip_force(variplus, st1, drive)
        f2 = grip_force(scaled, st2, drive)
        assert abs(f2 - f1 / s) / f1 < 1e-9


class TestForceCurve:
    def test_variplus_variation_in_published_band(self, variplus):
        cal = calibrate_stroke(variplus, 110.0, 0.37, 150.0)
        curve = force_curve(variplus, DriveParameters(6000.0, 150.0),
                            cal.stroke, 1.0)
        assert curve.singular[0]  # the contact end is a transmission singularity
        v = force_variation(curve)
        assert 0.15 <= v <= 0.35

    def test_max_at_least_min(self, variplus):
        cal = calibrate_stroke(variplus, 110.0, 0.37, 150.0)
        curve = force_curve(variplus, DriveParameters(6000.0, 150.0),
                            cal.stroke, 2.0)
        valid = ~curve.singular
        assert np.nanmax(curve.force_n[valid]) >= np.nanmin(curve.force_n[valid])

    def test_endpoints_always_sampled(self, variplus):
        cal = calibrate_stroke(variplus, 110.0, 0.37, 150.0)
        curve = force_curve(variplus, DriveParameters(6000.0, 150.0),
                            cal.stroke, 1000.0)
        assert len(curve) == 2
        assert curve.theta_f_deg[0] == cal.theta_min_deg
        assert curve.theta_f_deg[-1] == cal.theta_max_deg

    def test_empty_stroke_raises(self, variplus):
        with pytest.raises(EmptyStroke):
            force_curve(variplus, DriveParameters(6000.0, 150.0),
                        (70.0, 60.0), 1.0)

    def test_variation_vanishes_as_arm_becomes_constant(self):
        # parallelogram aperture rate is 50*cos(theta/2): shrinking the
        # sampled window makes the arm constant and the variation vanish
        drive = DriveParameters(1000.0, 150.0)
        v1 = force_variation(force_curve(PARALLELOGRAM, drive,
                                         (89.9, 90.1), 0.05))
        v2 = force_variation(force_curve(PARALLELOGRAM, drive,
                                         (89.95, 90.05), 0.025))
        assert v1 < 2e-3
        assert v2 < 0.6 * v1  # first-order shrink with the window


class TestForceVariation:
    def _curve(self, forces):
        n = len(forces)
        return ForceCurve(np.arange(n, dtype=float), np.zeros(n),
                          np.linspace(1, 2, n), np.array(forces, float),
                          np.full(n, 100.0), np.isnan(np.array(forces, float)),
                          1.0)

    def test_constant_curve_zero(self):
        assert force_variation(self._curve([50.0, 50.0, 50.0])) == 0.0

    def test_two_sample_arithmetic(self):
        assert abs(force_variation(self._curve([100.0, 75.0])) - 0.25) < 1e-15

    def test_all_singular_raises(self):
        with pytest.raises(AllSingular):
            force_variation(self._curve([math.nan, math.nan]))


class TestClosingTime:
    def test_zero_stroke(self):
        assert closing_time(0.0, 150.0) == 0.0

    def test_published_pair(self):
        assert abs(closing_time(55.5, 150.0) - 0.37) < 1e-12

    def test_sixty_degrees(self):
        assert abs(closing_time(60.0, 150.0) - 0.4) < 1e-12

    def test_non_positive_speed(self):
        with pytest.raises(NonPositiveSpeed):
            closing_time(55.5, 0.0)


class TestCalibration:
    def test_variplus_stroke_extent(self, variplus):
        cal = calibrate_stroke(variplus, 110.0, 0.37, 150.0)
        assert abs(cal.extent_deg - 55.5) <= 5.0
        assert cal.contact_gap_mm <= 0.5
        assert cal.time_residual_s == 0.0
        assert abs(cal.opening_residual_mm) < 15.0  # reported, not hidden

    def test_exact_targets_reproduce(self, variplus):
        first = calibrate_stroke(variplus, 110.0, 0.37, 150.0)
        again = calibrate_stroke(variplus, first.opening_mm, 0.37, 150.0)
        assert abs(again.opening_residual_mm) < 1e-6
        assert again.time_residual_s == 0.0

    def test_impossible_opening_target(self, variplus):
        bound = variplus.l_f + variplus.l_th + variplus.d_ab
        with pytest.raises(CalibrationInfeasible):
            calibrate_stroke(variplus, bound + 1.0, 0.37, 150.0)

    def test_non_positive_speed(self, variplus):
        with pytest.raises(NonPositiveSpeed):
            calibrate_stroke(variplus, 110.0, 0.37, 0.0)


class TestMechanismState:
    def test_grip_mode_pins_retro_angle(self):
        assert MechanismState(50.0, 60.0).retro_angle_deg == 0.0
        lateral = MechanismState(50.0, 60.0, GripMode.LATERAL)
        assert lateral.retro_angle_deg == 90.0
        with pytest.raises(ValueError):
            MechanismState(50.0, 60.0, GripMode.OPPOSED, 45.0)
