import math

import numpy as np
import pytest
from scipy.optimize import brentq

from tridigit.errors import ParallelAxis, PointInsideCircle
from tridigit.geometry import (RigidTransform3, SpatialLine, Winding,
                               line_plane_intersection, rotate_about_line,
                               tangent_points, vec2, vec3)


def tangency_oracle(external, center, radius):
    """Independent tangency solve: 1-D root finding on the circle angle.

    The tangency condition (p - T(phi)) . (T(phi) - c) = 0 is solved with
    brentq on a fine bracket scan; returns both solutions.
    """
    p = np.asarray(external, float)
    c = np.asarray(center, float)

    def f(phi):
        t = c + radius * np.array([math.cos(phi), math.sin(phi)])
        return float((p - t) @ (t - c))

    phis = np.linspace(-math.pi, math.pi, 721)
    vals = [f(x) for x in phis]
    roots = []
    for a, b, fa, fb in zip(phis[:-1], phis[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0.0:
            roots.append(brentq(f, a, b, xtol=1e-14))
    pts = [c + radius * np.array([math.cos(r), math.sin(r)]) for r in roots]
    uniq = []
    for q in pts:
        if not any(np.linalg.norm(q - u) < 1e-9 for u in uniq):
            uniq.append(q)
    return uniq


class TestRotateAboutLine:
    def test_point_on_axis_is_fixed(self):
        axis = SpatialLine(vec3(1, 2, 2) / 3.0, vec3(4, -1, 7))
        p = axis.point_at(3.7)
        for angle in (13.0, 90.0, 217.0):
            assert np.allclose(rotate_about_line(p, axis, angle), p, atol=1e-9)

    def test_full_turn_is_identity(self):
        axis = SpatialLine(vec3(0.3, -0.5, 0.81), vec3(1, 1, 0))
        p = vec3(10, -4, 2)
        assert np.allclose(rotate_about_line(p, axis, 360.0), p, atol=1e-9)

    def test_canonical_quarter_turn(self):
        axis = SpatialLine(vec3(0, 0, 1), vec3(0, 0, 0))
        out = rotate_about_line(vec3(10, 0, 0), axis, 90.0)
        assert np.allclose(out, [0, 10, 0], atol=1e-12)

    def test_isometry_on_random_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            axis = SpatialLine(rng.normal(size=3), rng.normal(size=3) * 20)
            p, q = rng.normal(size=3) * 30, rng.normal(size=3) * 30
            angle = rng.uniform(-360, 360)
            p2 = rotate_about_line(p, axis, angle)
            q2 = rotate_about_line(q, axis, angle)
            assert abs(np.linalg.norm(p2 - q2) - np.linalg.norm(p - q)) < 1e-9
            # distance to the axis is preserved
            assert abs(axis.distance_to(p2) - axis.distance_to(p)) < 1e-9

    def test_forward_backward_is_identity(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            axis = SpatialLine(rng.normal(size=3), rng.normal(size=3) * 10)
            p = rng.normal(size=3) * 40
            angle = rng.uniform(-180, 180)
            back = rotate_about_line(rotate_about_line(p, axis, angle), axis,
                                     -angle)
            assert np.allclose(back, p, atol=1e-9)


class TestTangentPoints:
    def test_pythagoras_distance(self):
        for side in Winding:
            t = tangent_points(vec2(10, 0), vec2(0, 0), 5.0, side)
            assert abs(np.linalg.norm(t - vec2(10, 0)) - math.sqrt(75)) < 1e-12

    def test_boundary_point_is_inside(self):
        with pytest.raises(PointInsideCircle):
            tangent_points(vec2(5, 0), vec2(0, 0), 5.0, Winding.CCW)
        with pytest.raises(PointInsideCircle):
            tangent_points(vec2(1, 1), vec2(0, 0), 5.0, Winding.CW)

    def test_two_sides_match_root_finding_oracle(self):
        external, center, r = vec2(8, 6), vec2(0, 0), 5.0
        got = {side: tangent_points(external, center, r, side)
               for side in Winding}
        oracle = tangency_oracle(external, center, r)
        assert len(oracle) == 2
        for t in got.values():
            assert min(np.linalg.norm(t - q) for q in oracle) < 1e-9
        # the two windings give the two distinct points
        assert np.linalg.norm(got[Winding.CCW] - got[Winding.CW]) > 1.0
        # mirror symmetry about the line center -> external
        u = (external - center) / np.linalg.norm(external - center)
        for t in got.values():
            w = t - center
            refl = 2 * (w @ u) * u - w
            other = got[Winding.CW] if np.allclose(
                t, got[Winding.CCW]) else got[Winding.CCW]
            assert np.allclose(center + refl, other, atol=1e-9)

    def test_tangent_perpendicular_to_radius(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            c = rng.normal(size=2) * 10
            r = rng.uniform(0.5, 8.0)
            p = c + rng.normal(size=2) * 30
            if np.linalg.norm(p - c) <= r * 1.05:
                continue
            for side in Winding:
                t = tangent_points(p, c, r, side)
                assert abs((p - t) @ (t - c)) < 1e-7
                d = np.linalg.norm(p - c)
                assert abs(np.linalg.norm(p - t) - math.sqrt(d * d - r * r)) < 1e-9


class TestLinePlane:
    def test_vertical_line(self):
        line = SpatialLine(vec3(0, 0, 1), vec3(3, 4, -17.0))
        assert np.allclose(line_plane_intersection(line), [3, 4, 0])

    def test_in_plane_line_is_parallel(self):
        with pytest.raises(ParallelAxis):
            line_plane_intersection(SpatialLine(vec3(1, 1, 0), vec3(0, 0, 0)))

    def test_oblique_line_by_hand(self):
        line = SpatialLine(vec3(1, 0, 1) / math.sqrt(2), vec3(0, 0, 5))
        assert np.allclose(line_plane_intersection(line), [-5, 0, 0],
                           atol=1e-12)


class TestRigidTransform:
    def test_rejects_non_orthonormal(self):
        bad = np.eye(3)
        bad[0, 1] = 1e-6
        with pytest.raises(ValueError):
            RigidTransform3(bad, np.zeros(3))

    def test_compose_associative_and_inverse(self):
        rng = np.random.default_rng(3)
        ts = []
        for _ in range(3):
            axis = SpatialLine(rng.normal(size=3), rng.normal(size=3) * 5)
            ts.append(RigidTransform3.rotation_about_line(
                axis, rng.uniform(-180, 180)))
        a, b, c = ts
        p = rng.normal(size=3) * 10
        left = a.compose(b).compose(c).apply(p)
        right = a.compose(b.compose(c)).apply(p)
        assert np.allclose(left, right, atol=1e-9)
        for t in ts:
            assert np.allclose(t.compose(t.inverse()).apply(p), p, atol=1e-9)

    def test_matches_rotate_about_line(self):
        axis = SpatialLine(vec3(2, -1, 0.5), vec3(1, 2, 3))
        p = vec3(4, 4, -2)
        t = RigidTransform3.rotation_about_line(axis, 37.0)
        assert np.allclose(t.apply(p), rotate_about_line(p, axis, 37.0))


class TestSpatialLine:
    def test_two_parameterizations_compare_equal(self):
        d = vec3(0.2, -0.3, 0.93)
        a = SpatialLine(d, vec3(1, 2, 3))
        b = SpatialLine(-d * 2.5, vec3(1, 2, 3) - 4.0 * d)
        assert a.is_same_line(b)
        c = SpatialLine(d, vec3(1.1, 2, 3))
        assert not a.is_same_line(c)

    def test_direction_normalized(self):
        line = SpatialLine(vec3(0, 0, 10), vec3(0, 0, 0))
        assert abs(np.linalg.norm(line.direction) - 1.0) < 1e-12

    def test_canonical_anchor_on_palm_plane(self):
        line = SpatialLine(vec3(1, 1, 1), vec3(5, 5, 5))
        canon = line.canonical()
        assert abs(canon.anchor[2]) < 1e-12
        assert canon.direction[2] > 0
        assert np.allclose(canon.anchor, [0, 0, 0], atol=1e-9)
