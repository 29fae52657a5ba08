"""Cable-drive transmission: route geometry, length, moment arms, coupling.

A route is an ordered chain anchor -> (pulleys / wrap surfaces) -> anchor,
each element fixed to one rigid body. Element coordinates are planar, in
the body's own frame: chassis coordinates are absolute (z = 0 working
plane); finger and thumb coordinates are relative to their pivots in the
zero-angle pose, so world = pivot + R(theta) * p. In lateral grip the whole
posed thumb geometry is additionally rotated about the retropulsion axis.

Taut-path model: straight tangent segments plus wrapped arcs. Circular
elements engage or disengage purely geometrically (tangency test with a
1e-9 mm hysteresis). Routes are planar within each grip mode's working
plane; for the lateral mode, tangencies are computed in each element's own
plane and the connecting chords measured in 3-D, which is exact whenever
the route is coplanar and a small documented approximation otherwise (the
angle-redirect pulley exists precisely to keep those offsets tiny).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (AmbiguousRoot, EmptyStroke, RouteDegenerate,
                     SingularConfiguration, SlackCable)
from .fourbar import (DEFAULT_EPS_ARM, DriveParameters, GripMode,
                      TridigitalGeometry, unit_from_angle)
from .geometry import RigidTransform3, SpatialLine, Winding

_HYSTERESIS = 1e-9          # mm, engagement switching band
_WRAP_MAX = 2.0 * math.pi - 0.35  # beyond this a "wrap" is a failed tangency
_MAX_CIRCLES = 4


class BodyId(enum.Enum):
    CHASSIS = "chassis"
    FINGERS = "fingers"
    THUMB = "thumb"


class Joint(enum.Enum):
    FINGERS = "fingers"
    THUMB = "thumb"


@dataclass(frozen=True)
class Anchor:
    point: tuple
    body: BodyId


@dataclass(frozen=True)
class Pulley:
    center: tuple
    radius: float
    body: BodyId
    winding: Winding


@dataclass(frozen=True)
class WrapSurface:
    center: tuple
    radius: float
    extent_deg: float
    body: BodyId
    winding: Winding


RouteElement = object  # Anchor | Pulley | WrapSurface


class CableRole(enum.Enum):
    FLEXOR = "flexor"
    EXTENSOR = "extensor"


@dataclass(frozen=True)
class CableRoute:
    """Ordered route elements plus rest length and axial stiffness.

    Stiffness is used only as an elasticity admissibility bound for the
    antagonist compatibility check, never in the kinematics.
    """

    elements: tuple
    role: CableRole
    rest_length_mm: float
    stiffness_n_mm: float = 1000.0

    def __post_init__(self):
        els = tuple(self.elements)
        object.__setattr__(self, "elements", els)
        if len(els) < 2:
            raise ValueError("route needs >= 2 elements")
        if not isinstance(els[0], Anchor) or not isinstance(els[-1], Anchor):
            raise ValueError("first and last route elements must be anchors")
        n_circ = 0
        for e in els:
            if isinstance(e, (Pulley, WrapSurface)):
                if e.radius <= 0.0:
                    raise ValueError("circular element radius must be positive")
                n_circ += 1
            if isinstance(e, WrapSurface) and e.extent_deg < 0.0:
                raise ValueError("wrap extent must be >= 0")
        if n_circ > _MAX_CIRCLES:
            raise ValueError(f"route has {n_circ} circular elements, max {_MAX_CIRCLES}")

    def active_elements(self):
        """Elements that participate geometrically (zero-extent wraps are vacuous)."""
        return [e for e in self.elements
                if not (isinstance(e, WrapSurface) and e.extent_deg == 0.0)]


@dataclass(frozen=True)
class CableDesign:
    """Flexor (and optional extensor) routes bound to a retropulsion axis."""

    flexor: CableRoute
    extensor: Optional[CableRoute]
    iteration: int
    retro_axis: SpatialLine
    thumb_range_deg: tuple = (-60.0, 170.0)
    tension_limit_n: float = 400.0
    dist_axis_max_mm: float = 10.0

    def __post_init__(self):
        if self.iteration not in (1, 2, 3):
            raise ValueError("iteration tag must be 1, 2 or 3")
        if self.flexor.role is not CableRole.FLEXOR:
            raise ValueError("flexor route must have role flexor")
        if self.extensor is not None and self.extensor.role is not CableRole.EXTENSOR:
            raise ValueError("extensor route must have role extensor")

    def thumb_side_attachment(self) -> np.ndarray:
        """Body-frame point of the flexor's thumb-side anchor."""
        for e in self.flexor.elements[::-1]:
            if isinstance(e, Anchor) and e.body is BodyId.THUMB:
                return np.asarray(e.point, float)
        raise ValueError("flexor has no thumb-side anchor")

    def attachment_axis_distance(self, theta_t_deg: float) -> float:
        """Distance of the thumb-side flexor anchor to the retro axis at a pose."""
        p = self.thumb_side_attachment()
        # opposed pose of the anchor (thumb body at theta_t, retro = 0)
        c, s = math.cos(math.radians(theta_t_deg)), math.sin(math.radians(theta_t_deg))
        world = np.array([c * p[0] - s * p[1], s * p[0] + c * p[1], 0.0])
        return self.retro_axis.distance_to(world)  # pivot offset added by caller


# body poses -------------------------------------------------------------------


@dataclass(frozen=True)
class BodyPoses:
    """World pose of every rigid body for a batch of joint configurations."""

    pivot_a: np.ndarray
    pivot_b: np.ndarray
    theta_f_rad: np.ndarray
    theta_t_rad: np.ndarray
    grip_mode: GripMode
    retro: Optional[RigidTransform3]

    @classmethod
    def make(cls, geom: TridigitalGeometry, theta_f_deg, theta_t_deg,
             grip_mode: GripMode = GripMode.OPPOSED,
             retro_axis: Optional[SpatialLine] = None) -> "BodyPoses":
        tf = np.atleast_1d(np.radians(np.asarray(theta_f_deg, float)))
        tt = np.atleast_1d(np.radians(np.asarray(theta_t_deg, float)))
        tf, tt = np.broadcast_arrays(tf, tt)
        retro = None
        if grip_mode is GripMode.LATERAL:
            if retro_axis is None:
                raise ValueError("lateral poses need the retropulsion axis")
            retro = RigidTransform3.rotation_about_line(
                retro_axis, grip_mode.retro_angle_deg)
        return cls(geom.pivot_a, geom.pivot_b, tf, tt, grip_mode, retro)

    @property
    def n(self) -> int:
        return self.theta_f_rad.shape[0]

    def _planar_world(self, p_body, pivot, theta):
        c, s = np.cos(theta), np.sin(theta)
        x = pivot[0] + c * p_body[0] - s * p_body[1]
        y = pivot[1] + s * p_body[0] + c * p_body[1]
        return np.stack([x, y, np.zeros_like(x)], axis=-1)

    def world_points(self, p_body, body: BodyId) -> np.ndarray:
        """World positions (n, 3) of a body-frame planar point."""
        p = np.asarray(p_body, float)
        if body is BodyId.CHASSIS:
            w = np.broadcast_to(np.array([p[0], p[1], 0.0]), (self.n, 3)).copy()
        elif body is BodyId.FINGERS:
            w = self._planar_world(p, self.pivot_a, self.theta_f_rad)
        else:
            w = self._planar_world(p, self.pivot_b, self.theta_t_rad)
            if self.retro is not None:
                w = self.retro.apply(w)
        return w

    def plane_basis(self, body: BodyId):
        """Orthonormal in-plane axes + normal of the body's working plane."""
        if body is BodyId.THUMB and self.retro is not None:
            R = self.retro.rotation
            return R[:, 0], R[:, 1], R[:, 2]
        return (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]),
                np.array([0.0, 0.0, 1.0]))

    def joint_motion(self, joint: Joint):
        """(axis direction, pivot point) of a joint's rotation in world frame."""
        z = np.array([0.0, 0.0, 1.0])
        if joint is Joint.FINGERS:
            return z, np.array([self.pivot_a[0], self.pivot_a[1], 0.0])
        pivot = np.array([self.pivot_b[0], self.pivot_b[1], 0.0])
        if self.retro is not None:
            return self.retro.rotation @ z, self.retro.apply(pivot)
        return z, pivot


# taut path solver -------------------------------------------------------------


@dataclass
class _Resolved:
    centers: np.ndarray          # (n, 3)
    rho: float                   # signed radius; 0 for anchors
    radius: float
    e1: np.ndarray
    e2: np.ndarray
    extent_rad: Optional[float]  # None for anchors/pulleys
    body: BodyId

    @property
    def is_circle(self) -> bool:
        return self.radius > 0.0


def _resolve(route: CableRoute, poses: BodyPoses):
    out = []
    for e in route.active_elements():
        if isinstance(e, Anchor):
            out.append(_Resolved(poses.world_points(e.point, e.body), 0.0, 0.0,
                                 *poses.plane_basis(e.body)[:2], None, e.body))
        else:
            rho = e.winding.sign * e.radius
            extent = math.radians(e.extent_deg) if isinstance(e, WrapSurface) else None
            out.append(_Resolved(poses.world_points(e.center, e.body), rho,
                                 e.radius, *poses.plane_basis(e.body)[:2],
                                 extent, e.body))
    return out


def _project(points, origin, e1, e2):
    w = points - origin
    return np.stack([w @ e1, w @ e2], axis=-1)


def _belt(ci2, rho_i, cj2, rho_j):
    """Common tangent between signed circles in one plane (anchors: rho = 0).

    Returns (n_hat (n,2), s (n,), valid (n,)); tangent points are
    c + rho * n_hat and the straight span is s.
    """
    D = cj2 - ci2
    L2 = np.sum(D * D, axis=-1)
    delta = rho_j - rho_i
    s2 = L2 - delta * delta
    valid = (s2 > _HYSTERESIS ** 2) & (L2 > 0.0)
    s = np.sqrt(np.maximum(s2, 0.0))
    perp = np.stack([-D[..., 1], D[..., 0]], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (s[..., None] * D - delta * perp) / L2[..., None]
    n_hat = np.stack([u[..., 1], -u[..., 0]], axis=-1)
    return n_hat, s, valid


def _pair_connection(ei: _Resolved, ej: _Resolved):
    """Exit point on ei, entry point on ej, tangency normals, validity."""
    n = ei.centers.shape[0]
    ones = np.ones(n, bool)
    if not ei.is_circle and not ej.is_circle:
        return ei.centers, ej.centers, None, None, ones
    exit3, entry3, n_i, n_j = ei.centers, ej.centers, None, None
    valid = ones
    if ei.is_circle:
        cj2 = _project(ej.centers, ei.centers, ei.e1, ei.e2)
        n_i, _, v = _belt(np.zeros_like(cj2), ei.rho, cj2, ej.rho)
        valid = valid & v
        exit3 = ei.centers + ei.rho * (n_i[..., :1] * ei.e1 + n_i[..., 1:] * ei.e2)
    if ej.is_circle:
        ci2 = _project(ei.centers, ej.centers, ej.e1, ej.e2)
        n_j, _, v = _belt(ci2, ei.rho, np.zeros_like(ci2), ej.rho)
        valid = valid & v
        entry3 = ej.centers + ej.rho * (n_j[..., :1] * ej.e1 + n_j[..., 1:] * ej.e2)
    return exit3, entry3, n_i, n_j, valid


def _wrap_angle(n_in, n_out, winding_sign):
    cross = n_in[..., 0] * n_out[..., 1] - n_in[..., 1] * n_out[..., 0]
    dot = np.sum(n_in * n_out, axis=-1)
    ang = np.arctan2(cross, dot)
    return np.mod(winding_sign * ang, 2.0 * math.pi)


def _chord_clearance_ok(elem: _Resolved, p3, q3):
    """True where a skipped circle genuinely clears the straight chord."""
    p2 = _project(p3, elem.centers, elem.e1, elem.e2)
    q2 = _project(q3, elem.centers, elem.e1, elem.e2)
    d = q2 - p2
    L2 = np.sum(d * d, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -np.sum(p2 * d, axis=-1) / L2
        sigma = (d[..., 0] * (-p2[..., 1]) - d[..., 1] * (-p2[..., 0])) / np.sqrt(L2)
    winding_sign = 1.0 if elem.rho > 0 else -1.0
    sigma_w = winding_sign * sigma
    outside = (t < 0.0) | (t > 1.0)
    return outside | (sigma_w >= elem.radius - _HYSTERESIS) | (L2 == 0.0)


@dataclass
class _PathSolution:
    length: np.ndarray        # (n,)
    valid: np.ndarray         # (n,)
    u_first: np.ndarray       # (n, 3) direction of the first straight segment
    u_last: np.ndarray        # (n, 3) direction of the last straight segment
    du: dict                  # circle index -> (n, 3) (u_in - u_out), 0 if free
    engaged: dict             # circle index -> (n,) bool
    wrap: dict                # circle index -> (n,) wrap angle (rad)
    wrap_overflow: np.ndarray  # (n,) any wrap surface beyond its declared extent


def _solve_route(route: CableRoute, poses: BodyPoses) -> _PathSolution:
    elems = _resolve(route, poses)
    n = poses.n
    circle_idx = [i for i, e in enumerate(elems) if e.is_circle]
    subsets = sorted(
        (tuple(s) for k in range(len(circle_idx) + 1)
         for s in itertools.combinations(circle_idx, k)),
        key=lambda s: (-len(s), s))

    lengths = np.full((len(subsets), n), np.inf)
    valids = np.zeros((len(subsets), n), bool)
    auxes = []
    for si, sub in enumerate(subsets):
        chain = [0] + [i for i in circle_idx if i in sub] + [len(elems) - 1]
        ok = np.ones(n, bool)
        exits, entries, normals = [], [], {}
        total = np.zeros(n)
        udirs = []
        for a, b in zip(chain[:-1], chain[1:]):
            exit3, entry3, n_i, n_j, v = _pair_connection(elems[a], elems[b])
            ok &= v
            seg = entry3 - exit3
            slen = np.linalg.norm(seg, axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                u = np.where(slen[..., None] > 0, seg / np.where(slen == 0, 1, slen)[..., None], 0.0)
            udirs.append(u)
            total += slen
            exits.append(exit3)
            entries.append(entry3)
            if n_i is not None:
                normals.setdefault(a, [None, None])[1] = n_i
            if n_j is not None:
                normals.setdefault(b, [None, None])[0] = n_j
        du = {}
        engaged = {}
        wrap = {}
        overflow = np.zeros(n, bool)
        for pos, k in enumerate(chain[1:-1]):
            elem = elems[k]
            n_in, n_out = normals[k][0], normals[k][1]
            w = _wrap_angle(n_in, n_out, 1.0 if elem.rho > 0 else -1.0)
            ok &= w <= _WRAP_MAX
            total += elem.radius * w
            wrap[k] = w
            engaged[k] = np.ones(n, bool)
            du[k] = udirs[pos] - udirs[pos + 1]
            if elem.extent_rad is not None:
                overflow |= w > elem.extent_rad + 1e-12
        # skipped circles must clear the chord that now spans them
        for k in circle_idx:
            if k in sub:
                continue
            left = max(i for i in chain if i < k)
            right = min(i for i in chain if i > k)
            pair_pos = chain.index(left)
            ok &= _chord_clearance_ok(elems[k], exits[pair_pos], entries[pair_pos])
        lengths[si] = np.where(ok, total, np.inf)
        valids[si] = ok
        auxes.append((udirs[0], udirs[-1], du, engaged, wrap, overflow))

    any_valid = np.any(valids, axis=0)
    pick = np.argmin(lengths, axis=0)
    length = lengths[pick, np.arange(n)]

    u_first = np.zeros((n, 3))
    u_last = np.zeros((n, 3))
    du_all = {k: np.zeros((n, 3)) for k in circle_idx}
    engaged_all = {k: np.zeros(n, bool) for k in circle_idx}
    wrap_all = {k: np.zeros(n) for k in circle_idx}
    overflow_all = np.zeros(n, bool)
    for si in range(len(subsets)):
        m = (pick == si) & any_valid
        if not np.any(m):
            continue
        uf, ul, du, engaged, wrap, overflow = auxes[si]
        u_first[m] = uf[m]
        u_last[m] = ul[m]
        overflow_all[m] = overflow[m]
        for k in circle_idx:
            if k in du:
                du_all[k][m] = du[k][m]
                engaged_all[k][m] = True
                wrap_all[k][m] = wrap[k][m]
    return _PathSolution(length, any_valid, u_first, u_last, du_all,
                         engaged_all, wrap_all, overflow_all)


# public operations --------------------------------------------------------------


def cable_length(route: CableRoute, poses: BodyPoses) -> float:
    """Taut cable length (mm) for a single pose; RouteDegenerate if invalid."""
    sol = _solve_route(route, poses)
    if not bool(np.all(sol.valid)):
        raise RouteDegenerate("no consistent taut path (overlapping or "
                              "swallowed elements)")
    return float(sol.length[0]) if sol.length.shape[0] == 1 else sol.length


def cable_lengths(route: CableRoute, poses: BodyPoses):
    """Batch lengths (n,) with validity mask instead of raising."""
    sol = _solve_route(route, poses)
    return sol.length, sol.valid


def length_rate(route: CableRoute, poses: BodyPoses, joint: Joint) -> np.ndarray:
    """Signed dL/d theta_joint (mm/rad) from the taut-path force balance.

    Exact for coplanar routes; for lateral-mode routes it inherits the
    planar-per-plane approximation of the length model.
    """
    sol = _solve_route(route, poses)
    if not bool(np.all(sol.valid)):
        raise RouteDegenerate("no consistent taut path")
    elems = _resolve(route, poses)
    axis_dir, pivot = poses.joint_motion(joint)
    body = BodyId.FINGERS if joint is Joint.FINGERS else BodyId.THUMB

    def v(points):
        return np.cross(axis_dir, points - pivot)

    rate = np.zeros(poses.n)
    if elems[0].body is body:
        rate += -np.sum(sol.u_first * v(elems[0].centers), axis=-1)
    if elems[-1].body is body:
        rate += np.sum(sol.u_last * v(elems[-1].centers), axis=-1)
    for k, e in enumerate(elems):
        if e.is_circle and e.body is body:
            rate += np.sum(sol.du[k] * v(e.centers), axis=-1)
    return rate


def moment_arm(route: CableRoute, poses: BodyPoses, joint: Joint) -> float:
    """|dL/d theta_joint| in mm/rad (the cable's lever about the joint)."""
    r = np.abs(length_rate(route, poses, joint))
    return float(r[0]) if r.shape[0] == 1 else r


def _poses_for(design, geom, theta_f_deg, theta_t_deg, grip_mode):
    return BodyPoses.make(geom, theta_f_deg, theta_t_deg, grip_mode,
                          design.retro_axis)


def coupled_thumb_angle(design: CableDesign, geom: TridigitalGeometry,
                        theta_f_deg: float, grip_mode: GripMode,
                        grid_step_deg: float = 2.0) -> float:
    """Thumb angle imposed by the taut flexor at a finger angle.

    Solves L_flexor(theta_f, theta_t) = L0 by bracketed bisection over the
    design's thumb flexion range; residual below 1e-9 mm. Raises SlackCable
    when no taut configuration exists and AmbiguousRoot when several do.
    """
    roots = _coupling_batch(design, geom, np.array([theta_f_deg]), grip_mode,
                            grid_step_deg)
    status = roots.status[0]
    if status == _CouplingStatus.SLACK:
        raise SlackCable(f"flexor cannot be taut at theta_f = {theta_f_deg:.4g} deg")
    if status == _CouplingStatus.AMBIGUOUS:
        raise AmbiguousRoot(
            f"multiple taut thumb angles at theta_f = {theta_f_deg:.4g} deg",
            roots.all_roots_deg[0])
    return float(roots.theta_t_deg[0])


class _CouplingStatus:
    OK = 0
    SLACK = 1
    AMBIGUOUS = 2
    DEGENERATE = 3


@dataclass
class _CouplingResult:
    theta_t_deg: np.ndarray
    status: np.ndarray
    all_roots_deg: list


def _coupling_batch(design: CableDesign, geom: TridigitalGeometry,
                    theta_f_deg: np.ndarray, grip_mode: GripMode,
                    grid_step_deg: float = 2.0) -> _CouplingResult:
    """Vectorized root solve of L(theta_f_i, theta_t) = L0 for each i."""
    tf = np.asarray(theta_f_deg, float)
    n = tf.shape[0]
    lo, hi = design.thumb_range_deg
    k = max(int(math.ceil((hi - lo) / grid_step_deg)), 2) + 1
    tt_grid = np.linspace(lo, hi, k)
    TF = np.repeat(tf, k)
    TT = np.tile(tt_grid, n)
    poses = _poses_for(design, geom, TF, TT, grip_mode)
    L, valid = cable_lengths(design.flexor, poses)
    F = (L - design.flexor.rest_length_mm).reshape(n, k)
    V = valid.reshape(n, k)

    sign_change = (F[:, :-1] * F[:, 1:] < 0.0) & V[:, :-1] & V[:, 1:]
    n_roots = np.sum(sign_change, axis=1)
    status = np.where(n_roots == 1, _CouplingStatus.OK,
                      np.where(n_roots == 0, _CouplingStatus.SLACK,
                               _CouplingStatus.AMBIGUOUS))
    status = np.where(np.all(~V, axis=1), _CouplingStatus.DEGENERATE, status)

    first = np.argmax(sign_change, axis=1)
    a = tt_grid[first]
    b = tt_grid[first + 1]
    fa = F[np.arange(n), first]
    # 60 bisection steps: bracket width below 1e-16 deg, residual ~ machine eps
    for _ in range(60):
        mid = 0.5 * (a + b)
        poses = _poses_for(design, geom, tf, mid, grip_mode)
        Lm, _ = cable_lengths(design.flexor, poses)
        fm = Lm - design.flexor.rest_length_mm
        go_left = fa * fm <= 0.0
        b = np.where(go_left, mid, b)
        a = np.where(go_left, a, mid)
        fa = np.where(go_left, fa, fm)
    theta = 0.5 * (a + b)

    all_roots = []
    for i in range(n):
        if status[i] == _CouplingStatus.AMBIGUOUS:
            idx = np.nonzero(sign_change[i])[0]
            rts = []
            for j in idx:
                aa, bb, faa = tt_grid[j], tt_grid[j + 1], F[i, j]
                for _ in range(60):
                    m = 0.5 * (aa + bb)
                    pm = _poses_for(design, geom, np.array([tf[i]]),
                                    np.array([m]), grip_mode)
                    fm = cable_lengths(design.flexor, pm)[0][0] - design.flexor.rest_length_mm
                    if faa * fm <= 0.0:
                        bb = m
                    else:
                        aa, faa = m, fm
                rts.append(0.5 * (aa + bb))
            all_roots.append(rts)
        else:
            all_roots.append([float(theta[i])])
    return _CouplingResult(theta, status, all_roots)


def aperture(geom: TridigitalGeometry, design: CableDesign, theta_f_deg,
             theta_t_deg, grip_mode: GripMode):
    """d(MT): finger tip to (possibly retro-rotated) thumb tip distance."""
    tf = np.atleast_1d(np.radians(np.asarray(theta_f_deg, float)))
    tt = np.atleast_1d(np.radians(np.asarray(theta_t_deg, float)))
    M = geom.l_f * unit_from_angle(tf)
    M3 = np.concatenate([M, np.zeros(M.shape[:-1] + (1,))], axis=-1)
    T = np.array([geom.d_ab, 0.0]) + geom.l_th * unit_from_angle(tt)
    T3 = np.concatenate([T, np.zeros(T.shape[:-1] + (1,))], axis=-1)
    if grip_mode is GripMode.LATERAL:
        retro = RigidTransform3.rotation_about_line(
            design.retro_axis, grip_mode.retro_angle_deg)
        T3 = retro.apply(T3)
    return np.linalg.norm(M3 - T3, axis=-1)


def _aperture_partials(geom, design, tf_rad, tt_rad, grip_mode):
    """(d, dd/dtheta_f, dd/dtheta_t) of the aperture, lateral-aware."""
    M = geom.l_f * unit_from_angle(tf_rad)
    M3 = np.stack([M[..., 0], M[..., 1], np.zeros_like(tf_rad)], axis=-1)
    dM3 = geom.l_f * np.stack([-np.sin(tf_rad), np.cos(tf_rad),
                               np.zeros_like(tf_rad)], axis=-1)
    T = np.array([geom.d_ab, 0.0]) + geom.l_th * unit_from_angle(tt_rad)
    T3 = np.stack([T[..., 0], T[..., 1], np.zeros_like(tt_rad)], axis=-1)
    z = np.array([0.0, 0.0, 1.0])
    pivot = np.array([geom.d_ab, 0.0, 0.0])
    if grip_mode is GripMode.LATERAL:
        retro = RigidTransform3.rotation_about_line(
            design.retro_axis, grip_mode.retro_angle_deg)
        T3 = retro.apply(T3)
        axis_t = retro.rotation @ z
        pivot = retro.apply(pivot)
    else:
        axis_t = z
    dT3 = np.cross(axis_t, T3 - pivot)
    diff = M3 - T3
    d = np.linalg.norm(diff, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = diff / d[..., None]
    return d, np.sum(u * dM3, axis=-1), -np.sum(u * dT3, axis=-1)


def cable_grip_force(design: CableDesign, geom: TridigitalGeometry,
                     theta_f_deg: float, grip_mode: GripMode,
                     drive: DriveParameters,
                     eps_arm: float = DEFAULT_EPS_ARM) -> float:
    """Grip force through the cable-coupled mechanism (virtual work)."""
    tt = coupled_thumb_angle(design, geom, theta_f_deg, grip_mode)
    poses = _poses_for(design, geom, theta_f_deg, tt, grip_mode)
    rate_f = length_rate(design.flexor, poses, Joint.FINGERS)
    rate_t = length_rate(design.flexor, poses, Joint.THUMB)
    if abs(float(rate_f[0])) < eps_arm or abs(float(rate_t[0])) < eps_arm:
        raise SingularConfiguration("flexor moment arm below eps_arm")
    coupling = -float(rate_f[0]) / float(rate_t[0])
    tf = np.array([math.radians(theta_f_deg)])
    ttr = np.array([math.radians(tt)])
    _, pf, pt = _aperture_partials(geom, design, tf, ttr, grip_mode)
    total = float(pf[0]) + float(pt[0]) * coupling
    if abs(total) < eps_arm:
        raise SingularConfiguration(
            f"|d d(MT)/d theta_f| = {abs(total):.3g} mm/rad < eps_arm")
    return drive.tau_in_nmm / abs(total)


def cable_tension(design: CableDesign, geom: TridigitalGeometry,
                  theta_f_deg: float, grip_mode: GripMode,
                  drive: DriveParameters,
                  eps_arm: float = DEFAULT_EPS_ARM) -> float:
    """Free-running cable tension tau_in / finger-side arm (N).

    This is the tension the motor can impose when the grip force is zero;
    it is the quantity that spikes at the iteration-1 alignment singularity.
    Compare against design.tension_limit_n.
    """
    tt = coupled_thumb_angle(design, geom, theta_f_deg, grip_mode)
    poses = _poses_for(design, geom, theta_f_deg, tt, grip_mode)
    arm_f = moment_arm(design.flexor, poses, Joint.FINGERS)
    if arm_f < eps_arm:
        raise SingularConfiguration(
            f"finger-side arm {arm_f:.3g} mm/rad < eps_arm (tension unbounded)")
    return drive.tau_in_nmm / arm_f


@dataclass(frozen=True)
class AntagonistReport:
    """Flexor/extensor compatibility at one finger angle."""

    theta_t_flexor_deg: float
    theta_t_extensor_deg: float
    residual_deg: float
    stretch_mm: float
    stretch_bound_mm: float
    admissible: bool


def antagonist_residual(design: CableDesign, geom: TridigitalGeometry,
                        theta_f_deg: float, grip_mode: GripMode) -> AntagonistReport:
    """Thumb-angle disagreement between taut flexor and taut extensor.

    The hyperstatic pair is admissible when the equivalent cable stretch
    (residual arc at the thumb) can be absorbed by the series elasticity of
    the two cables at the configured tension limit.
    """
    if design.extensor is None:
        raise ValueError("design has no extensor route")
    tt_flex = coupled_thumb_angle(design, geom, theta_f_deg, grip_mode)
    ext_design = CableDesign(
        flexor=CableRoute(design.extensor.elements, CableRole.FLEXOR,
                          design.extensor.rest_length_mm,
                          design.extensor.stiffness_n_mm),
        extensor=None, iteration=design.iteration,
        retro_axis=design.retro_axis, thumb_range_deg=design.thumb_range_deg,
        tension_limit_n=design.tension_limit_n,
        dist_axis_max_mm=design.dist_axis_max_mm)
    tt_ext = coupled_thumb_angle(ext_design, geom, theta_f_deg, grip_mode)
    residual = abs(tt_flex - tt_ext)
    poses = _poses_for(design, geom, theta_f_deg, tt_ext, grip_mode)
    arm_t = moment_arm(design.extensor, poses, Joint.THUMB)
    stretch = math.radians(residual) * arm_t
    compliance = 1.0 / design.flexor.stiffness_n_mm + 1.0 / design.extensor.stiffness_n_mm
    bound = design.tension_limit_n * compliance
    return AntagonistReport(tt_flex, tt_ext, residual, stretch, bound,
                            stretch <= bound)


def retropulsion_invariance(design: CableDesign, geom: TridigitalGeometry,
                            stroke_deg: tuple, samples: int = 20) -> float:
    """Max |L_opposed - L_lateral| of the flexor at matched joint angles (mm).

    Zero when every thumb-side attachment is fixed by the retro rotation.
    """
    tf = np.linspace(stroke_deg[0], stroke_deg[1], samples)
    roots = _coupling_batch(design, geom, tf, GripMode.OPPOSED)
    ok = roots.status == _CouplingStatus.OK
    tt = roots.theta_t_deg
    p_o = BodyPoses.make(geom, tf[ok], tt[ok], GripMode.OPPOSED)
    p_l = BodyPoses.make(geom, tf[ok], tt[ok], GripMode.LATERAL,
                         design.retro_axis)
    L_o, v_o = cable_lengths(design.flexor, p_o)
    L_l, v_l = cable_lengths(design.flexor, p_l)
    both = v_o & v_l
    if not np.any(both):
        raise RouteDegenerate("flexor path invalid over the whole stroke")
    return float(np.max(np.abs(L_o[both] - L_l[both])))


# stroke sweep -------------------------------------------------------------------


@dataclass
class CableSweep:
    """Tabulated cable-transmission sweep over a finger stroke."""

    grip_mode: GripMode
    theta_f_deg: np.ndarray
    theta_t_deg: np.ndarray
    opening_mm: np.ndarray
    force_n: np.ndarray
    tension_n: np.ndarray
    arm_fingers_mm: np.ndarray
    arm_thumb_mm: np.ndarray
    singular: np.ndarray
    warnings: list


def cable_sweep(design: CableDesign, geom: TridigitalGeometry,
                drive: DriveParameters, stroke_deg: tuple, step_deg: float,
                grip_mode: GripMode,
                eps_arm: float = DEFAULT_EPS_ARM) -> CableSweep:
    """Sweep the coupled transmission; singular samples marked, not dropped."""
    from .fourbar import stroke_samples
    if stroke_deg[0] >= stroke_deg[1]:
        raise EmptyStroke(f"empty stroke {stroke_deg}")
    tf = stroke_samples(stroke_deg[0], stroke_deg[1], step_deg)
    n = tf.shape[0]
    roots = _coupling_batch(design, geom, tf, grip_mode)
    tt = roots.theta_t_deg.copy()
    warnings = []
    solvable = roots.status == _CouplingStatus.OK
    for i in np.nonzero(~solvable)[0]:
        kind = {_CouplingStatus.SLACK: "slack cable",
                _CouplingStatus.AMBIGUOUS: "ambiguous coupling root",
                _CouplingStatus.DEGENERATE: "degenerate route"}[int(roots.status[i])]
        warnings.append(f"theta_f={tf[i]:.4g} deg: {kind}")
        tt[i] = np.nan

    opening = np.full(n, np.nan)
    force = np.full(n, np.nan)
    tension = np.full(n, np.nan)
    arm_f = np.full(n, np.nan)
    arm_t = np.full(n, np.nan)
    singular = np.zeros(n, bool)
    if np.any(solvable):
        poses = _poses_for(design, geom, tf[solvable], tt[solvable], grip_mode)
        rf = length_rate(design.flexor, poses, Joint.FINGERS)
        rt = length_rate(design.flexor, poses, Joint.THUMB)
        arm_f[solvable] = np.abs(rf)
        arm_t[solvable] = np.abs(rt)
        opening[solvable] = aperture(geom, design, tf[solvable], tt[solvable],
                                     grip_mode)
        tfr = np.radians(tf[solvable])
        ttr = np.radians(tt[solvable])
        _, pf, pt = _aperture_partials(geom, design, tfr, ttr, grip_mode)
        with np.errstate(divide="ignore", invalid="ignore"):
            coupling = -rf / rt
            total = pf + pt * coupling
        sing = (np.abs(rf) < eps_arm) | (np.abs(rt) < eps_arm) | \
               (np.abs(total) < eps_arm)
        singular[solvable] = sing
        with np.errstate(divide="ignore", invalid="ignore"):
            f = drive.tau_in_nmm / np.abs(total)
            t = drive.tau_in_nmm / np.abs(rf)
        force[solvable] = np.where(sing, np.nan, f)
        tension[solvable] = np.where(np.abs(rf) < eps_arm, np.nan, t)
        for i, flag in zip(np.nonzero(solvable)[0], sing):
            if flag:
                warnings.append(f"theta_f={tf[i]:.4g} deg: singular configuration")
    singular[~solvable] = True
    return CableSweep(grip_mode, tf, tt, opening, force, tension, arm_f,
                      arm_t, singular, warnings)
