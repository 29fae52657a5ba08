"""Placement of the passive thumb retropulsion axis.

The axis is a spatial line with exactly four degrees of freedom, charted as
direction (azimuth, elevation) plus palm-plane intercept (x0, y0). The
designer's criteria are evaluated on the four extreme thumb poses and on a
sweep of the coupled stroke; the search operation automates the manual
place-and-inspect loop with a penalized multi-start simplex descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .cable import CableDesign, GripMode, _coupling_batch, _CouplingStatus
from .errors import InvariantViolation, KinematicsInfeasible
from .fourbar import TridigitalGeometry
from .geometry import RigidTransform3, SpatialLine, vec3

BIG_PENALTY = 1e12


@dataclass(frozen=True)
class AxisPlacement:
    """Four-parameter chart of the retropulsion axis.

    azimuth/elevation give the direction (elevation measured from the palm
    plane; the chart excludes palm-parallel axes), x0/y0 the intersection
    with the palm plane z = 0.
    """

    azimuth_deg: float
    elevation_deg: float
    x0_mm: float
    y0_mm: float

    def __post_init__(self):
        if not (0.0 < self.elevation_deg <= 90.0):
            raise InvariantViolation(
                "elevation in (0, 90]",
                f"elevation = {self.elevation_deg} deg outside (0, 90]")

    def to_line(self) -> SpatialLine:
        az = math.radians(self.azimuth_deg)
        el = math.radians(self.elevation_deg)
        d = vec3(math.cos(el) * math.cos(az), math.cos(el) * math.sin(az),
                 math.sin(el))
        return SpatialLine(d, vec3(self.x0_mm, self.y0_mm, 0.0))

    @classmethod
    def from_line(cls, line: SpatialLine) -> "AxisPlacement":
        c = line.canonical()
        d = c.direction
        return cls(azimuth_deg=math.degrees(math.atan2(d[1], d[0])),
                   elevation_deg=math.degrees(math.asin(min(d[2], 1.0))),
                   x0_mm=float(c.anchor[0]), y0_mm=float(c.anchor[1]))

    def params(self) -> np.ndarray:
        return np.array([self.azimuth_deg, self.elevation_deg,
                         self.x0_mm, self.y0_mm])


@dataclass(frozen=True)
class DesignTargets:
    """The design criteria the axis placement must satisfy."""

    opening_opposed_min_mm: float = 100.0
    opening_lateral_min_mm: float = 35.0
    contact_tol_mm: float = 12.0
    envelope_min_mm: tuple = (-25.0, -40.0, -30.0)
    envelope_max_mm: tuple = (110.0, 95.0, 30.0)
    anthropomorphism_weight: float = 0.01
    retro_angle_deg: float = 90.0

    def __post_init__(self):
        if self.contact_tol_mm <= 0.0:
            raise InvariantViolation("contact_tol > 0")
        lo = np.asarray(self.envelope_min_mm, float)
        hi = np.asarray(self.envelope_max_mm, float)
        if not np.all(hi > lo):
            raise InvariantViolation("envelope box non-degenerate")


@dataclass(frozen=True)
class ThumbPose:
    transform: RigidTransform3
    contact_point: np.ndarray   # T in world frame
    base_point: np.ndarray      # flexion pivot in world frame
    retro_deg: float
    flexion_deg: float


@dataclass(frozen=True)
class ExtremePoseSet:
    """The four checked poses: {opposed, lateral} x {open, closed}."""

    opposed_open: ThumbPose
    opposed_closed: ThumbPose
    lateral_open: ThumbPose
    lateral_closed: ThumbPose

    def all(self):
        return [self.opposed_open, self.opposed_closed,
                self.lateral_open, self.lateral_closed]


@dataclass(frozen=True)
class ConstraintReport:
    """Residuals (pass iff <= 0), achieved values and aggregate penalty."""

    residuals: dict
    passed: dict
    opening_opposed_mm: float
    opening_lateral_mm: float
    contact_gap_opposed_mm: float
    contact_gap_lateral_mm: float
    anthropomorphism_mm: float
    hard_penalty: float
    aggregate_penalty: float
    feasible: bool

    def to_dict(self) -> dict:
        return {
            "residuals": dict(self.residuals),
            "passed": dict(self.passed),
            "opening_opposed_mm": self.opening_opposed_mm,
            "opening_lateral_mm": self.opening_lateral_mm,
            "contact_gap_opposed_mm": self.contact_gap_opposed_mm,
            "contact_gap_lateral_mm": self.contact_gap_lateral_mm,
            "anthropomorphism_mm": self.anthropomorphism_mm,
            "hard_penalty": self.hard_penalty,
            "aggregate_penalty": self.aggregate_penalty,
            "feasible": self.feasible,
        }


def thumb_pose(axis: AxisPlacement, geom: TridigitalGeometry, retro_deg: float,
               flexion_deg: float) -> RigidTransform3:
    """Thumb body pose: flexion about the pivot, then retropulsion about the axis.

    retro = 0 reproduces the planar pose exactly.
    """
    flex = RigidTransform3.rotation_about_z(
        flexion_deg, vec3(geom.d_ab, 0.0, 0.0))
    retro = RigidTransform3.rotation_about_line(axis.to_line(), retro_deg)
    return retro.compose(flex)


def _pose_points(axis, geom, retro_deg, flexion_deg):
    tr = thumb_pose(axis, geom, retro_deg, flexion_deg)
    t_body = vec3(geom.d_ab + geom.l_th, 0.0, 0.0)
    base = vec3(geom.d_ab, 0.0, 0.0)
    return ThumbPose(tr, tr.apply(t_body), tr.apply(base), retro_deg,
                     flexion_deg)


def extreme_positions(axis: AxisPlacement, geom: TridigitalGeometry,
                      flexion_range_deg: tuple,
                      retro_angle_deg: float = 90.0) -> ExtremePoseSet:
    """Evaluate the thumb at {0, retro} x {flex max, flex min}.

    Closed poses use the maximal flexion (thumb fully flexed onto the
    fingers), open poses the minimal one.
    """
    flex_min, flex_max = sorted(flexion_range_deg)
    return ExtremePoseSet(
        opposed_open=_pose_points(axis, geom, 0.0, flex_min),
        opposed_closed=_pose_points(axis, geom, 0.0, flex_max),
        lateral_open=_pose_points(axis, geom, retro_angle_deg, flex_min),
        lateral_closed=_pose_points(axis, geom, retro_angle_deg, flex_max),
    )


# evaluation context -------------------------------------------------------------


@dataclass
class AxisEvaluationContext:
    """Axis-independent data shared by every candidate evaluation.

    Holds the opposed-mode coupled stroke (theta_f_i, theta_t_i) sampled
    from the cable design, with the matching finger / thumb contact points
    already embedded in 3-D. Per candidate, the lateral flexion angles are
    recovered by one Newton step of the taut-flexor constraint from the
    opposed solution; the step is exact for constant-moment-arm designs
    (cable length affine in the thumb angle) and first-order otherwise.
    """

    geom: TridigitalGeometry
    design: CableDesign
    stroke_deg: tuple
    theta_f_deg: np.ndarray = field(init=False)
    theta_t_deg: np.ndarray = field(init=False)
    m_points: np.ndarray = field(init=False)
    t_points: np.ndarray = field(init=False)
    base_point: np.ndarray = field(init=False)
    d_opposed: np.ndarray = field(init=False)
    samples: int = 41

    def __post_init__(self):
        tf = np.linspace(self.stroke_deg[0], self.stroke_deg[1], self.samples)
        roots = _coupling_batch(self.design, self.geom, tf, GripMode.OPPOSED)
        if not bool(np.all(roots.status == _CouplingStatus.OK)):
            bad = tf[roots.status != _CouplingStatus.OK]
            raise KinematicsInfeasible(
                f"opposed coupling unsolvable at theta_f = {bad[0]:.4g} deg")
        tt = roots.theta_t_deg
        self.theta_f_deg = tf
        self.theta_t_deg = tt
        tfr, ttr = np.radians(tf), np.radians(tt)
        M = self.geom.l_f * np.stack([np.cos(tfr), np.sin(tfr)], axis=-1)
        self.m_points = np.concatenate([M, np.zeros((self.samples, 1))], axis=-1)
        T = (np.array([self.geom.d_ab, 0.0])
             + self.geom.l_th * np.stack([np.cos(ttr), np.sin(ttr)], axis=-1))
        self.t_points = np.concatenate([T, np.zeros((self.samples, 1))], axis=-1)
        self.base_point = vec3(self.geom.d_ab, 0.0, 0.0)
        self.d_opposed = np.linalg.norm(self.m_points - self.t_points, axis=-1)

    @property
    def flexion_range_deg(self) -> tuple:
        return (float(self.theta_t_deg[-1]), float(self.theta_t_deg[0]))

    def open_index(self) -> int:
        # the stroke is stored closed -> open
        return self.samples - 1

    def lateral_flexion(self, line: SpatialLine) -> np.ndarray:
        """Lateral-mode thumb angles along the stroke for a candidate axis.

        Raises KinematicsInfeasible when the lateral flexor path is invalid
        or leaves the design's thumb flexion range.
        """
        from .cable import BodyPoses, Joint, cable_lengths, length_rate
        poses = BodyPoses.make(self.geom, self.theta_f_deg, self.theta_t_deg,
                               GripMode.LATERAL, line)
        L, valid = cable_lengths(self.design.flexor, poses)
        if not bool(np.all(valid)):
            raise KinematicsInfeasible("lateral flexor path degenerate")
        rate = length_rate(self.design.flexor, poses, Joint.THUMB)
        if bool(np.any(np.abs(rate) < 0.5)):
            raise KinematicsInfeasible("lateral thumb moment arm vanishes")
        tt_lat = self.theta_t_deg - np.degrees(
            (L - self.design.flexor.rest_length_mm) / rate)
        lo, hi = self.design.thumb_range_deg
        if bool(np.any(tt_lat < lo)) or bool(np.any(tt_lat > hi)):
            raise KinematicsInfeasible(
                "lateral coupling leaves the thumb flexion range")
        return tt_lat


def make_context(geom: TridigitalGeometry, design: CableDesign,
                 stroke_deg: tuple, samples: int = 41) -> AxisEvaluationContext:
    return AxisEvaluationContext(geom, design, stroke_deg, samples=samples)


def _box_signed_distance(points: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """max over coords of the box violation; negative inside (margin)."""
    q = np.maximum(lo - points, points - hi)
    return np.max(q, axis=-1)


def evaluate_axis_ctx(axis: AxisPlacement, ctx: AxisEvaluationContext,
                      targets: DesignTargets) -> ConstraintReport:
    """All design criteria for one candidate axis against a shared context."""
    line = axis.to_line()
    retro = RigidTransform3.rotation_about_line(line, targets.retro_angle_deg)
    tt_lat = np.radians(ctx.lateral_flexion(line))
    t_lat0 = np.stack([ctx.geom.d_ab + ctx.geom.l_th * np.cos(tt_lat),
                       ctx.geom.l_th * np.sin(tt_lat),
                       np.zeros_like(tt_lat)], axis=-1)
    t_lat = t_lat0 @ retro.rotation.T + retro.translation
    d_lat = np.linalg.norm(ctx.m_points - t_lat, axis=-1)
    i_open = ctx.open_index()

    opening_opp = float(ctx.d_opposed[i_open])
    opening_lat = float(d_lat[i_open])
    gap_opp = float(np.min(ctx.d_opposed))
    gap_lat = float(np.min(d_lat))

    base_lat = retro.apply(ctx.base_point)
    anthropo = abs(float(base_lat[2]))

    # pivot region: axis segment between the palm anchor and the point
    # closest to the thumb flexion pivot
    lo = np.asarray(targets.envelope_min_mm, float)
    hi = np.asarray(targets.envelope_max_mm, float)
    p0 = line.anchor
    p1 = line.closest_point_to(ctx.base_point)
    seg = p0[None, :] + np.linspace(0.0, 1.0, 9)[:, None] * (p1 - p0)[None, :]
    envelope = float(np.max(_box_signed_distance(seg, lo, hi)))

    residuals = {
        "opening_opposed": targets.opening_opposed_min_mm - opening_opp,
        "opening_lateral": targets.opening_lateral_min_mm - opening_lat,
        "contact_opposed": gap_opp - targets.contact_tol_mm,
        "contact_lateral": gap_lat - targets.contact_tol_mm,
        "envelope": envelope,
    }
    passed = {k: bool(v <= 0.0) for k, v in residuals.items()}
    hard = float(sum(max(0.0, v) ** 2 for v in residuals.values()))
    aggregate = hard + targets.anthropomorphism_weight * anthropo
    return ConstraintReport(
        residuals=residuals, passed=passed,
        opening_opposed_mm=opening_opp, opening_lateral_mm=opening_lat,
        contact_gap_opposed_mm=gap_opp, contact_gap_lateral_mm=gap_lat,
        anthropomorphism_mm=anthropo, hard_penalty=hard,
        aggregate_penalty=aggregate, feasible=hard == 0.0)


def evaluate_axis(axis: AxisPlacement, geom: TridigitalGeometry,
                  design: CableDesign, targets: DesignTargets,
                  stroke_deg: tuple) -> ConstraintReport:
    """Stand-alone criterion evaluation (builds its own context)."""
    return evaluate_axis_ctx(axis, make_context(geom, design, stroke_deg), targets)


# search -------------------------------------------------------------------------


@dataclass
class TraceEntry:
    params: tuple
    residuals: dict
    penalty: float
    anthropomorphism_mm: float

    def to_dict(self):
        return {"params": list(self.params),
                "residuals": dict(self.residuals),
                "penalty": self.penalty,
                "anthropomorphism_mm": self.anthropomorphism_mm}


@dataclass
class OptimizeResult:
    placement: AxisPlacement
    report: ConstraintReport
    trace: list
    feasible: bool
    evaluations: int
    message: str


class _Budget(Exception):
    pass


def optimize_axis(initial_guesses: Sequence[AxisPlacement],
                  geom: TridigitalGeometry, design: CableDesign,
                  targets: DesignTargets, stroke_deg: tuple,
                  budget: int = 10000, seed: int = 0,
                  n_starts: int = 5) -> OptimizeResult:
    """Derivative-free search over the 4 axis parameters.

    Deterministic for a given seed and budget: a coarse grid plus seeded
    random supplements rank the starting points, then a Nelder-Mead simplex
    polishes the best starts. Minimizes hard-criterion penalty plus the
    weighted anthropomorphism score; infeasible results are returned with
    feasible=False rather than raised, so callers can inspect the best
    candidate and its diagnosis.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    ctx = make_context(geom, design, stroke_deg)
    trace: list = []
    best: list = [None]  # (penalty, anthropo, params, report)

    def evaluate(vec) -> float:
        if len(trace) >= budget:
            raise _Budget()
        az, el, x0, y0 = (float(v) for v in vec)
        az = ((az + 180.0) % 360.0) - 180.0
        if not (0.0 < el <= 90.0):
            trace.append(TraceEntry((az, el, x0, y0), {}, BIG_PENALTY, math.inf))
            return BIG_PENALTY
        axis = AxisPlacement(az, el, x0, y0)
        try:
            rep = evaluate_axis_ctx(axis, ctx, targets)
        except KinematicsInfeasible:
            trace.append(TraceEntry((az, el, x0, y0), {}, BIG_PENALTY, math.inf))
            return BIG_PENALTY
        trace.append(TraceEntry((az, el, x0, y0), rep.residuals,
                                rep.aggregate_penalty, rep.anthropomorphism_mm))
        key = (rep.aggregate_penalty, rep.anthropomorphism_mm, (az, el, x0, y0))
        if best[0] is None or key < (best[0][0], best[0][1], best[0][2]):
            best[0] = (rep.aggregate_penalty, rep.anthropomorphism_mm,
                       (az, el, x0, y0), rep)
        return rep.aggregate_penalty

    lo = np.asarray(targets.envelope_min_mm, float)
    hi = np.asarray(targets.envelope_max_mm, float)
    starts = [g.params() for g in initial_guesses]
    grid = [np.array([az, el, x0, y0])
            for az in np.linspace(-180.0, 150.0, 12)
            for el in np.linspace(15.0, 90.0, 4)
            for x0 in np.linspace(lo[0], hi[0], 6)
            for y0 in np.linspace(lo[1], hi[1], 6)]
    rng = np.random.default_rng(seed)
    n_rand = min(256, max(0, budget // 8))
    rand = [np.array([rng.uniform(-180.0, 180.0), rng.uniform(5.0, 90.0),
                      rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1])])
            for _ in range(n_rand)]

    scored = []
    try:
        for vec in starts:
            scored.append((evaluate(vec), len(scored), vec))
        coarse_cap = max(1, budget // 2)
        for vec in grid + rand:
            if len(trace) >= coarse_cap:
                break
            scored.append((evaluate(vec), len(scored), vec))

        scored.sort(key=lambda s: s[0])
        chosen = scored[:max(1, n_starts)]
        remaining = budget - len(trace)
        per_start = max(8, remaining // max(1, len(chosen)))
        for pen0, _, vec in chosen:
            if pen0 >= BIG_PENALTY:
                continue
            room = budget - len(trace)
            if room < 8:
                break
            minimize(evaluate, vec, method="Nelder-Mead",
                     options={"maxfev": min(per_start, room),
                              "xatol": 1e-7, "fatol": 1e-12})
            if best[0] is not None and best[0][3].feasible:
                break
    except _Budget:
        pass

    penalty, _, params, report = best[0]
    placement = AxisPlacement(*params)
    feasible = report.feasible
    msg = ("feasible placement found" if feasible else
           "no feasible placement within budget; best candidate returned")
    return OptimizeResult(placement, report, trace, feasible, len(trace), msg)
