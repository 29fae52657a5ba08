"""Planar four-bar model of the tridigital prosthesis.

Frame convention (documented prominently: reproduction tolerances depend on
it): finger pivot A at the origin, thumb pivot B at (d_ab, 0), all in the
z = 0 plane. The finger contact ray at angle theta_f from +x carries the
contact point M at radius l_f; the rod attachment ray is offset by alpha.
The thumb contact ray at theta_t carries T at radius l_th; its rod
attachment ray is offset by beta (beta = 180 deg puts the attachment
opposite the contact ray, i.e. below the pivot). The coupling rod imposes
|PQ| = l_r with P = A + l_1*u(theta_f+alpha) and Q = B + l_2*u(theta_t+beta).

Grip force is quasi-static virtual work: tau_in * dtheta_f = F * d(d(MT)),
frictionless, contact forces antipodal along the line MT.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import (AllSingular, CalibrationInfeasible, EmptyStroke,
                     NonPositiveSpeed, SingularConfiguration,
                     UnreachableClosure)
from .geometry import SpatialLine, rotate_about_line, unit_from_angle

DEFAULT_EPS_ARM = 0.5      # mm/rad; below this the transmission is singular
DEFAULT_TOL_CONTACT = 0.5  # mm; "closed" detection, below glove-thickness scale
DAILY_TASK_GRIP_N = 68.0   # reference grip force needed for most daily tasks


class Branch(enum.Enum):
    """Assembly branch: sign of the circle-intersection solution for Q."""

    POSITIVE = "positive"
    NEGATIVE = "negative"

    @property
    def sign(self) -> float:
        return 1.0 if self is Branch.POSITIVE else -1.0


class GripMode(enum.Enum):
    OPPOSED = "opposed"
    LATERAL = "lateral"

    @property
    def retro_angle_deg(self) -> float:
        return 0.0 if self is GripMode.OPPOSED else 90.0


@dataclass(frozen=True)
class TridigitalGeometry:
    """Measured geometric parameters of the planar tridigital linkage (mm/deg)."""

    l_f: float
    l_th: float
    l_1: float
    l_2: float
    l_r: float
    d_ab: float
    alpha_deg: float
    beta_deg: float
    branch: Branch = Branch.POSITIVE

    def __post_init__(self):
        for name in ("l_f", "l_th", "l_1", "l_2", "l_r", "d_ab"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} > 0 violated: {getattr(self, name)}")

    @property
    def pivot_a(self) -> np.ndarray:
        return np.zeros(2)

    @property
    def pivot_b(self) -> np.ndarray:
        return np.array([self.d_ab, 0.0])

    def assemblable(self, theta_f_deg) -> np.ndarray:
        """True where the loop closes at theta_f (either branch)."""
        _, ok = _closure(self, np.radians(np.asarray(theta_f_deg, float)), self.branch)
        return ok

    def validate_feasible(self, scan_step_deg: float = 1.0) -> None:
        """Confirm at least one finger angle admits a loop-closure solution."""
        grid = np.arange(-180.0, 180.0, scan_step_deg)
        if not bool(np.any(self.assemblable(grid))):
            raise UnreachableClosure(
                "geometry infeasible: no finger angle admits loop closure")


@dataclass(frozen=True)
class DriveParameters:
    """Input torque on the upper fingers (N.mm) and input speed (deg/s)."""

    tau_in_nmm: float
    omega_in_deg_s: float

    def __post_init__(self):
        if self.tau_in_nmm < 0.0:
            raise ValueError("tau_in >= 0 violated")


@dataclass(frozen=True)
class MechanismState:
    """Joint configuration. grip_mode pins retro_angle to 0 or 90 exactly."""

    theta_f_deg: float
    theta_t_deg: float
    grip_mode: GripMode = GripMode.OPPOSED
    retro_angle_deg: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        expected = self.grip_mode.retro_angle_deg
        if self.retro_angle_deg is None:
            object.__setattr__(self, "retro_angle_deg", expected)
        elif self.retro_angle_deg != expected:
            raise ValueError(
                f"retro_angle must be {expected} for {self.grip_mode.value} grip")


@dataclass
class ForceCurve:
    """Sampled grip-force curve over a finger stroke.

    force_n is NaN at singular samples (marked, never dropped); arm_mm_rad
    holds |d d(MT)/d theta_f| in mm/rad at every sample.
    """

    theta_f_deg: np.ndarray
    theta_t_deg: np.ndarray
    opening_mm: np.ndarray
    force_n: np.ndarray
    arm_mm_rad: np.ndarray
    singular: np.ndarray
    step_deg: float

    def __post_init__(self):
        if len(self.theta_f_deg) < 2:
            raise ValueError("force curve needs >= 2 samples")
        if not np.all(np.diff(self.theta_f_deg) > 0):
            raise ValueError("force curve thetas must be strictly monotonic")

    def __len__(self):
        return len(self.theta_f_deg)


# closure solving --------------------------------------------------------------


def _closure(geom: TridigitalGeometry, theta_f_rad, branch: Branch):
    """Loop-closure solve, vectorized. Returns (theta_t_rad, solvable_mask)."""
    tf = np.asarray(theta_f_rad, dtype=float)
    alpha = math.radians(geom.alpha_deg)
    beta = math.radians(geom.beta_deg)
    P = geom.l_1 * unit_from_angle(tf + alpha)
    V = P - np.array([geom.d_ab, 0.0])
    nV = np.linalg.norm(V, axis=-1)
    c = (nV * nV + geom.l_2 ** 2 - geom.l_r ** 2) / (2.0 * geom.l_2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = c / nV
    ok = (np.abs(ratio) <= 1.0) & (nV > 0.0)
    ang = np.arctan2(V[..., 1], V[..., 0])
    phi = ang + branch.sign * np.arccos(np.clip(ratio, -1.0, 1.0))
    return phi - beta, ok


def solve_fourbar(geom: TridigitalGeometry, theta_f_deg: float,
                  branch: Optional[Branch] = None) -> float:
    """Thumb angle theta_t (deg) closing the loop at theta_f on a branch.

    Raises UnreachableClosure when the rod cannot span the gap at this
    crank angle. Residual | |PQ| - l_r | of the returned solution is at
    machine precision (closed form).
    """
    branch = branch or geom.branch
    tt, ok = _closure(geom, math.radians(theta_f_deg), branch)
    if not bool(ok):
        raise UnreachableClosure(
            f"no loop closure at theta_f = {theta_f_deg:.6g} deg")
    return math.degrees(float(tt))


def closure_residual(geom: TridigitalGeometry, theta_f_deg, theta_t_deg):
    """| |PQ| - l_r | in mm; the quantity the solver drives to zero."""
    tf = np.radians(np.asarray(theta_f_deg, float))
    tt = np.radians(np.asarray(theta_t_deg, float))
    P = geom.l_1 * unit_from_angle(tf + math.radians(geom.alpha_deg))
    Q = (np.array([geom.d_ab, 0.0])
         + geom.l_2 * unit_from_angle(tt + math.radians(geom.beta_deg)))
    return np.abs(np.linalg.norm(P - Q, axis=-1) - geom.l_r)


def select_branch(geom: TridigitalGeometry, scan_step_deg: float = 0.25) -> Branch:
    """Default branch: the one containing the contact configuration (min d(MT))."""
    grid = np.radians(np.arange(-180.0, 180.0, scan_step_deg))
    best = {}
    for branch in Branch:
        tt, ok = _closure(geom, grid, branch)
        if not np.any(ok):
            continue
        d = _opening(geom, grid[ok], tt[ok])
        best[branch] = float(np.min(d))
    if not best:
        raise UnreachableClosure("geometry infeasible on both branches")
    return min(best, key=best.get)


# contact points and opening ----------------------------------------------------


def finger_contact(geom: TridigitalGeometry, theta_f_deg):
    """Finger contact point M, planar (mm)."""
    return geom.l_f * unit_from_angle(np.radians(np.asarray(theta_f_deg, float)))


def thumb_contact(geom: TridigitalGeometry, theta_t_deg):
    """Thumb contact point T in the planar (opposed) pose (mm)."""
    tt = np.radians(np.asarray(theta_t_deg, float))
    return np.array([geom.d_ab, 0.0]) + geom.l_th * unit_from_angle(tt)


def _opening(geom, theta_f_rad, theta_t_rad):
    M = geom.l_f * unit_from_angle(theta_f_rad)
    T = (np.array([geom.d_ab, 0.0])
         + geom.l_th * unit_from_angle(theta_t_rad))
    return np.linalg.norm(M - T, axis=-1)


def opening_distance(geom: TridigitalGeometry, state: MechanismState,
                     retro_axis: Optional[SpatialLine] = None) -> float:
    """Aperture d(MT) >= 0 for a solved state.

    Opposed mode is fully planar. Lateral mode rotates the thumb contact
    point about the retropulsion axis (the fingers stay planar), so the
    axis must be supplied.
    """
    M = finger_contact(geom, state.theta_f_deg)
    T = thumb_contact(geom, state.theta_t_deg)
    if state.grip_mode is GripMode.OPPOSED:
        return float(np.linalg.norm(M - T))
    if retro_axis is None:
        raise ValueError("lateral opening needs the retropulsion axis")
    T3 = rotate_about_line(np.array([T[0], T[1], 0.0]), retro_axis,
                           state.retro_angle_deg)
    M3 = np.array([M[0], M[1], 0.0])
    return float(np.linalg.norm(M3 - T3))


# derivatives and force -----------------------------------------------------------


def _coupling_rate(geom: TridigitalGeometry, theta_f_rad, theta_t_rad):
    """d theta_t / d theta_f along the closure constraint (dimensionless)."""
    alpha = math.radians(geom.alpha_deg)
    beta = math.radians(geom.beta_deg)
    tf = np.asarray(theta_f_rad, float)
    tt = np.asarray(theta_t_rad, float)
    P = geom.l_1 * unit_from_angle(tf + alpha)
    Q = np.array([geom.d_ab, 0.0]) + geom.l_2 * unit_from_angle(tt + beta)
    rod = P - Q
    dP = geom.l_1 * _dunit(tf + alpha)
    dQ = geom.l_2 * _dunit(tt + beta)
    num = np.sum(rod * dP, axis=-1)
    den = np.sum(rod * dQ, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def _dunit(theta_rad):
    theta_rad = np.asarray(theta_rad, float)
    return np.stack([-np.sin(theta_rad), np.cos(theta_rad)], axis=-1)


def opening_rate(geom: TridigitalGeometry, theta_f_deg,
                 branch: Optional[Branch] = None):
    """d d(MT) / d theta_f in mm/rad along the solved branch (signed)."""
    branch = branch or geom.branch
    tf = np.radians(np.asarray(theta_f_deg, float))
    tt, ok = _closure(geom, tf, branch)
    if not bool(np.all(ok)):
        raise UnreachableClosure("opening_rate outside assemblable range")
    g = _coupling_rate(geom, tf, tt)
    M = geom.l_f * unit_from_angle(tf)
    T = np.array([geom.d_ab, 0.0]) + geom.l_th * unit_from_angle(tt)
    diff = M - T
    d = np.linalg.norm(diff, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        uhat = diff / d[..., None]
    dM = geom.l_f * _dunit(tf)
    dT = geom.l_th * _dunit(tt)
    return np.sum(uhat * (dM - dT * g[..., None]), axis=-1)


def grip_force(geom: TridigitalGeometry, state: MechanismState,
               drive: DriveParameters, eps_arm: float = DEFAULT_EPS_ARM) -> float:
    """Static grip force F = tau_in / |d d(MT)/d theta_f| in newtons.

    Raises SingularConfiguration when the transmission arm is below eps_arm
    (force unbounded).
    """
    rate = float(opening_rate(geom, state.theta_f_deg))
    arm = abs(rate)
    if arm < eps_arm:
        raise SingularConfiguration(
            f"|d d/d theta_f| = {arm:.3g} mm/rad < eps_arm = {eps_arm}")
    return drive.tau_in_nmm / arm


def force_curve(geom: TridigitalGeometry, drive: DriveParameters,
                stroke_deg: tuple, step_deg: float = 1.0,
                branch: Optional[Branch] = None,
                eps_arm: float = DEFAULT_EPS_ARM) -> ForceCurve:
    """Sample grip force and opening over a stroke; singular samples marked."""
    theta_min, theta_max = float(stroke_deg[0]), float(stroke_deg[1])
    if theta_min >= theta_max:
        raise EmptyStroke(f"theta_min {theta_min} >= theta_max {theta_max}")
    if step_deg <= 0.0:
        raise ValueError("step must be positive")
    branch = branch or geom.branch
    thetas = stroke_samples(theta_min, theta_max, step_deg)
    tf = np.radians(thetas)
    tt, ok = _closure(geom, tf, branch)
    if not bool(np.all(ok)):
        bad = thetas[~ok]
        raise UnreachableClosure(
            f"stroke leaves assemblable range at theta_f = {bad[0]:.4g} deg")
    opening = _opening(geom, tf, tt)
    rate = opening_rate(geom, thetas, branch)
    arm = np.abs(rate)
    singular = arm < eps_arm
    with np.errstate(divide="ignore"):
        force = np.where(singular, np.nan, drive.tau_in_nmm / arm)
    return ForceCurve(thetas, np.degrees(tt), opening, force, arm, singular,
                      step_deg)


def stroke_samples(theta_min: float, theta_max: float, step_deg: float) -> np.ndarray:
    """Sample grid covering [theta_min, theta_max], endpoints always included."""
    n = int(math.floor((theta_max - theta_min) / step_deg + 1e-12))
    thetas = theta_min + step_deg * np.arange(n + 1)
    if theta_max - thetas[-1] > 1e-9:
        thetas = np.append(thetas, theta_max)
    else:
        thetas[-1] = theta_max
    return thetas


def force_variation(curve: ForceCurve) -> float:
    """(F_max - F_min) / F_max over the non-singular samples."""
    valid = ~curve.singular
    if not np.any(valid):
        raise AllSingular("every sample of the curve is singular")
    f = curve.force_n[valid]
    return float((f.max() - f.min()) / f.max())


def closing_time(stroke_extent_deg: float, omega_in_deg_s: float) -> float:
    """Time to sweep the stroke at constant input speed (s)."""
    if omega_in_deg_s <= 0.0:
        raise NonPositiveSpeed(f"omega_in = {omega_in_deg_s} deg/s")
    return stroke_extent_deg / omega_in_deg_s


# stroke calibration --------------------------------------------------------------


@dataclass(frozen=True)
class StrokeCalibration:
    """Calibrated stroke bounds plus the residuals of the two targets.

    The closed end is anchored at the contact configuration (the aperture
    minimum) and the stroke extent matches omega_in * target_time exactly;
    when the opening target cannot also hold, its residual is reported
    rather than traded off (there is no principled exchange rate between
    millimeters and seconds).
    """

    theta_closed_deg: float
    theta_open_deg: float
    contact_gap_mm: float
    opening_mm: float
    opening_residual_mm: float
    time_residual_s: float
    target_opening_mm: float
    target_time_s: float
    omega_in_deg_s: float

    @property
    def theta_min_deg(self) -> float:
        return min(self.theta_closed_deg, self.theta_open_deg)

    @property
    def theta_max_deg(self) -> float:
        return max(self.theta_closed_deg, self.theta_open_deg)

    @property
    def extent_deg(self) -> float:
        return abs(self.theta_open_deg - self.theta_closed_deg)

    @property
    def stroke(self) -> tuple:
        return (self.theta_min_deg, self.theta_max_deg)


def _assemblable_interval(geom, branch, scan_step_deg=0.2):
    """Largest contiguous assemblable theta_f interval (radians)."""
    grid = np.radians(np.arange(-180.0, 180.0 + scan_step_deg, scan_step_deg))
    _, ok = _closure(geom, grid, branch)
    if not np.any(ok):
        raise UnreachableClosure("geometry infeasible: loop never closes")
    runs = []
    start = None
    for i, flag in enumerate(ok):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(ok) - 1))
    lo, hi = max(runs, key=lambda r: r[1] - r[0])
    return grid[lo], grid[hi]


def calibrate_stroke(geom: TridigitalGeometry, target_opening_mm: float,
                     target_time_s: float, omega_in_deg_s: float,
                     branch: Optional[Branch] = None,
                     tol_contact: float = DEFAULT_TOL_CONTACT) -> StrokeCalibration:
    """Locate the working stroke: contact end plus omega*time of travel.

    Raises CalibrationInfeasible when no contact configuration exists
    (aperture minimum above tol_contact), when the stroke does not fit in
    the assemblable range, or when the opening target exceeds the geometric
    bound l_f + l_th + d_ab.
    """
    if omega_in_deg_s <= 0.0:
        raise NonPositiveSpeed(f"omega_in = {omega_in_deg_s} deg/s")
    bound = geom.l_f + geom.l_th + geom.d_ab
    if target_opening_mm > bound:
        raise CalibrationInfeasible(
            f"target opening {target_opening_mm} mm exceeds geometric bound "
            f"{bound:.6g} mm", {"bound_mm": bound})
    branch = branch or geom.branch
    lo, hi = _assemblable_interval(geom, branch)
    pad = 1e-6

    def aperture(tf_rad):
        tt, _ = _closure(geom, tf_rad, branch)
        return float(_opening(geom, tf_rad, tt))

    grid = np.linspace(lo + pad, hi - pad, 2048)
    tt, _ = _closure(geom, grid, branch)
    d = _opening(geom, grid, tt)
    i0 = int(np.argmin(d))
    # refine the aperture minimum by a bisection on its finite-difference slope
    h = 1e-7
    slope = lambda x: aperture(x + h) - aperture(x - h)
    a = grid[max(i0 - 1, 0)]
    b = grid[min(i0 + 1, len(grid) - 1)]
    if slope(a) < 0.0 and slope(b) > 0.0:
        theta_c = brentq(slope, a, b, xtol=1e-13)
    else:
        theta_c = grid[i0]  # minimum sits on the interval boundary
    gap = aperture(theta_c)
    if gap > tol_contact:
        raise CalibrationInfeasible(
            f"no contact configuration: min aperture {gap:.4g} mm > "
            f"tol_contact {tol_contact} mm",
            {"contact_gap_mm": gap, "theta_deg": math.degrees(theta_c)})

    extent = math.radians(omega_in_deg_s * target_time_s)
    candidates = []
    for sign in (+1.0, -1.0):
        end = theta_c + sign * extent
        if lo + pad <= end <= hi - pad:
            candidates.append((abs(aperture(end) - target_opening_mm), end))
    if not candidates:
        raise CalibrationInfeasible(
            "stroke extent does not fit the assemblable range in either "
            "direction",
            {"extent_deg": math.degrees(extent),
             "range_deg": (math.degrees(lo), math.degrees(hi))})
    _, theta_o = min(candidates)
    opening = aperture(theta_o)
    return StrokeCalibration(
        theta_closed_deg=math.degrees(theta_c),
        theta_open_deg=math.degrees(theta_o),
        contact_gap_mm=gap,
        opening_mm=opening,
        opening_residual_mm=opening - target_opening_mm,
        time_residual_s=0.0,
        target_opening_mm=target_opening_mm,
        target_time_s=target_time_s,
        omega_in_deg_s=omega_in_deg_s,
    )
