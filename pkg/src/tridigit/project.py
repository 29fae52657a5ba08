"""Project files: one self-contained JSON holding geometry, drive, cable
design, axis placement, targets and the stroke calibration record.

Parsing is strict: unknown fields are rejected (ParseError) and every
embedded object re-validates its own invariants (InvariantViolation), so
schema drift is caught at load time rather than mid-analysis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .axisdesign import AxisPlacement, DesignTargets
from .cable import (Anchor, BodyId, CableDesign, CableRole, CableRoute,
                    Pulley, WrapSurface)
from .errors import InvariantViolation, ParseError
from .fourbar import (Branch, DriveParameters, StrokeCalibration,
                      TridigitalGeometry)
from .geometry import Winding

SCHEMA_VERSION = 1


def _require(obj: dict, fields: dict, where: str) -> dict:
    """Extract exactly the given fields; anything else is a parse error."""
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    unknown = set(obj) - set(fields)
    if unknown:
        raise ParseError(f"{where}: unknown field(s) {sorted(unknown)}")
    out = {}
    for name, required in fields.items():
        if name not in obj:
            if required:
                raise ParseError(f"{where}: missing field '{name}'")
            out[name] = None
        else:
            out[name] = obj[name]
    return out


def _num(value, where: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _pair(value, where: str) -> tuple:
    if (not isinstance(value, (list, tuple)) or len(value) != 2):
        raise ParseError(f"{where}: expected [x, y]")
    return (_num(value[0], where), _num(value[1], where))


def _triple(value, where: str) -> tuple:
    if (not isinstance(value, (list, tuple)) or len(value) != 3):
        raise ParseError(f"{where}: expected [x, y, z]")
    return tuple(_num(v, where) for v in value)


@dataclass(frozen=True)
class ProjectFile:
    geometry: TridigitalGeometry
    drive: DriveParameters
    calibration: Optional[StrokeCalibration]
    axis: AxisPlacement
    targets: DesignTargets
    cable_design: CableDesign
    notes: str = ""

    @property
    def stroke(self) -> tuple:
        if self.calibration is None:
            raise InvariantViolation("calibration present",
                                     "project has no calibration record")
        return self.calibration.stroke


# ---------------------------------------------------------------- geometry --

def _parse_geometry(obj) -> TridigitalGeometry:
    f = _require(obj, {"l_f_mm": True, "l_th_mm": True, "l_1_mm": True,
                       "l_2_mm": True, "l_r_mm": True, "d_ab_mm": True,
                       "alpha_deg": True, "beta_deg": True, "branch": True},
                 "geometry")
    for name in ("l_f_mm", "l_th_mm", "l_1_mm", "l_2_mm", "l_r_mm", "d_ab_mm"):
        if _num(f[name], f"geometry.{name}") <= 0.0:
            raise InvariantViolation(f"{name.removesuffix('_mm')} > 0",
                                     f"geometry.{name} = {f[name]}")
    try:
        branch = Branch(f["branch"])
    except ValueError:
        raise ParseError(f"geometry.branch: expected 'positive' or 'negative',"
                         f" got {f['branch']!r}") from None
    geom = TridigitalGeometry(
        l_f=_num(f["l_f_mm"], "l_f"), l_th=_num(f["l_th_mm"], "l_th"),
        l_1=_num(f["l_1_mm"], "l_1"), l_2=_num(f["l_2_mm"], "l_2"),
        l_r=_num(f["l_r_mm"], "l_r"), d_ab=_num(f["d_ab_mm"], "d_ab"),
        alpha_deg=_num(f["alpha_deg"], "alpha"),
        beta_deg=_num(f["beta_deg"], "beta"), branch=branch)
    geom.validate_feasible()
    return geom


def _dump_geometry(g: TridigitalGeometry) -> dict:
    return {"l_f_mm": g.l_f, "l_th_mm": g.l_th, "l_1_mm": g.l_1,
            "l_2_mm": g.l_2, "l_r_mm": g.l_r, "d_ab_mm": g.d_ab,
            "alpha_deg": g.alpha_deg, "beta_deg": g.beta_deg,
            "branch": g.branch.value}


# ------------------------------------------------------------------- drive --

def _parse_drive(obj) -> DriveParameters:
    f = _require(obj, {"tau_in_nmm": True, "omega_in_deg_s": True}, "drive")
    tau = _num(f["tau_in_nmm"], "drive.tau_in_nmm")
    omega = _num(f["omega_in_deg_s"], "drive.omega_in_deg_s")
    if tau < 0.0:
        raise InvariantViolation("tau_in >= 0", f"drive.tau_in_nmm = {tau}")
    if omega <= 0.0:
        raise InvariantViolation("omega_in > 0", f"drive.omega_in_deg_s = {omega}")
    return DriveParameters(tau, omega)


def _dump_drive(d: DriveParameters) -> dict:
    return {"tau_in_nmm": d.tau_in_nmm, "omega_in_deg_s": d.omega_in_deg_s}


# ------------------------------------------------------------- calibration --

_CAL_FIELDS = {"theta_closed_deg": True, "theta_open_deg": True,
               "contact_gap_mm": True, "opening_mm": True,
               "opening_residual_mm": True, "time_residual_s": True,
               "target_opening_mm": True, "target_time_s": True,
               "omega_in_deg_s": True}


def _parse_calibration(obj) -> StrokeCalibration:
    f = _require(obj, _CAL_FIELDS, "calibration")
    return StrokeCalibration(**{k: _num(v, f"calibration.{k}")
                                for k, v in f.items()})


def _dump_calibration(c: StrokeCalibration) -> dict:
    return {k: getattr(c, k) for k in _CAL_FIELDS}


# -------------------------------------------------------------------- axis --

def _parse_axis(obj) -> AxisPlacement:
    f = _require(obj, {"azimuth_deg": True, "elevation_deg": True,
                       "x0_mm": True, "y0_mm": True}, "axis")
    return AxisPlacement(**{k: _num(v, f"axis.{k}") for k, v in f.items()})


def _dump_axis(a: AxisPlacement) -> dict:
    return {"azimuth_deg": a.azimuth_deg, "elevation_deg": a.elevation_deg,
            "x0_mm": a.x0_mm, "y0_mm": a.y0_mm}


# ----------------------------------------------------------------- targets --

def _parse_targets(obj) -> DesignTargets:
    f = _require(obj, {"opening_opposed_min_mm": True,
                       "opening_lateral_min_mm": True, "contact_tol_mm": True,
                       "envelope_min_mm": True, "envelope_max_mm": True,
                       "anthropomorphism_weight": True,
                       "retro_angle_deg": True}, "targets")
    return DesignTargets(
        opening_opposed_min_mm=_num(f["opening_opposed_min_mm"], "targets"),
        opening_lateral_min_mm=_num(f["opening_lateral_min_mm"], "targets"),
        contact_tol_mm=_num(f["contact_tol_mm"], "targets"),
        envelope_min_mm=_triple(f["envelope_min_mm"], "targets.envelope_min_mm"),
        envelope_max_mm=_triple(f["envelope_max_mm"], "targets.envelope_max_mm"),
        anthropomorphism_weight=_num(f["anthropomorphism_weight"], "targets"),
        retro_angle_deg=_num(f["retro_angle_deg"], "targets"))


def _dump_targets(t: DesignTargets) -> dict:
    return {"opening_opposed_min_mm": t.opening_opposed_min_mm,
            "opening_lateral_min_mm": t.opening_lateral_min_mm,
            "contact_tol_mm": t.contact_tol_mm,
            "envelope_min_mm": list(t.envelope_min_mm),
            "envelope_max_mm": list(t.envelope_max_mm),
            "anthropomorphism_weight": t.anthropomorphism_weight,
            "retro_angle_deg": t.retro_angle_deg}


# ------------------------------------------------------------ cable design --

def _parse_element(obj, where: str):
    kind = obj.get("type") if isinstance(obj, dict) else None
    if kind == "anchor":
        f = _require(obj, {"type": True, "body": True, "point_mm": True}, where)
        return Anchor(_pair(f["point_mm"], where), _parse_body(f["body"], where))
    if kind == "pulley":
        f = _require(obj, {"type": True, "body": True, "center_mm": True,
                           "radius_mm": True, "winding": True}, where)
        radius = _num(f["radius_mm"], where)
        if radius <= 0.0:
            raise InvariantViolation("element radius > 0", f"{where}: {radius}")
        return Pulley(_pair(f["center_mm"], where), radius,
                      _parse_body(f["body"], where),
                      _parse_winding(f["winding"], where))
    if kind == "wrap":
        f = _require(obj, {"type": True, "body": True, "center_mm": True,
                           "radius_mm": True, "extent_deg": True,
                           "winding": True}, where)
        radius = _num(f["radius_mm"], where)
        if radius <= 0.0:
            raise InvariantViolation("element radius > 0", f"{where}: {radius}")
        extent = _num(f["extent_deg"], where)
        if extent < 0.0:
            raise InvariantViolation("wrap extent >= 0", f"{where}: {extent}")
        return WrapSurface(_pair(f["center_mm"], where), radius, extent,
                           _parse_body(f["body"], where),
                           _parse_winding(f["winding"], where))
    raise ParseError(f"{where}: unknown element type {kind!r}")


def _parse_body(value, where) -> BodyId:
    try:
        return BodyId(value)
    except ValueError:
        raise ParseError(f"{where}: unknown body {value!r}") from None


def _parse_winding(value, where) -> Winding:
    try:
        return Winding(value)
    except ValueError:
        raise ParseError(f"{where}: unknown winding {value!r}") from None


def _dump_element(e) -> dict:
    if isinstance(e, Anchor):
        return {"type": "anchor", "body": e.body.value,
                "point_mm": list(e.point)}
    if isinstance(e, Pulley):
        return {"type": "pulley", "body": e.body.value,
                "center_mm": list(e.center), "radius_mm": e.radius,
                "winding": e.winding.value}
    return {"type": "wrap", "body": e.body.value, "center_mm": list(e.center),
            "radius_mm": e.radius, "extent_deg": e.extent_deg,
            "winding": e.winding.value}


def _parse_route(obj, role: CableRole, where: str) -> CableRoute:
    f = _require(obj, {"rest_length_mm": True, "stiffness_n_mm": True,
                       "elements": True}, where)
    if not isinstance(f["elements"], list) or len(f["elements"]) < 2:
        raise InvariantViolation("route has >= 2 elements", where)
    elements = tuple(_parse_element(e, f"{where}.elements[{i}]")
                     for i, e in enumerate(f["elements"]))
    stiffness = _num(f["stiffness_n_mm"], f"{where}.stiffness_n_mm")
    if stiffness <= 0.0:
        raise InvariantViolation("stiffness > 0", where)
    try:
        return CableRoute(elements, role, _num(f["rest_length_mm"], where),
                          stiffness)
    except ValueError as exc:
        raise InvariantViolation(str(exc), where) from None


def _dump_route(r: CableRoute) -> dict:
    return {"rest_length_mm": r.rest_length_mm,
            "stiffness_n_mm": r.stiffness_n_mm,
            "elements": [_dump_element(e) for e in r.elements]}


def _parse_design(obj, axis: AxisPlacement) -> CableDesign:
    f = _require(obj, {"iteration": True, "thumb_range_deg": True,
                       "tension_limit_n": True, "dist_axis_max_mm": True,
                       "flexor": True, "extensor": False}, "cable_design")
    if f["iteration"] not in (1, 2, 3):
        raise InvariantViolation("iteration in {1,2,3}",
                                 f"cable_design.iteration = {f['iteration']}")
    flexor = _parse_route(f["flexor"], CableRole.FLEXOR, "cable_design.flexor")
    extensor = None
    if f["extensor"] is not None:
        extensor = _parse_route(f["extensor"], CableRole.EXTENSOR,
                                "cable_design.extensor")
    rng = _pair(f["thumb_range_deg"], "cable_design.thumb_range_deg")
    try:
        return CableDesign(flexor, extensor, int(f["iteration"]),
                           axis.to_line(), rng,
                           _num(f["tension_limit_n"], "tension_limit"),
                           _num(f["dist_axis_max_mm"], "dist_axis_max"))
    except ValueError as exc:
        raise InvariantViolation(str(exc), "cable_design") from None


def _dump_design(d: CableDesign) -> dict:
    return {"iteration": d.iteration,
            "thumb_range_deg": list(d.thumb_range_deg),
            "tension_limit_n": d.tension_limit_n,
            "dist_axis_max_mm": d.dist_axis_max_mm,
            "flexor": _dump_route(d.flexor),
            "extensor": None if d.extensor is None else _dump_route(d.extensor)}


def _check_axis_proximity(design: CableDesign, geom: TridigitalGeometry) -> None:
    """Thumb-side attachment must track the retro axis for mode changes.

    Satisfied by either the thumb-side flexor anchor passing within
    dist_axis_max of the axis somewhere in the flexion range, or a chassis
    pulley sitting that close to the axis.
    """
    line = design.retro_axis
    best = math.inf
    for e in design.flexor.elements:
        if isinstance(e, Anchor) and e.body is BodyId.THUMB:
            for tt in np.arange(design.thumb_range_deg[0],
                                design.thumb_range_deg[1] + 1.0, 1.0):
                c, s = math.cos(math.radians(tt)), math.sin(math.radians(tt))
                w = np.array([geom.d_ab + c * e.point[0] - s * e.point[1],
                              s * e.point[0] + c * e.point[1], 0.0])
                best = min(best, line.distance_to(w))
        elif isinstance(e, (Pulley, WrapSurface)) and e.body is BodyId.CHASSIS:
            best = min(best, line.distance_to(
                np.array([e.center[0], e.center[1], 0.0])))
    if best > design.dist_axis_max_mm:
        raise InvariantViolation(
            "thumb-side attachment within dist_axis_max of axis",
            f"closest attachment is {best:.2f} mm from the axis "
            f"(max {design.dist_axis_max_mm} mm)")


# --------------------------------------------------------------- top level --

_TOP_FIELDS = {"schema_version": True, "geometry": True, "drive": True,
               "calibration": False, "axis": True, "targets": True,
               "cable_design": True, "notes": False}


def loads_project(data: dict) -> ProjectFile:
    f = _require(data, _TOP_FIELDS, "project")
    if f["schema_version"] != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {f['schema_version']!r};"
                         f" this toolkit reads version {SCHEMA_VERSION}")
    geometry = _parse_geometry(f["geometry"])
    drive = _parse_drive(f["drive"])
    calibration = (None if f["calibration"] is None
                   else _parse_calibration(f["calibration"]))
    axis = _parse_axis(f["axis"])
    targets = _parse_targets(f["targets"])
    design = _parse_design(f["cable_design"], axis)
    _check_axis_proximity(design, geometry)
    notes = f["notes"] if isinstance(f["notes"], str) else ""
    return ProjectFile(geometry, drive, calibration, axis, targets, design,
                       notes)


def load_project(path) -> ProjectFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: "
                         f"{exc.msg}") from None
    return loads_project(data)


def dumps_project(p: ProjectFile) -> dict:
    out = {"schema_version": SCHEMA_VERSION,
           "geometry": _dump_geometry(p.geometry),
           "drive": _dump_drive(p.drive),
           "calibration": (None if p.calibration is None
                           else _dump_calibration(p.calibration)),
           "axis": _dump_axis(p.axis),
           "targets": _dump_targets(p.targets),
           "cable_design": _dump_design(p.cable_design),
           "notes": p.notes}
    return out


def save_project(p: ProjectFile, path) -> None:
    Path(path).write_text(json.dumps(dumps_project(p), indent=2,
                                     sort_keys=True) + "\n", encoding="utf-8")


def default_project_path() -> Path:
    return Path(__file__).parent / "data" / "variplus.json"


def load_default_project() -> ProjectFile:
    return load_project(default_project_path())
