"""Stateless HTTP JSON facade for the design-studio UI.

One project is loaded at startup and never mutated; every request is a pure
evaluation over it, so responses are independent of request ordering. The
UI's static bundle is served from / when a frontend build directory exists.
"""

from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import analysis
from .axisdesign import (AxisPlacement, DesignTargets, evaluate_axis_ctx,
                         extreme_positions, make_context)
from .errors import InvariantViolation, KinematicsInfeasible, ParseError
from .fourbar import GripMode
from .project import ProjectFile, dumps_project

_PLACEHOLDER = """<!doctype html>
<html><head><title>tridigit design service</title></head>
<body><h1>tridigit design service</h1>
<p>No UI bundle found. Endpoints: POST /api/evaluate-axis, POST /api/sweep,
GET /api/project.</p></body></html>
"""

_TARGET_FIELDS = {"opening_opposed_min_mm", "opening_lateral_min_mm",
                  "contact_tol_mm", "envelope_min_mm", "envelope_max_mm",
                  "anthropomorphism_weight", "retro_angle_deg"}


def _clean(value):
    """JSON-safe numbers: NaN/inf become null."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=400)


def _parse_axis_body(body: dict) -> AxisPlacement:
    if not isinstance(body, dict):
        raise ParseError("body must be a JSON object")
    axis = body.get("axis")
    if not isinstance(axis, dict):
        raise ParseError("missing 'axis' object")
    unknown = set(axis) - {"azimuth_deg", "elevation_deg", "x0_mm", "y0_mm"}
    if unknown:
        raise ParseError(f"axis: unknown field(s) {sorted(unknown)}")
    try:
        values = {k: float(axis[k]) for k in
                  ("azimuth_deg", "elevation_deg", "x0_mm", "y0_mm")}
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"axis: {exc}") from None
    return AxisPlacement(**values)


def _merge_targets(base: DesignTargets, overrides) -> DesignTargets:
    if overrides is None:
        return base
    if not isinstance(overrides, dict):
        raise ParseError("'targets' must be an object")
    unknown = set(overrides) - _TARGET_FIELDS
    if unknown:
        raise ParseError(f"targets: unknown field(s) {sorted(unknown)}")
    kwargs = {}
    for key, value in overrides.items():
        if key in ("envelope_min_mm", "envelope_max_mm"):
            kwargs[key] = tuple(float(v) for v in value)
        else:
            kwargs[key] = float(value)
    return replace(base, **kwargs)


def _pose_payload(pose) -> dict:
    return {"matrix": [float(v) for v in pose.transform.as_matrix().ravel()],
            "contact_point": [float(v) for v in pose.contact_point],
            "base_point": [float(v) for v in pose.base_point],
            "retro_deg": pose.retro_deg,
            "flexion_deg": pose.flexion_deg}


def create_app(project: ProjectFile, static_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="tridigit design service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    project_payload = _clean(dumps_project(project))
    ctx = make_context(project.geometry, project.cable_design, project.stroke)

    @app.post("/api/evaluate-axis")
    async def evaluate_axis_endpoint(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _bad_request("body is not valid JSON")
        try:
            axis = _parse_axis_body(body)
            targets = _merge_targets(project.targets, body.get("targets"))
            extra = set(body) - {"axis", "targets"}
            if extra:
                raise ParseError(f"unknown field(s) {sorted(extra)}")
        except (ParseError, InvariantViolation) as exc:
            return _bad_request(str(exc))
        try:
            report = evaluate_axis_ctx(axis, ctx, targets)
        except KinematicsInfeasible as exc:
            return JSONResponse({"error": str(exc),
                                 "kind": "KinematicsInfeasible"},
                                status_code=422)
        poses = extreme_positions(axis, project.geometry,
                                  ctx.flexion_range_deg,
                                  targets.retro_angle_deg)
        return JSONResponse(_clean({
            "axis": {"azimuth_deg": axis.azimuth_deg,
                     "elevation_deg": axis.elevation_deg,
                     "x0_mm": axis.x0_mm, "y0_mm": axis.y0_mm},
            "report": report.to_dict(),
            "poses": {"opposed_open": _pose_payload(poses.opposed_open),
                      "opposed_closed": _pose_payload(poses.opposed_closed),
                      "lateral_open": _pose_payload(poses.lateral_open),
                      "lateral_closed": _pose_payload(poses.lateral_closed)},
            "openings": {"opposed_mm": report.opening_opposed_mm,
                         "lateral_mm": report.opening_lateral_mm},
        }))

    @app.post("/api/sweep")
    async def sweep_endpoint(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _bad_request("body is not valid JSON")
        if not isinstance(body, dict):
            return _bad_request("body must be a JSON object")
        extra = set(body) - {"grip_mode", "step_deg", "drive"}
        if extra:
            return _bad_request(f"unknown field(s) {sorted(extra)}")
        try:
            mode = GripMode(body.get("grip_mode", "opposed"))
        except ValueError:
            return _bad_request(f"unknown grip_mode {body.get('grip_mode')!r}")
        step = body.get("step_deg", 1.0)
        if not isinstance(step, (int, float)) or isinstance(step, bool) or step <= 0:
            return _bad_request("step_deg must be a positive number")
        drive = project.drive
        overrides = body.get("drive")
        if overrides is not None:
            if not isinstance(overrides, dict) or \
                    set(overrides) - {"tau_in_nmm", "omega_in_deg_s"}:
                return _bad_request("drive overrides allow tau_in_nmm and "
                                    "omega_in_deg_s only")
            drive = analysis.resolve_drive(
                project, overrides.get("tau_in_nmm"),
                overrides.get("omega_in_deg_s"))
            if drive.omega_in_deg_s <= 0:
                return _bad_request("omega_in_deg_s must be positive")
        _, summary, warnings, sweep = analysis.cable_mode_sweep(
            project, mode, float(step), drive)
        samples = []
        for i in range(len(sweep.theta_f_deg)):
            singular = bool(sweep.singular[i])
            samples.append({
                "theta_f_deg": float(sweep.theta_f_deg[i]),
                "theta_t_deg": float(sweep.theta_t_deg[i]),
                "opening_mm": float(sweep.opening_mm[i]),
                "force_n": None if singular else float(sweep.force_n[i]),
                "tension_n": float(sweep.tension_n[i]),
                "arm_fingers_mm": float(sweep.arm_fingers_mm[i]),
                "arm_thumb_mm": float(sweep.arm_thumb_mm[i]),
                "singular": singular,
            })
        return JSONResponse(_clean({"grip_mode": mode.value,
                                    "samples": samples,
                                    "summary": summary,
                                    "warnings": warnings}))

    @app.get("/api/project")
    async def project_endpoint():
        return JSONResponse(project_payload)

    bundle = static_dir if static_dir is not None else _default_bundle_dir()
    if bundle is not None and bundle.is_dir():
        index = bundle / "index.html"

        @app.get("/", response_class=HTMLResponse)
        async def index_endpoint():
            if index.is_file():
                return FileResponse(index)
            return HTMLResponse(_PLACEHOLDER)

        app.mount("/", StaticFiles(directory=bundle), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        async def placeholder_endpoint():
            return HTMLResponse(_PLACEHOLDER)

    return app


def _default_bundle_dir() -> Optional[Path]:
    for candidate in (Path.cwd() / "frontend" / "dist",
                      Path(__file__).resolve().parents[2] / "frontend" / "dist"):
        if candidate.is_dir():
            return candidate
    return None
