"""Shared sweep pipelines used by both the CLI and the HTTP service.

Keeping one code path guarantees the service responses are numerically
identical to the CLI CSV output for the same inputs.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .axisdesign import evaluate_axis_ctx, extreme_positions, make_context
from .cable import antagonist_residual, cable_sweep
from .errors import AllSingular
from .fourbar import (DAILY_TASK_GRIP_N, DriveParameters, GripMode,
                      force_curve, force_variation)
from .project import ProjectFile

FOURBAR_CSV_HEADER = ["theta_f_deg", "theta_t_deg", "opening_mm", "force_N"]
CABLE_CSV_HEADER = ["theta_f_deg", "theta_t_deg", "opening_mm", "force_N",
                    "tension_N", "arm_fingers_mm", "arm_thumb_mm", "grip_mode"]


def resolve_drive(project: ProjectFile, tau: Optional[float],
                  omega: Optional[float]) -> DriveParameters:
    return DriveParameters(
        project.drive.tau_in_nmm if tau is None else tau,
        project.drive.omega_in_deg_s if omega is None else omega)


def fourbar_sweep(project: ProjectFile, step_deg: float,
                  drive: Optional[DriveParameters] = None):
    """Rows + summary for the rigid four-bar force curve."""
    drive = drive or project.drive
    cal = project.calibration
    curve = force_curve(project.geometry, drive, cal.stroke, step_deg)
    rows = [(tf, tt, op, f)
            for tf, tt, op, f in zip(curve.theta_f_deg, curve.theta_t_deg,
                                     curve.opening_mm, curve.force_n)]
    warnings = [f"theta_f={curve.theta_f_deg[i]:.10g} deg: singular configuration"
                for i in np.nonzero(curve.singular)[0]]
    valid = ~curve.singular
    summary = {
        "max_opening_mm": float(np.max(curve.opening_mm)),
        "closing_time_s": cal.extent_deg / drive.omega_in_deg_s,
        "stroke_extent_deg": cal.extent_deg,
        "mean_force_n": float(np.mean(curve.force_n[valid])) if valid.any() else math.nan,
        "daily_task_grip_reference_n": DAILY_TASK_GRIP_N,
    }
    try:
        summary["force_variation"] = force_variation(curve)
    except AllSingular:
        summary["force_variation"] = math.nan
        warnings.append("force variation undefined: every sample singular")
    return rows, summary, warnings, curve


def cable_mode_sweep(project: ProjectFile, grip_mode: GripMode, step_deg: float,
                     drive: Optional[DriveParameters] = None):
    """Rows + summary for one grip mode of the cable transmission."""
    drive = drive or project.drive
    sweep = cable_sweep(project.cable_design, project.geometry, drive,
                        project.stroke, step_deg, grip_mode)
    rows = [(tf, tt, op, f, t, af, at, grip_mode.value)
            for tf, tt, op, f, t, af, at in zip(
                sweep.theta_f_deg, sweep.theta_t_deg, sweep.opening_mm,
                sweep.force_n, sweep.tension_n, sweep.arm_fingers_mm,
                sweep.arm_thumb_mm)]
    valid = ~sweep.singular
    forces = sweep.force_n[valid]
    summary = {
        "grip_mode": grip_mode.value,
        "max_opening_mm": float(np.nanmax(sweep.opening_mm)),
        "closing_time_s": (project.stroke[1] - project.stroke[0]) / drive.omega_in_deg_s,
        "mean_force_n": float(np.mean(forces)) if forces.size else math.nan,
        "force_variation": (float((forces.max() - forces.min()) / forces.max())
                            if forces.size else math.nan),
        "max_tension_n": float(np.nanmax(sweep.tension_n)),
        "tension_limit_n": project.cable_design.tension_limit_n,
        "daily_task_grip_reference_n": DAILY_TASK_GRIP_N,
    }
    return rows, summary, list(sweep.warnings), sweep


def antagonist_check(project: ProjectFile, grip_mode: GripMode,
                     samples: int = 20):
    """Hyperstatic compatibility at evenly spaced stroke samples."""
    if project.cable_design.extensor is None:
        return None, ["extensor undefined"]
    lo, hi = project.stroke
    reports = []
    warnings = []
    for tf in np.linspace(lo, hi, samples):
        rep = antagonist_residual(project.cable_design, project.geometry,
                                  float(tf), grip_mode)
        reports.append(rep)
        if not rep.admissible:
            warnings.append(
                f"theta_f={tf:.6g} deg ({grip_mode.value}): antagonist stretch "
                f"{rep.stretch_mm:.4g} mm exceeds elastic bound "
                f"{rep.stretch_bound_mm:.4g} mm")
    return reports, warnings


def axis_evaluation(project: ProjectFile, axis=None, targets=None):
    """ConstraintReport + extreme poses for an axis against the project."""
    axis = axis or project.axis
    targets = targets or project.targets
    ctx = make_context(project.geometry, project.cable_design, project.stroke)
    report = evaluate_axis_ctx(axis, ctx, targets)
    poses = extreme_positions(axis, project.geometry, ctx.flexion_range_deg,
                              targets.retro_angle_deg)
    return report, poses, ctx
