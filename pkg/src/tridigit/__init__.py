"""tridigit: single-actuator tridigital hand prosthesis design toolkit."""

from .axisdesign import (AxisPlacement, ConstraintReport, DesignTargets,
                         ExtremePoseSet, evaluate_axis, extreme_positions,
                         optimize_axis, thumb_pose)
from .cable import (Anchor, AntagonistReport, BodyId, BodyPoses, CableDesign,
                    CableRole, CableRoute, Joint, Pulley, WrapSurface,
                    antagonist_residual, cable_grip_force, cable_length,
                    cable_sweep, cable_tension, coupled_thumb_angle,
                    moment_arm, retropulsion_invariance)
from .fourbar import (Branch, DriveParameters, ForceCurve, GripMode,
                      MechanismState, StrokeCalibration, TridigitalGeometry,
                      calibrate_stroke, closing_time, force_curve,
                      force_variation, grip_force, opening_distance,
                      solve_fourbar)
from .geometry import (RigidTransform3, SpatialLine, Winding,
                       line_plane_intersection, rotate_about_line,
                       tangent_points)

__version__ = "0.1.0"
