"""Behavior plans: ordered DMP segments, correction subspaces, transitions.

A task is an ordered list of segments, each either free-space (Cartesian
position channels) or hybrid (two surface parameters plus a normal force).
Compilation validates endpoint compatibility, resolves the static operator
input frame per segment, and caches the nominal forward rollout used by the
rate heuristic and outcome evaluation.  Transitions fold end-of-segment
corrections into the next segment's start point for continued variables and
drop them for non-continued ones (force <-> position).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quat
from .channels import FREE_SPACE_CHANNELS, HYBRID_CHANNELS, KINEMATIC_KINDS, ChannelSet
from .correction import (
    CorrectionScaling,
    InputFrame,
    free_space_input_frame,
    hybrid_input_frame,
)
from .dmp import DmpSegmentModel, rollout
from .surface import BSplineSurface, SurfaceFrame, best_fit_plane, project_to_surface

FREE_SPACE = "free_space"
HYBRID_SURFACE = "hybrid_surface"

CONTINUITY_TOL_DEFAULT = 0.02  # m
MOTION_EPS = 1e-6


class PlanError(ValueError):
    """Compile-time plan validation failure."""


# ---------------------------------------------------------------------------
# orientation policies


@dataclass
class OrientationPolicy:
    mode: str  # "prescribed" | "surface_normal_static" | "surface_normal_motion_aligned"
    keyframes: list[tuple[float, np.ndarray]] | None = None
    spin_reference: np.ndarray | None = None  # world direction for static spin
    smoothing_tau: float = 0.1

    def __post_init__(self):
        if self.mode == "prescribed":
            if not self.keyframes:
                raise PlanError("prescribed orientation needs keyframes")
            fixed = []
            prev = None
            for p, q in sorted(self.keyframes, key=lambda kv: kv[0]):
                q = quat.normalize(np.asarray(q, dtype=float))
                if prev is not None and float(np.dot(prev, q)) < 0:
                    q = -q  # shorter arc
                if prev is not None and quat.angle_between(prev, q) > np.pi / 2:
                    warnings.warn(
                        "orientation keyframes more than 90 degrees apart; "
                        "interpolation assumes slowly changing orientation"
                    )
                fixed.append((float(p), q))
                prev = q
            self.keyframes = fixed
        elif self.mode == "surface_normal_static":
            if self.spin_reference is None:
                self.spin_reference = np.array([1.0, 0.0, 0.0])
        elif self.mode != "surface_normal_motion_aligned":
            raise PlanError(f"unknown orientation policy {self.mode!r}")

    @classmethod
    def constant(cls, q=None) -> "OrientationPolicy":
        q = quat.IDENTITY if q is None else q
        return cls("prescribed", keyframes=[(0.0, q), (1.0, q)])


class OrientationTracker:
    """Per-segment orientation state (smoothed tangent, last output)."""

    def __init__(self, policy: OrientationPolicy, dt: float):
        self.policy = policy
        self.dt = dt
        self._smoothed: np.ndarray | None = None
        self._last = quat.IDENTITY.copy()

    def reset(self, hold: np.ndarray | None = None):
        """Clear smoothing state; optionally seed the zero-motion hold pose."""
        self._smoothed = None
        self._last = quat.IDENTITY.copy() if hold is None else np.asarray(hold, dtype=float).copy()

    def orientation_at(
        self,
        progress: float,
        frame: SurfaceFrame | None = None,
        motion_dir: np.ndarray | None = None,
    ) -> np.ndarray:
        policy = self.policy
        if policy.mode == "prescribed":
            q = _prescribed_at(policy.keyframes, progress)
        elif policy.mode == "surface_normal_static":
            q = _frame_quat(frame, policy.spin_reference)
        else:  # motion aligned
            if motion_dir is None or np.linalg.norm(motion_dir) < MOTION_EPS:
                return self._last  # hold on zero motion
            tangential = motion_dir - (motion_dir @ frame.normal) * frame.normal
            norm = np.linalg.norm(tangential)
            if norm < MOTION_EPS:
                return self._last
            tangential = tangential / norm
            if self._smoothed is None:
                self._smoothed = tangential
            else:
                a = self.dt / max(policy.smoothing_tau, self.dt)
                blended = (1 - a) * self._smoothed + a * tangential
                bn = np.linalg.norm(blended)
                self._smoothed = blended / bn if bn > MOTION_EPS else tangential
            q = _frame_quat(frame, self._smoothed)
        self._last = q
        return q


def _prescribed_at(keyframes, progress: float) -> np.ndarray:
    progress = min(max(progress, 0.0), 1.0)
    if progress <= keyframes[0][0]:
        return keyframes[0][1]
    for (p0, q0), (p1, q1) in zip(keyframes, keyframes[1:]):
        if progress <= p1:
            span = p1 - p0
            t = 0.0 if span <= 0 else (progress - p0) / span
            return quat.lerp_renorm(q0, q1, t)
    return keyframes[-1][1]


def _frame_quat(frame: SurfaceFrame, in_plane_ref: np.ndarray) -> np.ndarray:
    """Tool frame: z axis into the surface (-n), x axis along the projected ref."""
    n = frame.normal
    x_axis = in_plane_ref - (in_plane_ref @ n) * n
    norm = np.linalg.norm(x_axis)
    if norm < MOTION_EPS:
        x_axis = frame.t_u
    else:
        x_axis = x_axis / norm
    z_axis = -n
    y_axis = np.cross(z_axis, x_axis)
    return quat.from_matrix(np.column_stack([x_axis, y_axis, z_axis]))


def orientation_at(
    policy: OrientationPolicy,
    progress: float,
    frame: SurfaceFrame | None = None,
    motion_dir: np.ndarray | None = None,
    dt: float = 1e-3,
) -> np.ndarray:
    """Stateless convenience wrapper (fresh tracker per call)."""
    return OrientationTracker(policy, dt).orientation_at(progress, frame, motion_dir)


# ---------------------------------------------------------------------------
# segments and plans


@dataclass
class SegmentSpec:
    id: str
    mode: str  # FREE_SPACE | HYBRID_SURFACE
    model: DmpSegmentModel
    scaling: CorrectionScaling
    gamma: float = 1.0
    k_c: float = 100.0
    orientation: OrientationPolicy = field(default_factory=OrientationPolicy.constant)
    surface_id: str | None = None
    approach_surface_id: str | None = None  # free segments near a surface
    approach_uv: tuple[float, float] | None = None
    edge_margin: float = 0.005
    standoff_band: float = 0.010
    rate_mod_force_channels: bool = False

    def __post_init__(self):
        expected = HYBRID_CHANNELS if self.mode == HYBRID_SURFACE else FREE_SPACE_CHANNELS
        if self.mode not in (FREE_SPACE, HYBRID_SURFACE):
            raise PlanError(f"segment {self.id}: unknown mode {self.mode!r}")
        if self.model.channels != expected:
            raise PlanError(
                f"segment {self.id}: model channels {self.model.channels.names} "
                f"do not match mode {self.mode}"
            )
        if self.scaling.channels != self.model.channels:
            raise PlanError(f"segment {self.id}: scaling channels do not match model")
        if self.gamma < 0:
            raise PlanError(f"segment {self.id}: gamma must be >= 0")

    @property
    def channels(self) -> ChannelSet:
        return self.model.channels

    def rate_mask(self) -> np.ndarray:
        """Channels participating in the rate heuristic."""
        kin = np.array([k in KINEMATIC_KINDS for k in self.channels.kinds])
        if self.rate_mod_force_channels:
            kin = np.ones(len(self.channels), dtype=bool)
        return kin & self.scaling.subspace_mask


@dataclass
class NominalRef:
    """Cached forward rollout of a segment's nominal behavior."""

    s: np.ndarray  # descending phases
    x: np.ndarray
    v: np.ndarray  # physical rates at tau = 1

    def values_at(self, s: float) -> np.ndarray:
        return self._interp(self.x, s)

    def rates_at(self, s: float) -> np.ndarray:
        return self._interp(self.v, s)

    def _interp(self, arr: np.ndarray, s: float) -> np.ndarray:
        asc_s = self.s[::-1]
        out = np.empty(arr.shape[1])
        for j in range(arr.shape[1]):
            out[j] = np.interp(s, asc_s, arr[::-1, j])
        return out


@dataclass
class BehaviorPlan:
    segments: list[SegmentSpec]
    surfaces: dict[str, BSplineSurface]
    input_frames: dict[str, InputFrame]
    nominal_refs: dict[str, NominalRef]
    total_duration: float

    def segment(self, seg_id: str) -> SegmentSpec:
        for seg in self.segments:
            if seg.id == seg_id:
                return seg
        raise KeyError(seg_id)

    def index_of(self, seg_id: str) -> int:
        for i, seg in enumerate(self.segments):
            if seg.id == seg_id:
                return i
        raise KeyError(seg_id)


def _segment_endpoint_cartesian(seg: SegmentSpec, values: np.ndarray, surfaces) -> np.ndarray:
    if seg.mode == HYBRID_SURFACE:
        return surfaces[seg.surface_id].eval(values[0], values[1])
    return values.copy()


def compile_plan(
    segments: list[SegmentSpec],
    surfaces: dict[str, BSplineSurface] | None = None,
    continuity_tol: float = CONTINUITY_TOL_DEFAULT,
    ref_dt: float = 2e-3,
) -> BehaviorPlan:
    """Validate the segment sequence and resolve frames and nominal references."""
    surfaces = surfaces or {}
    if not segments:
        raise PlanError("plan has no segments")
    ids = [s.id for s in segments]
    if len(set(ids)) != len(ids):
        raise PlanError(f"duplicate segment ids in {ids}")

    input_frames: dict[str, InputFrame] = {}
    nominal_refs: dict[str, NominalRef] = {}
    for seg in segments:
        if seg.mode == HYBRID_SURFACE:
            if seg.surface_id is None or seg.surface_id not in surfaces:
                raise PlanError(f"segment {seg.id}: hybrid mode requires a known surface")
            plane = best_fit_plane(surfaces[seg.surface_id])
            input_frames[seg.id] = hybrid_input_frame(seg.channels, plane.rotation)
        else:
            if seg.approach_surface_id is not None and seg.approach_surface_id not in surfaces:
                raise PlanError(f"segment {seg.id}: approach surface not defined")
            input_frames[seg.id] = free_space_input_frame(seg.channels)
        ref = rollout(seg.model, tau=1.0, dt=ref_dt)
        nominal_refs[seg.id] = NominalRef(ref.s, ref.x, ref.v)

    for prev, nxt in zip(segments, segments[1:]):
        p_end = _segment_endpoint_cartesian(
            prev, np.array([c.g for c in prev.model.forward]), surfaces
        )
        p_start = _segment_endpoint_cartesian(
            nxt, np.array([c.x0 for c in nxt.model.forward]), surfaces
        )
        gap = float(np.linalg.norm(p_end - p_start))
        if gap > continuity_tol:
            raise PlanError(
                f"segments {prev.id} -> {nxt.id}: endpoint gap {gap * 1e3:.1f} mm "
                f"exceeds {continuity_tol * 1e3:.1f} mm"
            )

    total = sum(seg.model.T for seg in segments)
    return BehaviorPlan(list(segments), surfaces, input_frames, nominal_refs, total)


# ---------------------------------------------------------------------------
# transitions


@dataclass
class TransitionResult:
    x0: np.ndarray
    projection_warning: bool = False
    dropped_channels: tuple[str, ...] = ()


def transition(
    end_command: np.ndarray,
    seg_from: SegmentSpec,
    seg_to: SegmentSpec,
    surfaces: dict[str, BSplineSurface],
) -> TransitionResult:
    """Initial state values for the next segment given the corrected end state.

    Same-variable transitions carry the corrected end value into the next
    start point; free->surface projects the Cartesian end into parameters;
    surface->free evaluates the final parameters; non-continued variables
    keep their nominal start (corrections are not transitioned).
    """
    nominal_x0 = np.array([c.x0 for c in seg_to.model.forward])

    if seg_from.mode == FREE_SPACE and seg_to.mode == FREE_SPACE:
        return TransitionResult(end_command.copy())

    if seg_from.mode == HYBRID_SURFACE and seg_to.mode == HYBRID_SURFACE:
        if seg_from.surface_id == seg_to.surface_id:
            return TransitionResult(end_command.copy())
        # different surfaces: re-project through Cartesian space
        p = surfaces[seg_from.surface_id].eval(end_command[0], end_command[1])
        res = project_to_surface(surfaces[seg_to.surface_id], p)
        if not res.converged:
            return TransitionResult(nominal_x0, projection_warning=True, dropped_channels=("f_n",))
        x0 = nominal_x0.copy()
        x0[0], x0[1] = res.u, res.v
        x0[2] = end_command[2]
        return TransitionResult(x0)

    if seg_from.mode == FREE_SPACE and seg_to.mode == HYBRID_SURFACE:
        res = project_to_surface(surfaces[seg_to.surface_id], end_command)
        if not res.converged:
            return TransitionResult(nominal_x0, projection_warning=True, dropped_channels=("f_n",))
        x0 = nominal_x0.copy()  # force keeps its nominal start: not continued
        x0[0], x0[1] = res.u, res.v
        return TransitionResult(x0, dropped_channels=("f_n",))

    # hybrid -> free: evaluate the corrected final parameters; force dropped
    p = surfaces[seg_from.surface_id].eval(end_command[0], end_command[1])
    return TransitionResult(p, dropped_channels=("f_n",))
