"""Fixed-timestep session runtime: the loop that binds all modules.

Per tick: read the latest operator input, step the correction filter, run
the rate heuristic, integrate the nominal primitive (direction-aware),
arbitrate and saturate the command, step the plant, record.  Segments chain
through corrected transitions.  Headless runs are strictly single-threaded
and deterministic: same scenario + same input trace = bit-identical output.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .correction import (
    CorrectionState,
    DirectionArbiter,
    RateLimits,
    RateState,
    SurfaceContext,
    normalized_direction,
    rate_heuristic,
    saturate_validate,
    step_correction,
    unit_direction,
)
from .plan import HYBRID_SURFACE, OrientationTracker, compile_plan, transition
from .plant import ContactModel, OutcomeReport, PlantState, evaluate_outcome, plant_step_free, plant_step_hybrid
from .scenario import DT_MAX, DT_MIN, ConfigError, Scenario
from .scripted import TickContext, null_user
from .trace import SAT_EDGE, SAT_NORMAL, Trace, TraceBuilder, TRACE_SCHEMA

D_INPUT_DEFAULT = 0.005  # m, displacement threshold for input-time
V_ALPHA_DEFAULT = 0.01  # m/s, idle-velocity threshold


class RuntimeFault(RuntimeError):
    """Mid-run fault (CLI exit code 3); carries the partial trace if any."""

    def __init__(self, msg: str, trace: Trace | None = None):
        super().__init__(msg)
        self.trace = trace


@dataclass
class Metrics:
    t_input_corrective: float
    t_input_motion: float
    t_total: float
    saturation_ticks: int
    hold_ticks: int
    reversals: int
    mean_tick_seconds: float
    outcome: OutcomeReport | None = None

    def lines(self) -> list[str]:
        out = [
            f"t_total               {self.t_total:.3f} s",
            f"t_input (corrective)  {self.t_input_corrective:.3f} s",
            f"t_input (motion)      {self.t_input_motion:.3f} s",
            f"saturation ticks      {self.saturation_ticks}",
            f"hold ticks            {self.hold_ticks}",
            f"direction reversals   {self.reversals}",
            f"mean tick compute     {self.mean_tick_seconds * 1e6:.1f} us",
        ]
        if self.outcome is not None:
            out.append(f"outcome               {self.outcome.summary()}")
        return out


@dataclass
class SessionResult:
    trace: Trace
    metrics: Metrics
    outcome: OutcomeReport | None


class Session:
    """One live execution of a compiled scenario."""

    def __init__(
        self,
        scenario: Scenario,
        user=None,
        dt: float | None = None,
        max_time: float | None = None,
        rate_limits: RateLimits = RateLimits(),
    ):
        self.scenario = scenario
        self.dt = float(dt if dt is not None else scenario.dt)
        if not (DT_MIN <= self.dt <= DT_MAX):
            raise ConfigError(f"dt {self.dt} outside [{DT_MIN}, {DT_MAX}]")
        self.user = user if user is not None else null_user
        if hasattr(self.user, "reset"):
            self.user.reset()  # scripted users are stateful across runs
        self.plan = compile_plan(scenario.segments, scenario.surfaces)
        self.limits = rate_limits
        self.max_time = max_time if max_time is not None else (
            scenario.max_time or 3.0 * self.plan.total_duration + 10.0
        )

        header = {
            "schema": TRACE_SCHEMA,
            "config_hash": scenario.hash(),
            "scenario": scenario.name,
            "dt": self.dt,
            "seed": scenario.seed,
            "device_range_m": scenario.device_range_m,
            "segments": {
                seg.id: {
                    "mode": seg.mode,
                    "channels": list(seg.channels.names),
                    "kinds": list(seg.channels.kinds),
                    "s_bar": [float(v) for v in seg.scaling.s_bar],
                }
                for seg in scenario.segments
            },
        }
        self.builder = TraceBuilder(header)

        self.tick = 0
        self.t = 0.0
        self.done = False
        self.end_reason = ""
        self._compute_time = 0.0
        self._reversals = 0
        self._pending_transition = False
        self._last_cmd: np.ndarray | None = None
        self._last_quat = np.array([1.0, 0.0, 0.0, 0.0])

        self._enter_segment(0, x0=None)
        seg0 = self.plan.segments[0]
        if seg0.mode == HYBRID_SURFACE:
            surf = self.plan.surfaces[seg0.surface_id]
            start = surf.eval(self._integ.x[0], self._integ.x[1])
            self.plant = PlantState.at_rest(start)
            self.plant.enter_surface(surf, self._integ.x[:2])
        else:
            self.plant = PlantState.at_rest(self._integ.x)
        self.plant.orientation = self._last_quat.copy()

    # -- segment management -------------------------------------------------

    def _enter_segment(self, index: int, x0: np.ndarray | None):
        seg = self.plan.segments[index]
        self.seg_index = index
        self.seg = seg
        self.model = seg.model
        self._integ = self.model.initial_state()
        if x0 is not None:
            self._integ.x = np.asarray(x0, dtype=float).copy()
        self._corr = CorrectionState.zero(len(seg.channels), seg.k_c)
        self._arbiter = DirectionArbiter(self.limits)
        self._tracker = OrientationTracker(seg.orientation, self.dt)
        self._tracker.reset(hold=self._last_quat)
        self._frame = self.plan.input_frames[seg.id]
        self._ref = self.plan.nominal_refs[seg.id]
        self._rate_mask = seg.rate_mask()
        self._rate_enabled = bool(self._rate_mask.any())
        self._last_stepped_tau = 1.0
        self._surf = self.plan.surfaces.get(seg.surface_id) if seg.surface_id else None
        self._contact = ContactModel(self.scenario.plant.k_s, self.scenario.plant.contact_damping)
        if seg.mode == HYBRID_SURFACE:
            self._sat_ctx = SurfaceContext(mode="hybrid_surface", edge_margin=seg.edge_margin)
        elif seg.approach_surface_id is not None:
            asurf = self.plan.surfaces[seg.approach_surface_id]
            uv = seg.approach_uv or (0.5, 0.5)
            self._sat_ctx = SurfaceContext(
                mode="approach_depart",
                anchor_point=asurf.eval(*uv),
                anchor_normal=asurf.normal(*uv),
                standoff_band=seg.standoff_band,
            )
        else:
            self._sat_ctx = SurfaceContext(mode="free_space")

    def _switch_plant_mode(self, prev_mode: str):
        seg = self.seg
        if seg.mode == HYBRID_SURFACE:
            self.plant.enter_surface(
                self.plan.surfaces[seg.surface_id], self._integ.x[:2], self.plant.position
            )
        elif prev_mode == HYBRID_SURFACE:
            self.plant.leave_surface()

    def _advance_segment(self):
        end_command = self._last_cmd
        prev = self.seg
        nxt = self.plan.segments[self.seg_index + 1]
        res = transition(end_command, prev, nxt, self.plan.surfaces)
        self._enter_segment(self.seg_index + 1, res.x0)
        self._switch_plant_mode(prev.mode)

    # -- per-tick pipeline ---------------------------------------------------

    def _context(self) -> TickContext:
        s = self._integ.s
        progress = math.log(s) / math.log(self.model.s_end) if s < 1.0 else 0.0
        return TickContext(
            tick=self.tick,
            t=self.t,
            segment_id=self.seg.id,
            segment_index=self.seg_index,
            progress=progress,
            direction=self._arbiter.direction,
            force_normal=self.plant.force_normal,
            uv=None if self.plant.uv is None else (float(self.plant.uv[0]), float(self.plant.uv[1])),
        )

    def tick_once(self) -> dict | None:
        """Run one control tick; returns a state snapshot, or None when done."""
        if self.done:
            return None
        t_start = time.perf_counter()
        dt = self.dt
        seg = self.seg
        model = self.model

        if self._pending_transition:
            if self.seg_index + 1 >= len(self.plan.segments):
                self.done = True
                self.end_reason = "plan_exhausted"
                return None
            self._advance_segment()
            self._pending_transition = False
            seg = self.seg
            model = self.model

        # 1. operator input
        u_dev = np.clip(np.asarray(self.user(self._context()), dtype=float), -1.0, 1.0)
        u_chan = self._frame.map(u_dev)

        # 2. correction filter
        self._corr = step_correction(self._corr, u_chan, dt)
        dy_scaled = seg.scaling.scaled(self._corr)

        # 3. execution rate
        if self._rate_enabled:
            mask = self._rate_mask
            v_full = self._ref.rates_at(self._integ.s)
            v_n = unit_direction(v_full[mask])
            f_d = normalized_direction(u_chan[mask], deadzone=self.scenario.input_deadzone)
            rate = rate_heuristic(v_n, f_d, seg.gamma, self._arbiter, self.limits)
            if not rate.hold and rate.direction != ("forward" if self._last_stepped_tau > 0 else "backward"):
                # direction switch: start the incoming variant on its own
                # fitted trajectory at the current phase (position stays
                # continuous; the plant's servo absorbs the rate flip)
                sign = 1.0 if rate.direction == "forward" else -1.0
                self._integ.z = sign * abs(rate.tau) * self._ref.rates_at(self._integ.s)
                self._reversals += 1
        else:
            rate = RateState(1.0, seg.gamma, self._arbiter.direction, np.zeros(1), np.zeros(1))

        # 4. nominal primitive step (direction-aware)
        hold = rate.hold
        if not hold and rate.direction == "backward" and self._integ.s >= 1.0:
            hold = True  # parked at the segment start; cannot cross backward
        if not hold:
            self._integ = model.step(self._integ, rate.tau, dt, rate.direction)
            self._last_stepped_tau = rate.tau
        x_n = self._integ.x

        # 5. arbitrate + validate
        x_cmd, dy_eff, sat = saturate_validate(x_n, dy_scaled, seg.channels, self._sat_ctx)
        self._last_cmd = x_cmd

        # 6. plant
        if seg.mode == HYBRID_SURFACE:
            plant_step_hybrid(self.plant, x_cmd, self._surf, self.scenario.plant, self._contact, dt)
            frame_args = self._plant_frame()
        else:
            plant_step_free(self.plant, x_cmd, self.scenario.plant, dt)
            frame_args = None
        s_now = self._integ.s
        progress = math.log(s_now) / math.log(model.s_end) if s_now < 1.0 else 0.0
        q = self._tracker.orientation_at(progress, frame_args, motion_dir=self.plant.velocity)
        self.plant.orientation = q
        self._last_quat = q

        # 7. record
        sat_bits = (SAT_EDGE if sat.edge_clamped else 0) | (SAT_NORMAL if sat.normal_diminished else 0)
        self.builder.append(
            t=self.t,
            seg=seg.id,
            s=float(self._integ.s),
            tau=None if hold else float(rate.tau),
            dir=rate.direction[0],
            hold=int(hold),
            xn=[float(v) for v in x_n],
            dy=[float(v) for v in dy_eff],
            xc=[float(v) for v in x_cmd],
            u=[float(v) for v in u_dev],
            pos=[float(v) for v in self.plant.position],
            q=[float(v) for v in q],
            uv=None if self.plant.uv is None else [float(self.plant.uv[0]), float(self.plant.uv[1])],
            f=float(self.plant.force_normal),
            contact=int(self.plant.contact),
            sat=sat_bits,
        )

        snapshot = {
            "type": "state",
            "v": 1,
            "t": self.t,
            "tick": self.tick,
            "seg": seg.id,
            "mode": seg.mode,
            "s": float(self._integ.s),
            "progress": progress,
            "tau": None if hold else float(rate.tau),
            "dir": rate.direction,
            "hold": int(hold),
            "xn": [float(v) for v in x_n],
            "dy": [float(v) for v in dy_eff],
            "xc": [float(v) for v in x_cmd],
            "u": [float(v) for v in u_dev],
            "pos": [float(v) for v in self.plant.position],
            "q": [float(v) for v in q],
            "f_meas": float(self.plant.force_normal),
            "f_cmd": float(x_cmd[2]) if seg.mode == HYBRID_SURFACE else None,
            "contact": int(self.plant.contact),
            "sat": sat_bits,
            "sbar": [float(v) for v in seg.scaling.s_bar],
            "channels": list(seg.channels.names),
            "frame": list(self._frame.labels),
        }

        # 8. bookkeeping and termination
        self.tick += 1
        self.t += dt
        if rate.direction == "forward" and self._integ.s < model.s_end:
            self._pending_transition = True
            if self.seg_index + 1 >= len(self.plan.segments):
                self.done = True
                self.end_reason = "plan_exhausted"
        if not self.done and self.t > self.max_time:
            self.done = True
            self.end_reason = "max_time"
        self._compute_time += time.perf_counter() - t_start
        return snapshot

    def _plant_frame(self):
        from .surface import SurfaceFrame

        du = self.plant._du_vec
        n = self.plant._normal
        t_u = du / np.linalg.norm(du)
        return SurfaceFrame(self.plant.position, n, t_u, np.cross(n, t_u))

    def finish(self) -> Trace:
        complete = self.end_reason == "plan_exhausted"
        return self.builder.finish(complete, self.end_reason or "aborted")

    def mean_tick_seconds(self) -> float:
        return self._compute_time / max(self.tick, 1)


# ---------------------------------------------------------------------------
# metrics


def compute_input_time(
    trace: Trace,
    method: str = "corrective",
    d: float = D_INPUT_DEFAULT,
    v_alpha: float = V_ALPHA_DEFAULT,
) -> float:
    """Integrated operator-input time from the recorded device trace.

    corrective: device displaced beyond d (strict >) counts as input;
    motion_based: device speed above v_alpha (strict >) counts as input.
    Scripted devices synthesize displacement as u * device range.
    """
    if len(trace) == 0:
        return 0.0
    rng = float(trace.header.get("device_range_m", 0.05))
    disp = np.linalg.norm(trace.u, axis=1) * rng
    if method == "corrective":
        active = disp > d
    elif method == "motion_based":
        prev = np.vstack([np.zeros(3), trace.u[:-1]])
        speed = np.linalg.norm(trace.u - prev, axis=1) * rng / trace.dt
        active = speed > v_alpha
    else:
        raise ValueError(f"unknown input-time method {method!r}")
    return float(active.sum()) * trace.dt


def session_metrics(trace: Trace, session: Session | None = None, outcome=None) -> Metrics:
    return Metrics(
        t_input_corrective=compute_input_time(trace, "corrective"),
        t_input_motion=compute_input_time(trace, "motion_based"),
        t_total=len(trace) * trace.dt,
        saturation_ticks=int((trace.sat_flags != 0).sum()),
        hold_ticks=int(trace.holds.sum()),
        reversals=session._reversals if session is not None else 0,
        mean_tick_seconds=session.mean_tick_seconds() if session is not None else 0.0,
        outcome=outcome,
    )


# ---------------------------------------------------------------------------
# headless entry point


def run(
    scenario: Scenario,
    user=None,
    dt: float | None = None,
    record_path: str | None = None,
    max_time: float | None = None,
) -> SessionResult:
    """Run a scenario headless to completion."""
    session = Session(scenario, user=user, dt=dt, max_time=max_time)
    try:
        while not session.done:
            session.tick_once()
    except Exception as exc:  # mid-run fault: abort with partial trace
        partial = session.finish()
        if record_path:
            partial.save(record_path)
        raise RuntimeFault(f"session fault at t={session.t:.3f}: {exc}", partial) from exc
    trace = session.finish()
    outcome = None
    if scenario.success:
        outcome = evaluate_outcome(trace, scenario, scenario.surfaces)
    metrics = session_metrics(trace, session, outcome)
    if record_path:
        trace.save(record_path)
    return SessionResult(trace, metrics, outcome)
