"""Simulated robot plant: kinematic tool point with an admittance force loop.

Position channels are tracked by a rate-limited first-order velocity servo.
On hybrid segments the tool lives in surface coordinates (u, v, normal
offset c); the force channel is closed through an admittance law,

    c_dot = -k_p * (f_cmd - f_meas)

against a linear spring-damper contact model, so commanding more force
drives the tool into the surface until the measured force settles.  Also
hosts the deterministic task error injections and the outcome evaluation
that re-enact the three study tasks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quat
from .surface import BSplineSurface


class ScenarioConfigError(ValueError):
    """Bad scenario/injection configuration."""


@dataclass(frozen=True)
class PlantParams:
    k_p: float = 0.002  # admittance gain, m/(s*N)
    k_s: float = 5000.0  # contact stiffness, N/m
    contact_damping: float = 2.0 * math.sqrt(5000.0)  # N*s/m
    v_max: float = 0.5  # m/s
    track_gain: float = 50.0  # 1/s
    param_rate_max: float = 2.0  # 1/s


@dataclass
class ContactModel:
    k_s: float
    damping: float

    def force(self, penetration: float, pen_rate: float) -> float:
        if penetration <= 0.0:
            return 0.0
        return max(0.0, self.k_s * penetration + self.damping * pen_rate)


@dataclass
class PlantState:
    position: np.ndarray
    orientation: np.ndarray
    velocity: np.ndarray
    force_normal: float = 0.0
    contact: bool = False
    # hybrid-mode internals
    uv: np.ndarray | None = None
    normal_offset: float = 0.0
    _du_vec: np.ndarray | None = None
    _dv_vec: np.ndarray | None = None
    _normal: np.ndarray | None = None

    @classmethod
    def at_rest(cls, position) -> "PlantState":
        return cls(
            position=np.asarray(position, dtype=float).copy(),
            orientation=quat.IDENTITY.copy(),
            velocity=np.zeros(3),
        )

    def enter_surface(self, surf: BSplineSurface, uv, position=None):
        self.uv = np.array([uv[0], uv[1]], dtype=float)
        anchor, du, dv = surf.eval_with_tangents(self.uv[0], self.uv[1])
        n = np.cross(du, dv)
        n = surf.normal_side * n / np.linalg.norm(n)
        pos = self.position if position is None else np.asarray(position, dtype=float)
        self.normal_offset = float((pos - anchor) @ n)
        self.position = anchor + self.normal_offset * n
        self._du_vec, self._dv_vec, self._normal = du, dv, n

    def leave_surface(self):
        self.uv = None
        self.normal_offset = 0.0
        self.force_normal = 0.0
        self.contact = False
        self._du_vec = self._dv_vec = self._normal = None


def plant_step_free(state: PlantState, cmd_xyz: np.ndarray, params: PlantParams, dt: float) -> PlantState:
    """Velocity-servo tracking of a Cartesian command."""
    v = params.track_gain * (cmd_xyz - state.position)
    speed = float(np.linalg.norm(v))
    if speed > params.v_max:
        v = v * (params.v_max / speed)
    state.position = state.position + v * dt
    state.velocity = v
    state.force_normal = 0.0
    state.contact = False
    return state


def plant_step_hybrid(
    state: PlantState,
    cmd_uvf: np.ndarray,
    surf: BSplineSurface,
    params: PlantParams,
    contact: ContactModel,
    dt: float,
) -> PlantState:
    """Track (u, v) in parameter space; close the force loop along the normal.

    The total tool speed is budgeted against v_max: the admittance normal
    rate takes priority, the tangential servo gets the remainder.
    """
    prev_pos = state.position

    # admittance: force error -> normal velocity (toward surface when under force)
    pen_prev = max(0.0, -state.normal_offset)
    c_dot = -params.k_p * (cmd_uvf[2] - state.force_normal)
    c_dot = min(max(c_dot, -params.v_max), params.v_max)

    # tangential servo, rate-limited in parameter and Cartesian terms
    duv = params.track_gain * (cmd_uvf[:2] - state.uv)
    duv = np.clip(duv, -params.param_rate_max, params.param_rate_max)
    v_tan = duv[0] * state._du_vec + duv[1] * state._dv_vec
    v_tan_budget = math.sqrt(max(params.v_max**2 - c_dot**2, 0.0))
    v_tan_norm = float(np.linalg.norm(v_tan))
    if v_tan_norm > v_tan_budget:
        duv = duv * (v_tan_budget / v_tan_norm) if v_tan_norm > 0 else duv

    state.uv = np.clip(state.uv + duv * dt, 0.0, 1.0)
    state.normal_offset += c_dot * dt

    pen = max(0.0, -state.normal_offset)
    pen_rate = (pen - pen_prev) / dt
    state.force_normal = contact.force(pen, pen_rate)
    state.contact = pen > 0.0

    point, du, dv = surf.eval_with_tangents(state.uv[0], state.uv[1])
    n = np.cross(du, dv)
    n = surf.normal_side * n / np.linalg.norm(n)
    state.position = point + state.normal_offset * n
    state.velocity = (state.position - prev_pos) / dt
    state._du_vec, state._dv_vec, state._normal = du, dv, n
    return state


# ---------------------------------------------------------------------------
# error injections -> world model


@dataclass
class ErrorInjection:
    kind: str  # registration_offset | defect_region | misaligned_pass
    segment_id: str | None = None
    offset: tuple = (0.0, 0.0, 0.0)  # registration shift, meters
    region: tuple | None = None  # defect (u0, u1, v0, v1)
    required_force: float = 0.0  # defect threshold force, N
    dwell_s: float = 0.0  # defect nominal dwell used for the dose threshold
    pass_index: int | None = None  # layup pass ordinal (documentation)
    lateral_offset: float = 0.0  # layup track shift, surface-v units

    def as_doc(self) -> dict:
        doc = {"kind": self.kind}
        if self.segment_id is not None:
            doc["segment"] = self.segment_id
        if self.kind == "registration_offset":
            doc["offset"] = [float(v) for v in self.offset]
        elif self.kind == "defect_region":
            doc["region"] = [float(v) for v in self.region]
            doc["required_force"] = float(self.required_force)
            doc["dwell_s"] = float(self.dwell_s)
        elif self.kind == "misaligned_pass":
            doc["pass_index"] = self.pass_index
            doc["lateral_offset"] = float(self.lateral_offset)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "ErrorInjection":
        kind = doc.get("kind")
        if kind == "registration_offset":
            return cls(kind, doc.get("segment"), offset=tuple(doc["offset"]))
        if kind == "defect_region":
            return cls(
                kind,
                doc.get("segment"),
                region=tuple(doc["region"]),
                required_force=float(doc["required_force"]),
                dwell_s=float(doc["dwell_s"]),
            )
        if kind == "misaligned_pass":
            return cls(
                kind,
                doc.get("segment"),
                pass_index=doc.get("pass_index"),
                lateral_offset=float(doc.get("lateral_offset", 0.0)),
            )
        raise ScenarioConfigError(f"unknown injection kind {kind!r}")


@dataclass
class WorldModel:
    """Ground truth after injections: what success is measured against."""

    true_targets: dict = field(default_factory=dict)  # segment_id -> 3-D point
    defect_regions: list = field(default_factory=list)  # (region, dose_threshold, segment_ids)
    track_offsets: dict = field(default_factory=dict)  # segment_id -> injected v offset


def inject_error(scenario, plan=None) -> WorldModel:
    """Apply the scenario's deterministic injections; returns the world model.

    Registration offsets shift the true placement targets away from the
    nominal ones; defect regions demand a force dose; misaligned passes are
    already baked into the plan's nominal track, so here they record the
    offset that outcome evaluation must judge against.
    """
    world = WorldModel()
    success = scenario.success
    for inj in scenario.injections:
        if inj.kind == "registration_offset":
            if inj.segment_id is None:
                raise ScenarioConfigError("registration_offset needs a segment id")
            nominal = success.get("targets", {}).get(inj.segment_id)
            if nominal is None:
                raise ScenarioConfigError(f"no nominal target for segment {inj.segment_id}")
            world.true_targets[inj.segment_id] = np.asarray(nominal) + np.asarray(inj.offset)
        elif inj.kind == "defect_region":
            threshold = inj.required_force * inj.dwell_s
            world.defect_regions.append((inj.region, threshold, inj.segment_id))
        elif inj.kind == "misaligned_pass":
            if inj.segment_id is None:
                raise ScenarioConfigError("misaligned_pass needs a segment id")
            world.track_offsets[inj.segment_id] = inj.lateral_offset
        else:
            raise ScenarioConfigError(f"unknown injection kind {inj.kind!r}")
    # placement segments without registration error keep their nominal target
    for seg_id, target in success.get("targets", {}).items():
        world.true_targets.setdefault(seg_id, np.asarray(target, dtype=float))
    return world


# ---------------------------------------------------------------------------
# outcome evaluation


@dataclass
class OutcomeReport:
    kind: str
    success: bool
    details: dict
    partial: bool = False

    def summary(self) -> str:
        mark = "SUCCESS" if self.success else "FAILURE"
        if self.partial:
            mark += " (partial trace)"
        return f"{self.kind}: {mark} {self.details}"


def _segment_ticks(trace, seg_id):
    return [i for i, s in enumerate(trace.segment_ids) if s == seg_id]


def evaluate_outcome(trace, scenario, surfaces: dict[str, BSplineSurface]) -> OutcomeReport:
    """Judge a completed trace against the scenario's success criteria."""
    world = inject_error(scenario)
    kind = scenario.success.get("kind")
    partial = not trace.complete
    if kind == "insertion":
        return _evaluate_insertion(trace, scenario, world, partial)
    if kind == "polishing":
        return _evaluate_polishing(trace, scenario, world, partial)
    if kind == "layup":
        return _evaluate_layup(trace, scenario, world, surfaces, partial)
    raise ScenarioConfigError(f"unknown success kind {kind!r}")


def _evaluate_insertion(trace, scenario, world, partial) -> OutcomeReport:
    tol = float(scenario.success.get("tolerance_m", 1e-3))
    normal = np.asarray(scenario.success.get("surface_normal", (0.0, 0.0, 1.0)), dtype=float)
    results = {}
    for seg_id, true_target in world.true_targets.items():
        ticks = _segment_ticks(trace, seg_id)
        if not ticks:
            results[seg_id] = {"error_m": math.nan, "ok": False}
            continue
        pos = trace.positions[ticks[-1]]
        rel = pos - true_target
        lateral = rel - (rel @ normal) * normal
        err = float(np.linalg.norm(lateral))
        results[seg_id] = {"error_m": err, "ok": err <= tol}
    success = bool(results) and all(r["ok"] for r in results.values())
    return OutcomeReport("insertion", success and not partial, results, partial)


def _evaluate_polishing(trace, scenario, world, partial) -> OutcomeReport:
    details = {}
    cleared_all = True
    for region, threshold, seg_id in world.defect_regions:
        u0, u1, v0, v1 = region
        dose = 0.0
        for i in _segment_ticks(trace, seg_id):
            uv = trace.uvs[i]
            if uv is None:
                continue
            if u0 <= uv[0] <= u1 and v0 <= uv[1] <= v1:
                dose += trace.forces[i] * trace.dt
        cleared = dose >= threshold
        cleared_all = cleared_all and cleared
        details[seg_id or "defect"] = {
            "dose": dose,
            "threshold": threshold,
            "cleared": cleared,
        }
    return OutcomeReport("polishing", cleared_all and not partial, details, partial)


def _evaluate_layup(trace, scenario, world, surfaces, partial) -> OutcomeReport:
    cfg = scenario.success
    bound = float(cfg.get("deviation_bound_m", 4e-3))
    passes = cfg.get("passes", [])  # [{segment, v_track, u_range}]
    surf = surfaces[cfg["surface"]]
    n_cells = int(cfg.get("n_cells", 24))
    details = {}
    crease = False
    for entry in passes:
        seg_id = entry["segment"]
        v_track = float(entry["v_track"])
        u_lo, u_hi = entry.get("u_range", (0.08, 0.92))
        ticks = _segment_ticks(trace, seg_id)
        edges = np.linspace(u_lo, u_hi, n_cells + 1)
        last_dev = np.full(n_cells, math.nan)
        for i in ticks:
            uv = trace.uvs[i]
            if uv is None or not trace.contacts[i]:
                continue
            u = uv[0]
            if u < u_lo or u > u_hi:
                continue
            cell = min(int((u - u_lo) / (u_hi - u_lo) * n_cells), n_cells - 1)
            # lateral deviation: along-surface distance between the rolled
            # line and the intended track at the same sweep parameter
            intended = surf.eval(u, v_track)
            rolled = surf.eval(u, uv[1])
            last_dev[cell] = float(np.linalg.norm(rolled - intended))
        covered = ~np.isnan(last_dev)
        max_dev = float(np.nanmax(last_dev)) if covered.any() else math.nan
        pass_crease = bool(covered.any() and np.nanmax(last_dev) > bound)
        crease = crease or pass_crease
        details[seg_id] = {
            "max_final_deviation_m": max_dev,
            "cells_covered": int(covered.sum()),
            "crease": pass_crease,
        }
    return OutcomeReport("layup", (not crease) and not partial, {"passes": details, "crease": crease}, partial)
