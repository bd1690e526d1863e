"""Builders for the three benchmark task scenarios.

Each builder constructs surfaces, nominal demonstrations, fitted segment
models, deterministic error injections, success criteria, and the scripted
corrective operator that fixes the injected errors:

* insertion: three placements on a curved ridge; placements 2 and 3 carry a
  3 mm registration offset (1 mm success tolerance).
* polishing: serpentine polish at 5 N; a marked region needs roughly twice
  the nominal force dose to clear.
* layup: ten alternating passes over an airfoil-like patch; pass 6 is
  misaligned by 8 mm and creases unless backtracked and re-passed.
"""

from __future__ import annotations

import math

import numpy as np

from .channels import FREE_SPACE_CHANNELS, HYBRID_CHANNELS
from .correction import CorrectionScaling
from .demos import demo_from_columns, min_jerk, trapezoid, waypoint_demo
from .dmp import fit_lwr
from .plan import FREE_SPACE, HYBRID_SURFACE, OrientationPolicy, SegmentSpec
from .plant import ErrorInjection, PlantParams
from .scenario import Scenario
from .scripted import ScriptEntry
from .surface import BSplineSurface, fit_control_points

TASK_DT = 0.004
N_BASES_TASK = 30


def _ridge_surface(size=(0.40, 0.30), origin=(0.10, 0.10), height=0.10, bulge=0.035):
    """Gently curved patch (cowling-like ridge), tool side up."""
    nu, nv = 26, 20
    xs = np.linspace(0.0, size[0], nu)
    ys = np.linspace(0.0, size[1], nv)
    samples = np.zeros((nu, nv, 3))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            z = height + bulge * math.sin(math.pi * x / size[0]) * (1 - 0.3 * (y / size[1]))
            samples[i, j] = (origin[0] + x, origin[1] + y, z)
    surf, report = fit_control_points(samples, degrees=(3, 3), n_ctrl=(10, 8))
    assert report.max_residual < 1e-4
    return surf


def _airfoil_surface(size=(0.50, 0.36), origin=(0.05, 0.05), camber=0.06):
    """Single-curvature camber patch resembling a wing section."""
    nu, nv = 30, 22
    xs = np.linspace(0.0, size[0], nu)
    ys = np.linspace(0.0, size[1], nv)
    samples = np.zeros((nu, nv, 3))
    for i, x in enumerate(xs):
        t = x / size[0]
        z = camber * math.sin(math.pi * t) ** 1.5 + 0.01 * t
        for j, y in enumerate(ys):
            samples[i, j] = (origin[0] + x, origin[1] + y, z)
    surf, report = fit_control_points(samples, degrees=(3, 3), n_ctrl=(12, 6))
    assert report.max_residual < 1e-4
    return surf


def _surface_extents(surf: BSplineSurface) -> tuple[float, float]:
    """Approximate metric extents of the parameter axes at mid-parameter."""
    us = np.linspace(0.0, 1.0, 33)
    row = surf.eval_grid(us, np.array([0.5]))[:, 0, :]
    ext_u = float(np.sum(np.linalg.norm(np.diff(row, axis=0), axis=1)))
    vs = np.linspace(0.0, 1.0, 33)
    col = surf.eval_grid(np.array([0.5]), vs)[0]
    ext_v = float(np.sum(np.linalg.norm(np.diff(col, axis=0), axis=1)))
    return ext_u, ext_v


def _free_segment(seg_id, waypoints, T, s_bar_m=0.005, approach=None, gamma=1.0, k_c=100.0):
    demo = waypoint_demo(FREE_SPACE_CHANNELS, np.asarray(waypoints, dtype=float), T=T, dt=TASK_DT)
    model = fit_lwr(demo, n_bases=N_BASES_TASK)
    scaling = CorrectionScaling(FREE_SPACE_CHANNELS, np.full(3, s_bar_m))
    return SegmentSpec(
        seg_id,
        FREE_SPACE,
        model,
        scaling,
        gamma=gamma,
        k_c=k_c,
        orientation=OrientationPolicy.constant(),
        approach_surface_id=None if approach is None else approach[0],
        approach_uv=None if approach is None else approach[1],
    )


def _hybrid_segment(
    seg_id,
    surface_id,
    u_profile,
    v_profile,
    f_profile,
    T,
    s_bar,
    gamma=1.0,
    k_c=100.0,
    orientation=None,
    n_bases=N_BASES_TASK,
):
    demo = demo_from_columns(HYBRID_CHANNELS, [u_profile, v_profile, f_profile], TASK_DT)
    model = fit_lwr(demo, n_bases=n_bases)
    scaling = CorrectionScaling(HYBRID_CHANNELS, np.asarray(s_bar, dtype=float))
    return SegmentSpec(
        seg_id,
        HYBRID_SURFACE,
        model,
        scaling,
        gamma=gamma,
        k_c=k_c,
        orientation=orientation
        or OrientationPolicy("surface_normal_static", spin_reference=np.array([1.0, 0.0, 0.0])),
        surface_id=surface_id,
    )


def _const(value: float, T: float) -> np.ndarray:
    n = int(round(T / TASK_DT)) + 1
    return np.full(n, float(value))


# ---------------------------------------------------------------------------
# task 1: insertion


def insertion_scenario() -> Scenario:
    surf = _ridge_surface()
    ext_u, ext_v = _surface_extents(surf)
    hole_uvs = [(0.30, 0.50), (0.50, 0.50), (0.70, 0.50)]
    holder = np.array([0.62, 0.06, 0.08])
    park = np.array([0.55, 0.05, 0.16])
    standoff = 0.002  # m above the surface at carry end

    s_bar_uv = (0.005 / ext_u, 0.005 / ext_v)  # 5 mm of lateral authority
    segments = []
    prev_point = park
    targets, normals = {}, {}
    offset = np.array([0.003, 0.0, 0.0])

    for k, uv in enumerate(hole_uvs, start=1):
        hole = surf.eval(*uv)
        n = surf.normal(*uv)
        above = hole + standoff * n

        grab = _free_segment(
            f"grab_{k}",
            [prev_point, prev_point * 0.4 + holder * 0.6 + [0, 0, 0.05], holder],
            T=1.4,
        )
        carry = _free_segment(
            f"carry_{k}",
            [holder, holder + [0, 0, 0.07], above + 0.05 * n, above],
            T=1.8,
            approach=("ridge", uv),
        )
        T_place = 2.0
        place = _hybrid_segment(
            f"place_{k}",
            "ridge",
            _const(uv[0], T_place),
            _const(uv[1], T_place),
            trapezoid(6.0, T_place, TASK_DT, rise_frac=0.3),
            T=T_place,
            s_bar=(s_bar_uv[0], s_bar_uv[1], 3.0),
            n_bases=40,
        )
        segments.extend([grab, carry, place])
        targets[f"place_{k}"] = [float(v) for v in hole]
        normals[f"place_{k}"] = [float(v) for v in n]
        prev_point = hole  # next grab departs from the surface point

    injections = [
        ErrorInjection("registration_offset", "place_2", offset=tuple(offset)),
        ErrorInjection("registration_offset", "place_3", offset=tuple(offset)),
    ]
    # corrective operator: steer toward the true hole during the approach and
    # hold the correction through the placement press
    corrective = []
    for k in (2, 3):
        u_dev = [0.6, 0.0, 0.0]  # +3 mm at 5 mm scaling along +x = the offset
        corrective.append(
            ScriptEntry(
                start={"segment": f"carry_{k}", "phase_gte": 0.45},
                stop={"segment_end": True},
                u=np.array(u_dev),
            )
        )
        corrective.append(
            ScriptEntry(
                start={"segment": f"place_{k}", "phase_gte": 0.0},
                stop={"phase_gte": 0.97},
                u=np.array(u_dev),
            )
        )

    return Scenario(
        name="insertion",
        dt=TASK_DT,
        segments=segments,
        surfaces={"ridge": surf},
        plant=PlantParams(),
        injections=injections,
        success={
            "kind": "insertion",
            "tolerance_m": 0.001,
            "targets": targets,
            "normals": normals,
        },
        users={"corrective": corrective},
    )


# ---------------------------------------------------------------------------
# task 2: polishing


def polishing_scenario() -> Scenario:
    surf = _ridge_surface(size=(0.42, 0.30), origin=(0.08, 0.12), height=0.12, bulge=0.03)
    ext_u, ext_v = _surface_extents(surf)
    region = (0.55, 0.75, 0.42, 0.58)
    T_polish = 12.0
    f_nominal = 5.0

    # serpentine over three v-rows; the middle row crosses the defect
    uv_waypoints = np.array(
        [
            [0.10, 0.30],
            [0.90, 0.30],
            [0.90, 0.50],
            [0.10, 0.50],
            [0.10, 0.70],
            [0.90, 0.70],
        ]
    )
    t = np.arange(0.0, T_polish + TASK_DT / 2, TASK_DT)
    # piecewise min-jerk between waypoints, equal time per leg
    legs = len(uv_waypoints) - 1
    leg_T = T_polish / legs
    u_col = np.empty_like(t)
    v_col = np.empty_like(t)
    for i, ti in enumerate(t):
        leg = min(int(ti / leg_T), legs - 1)
        r = (ti - leg * leg_T) / leg_T
        blend = 10 * r**3 - 15 * r**4 + 6 * r**5
        u_col[i] = uv_waypoints[leg, 0] + (uv_waypoints[leg + 1, 0] - uv_waypoints[leg, 0]) * blend
        v_col[i] = uv_waypoints[leg, 1] + (uv_waypoints[leg + 1, 1] - uv_waypoints[leg, 1]) * blend
    f_col = trapezoid(f_nominal, T_polish, TASK_DT, rise_frac=0.04)

    # exact nominal dwell inside the defect region (from the demo itself)
    inside = (
        (u_col >= region[0]) & (u_col <= region[1]) & (v_col >= region[2]) & (v_col <= region[3])
    )
    dwell_s = float(inside.sum()) * TASK_DT
    idx = np.where(inside)[0]
    # widen the scripted press window slightly for the admittance settle time
    p_enter = max(0.0, idx[0] * TASK_DT / T_polish - 0.35 / T_polish)
    p_exit = min(1.0, idx[-1] * TASK_DT / T_polish + 0.05 / T_polish)

    touch = surf.eval(*uv_waypoints[0])
    leave = surf.eval(*uv_waypoints[-1])
    n0 = surf.normal(*uv_waypoints[0])
    n1 = surf.normal(*uv_waypoints[-1])

    approach = _free_segment(
        "approach",
        [touch + 0.10 * n0, touch + 0.03 * n0, touch + 0.002 * n0],
        T=1.6,
        approach=("shell", tuple(uv_waypoints[0])),
    )
    polish = _hybrid_segment(
        "polish",
        "shell",
        u_col,
        v_col,
        f_col,
        T=T_polish,
        s_bar=(0.008 / ext_u, 0.008 / ext_v, 5.0),
        n_bases=60,
    )
    depart = _free_segment(
        "depart",
        [leave, leave + 0.05 * n1, leave + 0.10 * n1],
        T=1.2,
        approach=("shell", tuple(uv_waypoints[-1])),
    )

    injections = [
        ErrorInjection(
            "defect_region",
            "polish",
            region=region,
            required_force=9.0,
            dwell_s=dwell_s,
        )
    ]
    corrective = [
        ScriptEntry(
            start={"segment": "polish", "phase_gte": p_enter},
            stop={"phase_gte": p_exit},
            u=np.array([0.0, 0.0, -1.0]),  # press: +5 N at 5 N force scaling
        )
    ]
    return Scenario(
        name="polishing",
        dt=TASK_DT,
        segments=[approach, polish, depart],
        surfaces={"shell": surf},
        plant=PlantParams(),
        injections=injections,
        success={"kind": "polishing"},
        users={"corrective": corrective},
    )


# ---------------------------------------------------------------------------
# task 3: layup


def layup_scenario(n_passes: int = 10, misaligned_pass: int = 6) -> Scenario:
    surf = _airfoil_surface()
    ext_u, ext_v = _surface_extents(surf)
    v_rows = np.linspace(0.10, 0.90, n_passes)
    u_lo, u_hi = 0.06, 0.94
    T_pass, T_hop = 2.5, 0.9
    f_pass = 8.0
    lateral_m = 0.008
    dv_inject = lateral_m / ext_v
    gamma_pass = 2.5

    s_bar = (0.010 / ext_u, 0.010 / ext_v, 4.0)
    segments = []
    passes_cfg = []
    for k in range(1, n_passes + 1):
        v_k = float(v_rows[k - 1])
        v_model = v_k + (dv_inject if k == misaligned_pass else 0.0)
        fwd = k % 2 == 1
        u_start, u_end = (u_lo, u_hi) if fwd else (u_hi, u_lo)

        seg = _hybrid_segment(
            f"pass_{k}",
            "wing",
            min_jerk(u_start, u_end, T_pass, TASK_DT),
            _const(v_model, T_pass),
            trapezoid(f_pass, T_pass, TASK_DT, rise_frac=0.12),
            T=T_pass,
            s_bar=s_bar,
            gamma=gamma_pass,
            orientation=OrientationPolicy("surface_normal_motion_aligned"),
        )
        segments.append(seg)
        passes_cfg.append(
            {"segment": f"pass_{k}", "v_track": v_k, "u_range": [u_lo + 0.04, u_hi - 0.04]}
        )

        if k < n_passes:
            v_next = float(v_rows[k]) + (dv_inject if k + 1 == misaligned_pass else 0.0)
            u_next = u_hi if fwd else u_lo  # next pass starts where this ended (u-wise)
            p_end = surf.eval(u_end, v_model)
            n_end = surf.normal(u_end, v_model)
            p_next = surf.eval(u_next, v_next)
            n_next = surf.normal(u_next, v_next)
            hop = _free_segment(
                f"hop_{k}",
                [p_end, p_end + 0.015 * n_end, p_next + 0.015 * n_next, p_next + 0.002 * n_next],
                T=T_hop,
                s_bar_m=0.0,  # calibrated repositioning: corrections locked out
                approach=("wing", (u_next, v_next)),
            )
            segments.append(hop)

    injections = [
        ErrorInjection(
            "misaligned_pass",
            f"pass_{misaligned_pass}",
            pass_index=misaligned_pass,
            lateral_offset=dv_inject,
        )
    ]

    # corrective operator: notice the crease mid-pass, push against the motion
    # (gamma > 1 flips tau) to backtrack to the pass start, then hold the
    # lateral fix through the re-pass
    fwd6 = misaligned_pass % 2 == 1
    against = np.array([-1.0, 0.0, 0.0]) if fwd6 else np.array([1.0, 0.0, 0.0])
    lat_u = -0.8  # -8 mm at 10 mm lateral scaling
    corrective = [
        ScriptEntry(
            start={"segment": f"pass_{misaligned_pass}", "phase_gte": 0.42},
            stop={"phase_lte": 0.05},
            u=against,
        ),
        ScriptEntry(
            start={"segment": f"pass_{misaligned_pass}", "phase_gte": 0.0},
            stop={"phase_gte": 0.985},
            u=np.array([0.0, lat_u, 0.0]),
            after=0,
        ),
    ]
    return Scenario(
        name="layup",
        dt=TASK_DT,
        segments=segments,
        surfaces={"wing": surf},
        plant=PlantParams(),
        injections=injections,
        success={
            "kind": "layup",
            "surface": "wing",
            "deviation_bound_m": 0.004,
            "n_cells": 24,
            "passes": passes_cfg,
        },
        users={"corrective": corrective},
    )


def build_all() -> dict[str, Scenario]:
    return {
        "insertion": insertion_scenario(),
        "polishing": polishing_scenario(),
        "layup": layup_scenario(),
    }
