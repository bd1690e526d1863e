"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings inline.
"""

import math
import sys
import time
from functools import wraps

import numpy as np
import pytest

from dmpsteer.channels import POSITION, ChannelSet
from dmpsteer.correction import (
    CorrectionScaling,
    CorrectionState,
    rate_from_opposition,
    step_correction,
)
from dmpsteer.demos import demo_from_columns, min_jerk, trapezoid
from dmpsteer.dmp import Demonstration, fit_lwr, rollout
from dmpsteer.scripted import ReplayUser, ScriptedUser, ScriptEntry
from dmpsteer.session import compute_input_time, run
from dmpsteer.surface import best_fit_plane, project_to_surface, rotation_from_exp
from dmpsteer.trace import TraceBuilder, eq1_audit, extract_inputs, traces_equal

from conftest import make_plane, mini_scenario
from test_dmp import X1, XF
from test_surface import make_wavy_patch, naive_eval


def criterion(number: int, budget_s: float, label: str):
    def deco(fn):
        @wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {number}: FAIL  {label}", file=sys.stderr, flush=True)
                raise
            elapsed = time.perf_counter() - start
            print(
                f"ACCEPTANCE {number}: PASS  {label}  ({elapsed:.2f} s, budget {budget_s:.0f} s)",
                flush=True,
            )
            assert elapsed < budget_s, f"criterion {number} exceeded its {budget_s}s budget"

        return wrapper

    return deco


# ---------------------------------------------------------------------------


@criterion(1, 5.0, "arbitration audit + zero-scaling suppression")
def test_criterion_1_arbitration_audit():
    suppressed = mini_scenario(s_bar_free=0.0, s_bar_hybrid=(0.0, 0.0, 0.0))
    wild = ScriptedUser(
        [ScriptEntry(start={"time_gte": 0.05}, stop={"time_gte": 2.3}, u=[1.0, -1.0, 1.0])]
    )
    res_nominal = run(suppressed)
    res_input = run(suppressed, user=wild)
    assert eq1_audit(res_nominal.trace) == 0.0
    assert eq1_audit(res_input.trace) == 0.0
    assert np.array_equal(res_input.trace.x_cmd, res_nominal.trace.x_cmd)
    assert np.array_equal(res_input.trace.x_n, res_nominal.trace.x_n)
    assert np.array_equal(res_input.trace.positions, res_nominal.trace.positions)
    assert res_input.trace.tau == res_nominal.trace.tau

    active = mini_scenario()
    res_corr = run(active, user=wild)
    assert eq1_audit(res_corr.trace) == 0.0
    assert np.max(np.abs(res_corr.trace.dy)) > 0


@criterion(2, 10.0, "DMP fit fidelity, goal convergence, temporal invariance")
def test_criterion_2_dmp_fidelity():
    dt = 1e-3
    # 1-D smooth demo
    demo1 = Demonstration(X1, min_jerk(0.0, 1.0, 1.0, dt)[:, None], dt)
    model1 = fit_lwr(demo1, n_bases=40)
    roll1 = rollout(model1, tau=1.0, dt=dt)
    n = min(len(roll1.t), demo1.values.shape[0])
    assert np.max(np.abs(roll1.x[:n, 0] - demo1.values[:n, 0])) < 0.02 * np.ptp(demo1.values)
    assert abs(roll1.x[-1, 0] - 1.0) < 1e-3

    # 2-D demo (position line + force press with a rest tail)
    T2 = 2.0
    force_col = np.concatenate(
        [trapezoid(6.0, 0.85 * T2, dt, rise_frac=0.3), np.zeros(int(0.15 * T2 / dt))]
    )
    demo2 = demo_from_columns(XF, [min_jerk(0.0, 0.3, T2, dt), force_col], dt)
    model2 = fit_lwr(demo2, n_bases=80)
    roll2 = rollout(model2, tau=1.0, dt=dt)
    n = min(len(roll2.t), demo2.values.shape[0])
    for j in range(2):
        err = np.max(np.abs(roll2.x[:n, j] - demo2.values[:n, j]))
        assert err < 0.02 * np.ptp(demo2.values[:, j])
        assert abs(roll2.x[-1, j] - model2.forward[j].g) < 1e-3 * max(
            np.ptp(demo2.values[:, j]), 1.0
        )

    # temporal invariance across tau in {0.5, 1, 2}
    ref = rollout(model1, tau=1.0, dt=dt)
    s_grid = np.linspace(model1.s_end + 1e-4, 0.999, 300)
    x_ref = np.interp(s_grid, ref.s[::-1], ref.x[::-1, 0])
    for tau in (0.5, 2.0):
        scaled = rollout(model1, tau=tau, dt=dt)
        x_scaled = np.interp(s_grid, scaled.s[::-1], scaled.x[::-1, 0])
        assert np.max(np.abs(x_ref - x_scaled)) < 1e-3
        assert scaled.t[-1] == pytest.approx(tau * ref.t[-1], rel=0.01)


@criterion(3, 2.0, "correction filter: critically damped, exact scaling, decay")
def test_criterion_3_correction_ode():
    dt = 1e-3
    k_c = 100.0
    state = CorrectionState.zero(3, k_c)
    assert state.b_c == pytest.approx(2 * math.sqrt(k_c))
    peak = 0.0
    for _ in range(int(3.0 / dt)):
        state = step_correction(state, np.array([1.0, 0.0, 0.0]), dt)
        peak = max(peak, state.y[0])
    steady = state.y[0]
    assert peak <= steady + 1e-9  # no overshoot
    assert abs(steady - 1.0 / k_c) < 1e-9  # u/k_c before scaling

    channels = ChannelSet(("x", "y", "z"), (POSITION,) * 3)
    scaling = CorrectionScaling(channels, np.array([0.005, 0.0, 0.0]))
    assert abs(scaling.scaled(state)[0] - 0.005) < 1e-9  # exactly s_bar after

    for _ in range(int(6.0 / math.sqrt(k_c) / dt)):
        state = step_correction(state, np.zeros(3), dt)
    assert abs(state.y[0]) < 0.02 * steady


@criterion(4, 5.0, "rate heuristic table, reversal continuity, path overlap")
def test_criterion_4_rate_heuristic():
    # hand-evaluated table
    assert rate_from_opposition(0.5, 1.0) == 1.0  # positive branch
    assert rate_from_opposition(0.5, 7.0) == 1.0
    assert rate_from_opposition(-0.5, 1.0) == pytest.approx(2.0)
    assert rate_from_opposition(-1.0, 2.0) == pytest.approx(-1.0)  # sign flip
    assert rate_from_opposition(-1.0, 1.0) is None  # singular point holds

    # reversal episode on the mini scenario
    sc = mini_scenario(gamma=2.5)
    reverser = ScriptedUser(
        [
            ScriptEntry(
                start={"segment": "draw", "phase_gte": 0.5},
                stop={"phase_lte": 0.1},
                u=[-1.0, 0.0, 0.0],
            )
        ]
    )
    res = run(sc, user=reverser)
    trace = res.trace
    taus = [t for t in trace.tau if t is not None]
    assert min(taus) < 0 and "b" in trace.directions

    # continuity across every direction switch (command never jumps)
    v_max = sc.plant.v_max
    ext = 0.4  # plate is 0.4 m square: param -> meter scale
    for i in range(1, len(trace)):
        if (
            trace.segment_ids[i] == trace.segment_ids[i - 1]
            and trace.directions[i] != trace.directions[i - 1]
        ):
            jump = np.abs(trace.x_cmd[i, :2] - trace.x_cmd[i - 1, :2]) * ext
            assert np.all(jump <= v_max * trace.dt + 1e-12)

    # backward path overlaps the forward path over phase within 3%
    idx = [i for i, s in enumerate(trace.segment_ids) if s == "draw"]
    fwd = [i for i in idx if trace.directions[i] == "f" and not trace.holds[i]]
    bwd = [i for i in idx if trace.directions[i] == "b" and not trace.holds[i]]
    assert len(bwd) > 30
    first_b = bwd[0]
    fwd_pre = [i for i in fwd if i < first_b]
    s_f, x_f = trace.s[fwd_pre], trace.x_n[fwd_pre, 0]
    s_b, x_b = trace.s[bwd], trace.x_n[bwd, 0]
    lo, hi = max(s_f.min(), s_b.min()), min(s_f.max(), s_b.max())
    grid = np.linspace(lo + 1e-4, hi - 1e-4, 80)
    xf = np.interp(grid, s_f[::-1], x_f[::-1])
    order = np.argsort(s_b)
    xb = np.interp(grid, s_b[order], x_b[order])
    assert np.max(np.abs(xf - xb)) < 0.03 * np.ptp(trace.x_n[idx, 0])


@criterion(5, 10.0, "surface suite: bases, normals, plane fit, projection")
def test_criterion_5_surface_suite():
    from dmpsteer.surface import basis_row, clamped_uniform_knots

    # partition of unity
    for degree, n_ctrl in ((2, 6), (3, 8)):
        knots = clamped_uniform_knots(n_ctrl, degree).tolist()
        for t in np.linspace(0, 1, 64):
            assert abs(basis_row(knots, degree, n_ctrl, float(t)).sum() - 1.0) < 1e-12

    # eval vs the naive double sum
    surf = make_wavy_patch(seed=21)
    for u in np.linspace(0, 1, 12):
        for v in np.linspace(0, 1, 12):
            assert np.max(np.abs(surf.eval(float(u), float(v)) - naive_eval(surf, float(u), float(v)))) < 1e-12

    # normals against finite differences
    h = 1e-6
    for u, v in ((0.25, 0.4), (0.6, 0.7), (0.85, 0.2)):
        n = surf.normal(u, v)
        tu = surf.eval(u + h, v) - surf.eval(u - h, v)
        tv = surf.eval(u, v + h) - surf.eval(u, v - h)
        assert abs(n @ (tu / np.linalg.norm(tu))) < 1e-5
        assert abs(n @ (tv / np.linalg.norm(tv))) < 1e-5

    # plane fit: exact on planar nets
    grid = np.zeros((5, 4, 3))
    for i, x in enumerate(np.linspace(0, 0.4, 5)):
        for j, y in enumerate(np.linspace(0, 0.3, 4)):
            grid[i, j] = (x, y, 0.3)
    fit = best_fit_plane(grid)
    assert np.linalg.norm(fit.w) < 1e-6 and fit.objective < 1e-12
    assert fit.d == pytest.approx(0.3, abs=1e-9)

    # known rotation recovered within 1e-4 rad
    R = rotation_from_exp(np.array([math.radians(20), 0, 0]))
    rot_grid = np.einsum("ab,ijb->ija", R, grid)
    fit_r = best_fit_plane(rot_grid)
    n_true = R @ np.array([0.0, 0.0, 1.0])
    assert math.acos(min(abs(fit_r.normal @ n_true), 1.0)) < 1e-4

    # Nelder-Mead objective not worse than the SVD oracle on a curved net
    pts = surf.control_points.reshape(-1, 3)
    c = pts.mean(axis=0)
    n_svd = np.linalg.svd(pts - c)[2][2]
    svd_obj = float(np.sum(((n_svd @ c) - pts @ n_svd) ** 2))
    assert best_fit_plane(surf).objective <= svd_obj + 1e-8

    # projection idempotence
    for u, v in ((0.3, 0.7), (0.5, 0.5), (0.75, 0.2)):
        res = project_to_surface(surf, surf.eval(u, v))
        assert abs(res.u - u) < 1e-6 and abs(res.v - v) < 1e-6


@criterion(6, 5.0, "transition suite: corrected handoff, dropped channels")
def test_criterion_6_transitions():
    from dmpsteer.plan import transition
    from test_plan import free_segment, hybrid_segment

    surf = make_plane()
    touch_uv = (0.4, 0.5)
    p_touch = surf.eval(*touch_uv)
    approach = free_segment("approach", p_touch + [0, 0, 0.1], p_touch, T=1.0)
    draw = hybrid_segment("draw", touch_uv, (0.8, 0.5))

    # corrected free -> surface handoff lands within 1e-4 m
    corrected_end = p_touch + np.array([0.005, 0.0, 0.0])
    res = transition(corrected_end, approach, draw, {"plate": surf})
    landed = surf.eval(res.x0[0], res.x0[1])
    assert np.linalg.norm(landed - corrected_end) < 1e-4

    # force corrections dropped across non-continued transitions
    assert res.x0[2] == draw.model.forward[2].x0
    recede = free_segment("recede", surf.eval(0.8, 0.5), surf.eval(0.8, 0.5) + [0, 0, 0.1], T=1.0)
    res2 = transition(np.array([0.8, 0.5, 9.0]), draw, recede, {"plate": surf})
    np.testing.assert_allclose(res2.x0, surf.eval(0.8, 0.5), atol=1e-12)
    assert "f_n" in res2.dropped_channels

    # zero-correction transitions identical to nominal
    nominal_end = np.array([c.g for c in approach.model.forward])
    res3 = transition(nominal_end, approach, recede, {"plate": surf})
    np.testing.assert_array_equal(res3.x0, nominal_end)


@criterion(7, 60.0, "task re-enactment: insertion, polishing, layup")
def test_criterion_7_scenario_reenactment():
    from dmpsteer.tasks import insertion_scenario, layup_scenario, polishing_scenario

    # task 1: nominal fails the two offset placements, corrective fixes all
    ins = insertion_scenario()
    nominal = run(ins)
    assert nominal.outcome.details["place_1"]["ok"]
    assert not nominal.outcome.details["place_2"]["ok"]
    assert not nominal.outcome.details["place_3"]["ok"]
    corrected = run(ins, user=ins.scripted_user("corrective"))
    assert corrected.outcome.success

    # task 2: defect cleared only with the scripted force correction
    pol = polishing_scenario()
    nominal = run(pol)
    assert not nominal.outcome.success
    corrected = run(pol, user=pol.scripted_user("corrective"))
    assert corrected.outcome.success

    # task 3: crease flagged nominally, cleared by backtrack-and-repass
    lay = layup_scenario()
    nominal = run(lay)
    assert nominal.outcome.details["crease"]
    corrected = run(lay, user=lay.scripted_user("corrective"))
    assert corrected.outcome.success
    assert not corrected.outcome.details["crease"]
    # the fix used gamma > 1 backtracking: a negative tau appears in the trace
    assert min(t for t in corrected.trace.tau if t is not None) < 0


@criterion(8, 5.0, "input-time metric vs hand integration; replay closure")
def test_criterion_8_metrics_and_replay():
    dt = 1e-3
    builder = TraceBuilder(
        {"schema": "trace/1", "dt": dt, "device_range_m": 0.05, "segments": {}}
    )
    # 3 s idle, 2 s displaced 10 mm, 1 s idle: t_input = 2.0 exactly
    rows = [[0.0] * 3] * 3000 + [[0.2, 0.0, 0.0]] * 2000 + [[0.0] * 3] * 1000
    for i, u in enumerate(rows):
        builder.append(
            t=i * dt, seg="s", s=1.0, tau=1.0, dir="f", hold=0,
            xn=[0.0] * 3, dy=[0.0] * 3, xc=[0.0] * 3, u=list(u),
            pos=[0.0] * 3, q=[1, 0, 0, 0], uv=None, f=0.0, contact=0, sat=0,
        )
    trace = builder.finish(True, "plan_exhausted")
    assert compute_input_time(trace, "corrective", d=0.005) == pytest.approx(2.0, abs=dt / 2)
    # motion-based with v_alpha = 0.01 m/s: two step changes = two moving ticks
    assert compute_input_time(trace, "motion_based", v_alpha=0.01) == pytest.approx(
        2 * dt, abs=dt / 2
    )

    # replay closure is bit-exact
    sc = mini_scenario()
    user = ScriptedUser(
        [ScriptEntry(start={"time_gte": 0.2}, stop={"time_gte": 1.1}, u=[0.6, -0.4, 0.2])]
    )
    rec = run(sc, user=user)
    rep = run(sc, user=ReplayUser(extract_inputs(rec.trace)))
    assert traces_equal(rec.trace, rep.trace)
