import numpy as np
import pytest

from dmpsteer.channels import FREE_SPACE_CHANNELS, HYBRID_CHANNELS
from dmpsteer.correction import CorrectionScaling
from dmpsteer.demos import demo_from_columns, min_jerk, trapezoid, waypoint_demo
from dmpsteer.dmp import fit_lwr
from dmpsteer.plan import FREE_SPACE, HYBRID_SURFACE, OrientationPolicy, SegmentSpec
from dmpsteer.scenario import Scenario
from dmpsteer.surface import BSplineSurface, clamped_uniform_knots


def make_plane(size=0.4, z=0.0, n=4):
    xs = np.linspace(0.0, size, n)
    P = np.zeros((n, n, 3))
    for i, x in enumerate(xs):
        for j, y in enumerate(xs):
            P[i, j] = (x, y, z)
    return BSplineSurface((2, 2), clamped_uniform_knots(n, 2), clamped_uniform_knots(n, 2), P)


def mini_scenario(s_bar_free=0.005, s_bar_hybrid=(0.03, 0.03, 3.0), gamma=2.0, dt=4e-3):
    """Small two-segment scenario: approach a plane, then draw under force."""
    surf = make_plane()
    touch_uv = (0.25, 0.5)
    touch = surf.eval(*touch_uv)
    dt_demo = dt
    approach_demo = waypoint_demo(
        FREE_SPACE_CHANNELS,
        np.array([touch + [0, 0, 0.08], touch + [0, 0, 0.03], touch + [0, 0, 0.002]]),
        T=1.2,
        dt=dt_demo,
    )
    approach = SegmentSpec(
        "approach",
        FREE_SPACE,
        fit_lwr(approach_demo, n_bases=25),
        CorrectionScaling(FREE_SPACE_CHANNELS, np.full(3, s_bar_free)),
        gamma=gamma,
        approach_surface_id="plate",
        approach_uv=touch_uv,
    )
    T_draw = 1.6
    draw_demo = demo_from_columns(
        HYBRID_CHANNELS,
        [
            min_jerk(touch_uv[0], 0.75, T_draw, dt_demo),
            np.full(int(round(T_draw / dt_demo)) + 1, touch_uv[1]),
            trapezoid(5.0, T_draw, dt_demo, rise_frac=0.25),
        ],
        dt_demo,
    )
    draw = SegmentSpec(
        "draw",
        HYBRID_SURFACE,
        fit_lwr(draw_demo, n_bases=30),
        CorrectionScaling(HYBRID_CHANNELS, np.array(s_bar_hybrid)),
        gamma=gamma,
        surface_id="plate",
        orientation=OrientationPolicy("surface_normal_motion_aligned"),
    )
    return Scenario(
        name="mini",
        dt=dt,
        segments=[approach, draw],
        surfaces={"plate": surf},
        success={},
    )


@pytest.fixture(scope="session")
def mini():
    return mini_scenario()


@pytest.fixture(scope="session")
def insertion_sc():
    from dmpsteer.tasks import insertion_scenario

    return insertion_scenario()


@pytest.fixture(scope="session")
def layup_sc():
    from dmpsteer.tasks import layup_scenario

    return layup_scenario()


@pytest.fixture(scope="session")
def polishing_sc():
    from dmpsteer.tasks import polishing_scenario

    return polishing_scenario()


@pytest.fixture(scope="session")
def insertion_corrective_result(insertion_sc):
    from dmpsteer.session import run

    return run(insertion_sc, user=insertion_sc.scripted_user("corrective"))


@pytest.fixture(scope="session")
def layup_corrective_result(layup_sc):
    from dmpsteer.session import run

    return run(layup_sc, user=layup_sc.scripted_user("corrective"))
