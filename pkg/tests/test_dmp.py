import math

import numpy as np
import pytest

from dmpsteer.channels import FORCE, POSITION, ChannelSet
from dmpsteer.demos import demo_from_columns, min_jerk, trapezoid
from dmpsteer.dmp import (
    BasisSet,
    CanonicalSystem,
    Demonstration,
    DmpChannel,
    DmpSegmentModel,
    PhaseFrozenError,
    fit_backward,
    fit_lwr,
    forcing_value,
    model_from_doc,
    model_to_doc,
    rollout,
)

X1 = ChannelSet(("x",), (POSITION,))
XF = ChannelSet(("x", "f_z"), (POSITION, FORCE))


def make_attractor(x0=0.0, g=1.0, T=1.0, n_bases=10):
    """Zero-forcing point attractor, used for pure-dynamics checks."""
    canonical = CanonicalSystem(T=T)
    basis = BasisSet.for_canonical(canonical, n_bases)
    chan = DmpChannel("x", np.zeros(n_bases), g=g, x0=x0)
    chan_b = DmpChannel("x", np.zeros(n_bases), g=x0, x0=g)
    return DmpSegmentModel(X1, [chan], [chan_b], canonical, basis)


def range_of(a):
    return float(np.max(a) - np.min(a))


# ---------------------------------------------------------------------------
# forcing function


def test_forcing_zero_weights_is_zero():
    basis = BasisSet.for_canonical(CanonicalSystem(), 10)
    for s in (1.0, 0.7, 0.4):
        val, degenerate = forcing_value(np.zeros(10), basis, s)
        assert val == 0.0
        assert not degenerate


def test_forcing_constant_weights_is_that_constant():
    basis = BasisSet.for_canonical(CanonicalSystem(), 12)
    for s in (1.0, 0.8, 0.5, 0.37):
        val, _ = forcing_value(np.full(12, 7.0), basis, s)
        assert val == pytest.approx(7.0, abs=1e-12)


def test_forcing_degenerate_basis_flags_and_returns_zero():
    basis = BasisSet(centers=np.array([0.9, 1.0]), widths=np.array([1e6, 1e6]))
    val, degenerate = forcing_value(np.array([3.0, 4.0]), basis, 0.01)
    assert val == 0.0
    assert degenerate


def test_forcing_lwr_matches_batch_least_squares_oracle():
    # oracle: global least squares on the normalized basis design matrix
    canonical = CanonicalSystem(T=1.0)
    basis = BasisSet.for_canonical(canonical, 10)
    t = np.linspace(0.0, 1.0, 2000)
    s_t = np.exp(-canonical.a * t)
    f_t = np.sin(2 * np.pi * s_t)

    psi = basis.activations(s_t)
    w_lwr = (psi.T @ f_t) / (psi.sum(axis=0) + 1e-8)

    design = psi / psi.sum(axis=1, keepdims=True)
    w_ls, *_ = np.linalg.lstsq(design, f_t, rcond=None)

    val_lwr, _ = forcing_value(w_lwr, basis, 0.5)
    val_ls, _ = forcing_value(w_ls, basis, 0.5)
    # 5% of the unit target amplitude
    assert abs(val_lwr - val_ls) < 0.05


# ---------------------------------------------------------------------------
# fitting


def test_fit_constant_demo_gives_zero_weights_and_degenerate_flag():
    demo = Demonstration(X1, np.full((200, 1), 0.7), dt=1e-2)
    model = fit_lwr(demo)
    assert np.all(np.abs(model.forward[0].weights) < 1e-9)
    assert np.all(np.abs(model.backward[0].weights) < 1e-9)
    assert model.forward[0].degenerate_goal


def test_fit_rejects_too_short_demo():
    with pytest.raises(ValueError):
        Demonstration(X1, np.array([[0.0], [1.0]]), dt=1e-2)


def test_fit_min_jerk_rollout_matches_demo_within_2pct():
    # n_bases=40: the tight 1e-3 goal bound needs a dense basis at the
    # pinned width factor; the 2% fidelity bound already holds at 20
    dt = 1e-3
    demo = Demonstration(X1, min_jerk(0.0, 1.0, 1.0, dt)[:, None], dt)
    model = fit_lwr(demo, n_bases=40)
    roll = rollout(model, tau=1.0, dt=dt)
    n = min(len(roll.t), demo.values.shape[0])
    err = np.max(np.abs(roll.x[:n, 0] - demo.values[:n, 0]))
    assert err < 0.02 * range_of(demo.values)
    assert abs(roll.x[-1, 0] - 1.0) < 1e-3


def test_fit_two_channels_independently_reproduced():
    # force holds far from its goal, so the forcing term carries the full
    # alpha*beta displacement; a dense basis is needed for tight tracking
    dt = 1e-3
    demo = demo_from_columns(
        XF, [min_jerk(0.0, 0.3, 2.0, dt), trapezoid(6.0, 2.0, dt, rise_frac=0.3)], dt
    )
    model = fit_lwr(demo, n_bases=80)
    roll = rollout(model, tau=1.0, dt=dt)
    n = min(len(roll.t), demo.values.shape[0])
    for j in range(2):
        err = np.max(np.abs(roll.x[:n, j] - demo.values[:n, j]))
        assert err < 0.02 * range_of(demo.values[:, j]), demo.channels.names[j]


def test_channel_independence_weights_bit_identical():
    dt = 1e-3
    base = demo_from_columns(XF, [min_jerk(0.0, 0.3, 2.0, dt), trapezoid(6.0, 2.0, dt)], dt)
    perturbed_cols = [min_jerk(0.0, 0.3, 2.0, dt), trapezoid(9.0, 2.0, dt) + 1.0]
    perturbed = demo_from_columns(XF, perturbed_cols, dt)
    m0 = fit_lwr(base)
    m1 = fit_lwr(perturbed)
    assert np.array_equal(m0.forward[0].weights, m1.forward[0].weights)
    assert not np.array_equal(m0.forward[1].weights, m1.forward[1].weights)


# ---------------------------------------------------------------------------
# backward variant


def test_backward_constant_demo_zero_weights():
    demo = Demonstration(X1, np.full((100, 1), 0.2), dt=1e-2)
    canonical = CanonicalSystem(T=demo.duration)
    basis = BasisSet.for_canonical(canonical, 20)
    back = fit_backward(demo, canonical, basis)
    assert np.all(np.abs(back[0].weights) < 1e-9)


def test_backward_ramp_rollout_matches_reversed_demo():
    dt = 1e-3
    t = np.arange(0.0, 1.0 + dt / 2, dt)
    demo = Demonstration(X1, t[:, None].copy(), dt)
    model = fit_lwr(demo, n_bases=20)
    # run the backward system standalone: it is a forward DMP of the
    # reversed demo, so integrate the mirrored model forward
    mirrored = DmpSegmentModel(
        X1, model.backward, model.forward, model.canonical, model.basis
    )
    roll = rollout(mirrored, tau=1.0, dt=dt)
    ref = demo.values[::-1, 0]
    n = min(len(roll.t), len(ref))
    assert np.max(np.abs(roll.x[:n, 0] - ref[:n])) < 0.02 * range_of(ref)


def test_backward_sine_equals_time_mirrored_forward_rollout():
    dt = 1e-3
    t = np.arange(0.0, 1.0 + dt / 2, dt)
    demo = Demonstration(X1, np.sin(2 * np.pi * t)[:, None], dt)
    model = fit_lwr(demo, n_bases=30)
    fwd = rollout(model, tau=1.0, dt=dt)
    mirrored = DmpSegmentModel(
        X1, model.backward, model.forward, model.canonical, model.basis
    )
    bwd = rollout(mirrored, tau=1.0, dt=dt)
    n = min(len(fwd.t), len(bwd.t))
    err = np.max(np.abs(bwd.x[:n, 0] - fwd.x[:n][::-1][:n, 0]))
    assert err < 0.03 * range_of(fwd.x[:, 0])


# ---------------------------------------------------------------------------
# stepping


def test_step_equilibrium_is_fixed_point():
    model = make_attractor(x0=1.0, g=1.0)
    state = model.initial_state()
    state.x[:] = 1.0
    state.z[:] = 0.0
    nxt = model.step(state, tau=1.0, dt=1e-3)
    assert nxt.x[0] == pytest.approx(1.0, abs=0.0)
    assert nxt.z[0] == pytest.approx(0.0, abs=0.0)


def test_step_zero_forcing_converges_to_goal():
    model = make_attractor(x0=0.0, g=1.0, T=1.0)
    roll = rollout(model, tau=1.0, dt=1e-3)
    assert abs(roll.x[-1, 0] - 1.0) < 1e-3


@pytest.mark.parametrize("tau", [0.5, 2.0])
def test_temporal_invariance_phase_aligned_paths(tau):
    dt = 1e-3
    demo = Demonstration(X1, min_jerk(0.0, 1.0, 1.0, dt)[:, None], dt)
    model = fit_lwr(demo, n_bases=20)
    ref = rollout(model, tau=1.0, dt=dt)
    scaled = rollout(model, tau=tau, dt=dt)
    # wall-clock duration scales with tau
    assert scaled.t[-1] == pytest.approx(tau * ref.t[-1], rel=0.01)
    # phase-aligned paths agree
    s_grid = np.linspace(model.s_end + 1e-4, 0.999, 400)
    x_ref = np.interp(s_grid, ref.s[::-1], ref.x[::-1, 0])
    x_scaled = np.interp(s_grid, scaled.s[::-1], scaled.x[::-1, 0])
    assert np.max(np.abs(x_ref - x_scaled)) < 1e-3


def test_step_rejects_frozen_tau():
    model = make_attractor()
    with pytest.raises(PhaseFrozenError):
        model.step(model.initial_state(), tau=1e-9, dt=1e-3)


def test_step_direction_must_match_tau_sign():
    model = make_attractor()
    state = model.initial_state()
    with pytest.raises(ValueError):
        model.step(state, tau=-1.0, dt=1e-3, direction="forward")
    with pytest.raises(ValueError):
        model.step(state, tau=1.0, dt=1e-3, direction="backward")


def test_phase_strictly_decreases_forward():
    model = make_attractor()
    state = model.initial_state()
    prev = state.s
    for _ in range(500):
        state = model.step(state, tau=1.0, dt=1e-3)
        assert state.s < prev
        prev = state.s


def test_phase_rewinds_backward_and_caps_at_one():
    model = make_attractor()
    state = model.initial_state()
    for _ in range(300):
        state = model.step(state, tau=1.0, dt=1e-3)
    s_mid = state.s
    state = model.step(state, tau=-1.0, dt=1e-3, direction="backward")
    assert state.s > s_mid
    for _ in range(2000):
        state = model.step(state, tau=-1.0, dt=1e-3, direction="backward")
    assert state.s == 1.0


# ---------------------------------------------------------------------------
# rollout


def test_rollout_constant_model_stays_constant():
    demo = Demonstration(X1, np.full((300, 1), 0.5), dt=1e-2)
    model = fit_lwr(demo)
    roll = rollout(model, tau=1.0, dt=1e-3)
    assert np.max(np.abs(roll.x - 0.5)) < 1e-9


def test_rollout_step_halving_integrator_order():
    dt = 1e-4
    demo = Demonstration(X1, min_jerk(0.0, 1.0, 1.0, 1e-3)[:, None], 1e-3)
    model = fit_lwr(demo, n_bases=20)
    coarse = rollout(model, tau=1.0, dt=dt)
    fine = rollout(model, tau=1.0, dt=dt / 2)
    x_fine_on_coarse = np.interp(coarse.t, fine.t, fine.x[:, 0])
    err = np.max(np.abs(coarse.x[:, 0] - x_fine_on_coarse))
    assert err < 1e-4 * range_of(coarse.x[:, 0])


def test_rollout_nonconvergence_raises_with_partial():
    from dmpsteer.dmp import RolloutError

    model = make_attractor()
    with pytest.raises(RolloutError) as exc:
        rollout(model, tau=1.0, dt=1e-3, max_steps=10)
    assert len(exc.value.partial.t) == 10


def test_rollout_accepts_tau_schedule():
    model = make_attractor()
    roll = rollout(model, tau=lambda t: 1.0 if t < 0.5 else 2.0, dt=1e-3, max_steps=40000)
    # slower second half: longer than the tau=1 rollout, shorter than tau=2
    ref1 = rollout(model, tau=1.0, dt=1e-3)
    ref2 = rollout(model, tau=2.0, dt=1e-3)
    assert ref1.t[-1] < roll.t[-1] < ref2.t[-1]
    assert abs(roll.x[-1, 0] - 1.0) < 1e-3


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_goal_convergence_for_random_smooth_demos(seed):
    # gentle rest-to-rest behaviors, the class the system encodes in practice
    rng = np.random.default_rng(seed)
    dt = 1e-3
    from dmpsteer.demos import waypoint_demo

    g = rng.uniform(-1.0, 1.0)
    mid = g * 0.5 + rng.uniform(-0.3, 0.3, 2)
    wps = np.concatenate([[0.0], mid, [g, g]])
    demo = waypoint_demo(X1, wps[:, None], T=3.0, dt=dt)
    model = fit_lwr(demo, n_bases=80)
    roll = rollout(model, tau=1.0, dt=dt)
    rng_x = max(range_of(demo.values), 1.0)
    assert abs(roll.x[-1, 0] - model.forward[0].g) < 1e-3 * rng_x


# ---------------------------------------------------------------------------
# serialization


def test_model_doc_round_trip():
    dt = 1e-3
    demo = demo_from_columns(XF, [min_jerk(0.0, 0.3, 1.0, dt), trapezoid(6.0, 1.0, dt)], dt)
    model = fit_lwr(demo)
    doc = model_to_doc(model)
    clone = model_from_doc(doc)
    assert clone.channels == model.channels
    assert clone.T == model.T
    for a, b in zip(model.forward + model.backward, clone.forward + clone.backward):
        assert np.array_equal(a.weights, b.weights)
        assert a.g == b.g and a.x0 == b.x0 and a.z0 == b.z0
    r0 = rollout(model, tau=1.0, dt=1e-3)
    r1 = rollout(clone, tau=1.0, dt=1e-3)
    assert np.array_equal(r0.x, r1.x)


def test_model_doc_rejects_bad_schema():
    with pytest.raises(ValueError):
        model_from_doc({"schema": "nope/9"})


def test_basis_validation():
    with pytest.raises(ValueError):
        BasisSet(centers=np.array([0.5]), widths=np.array([1.0]))
    with pytest.raises(ValueError):
        BasisSet(centers=np.array([0.5, 0.5]), widths=np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        BasisSet(centers=np.array([0.5, 0.7]), widths=np.array([1.0, -1.0]))


def test_critical_damping_enforced():
    ch = DmpChannel("x", np.zeros(5), g=1.0, x0=0.0, alpha=25.0)
    assert ch.beta == pytest.approx(25.0 / 4.0)
