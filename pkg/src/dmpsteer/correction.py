"""Operator corrections: input filtering, arbitration, rate modulation, safety.

Bounded device deflections drive a critically damped second-order filter
per correctable channel,

    ddy + b_c * dy + k_c * y = u,        b_c = 2 sqrt(k_c)

whose raw output (steady state u / k_c for a sustained deflection) is
linearly rescaled so a full deflection reaches the per-channel scaling
s_bar.  The scaled correction adds onto the nominal state (x = x_n + dy),
confined to the correctable subspace.  Deflection direction against the
nominal motion slows or reverses execution through the tau heuristic:

    tau = (1 + gamma * (v_n . f_d))^-1   when v_n . f_d <= 0, else 1

where sign(tau) selects the forward or backward primitive (debounced), and
the singular point gamma * (v_n . f_d) = -1 holds the phase.  Commands are
finally saturated so hybrid segments stay on the surface and approach or
depart segments never command penetration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet, StateVector

TAU_MIN_DEFAULT = 0.1
TAU_MAX_DEFAULT = 1e3
DEBOUNCE_TICKS_DEFAULT = 3
INPUT_DEADZONE_DEFAULT = 0.05
STANDOFF_BAND_DEFAULT = 0.010  # m
VELOCITY_EPS = 1e-9


# ---------------------------------------------------------------------------
# operator input


@dataclass
class UserInput:
    """One ingested device sample; entries clamped to [-1, 1] on construction."""

    u: np.ndarray
    timestamp: float = 0.0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        self.u = np.clip(np.asarray(self.u, dtype=float), -1.0, 1.0)
        if self.u.shape != (3,):
            raise ValueError("device input must be a 3-vector")


@dataclass(frozen=True)
class InputFrame:
    """Static map from device axes to channel-space inputs (rows per channel)."""

    matrix: np.ndarray  # (n_channels, 3)
    labels: tuple[str, ...]

    def map(self, u_device: np.ndarray) -> np.ndarray:
        return np.clip(self.matrix @ u_device, -1.0, 1.0)


def free_space_input_frame(channels: ChannelSet, device_to_world: np.ndarray | None = None) -> InputFrame:
    R = np.eye(3) if device_to_world is None else np.asarray(device_to_world, dtype=float)
    return InputFrame(R.T.copy(), ("x", "y", "z"))


def hybrid_input_frame(channels: ChannelSet, plane_rotation: np.ndarray, press_sign: float = -1.0) -> InputFrame:
    """Device axes onto (t_u, t_v, press) of the surface's closest-fit plane.

    press_sign=-1: deflecting the device against the plane normal commands
    more force.
    """
    R = np.asarray(plane_rotation, dtype=float)  # columns t_u, t_v, n
    M = np.vstack([R[:, 0], R[:, 1], press_sign * R[:, 2]])
    return InputFrame(M, ("u", "v", "f_n"))


# ---------------------------------------------------------------------------
# correction dynamical system


@dataclass
class CorrectionState:
    """Raw filter state per correctable channel (steady state 1/k_c at u=1)."""

    y: np.ndarray
    yd: np.ndarray
    k_c: float
    b_c: float = field(init=False)

    def __post_init__(self):
        if self.k_c <= 0:
            raise ValueError("k_c must be > 0")
        self.b_c = 2.0 * math.sqrt(self.k_c)  # critically damped
        self.y = np.asarray(self.y, dtype=float)
        self.yd = np.asarray(self.yd, dtype=float)

    @classmethod
    def zero(cls, n_channels: int, k_c: float) -> "CorrectionState":
        return cls(np.zeros(n_channels), np.zeros(n_channels), k_c)


def step_correction(state: CorrectionState, u_channels: np.ndarray, dt: float) -> CorrectionState:
    """One semi-implicit Euler step of the correction filter."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    u = np.clip(np.asarray(u_channels, dtype=float), -1.0, 1.0)
    yd = state.yd + dt * (u - state.b_c * state.yd - state.k_c * state.y)
    y = state.y + dt * yd
    out = CorrectionState.__new__(CorrectionState)
    out.y = y
    out.yd = yd
    out.k_c = state.k_c
    out.b_c = state.b_c
    return out


@dataclass
class CorrectionScaling:
    """Per-channel maximum correction magnitude; s_bar = 0 excludes a channel."""

    channels: ChannelSet
    s_bar: np.ndarray

    def __post_init__(self):
        self.s_bar = np.asarray(self.s_bar, dtype=float)
        if self.s_bar.shape != (len(self.channels),):
            raise ValueError("scaling length does not match channel set")
        if np.any(self.s_bar < 0):
            raise ValueError("scaling must be >= 0")

    @property
    def subspace_mask(self) -> np.ndarray:
        return self.s_bar > 0.0

    def scaled(self, state: CorrectionState) -> np.ndarray:
        """Scaled correction; exactly zero wherever s_bar is zero."""
        return self.s_bar * (state.k_c * state.y)


def arbitrate(x_n: StateVector, delta: np.ndarray) -> StateVector:
    """Commanded state = nominal state + correction, channel-wise."""
    return x_n.add(delta)


# ---------------------------------------------------------------------------
# execution-rate heuristic


@dataclass(frozen=True)
class RateLimits:
    tau_min: float = TAU_MIN_DEFAULT
    tau_max: float = TAU_MAX_DEFAULT
    debounce_ticks: int = DEBOUNCE_TICKS_DEFAULT


@dataclass
class RateState:
    tau: float
    gamma: float
    direction: str
    v_n: np.ndarray
    f_d: np.ndarray
    hold: bool = False


def rate_from_opposition(dot: float, gamma: float, limits: RateLimits = RateLimits()):
    """Signed time constant from v_n . f_d, or None at the phase-hold singularity."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if dot > 0:
        return 1.0
    rate = 1.0 + gamma * dot  # signed phase-rate multiplier, 1/tau
    if abs(rate) < 1.0 / limits.tau_max:
        return None  # singular: treat as hold
    tau = 1.0 / rate
    sign = 1.0 if tau > 0 else -1.0
    return sign * min(max(abs(tau), limits.tau_min), limits.tau_max)


class DirectionArbiter:
    """Debounces forward/backward switches: a flip must persist N ticks."""

    def __init__(self, limits: RateLimits = RateLimits()):
        self.limits = limits
        self.direction = "forward"
        self._pending = 0

    def update(self, desired: str) -> tuple[str, bool]:
        """Returns (direction, committed_now). Holds while a flip is pending."""
        if desired == self.direction:
            self._pending = 0
            return self.direction, False
        self._pending += 1
        if self._pending >= self.limits.debounce_ticks:
            self.direction = desired
            self._pending = 0
            return self.direction, True
        return self.direction, False

    def reset(self, direction: str = "forward"):
        self.direction = direction
        self._pending = 0


def normalized_direction(vec: np.ndarray, deadzone: float = INPUT_DEADZONE_DEFAULT) -> np.ndarray:
    """Unit-capped direction with a deadzone; zero vector below the deadzone.

    Magnitudes below one are meaningful (partial deflection) and preserved.
    """
    vec = np.asarray(vec, dtype=float)
    norm = float(np.linalg.norm(vec))
    if norm <= deadzone:
        return np.zeros_like(vec)
    return vec / norm if norm > 1.0 else vec


def unit_direction(vec: np.ndarray, eps: float = VELOCITY_EPS) -> np.ndarray:
    """Fully normalized direction; zero vector below eps."""
    vec = np.asarray(vec, dtype=float)
    norm = float(np.linalg.norm(vec))
    if norm <= eps:
        return np.zeros_like(vec)
    return vec / norm


def rate_heuristic(
    v_n: np.ndarray,
    f_d: np.ndarray,
    gamma: float,
    arbiter: DirectionArbiter,
    limits: RateLimits = RateLimits(),
) -> RateState:
    """Full heuristic: tau from the opposition dot product, debounced direction.

    v_n is the nominal behavior's forward motion direction (unit or zero),
    f_d the correction direction (unit-capped).  While a direction flip is
    pending debounce, the phase holds.
    """
    v_n = np.asarray(v_n, dtype=float)
    f_d = np.asarray(f_d, dtype=float)
    dot = float(v_n @ f_d)
    tau = rate_from_opposition(dot, gamma, limits)
    if tau is None:
        return RateState(math.inf, gamma, arbiter.direction, v_n, f_d, hold=True)
    desired = "forward" if tau > 0 else "backward"
    direction, _ = arbiter.update(desired)
    if direction != desired:
        # flip still pending: hold rather than integrate against the sign
        return RateState(math.inf, gamma, direction, v_n, f_d, hold=True)
    return RateState(tau, gamma, direction, v_n, f_d, hold=False)


# ---------------------------------------------------------------------------
# saturation / validation


def smoothstep01(x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return x * x * (3.0 - 2.0 * x)


@dataclass
class SaturationReport:
    edge_clamped: bool = False
    normal_diminished: bool = False

    @property
    def any(self) -> bool:
        return self.edge_clamped or self.normal_diminished


@dataclass(frozen=True)
class SurfaceContext:
    """What saturation needs to know about the active segment's geometry."""

    mode: str  # "free_space" | "hybrid_surface" | "approach_depart"
    edge_margin: float = 0.005
    anchor_point: np.ndarray | None = None  # approach/depart: surface point
    anchor_normal: np.ndarray | None = None  # unit, pointing to the tool side
    standoff_band: float = STANDOFF_BAND_DEFAULT


def saturate_validate(
    x_n: np.ndarray,
    delta: np.ndarray,
    channels: ChannelSet,
    ctx: SurfaceContext,
) -> tuple[np.ndarray, np.ndarray, SaturationReport]:
    """Validated command plus the effective (post-saturation) correction.

    The returned triple always satisfies x_cmd == x_n + delta_eff exactly.
    """
    report = SaturationReport()
    x_cmd = x_n + delta

    if ctx.mode == "hybrid_surface":
        lo, hi = ctx.edge_margin, 1.0 - ctx.edge_margin
        for i, kind in enumerate(channels.kinds):
            if kind == "surface_param":
                clamped = min(max(x_cmd[i], lo), hi)
                if clamped != x_cmd[i]:
                    report.edge_clamped = True
                    x_cmd[i] = clamped
    elif ctx.mode == "approach_depart" and ctx.anchor_point is not None:
        n = ctx.anchor_normal
        clearance = float((x_n - ctx.anchor_point) @ n)
        d_n = float(delta @ n)  # negative = toward the surface
        if d_n < 0.0:
            toward = -d_n
            allowed = toward * smoothstep01(clearance / ctx.standoff_band)
            allowed = min(allowed, max(clearance, 0.0))
            if allowed < toward:
                report.normal_diminished = True
                x_cmd = x_cmd + (toward - allowed) * n

    delta_eff = x_cmd - x_n
    return x_cmd, delta_eff, report
