"""Per-channel dynamic movement primitives with reversible execution.

Each state channel is encoded by a second-order attractor driven by a
phase-dependent forcing term:

    tau * ds = -a * s / T
    tau * dx = z
    tau * dz = alpha * (beta * (g - x) - z) + f(s)

with f(s) a normalized weighted sum of Gaussian bases over the phase s,
which decays 1 -> exp(-a) over the nominal duration T at tau = 1.  Weights
come from per-basis locally weighted regression against a demonstration.

Every segment model carries a forward and a backward variant (the backward
one fitted on the time-reversed demonstration) so execution can retrace a
segment when the time constant flips sign.  Both variants share a single
forward phase s; the backward forcing is evaluated at the mirrored phase
exp(-a)/s, which is exact for the shared exponential canonical system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet

DEFAULT_ALPHA = 25.0
DEFAULT_CANONICAL_A = 1.0
DEFAULT_N_BASES = 20
LWR_RIDGE = 1e-8
FORCING_DEN_GUARD = 1e-10
TAU_FLOOR = 1e-6
PHASE_END_FACTOR = 0.999


class PhaseFrozenError(RuntimeError):
    """Raised when |tau| is below the integration guard; caller holds state."""


class RolloutError(RuntimeError):
    """Rollout did not reach the phase threshold; carries the partial result."""

    def __init__(self, msg: str, partial: "Rollout"):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class CanonicalSystem:
    """Exponential phase generator: s = exp(-a * t / (tau * T))."""

    a: float = DEFAULT_CANONICAL_A
    T: float = 1.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("canonical decay constant must be > 0")
        if self.T <= 0:
            raise ValueError("nominal duration must be > 0")

    @property
    def s_end(self) -> float:
        return math.exp(-self.a) * PHASE_END_FACTOR

    def advance(self, s: float, tau: float, dt: float) -> float:
        """One exact phase step; tau < 0 rewinds, capped at s = 1."""
        s_next = s * math.exp(-self.a * dt / (tau * self.T))
        return min(s_next, 1.0)


@dataclass(frozen=True)
class BasisSet:
    """Gaussian bases over phase; centers follow the exponential time warp."""

    centers: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float))
        object.__setattr__(self, "widths", np.asarray(self.widths, dtype=float))
        if self.centers.size < 2:
            raise ValueError("need at least 2 basis functions")
        d = np.diff(self.centers)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("basis centers must be strictly ordered")
        if np.any(self.centers <= 0) or np.any(self.centers > 1):
            raise ValueError("basis centers must lie in (0, 1]")
        if np.any(self.widths <= 0):
            raise ValueError("basis widths must be > 0")

    @classmethod
    def for_canonical(cls, canonical: CanonicalSystem, n: int = DEFAULT_N_BASES) -> "BasisSet":
        """Centers equispaced in time then warped through the phase decay."""
        t = np.linspace(0.0, canonical.T, n)
        centers = np.exp(-canonical.a * t / canonical.T)
        gaps = np.diff(centers)
        widths = np.empty(n)
        widths[:-1] = 0.5 / gaps**2
        widths[-1] = widths[-2]
        return cls(centers, widths)

    def __len__(self) -> int:
        return int(self.centers.size)

    def activations(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.exp(-self.widths * (s[..., None] - self.centers) ** 2)


def forcing_value(weights: np.ndarray, basis: BasisSet, s: float) -> tuple[float, bool]:
    """Normalized forcing at phase s; returns (value, degenerate_basis_flag)."""
    psi = basis.activations(s)
    den = float(psi.sum())
    if den < FORCING_DEN_GUARD:
        return 0.0, True
    return float(psi @ np.asarray(weights)) / den, False


@dataclass
class DmpChannel:
    """One state channel's attractor parameters and forcing weights."""

    name: str
    weights: np.ndarray
    g: float
    x0: float
    z0: float = 0.0
    alpha: float = DEFAULT_ALPHA
    beta: float = field(init=False)
    degenerate_goal: bool = False

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        # critically damped second-order attractor
        self.beta = self.alpha / 4.0
        self.weights = np.asarray(self.weights, dtype=float)


@dataclass
class IntegratorState:
    """Explicit integration state: forward phase plus per-channel (x, z).

    z is the active system's scaled rate, z = |tau| * dx/dt, so the same z
    value reproduces the same path over phase for any constant tau.
    """

    s: float
    x: np.ndarray
    z: np.ndarray

    def copy(self) -> "IntegratorState":
        return IntegratorState(self.s, self.x.copy(), self.z.copy())


class DmpSegmentModel:
    """Fitted forward + backward primitives for every channel of a segment."""

    def __init__(
        self,
        channels: ChannelSet,
        forward: list[DmpChannel],
        backward: list[DmpChannel],
        canonical: CanonicalSystem,
        basis: BasisSet,
    ):
        if [c.name for c in forward] != list(channels.names):
            raise ValueError("forward channel list does not match channel set")
        if [c.name for c in backward] != list(channels.names):
            raise ValueError("backward channel list does not match channel set")
        self.channels = channels
        self.forward = forward
        self.backward = backward
        self.canonical = canonical
        self.basis = basis
        self._cache = {
            "forward": self._pack(forward),
            "backward": self._pack(backward),
        }
        self._mirror = math.exp(-canonical.a)

    @staticmethod
    def _pack(chans: list[DmpChannel]):
        return (
            np.stack([c.weights for c in chans]),
            np.array([c.g for c in chans]),
            np.array([c.x0 for c in chans]),
            np.array([c.z0 for c in chans]),
            np.array([c.alpha for c in chans]),
            np.array([c.beta for c in chans]),
        )

    @property
    def T(self) -> float:
        return self.canonical.T

    @property
    def s_end(self) -> float:
        return self.canonical.s_end

    def initial_state(self) -> IntegratorState:
        _, _, x0, z0, _, _ = self._cache["forward"]
        return IntegratorState(1.0, x0.copy(), z0.copy())

    def nominal_rates(self, state: IntegratorState, tau: float) -> np.ndarray:
        """Physical channel rates dx/dt for the current state."""
        return state.z / abs(tau)

    def step(
        self,
        state: IntegratorState,
        tau: float,
        dt: float,
        direction: str = "forward",
    ) -> IntegratorState:
        """One semi-implicit Euler step; direction must match sign(tau)."""
        if dt <= 0:
            raise ValueError("dt must be > 0")
        if abs(tau) < TAU_FLOOR:
            raise PhaseFrozenError("phase frozen: |tau| below guard; hold state instead")
        if direction == "forward":
            if tau < 0:
                raise ValueError("forward stepping requires tau > 0")
            s_eval = state.s
        elif direction == "backward":
            if tau > 0:
                raise ValueError("backward stepping requires tau < 0")
            s_eval = self._mirror / state.s
        else:
            raise ValueError(f"unknown direction {direction!r}")

        W, g, _, _, alpha, beta = self._cache[direction]
        psi = self.basis.activations(s_eval)
        den = float(psi.sum())
        f = (W @ psi) / den if den >= FORCING_DEN_GUARD else np.zeros(len(self.channels))

        tau_m = abs(tau)
        z = state.z + dt * (alpha * (beta * (g - state.x) - state.z) + f) / tau_m
        x = state.x + dt * z / tau_m
        s = self.canonical.advance(state.s, tau, dt)
        return IntegratorState(s, x, z)


@dataclass
class Demonstration:
    """Uniformly sampled state trajectory used for fitting."""

    channels: ChannelSet
    values: np.ndarray
    dt: float

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] < 3:
            raise ValueError("demonstration needs at least 3 samples")
        if self.values.shape[1] != len(self.channels):
            raise ValueError("demonstration width does not match channel set")
        if self.dt <= 0:
            raise ValueError("demonstration dt must be > 0")

    @property
    def duration(self) -> float:
        return (self.values.shape[0] - 1) * self.dt

    def reversed(self) -> "Demonstration":
        return Demonstration(self.channels, self.values[::-1].copy(), self.dt)


def _fit_channels(
    demo: Demonstration,
    canonical: CanonicalSystem,
    basis: BasisSet,
    alpha: float,
) -> list[DmpChannel]:
    t = np.arange(demo.values.shape[0]) * demo.dt
    s_t = np.exp(-canonical.a * t / canonical.T)
    psi = basis.activations(s_t)  # (n_samples, n_bases)
    psi_col_sums = psi.sum(axis=0)

    beta = alpha / 4.0
    out = []
    for j, name in enumerate(demo.channels.names):
        x = demo.values[:, j]
        xd = np.gradient(x, demo.dt, edge_order=2)
        xdd = np.gradient(xd, demo.dt, edge_order=2)
        g, x0 = float(x[-1]), float(x[0])
        # Eq. of motion rearranged for the required forcing at tau = 1
        f_target = xdd - alpha * (beta * (g - x) - xd)
        # per-basis locally weighted least squares (order 0), ridge-guarded
        w = (psi.T @ f_target) / (psi_col_sums + LWR_RIDGE)
        rng = float(x.max() - x.min())
        out.append(
            DmpChannel(
                name=name,
                weights=w,
                g=g,
                x0=x0,
                z0=float(xd[0]),
                alpha=alpha,
                degenerate_goal=bool(abs(g - x0) < 1e-12 * max(rng, 1.0)),
            )
        )
    return out


def fit_backward(
    demo: Demonstration,
    canonical: CanonicalSystem,
    basis: BasisSet,
    alpha: float = DEFAULT_ALPHA,
) -> list[DmpChannel]:
    """Backward variant: LWR fit of the time-reversed demonstration."""
    return _fit_channels(demo.reversed(), canonical, basis, alpha)


def fit_lwr(
    demo: Demonstration,
    canonical: CanonicalSystem | None = None,
    basis: BasisSet | None = None,
    alpha: float = DEFAULT_ALPHA,
    n_bases: int = DEFAULT_N_BASES,
) -> DmpSegmentModel:
    """Fit the full segment model (forward and backward variants)."""
    if canonical is None:
        canonical = CanonicalSystem(a=DEFAULT_CANONICAL_A, T=demo.duration)
    if basis is None:
        basis = BasisSet.for_canonical(canonical, n_bases)
    forward = _fit_channels(demo, canonical, basis, alpha)
    backward = fit_backward(demo, canonical, basis, alpha)
    return DmpSegmentModel(demo.channels, forward, backward, canonical, basis)


@dataclass
class Rollout:
    t: np.ndarray
    s: np.ndarray
    x: np.ndarray  # (n_steps, n_channels)
    v: np.ndarray  # physical rates dx/dt

    def channel(self, i: int) -> np.ndarray:
        return self.x[:, i]


def rollout(
    model: DmpSegmentModel,
    tau=1.0,
    dt: float = 1e-3,
    direction: str = "forward",
    state: IntegratorState | None = None,
    max_steps: int | None = None,
) -> Rollout:
    """Integrate from the segment start until the phase threshold.

    tau may be a constant or a callable t -> tau.  Raises RolloutError with
    the partial trajectory if the phase threshold is not reached in
    max_steps.
    """
    tau_fn = tau if callable(tau) else (lambda _t, _tau=float(tau): _tau)
    if state is None:
        state = model.initial_state()
    if max_steps is None:
        tau0 = abs(tau_fn(0.0))
        max_steps = int(math.ceil(20.0 * model.T * max(tau0, 1.0) / dt))

    ts, ss, xs, vs = [], [], [], []
    t = 0.0
    for _ in range(max_steps):
        tau_t = tau_fn(t)
        ts.append(t)
        ss.append(state.s)
        xs.append(state.x.copy())
        vs.append(model.nominal_rates(state, tau_t))
        if state.s < model.s_end:
            break
        state = model.step(state, tau_t, dt, direction)
        t += dt
    else:
        partial = Rollout(np.array(ts), np.array(ss), np.array(xs), np.array(vs))
        raise RolloutError(f"phase threshold not reached in {max_steps} steps", partial)

    return Rollout(np.array(ts), np.array(ss), np.array(xs), np.array(vs))


# ---------------------------------------------------------------------------
# model document (de)serialization

MODEL_SCHEMA = "dmp-model/1"


def model_to_doc(model: DmpSegmentModel) -> dict:
    def variant(c: DmpChannel) -> dict:
        return {
            "w": [float(v) for v in c.weights],
            "g": float(c.g),
            "x0": float(c.x0),
            "z0": float(c.z0),
            "alpha": float(c.alpha),
            "beta": float(c.beta),
            "degenerate_goal": bool(c.degenerate_goal),
        }

    return {
        "schema": MODEL_SCHEMA,
        "duration": float(model.T),
        "canonical": {"a": float(model.canonical.a)},
        "basis": {
            "centers": [float(v) for v in model.basis.centers],
            "widths": [float(v) for v in model.basis.widths],
        },
        "channels": [
            {
                "name": name,
                "kind": kind,
                "forward": variant(fw),
                "backward": variant(bw),
            }
            for name, kind, fw, bw in zip(
                model.channels.names, model.channels.kinds, model.forward, model.backward
            )
        ],
    }


def model_from_doc(doc: dict) -> DmpSegmentModel:
    if doc.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"unsupported model schema {doc.get('schema')!r}")
    canonical = CanonicalSystem(a=float(doc["canonical"]["a"]), T=float(doc["duration"]))
    basis = BasisSet(doc["basis"]["centers"], doc["basis"]["widths"])
    names = tuple(c["name"] for c in doc["channels"])
    kinds = tuple(c["kind"] for c in doc["channels"])
    channels = ChannelSet(names, kinds)

    def build(entry: dict, name: str) -> DmpChannel:
        ch = DmpChannel(
            name=name,
            weights=np.array(entry["w"], dtype=float),
            g=entry["g"],
            x0=entry["x0"],
            z0=entry.get("z0", 0.0),
            alpha=entry.get("alpha", DEFAULT_ALPHA),
        )
        ch.degenerate_goal = bool(entry.get("degenerate_goal", False))
        return ch

    forward = [build(c["forward"], c["name"]) for c in doc["channels"]]
    backward = [build(c["backward"], c["name"]) for c in doc["channels"]]
    return DmpSegmentModel(channels, forward, backward, canonical, basis)
