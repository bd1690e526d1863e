"""Deterministic scripted operators for headless runs and tests.

A script is an ordered list of entries; each arms on a start condition
(time, or segment + normalized-progress window, optionally gated on the
execution direction or on an earlier entry having finished), emits a fixed
device deflection while active (optionally ramped in), and disarms on a
stop condition.  Active entries sum and the result clamps to [-1, 1]^3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TickContext:
    """What a user model may observe each tick (all derived from the trace)."""

    tick: int
    t: float
    segment_id: str
    segment_index: int
    progress: float  # 0 at segment start, 1 at phase exhaustion
    direction: str
    force_normal: float
    uv: tuple | None


def _match_start(cond: dict, ctx: TickContext) -> bool:
    if "predicate" in cond:
        return bool(cond["predicate"](ctx))
    if "time_gte" in cond and ctx.t < cond["time_gte"]:
        return False
    if "segment" in cond and ctx.segment_id != cond["segment"]:
        return False
    if "phase_gte" in cond and ctx.progress < cond["phase_gte"]:
        return False
    if "phase_lte" in cond and ctx.progress > cond["phase_lte"]:
        return False
    if "direction" in cond and ctx.direction != cond["direction"]:
        return False
    return True


def _match_stop(cond: dict, ctx: TickContext, started_at: float, start_segment: str) -> bool:
    if "predicate" in cond:
        return bool(cond["predicate"](ctx))
    if cond.get("segment_end") and ctx.segment_id != start_segment:
        return True
    if "elapsed" in cond and ctx.t - started_at >= cond["elapsed"]:
        return True
    if "time_gte" in cond and ctx.t >= cond["time_gte"]:
        return True
    if "phase_lte" in cond and ctx.segment_id == start_segment and ctx.progress <= cond["phase_lte"]:
        return True
    if "phase_gte" in cond and ctx.segment_id == start_segment and ctx.progress >= cond["phase_gte"]:
        return True
    # leaving the segment always disarms segment-scoped entries
    if "segment" in cond and ctx.segment_id != cond["segment"]:
        return True
    return False


@dataclass
class ScriptEntry:
    start: dict
    stop: dict
    u: np.ndarray
    ramp_s: float = 0.0
    once: bool = True
    after: int | None = None  # index of an entry that must have completed

    def __post_init__(self):
        self.u = np.clip(np.asarray(self.u, dtype=float), -1.0, 1.0)
        if self.u.shape != (3,):
            raise ValueError("script entry u must be a 3-vector")

    @classmethod
    def from_doc(cls, doc: dict) -> "ScriptEntry":
        return cls(
            start=dict(doc["start"]),
            stop=dict(doc.get("stop", {"segment_end": True})),
            u=np.array(doc["u"], dtype=float),
            ramp_s=float(doc.get("ramp_s", 0.0)),
            once=bool(doc.get("once", True)),
            after=doc.get("after"),
        )

    def as_doc(self) -> dict:
        doc = {
            "start": dict(self.start),
            "stop": dict(self.stop),
            "u": [float(v) for v in self.u],
        }
        if self.ramp_s:
            doc["ramp_s"] = self.ramp_s
        if not self.once:
            doc["once"] = False
        if self.after is not None:
            doc["after"] = self.after
        return doc


@dataclass
class _EntryState:
    phase: str = "idle"  # idle | active | done
    started_at: float = 0.0
    start_segment: str = ""


class ScriptedUser:
    """Callable user model: ctx -> device deflection in [-1, 1]^3."""

    def __init__(self, entries: list[ScriptEntry]):
        self.entries = list(entries)
        self._states = [_EntryState() for _ in self.entries]

    def reset(self):
        self._states = [_EntryState() for _ in self.entries]

    def __call__(self, ctx: TickContext) -> np.ndarray:
        out = np.zeros(3)
        for entry, state in zip(self.entries, self._states):
            if state.phase == "done":
                continue
            if state.phase == "idle":
                if entry.after is not None and self._states[entry.after].phase != "done":
                    continue
                if _match_start(entry.start, ctx):
                    state.phase = "active"
                    state.started_at = ctx.t
                    state.start_segment = ctx.segment_id
            if state.phase == "active":
                if _match_stop(entry.stop, ctx, state.started_at, state.start_segment):
                    state.phase = "done" if entry.once else "idle"
                    continue
                scale = 1.0
                if entry.ramp_s > 0:
                    scale = min(1.0, (ctx.t - state.started_at) / entry.ramp_s)
                out = out + scale * entry.u
        return np.clip(out, -1.0, 1.0)


def null_user(_ctx: TickContext) -> np.ndarray:
    return np.zeros(3)


class ReplayUser:
    """Feeds back the device inputs extracted from a recorded trace."""

    def __init__(self, inputs: np.ndarray):
        self.inputs = np.asarray(inputs, dtype=float)

    def __call__(self, ctx: TickContext) -> np.ndarray:
        if ctx.tick < len(self.inputs):
            return self.inputs[ctx.tick]
        return np.zeros(3)
