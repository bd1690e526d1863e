"""Session traces: one JSON record per tick, greppable and bit-exact.

The file starts with a header line (schema version, config hash, segment
channel map) followed by one record per control tick and a terminal end
marker.  Floats round-trip exactly through JSON (shortest repr), so a trace
replayed from its own recorded inputs reproduces itself bit for bit.  Every
record satisfies x_cmd = x_n + dy exactly by construction; the audit helper
re-checks that identity on load.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

TRACE_SCHEMA = "trace/1"

SAT_EDGE = 1
SAT_NORMAL = 2


class TraceVersionError(ValueError):
    """Schema version mismatch."""


@dataclass
class Trace:
    header: dict
    t: np.ndarray = field(default_factory=lambda: np.empty(0))
    segment_ids: list = field(default_factory=list)
    s: np.ndarray = field(default_factory=lambda: np.empty(0))
    tau: list = field(default_factory=list)  # float, or None while holding
    directions: list = field(default_factory=list)
    holds: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))
    x_n: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    dy: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    x_cmd: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    u: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    positions: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    quats: np.ndarray = field(default_factory=lambda: np.empty((0, 4)))
    uvs: list = field(default_factory=list)  # (u, v) tuple or None
    forces: np.ndarray = field(default_factory=lambda: np.empty(0))
    contacts: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))
    sat_flags: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    complete: bool = False
    end_reason: str = ""

    @property
    def dt(self) -> float:
        return float(self.header["dt"])

    def __len__(self) -> int:
        return len(self.t)

    def records(self):
        for i in range(len(self.t)):
            yield self.record(i)

    def record(self, i: int) -> dict:
        uv = self.uvs[i]
        return {
            "i": i,
            "t": float(self.t[i]),
            "seg": self.segment_ids[i],
            "s": float(self.s[i]),
            "tau": self.tau[i],
            "dir": self.directions[i],
            "hold": int(self.holds[i]),
            "xn": [float(v) for v in self.x_n[i]],
            "dy": [float(v) for v in self.dy[i]],
            "xc": [float(v) for v in self.x_cmd[i]],
            "u": [float(v) for v in self.u[i]],
            "pos": [float(v) for v in self.positions[i]],
            "q": [float(v) for v in self.quats[i]],
            "uv": None if uv is None else [float(uv[0]), float(uv[1])],
            "f": float(self.forces[i]),
            "contact": int(self.contacts[i]),
            "sat": int(self.sat_flags[i]),
        }

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(json.dumps(self.header, separators=(",", ":")) + "\n")
            for rec in self.records():
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
            if self.complete:
                fh.write(
                    json.dumps({"end": True, "reason": self.end_reason, "ticks": len(self)})
                    + "\n"
                )


class TraceBuilder:
    """Column-wise accumulator used by the session loop."""

    def __init__(self, header: dict):
        self.header = header
        self.rows = {k: [] for k in (
            "t", "seg", "s", "tau", "dir", "hold", "xn", "dy", "xc", "u",
            "pos", "q", "uv", "f", "contact", "sat",
        )}

    def append(self, **kw):
        rows = self.rows
        for k, v in kw.items():
            rows[k].append(v)

    def finish(self, complete: bool, reason: str = "") -> Trace:
        r = self.rows
        n = len(r["t"])
        return Trace(
            header=self.header,
            t=np.array(r["t"]),
            segment_ids=list(r["seg"]),
            s=np.array(r["s"]),
            tau=list(r["tau"]),
            directions=list(r["dir"]),
            holds=np.array(r["hold"], dtype=bool) if n else np.empty(0, dtype=bool),
            x_n=np.array(r["xn"]) if n else np.empty((0, 3)),
            dy=np.array(r["dy"]) if n else np.empty((0, 3)),
            x_cmd=np.array(r["xc"]) if n else np.empty((0, 3)),
            u=np.array(r["u"]) if n else np.empty((0, 3)),
            positions=np.array(r["pos"]) if n else np.empty((0, 3)),
            quats=np.array(r["q"]) if n else np.empty((0, 4)),
            uvs=list(r["uv"]),
            forces=np.array(r["f"]),
            contacts=np.array(r["contact"], dtype=bool) if n else np.empty(0, dtype=bool),
            sat_flags=np.array(r["sat"], dtype=int) if n else np.empty(0, dtype=int),
            complete=complete,
            end_reason=reason,
        )


def load_trace(path) -> Trace:
    """Parse a trace file; a torn or missing end marker yields complete=False."""
    with open(path) as fh:
        header_line = fh.readline()
        if not header_line:
            raise ValueError("empty trace file")
        header = json.loads(header_line)
        if header.get("schema") != TRACE_SCHEMA:
            raise TraceVersionError(
                f"trace schema {header.get('schema')!r} != expected {TRACE_SCHEMA!r}"
            )
        builder = TraceBuilder(header)
        complete = False
        reason = ""
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                break  # torn tail: treat as truncation
            if rec.get("end"):
                complete = True
                reason = rec.get("reason", "")
                break
            builder.append(
                t=rec["t"], seg=rec["seg"], s=rec["s"], tau=rec["tau"], dir=rec["dir"],
                hold=rec["hold"], xn=rec["xn"], dy=rec["dy"], xc=rec["xc"], u=rec["u"],
                pos=rec["pos"], q=rec["q"],
                uv=None if rec["uv"] is None else tuple(rec["uv"]),
                f=rec["f"], contact=rec["contact"], sat=rec["sat"],
            )
    return builder.finish(complete, reason)


def eq1_audit(trace: Trace) -> float:
    """Max |x_cmd - (x_n + dy)| over all records; must be exactly 0.0."""
    if len(trace) == 0:
        return 0.0
    return float(np.max(np.abs(trace.x_cmd - (trace.x_n + trace.dy))))


def extract_inputs(trace: Trace) -> np.ndarray:
    """Per-tick device inputs, suitable for bit-exact replay."""
    return trace.u.copy()


def traces_equal(a: Trace, b: Trace) -> bool:
    """Bit-wise record equality (header hash fields excluded)."""
    if len(a) != len(b):
        return False
    for ra, rb in zip(a.records(), b.records()):
        if ra != rb:
            return False
    return True


def command_traces_equal(a: Trace, b: Trace) -> bool:
    """Bit-wise equality of the commanded trajectory only."""
    return (
        len(a) == len(b)
        and np.array_equal(a.x_cmd, b.x_cmd)
        and a.segment_ids == b.segment_ids
    )


def config_hash(doc) -> str:
    """Stable hash of a scenario/config document."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
