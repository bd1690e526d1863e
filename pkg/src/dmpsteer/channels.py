"""Named state channels.

A robot state is a short vector of named channels, each with a kind that
fixes its units and how the rest of the stack treats it:

* ``position``       Cartesian coordinate, meters
* ``surface_param``  parametric surface coordinate, dimensionless in [0, 1]
* ``force``          contact force along the surface normal, newtons
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

POSITION = "position"
SURFACE_PARAM = "surface_param"
FORCE = "force"

KINDS = (POSITION, SURFACE_PARAM, FORCE)

# kinematic kinds participate in the execution-rate heuristic; force does not
KINEMATIC_KINDS = (POSITION, SURFACE_PARAM)

_UNITS = {POSITION: "m", SURFACE_PARAM: "1", FORCE: "N"}


def kind_units(kind: str) -> str:
    return _UNITS[kind]


@dataclass(frozen=True)
class ChannelSet:
    """Ordered channel names plus their kinds; shared by states of one segment."""

    names: tuple[str, ...]
    kinds: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) != len(self.kinds):
            raise ValueError("names/kinds length mismatch")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate channel names in {self.names}")
        for k in self.kinds:
            if k not in KINDS:
                raise ValueError(f"unknown channel kind {k!r}")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def kinematic_mask(self) -> np.ndarray:
        return np.array([k in KINEMATIC_KINDS for k in self.kinds])


FREE_SPACE_CHANNELS = ChannelSet(("x", "y", "z"), (POSITION,) * 3)
HYBRID_CHANNELS = ChannelSet(("u", "v", "f_n"), (SURFACE_PARAM, SURFACE_PARAM, FORCE))


@dataclass
class StateVector:
    """Values of one robot state over a channel set."""

    channels: ChannelSet
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.channels),):
            raise ValueError(
                f"expected {len(self.channels)} values for {self.channels.names}, "
                f"got shape {self.values.shape}"
            )

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.channels.index(name)])

    def add(self, delta: np.ndarray) -> "StateVector":
        delta = np.asarray(delta, dtype=float)
        if delta.shape != self.values.shape:
            raise ValueError("channel mismatch: correction does not match state channels")
        return StateVector(self.channels, self.values + delta)

    def copy(self) -> "StateVector":
        return StateVector(self.channels, self.values.copy())
