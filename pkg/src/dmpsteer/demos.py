"""Synthetic demonstration generators for fitting nominal behaviors."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from .channels import ChannelSet
from .dmp import Demonstration


def min_jerk(x0: float, g: float, T: float, dt: float) -> np.ndarray:
    """Minimum-jerk profile from x0 to g over T (rest-to-rest)."""
    t = np.arange(0.0, T + dt / 2, dt)
    r = np.clip(t / T, 0.0, 1.0)
    return x0 + (g - x0) * (10 * r**3 - 15 * r**4 + 6 * r**5)


def trapezoid(peak: float, T: float, dt: float, rise_frac: float = 0.25) -> np.ndarray:
    """0 -> peak -> 0 hold profile with min-jerk rise/fall blends."""
    t = np.arange(0.0, T + dt / 2, dt)
    r = t / T
    up = np.clip(r / rise_frac, 0.0, 1.0)
    down = np.clip((1.0 - r) / rise_frac, 0.0, 1.0)
    edge = np.minimum(up, down)
    return peak * (10 * edge**3 - 15 * edge**4 + 6 * edge**5)


def demo_from_columns(channels: ChannelSet, columns: list[np.ndarray], dt: float) -> Demonstration:
    n = min(len(c) for c in columns)
    values = np.stack([np.asarray(c[:n], dtype=float) for c in columns], axis=1)
    return Demonstration(channels, values, dt)


def waypoint_demo(
    channels: ChannelSet,
    waypoints: np.ndarray,
    T: float,
    dt: float,
) -> Demonstration:
    """Clamped cubic spline through waypoints, zero end velocities."""
    waypoints = np.atleast_2d(np.asarray(waypoints, dtype=float))
    if waypoints.shape[1] != len(channels):
        raise ValueError("waypoint width does not match channel set")
    t_wp = np.linspace(0.0, T, waypoints.shape[0])
    spline = CubicSpline(t_wp, waypoints, axis=0, bc_type="clamped")
    t = np.arange(0.0, T + dt / 2, dt)
    return Demonstration(channels, spline(t), dt)


DEMO_SCHEMA = "demo/1"


def demo_to_doc(demo: Demonstration) -> dict:
    return {
        "schema": DEMO_SCHEMA,
        "dt": float(demo.dt),
        "channels": [
            {"name": n, "kind": k} for n, k in zip(demo.channels.names, demo.channels.kinds)
        ],
        "samples": [[float(v) for v in row] for row in demo.values],
    }


def demo_from_doc(doc: dict) -> Demonstration:
    if doc.get("schema") != DEMO_SCHEMA:
        raise ValueError(f"unsupported demo schema {doc.get('schema')!r}")
    channels = ChannelSet(
        tuple(c["name"] for c in doc["channels"]),
        tuple(c["kind"] for c in doc["channels"]),
    )
    return Demonstration(channels, np.array(doc["samples"], dtype=float), float(doc["dt"]))
