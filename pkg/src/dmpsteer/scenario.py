"""Scenario documents: the on-disk description of a task session.

A scenario bundle is a directory holding scenario.yaml plus the referenced
model and surface files (same structured-text schema family).  The scenario
names segments with their modes, correctable channels and scalings, gamma,
k_c, orientation policy, plant constants, deterministic error injections,
success criteria, and named scripted users.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .channels import FREE_SPACE_CHANNELS, HYBRID_CHANNELS
from .correction import CorrectionScaling
from .dmp import DmpSegmentModel, model_from_doc, model_to_doc
from .plan import HYBRID_SURFACE, OrientationPolicy, SegmentSpec
from .plant import ErrorInjection, PlantParams
from .scripted import ScriptEntry, ScriptedUser
from .trace import config_hash

SCENARIO_SCHEMA = "scenario/1"

DT_MIN, DT_MAX = 5e-4, 1e-2


class ConfigError(ValueError):
    """Scenario/session configuration problem (CLI exit code 2)."""


@dataclass
class Scenario:
    name: str
    dt: float
    segments: list[SegmentSpec]
    surfaces: dict = field(default_factory=dict)  # id -> BSplineSurface
    plant: PlantParams = field(default_factory=PlantParams)
    injections: list[ErrorInjection] = field(default_factory=list)
    success: dict = field(default_factory=dict)
    users: dict = field(default_factory=dict)  # name -> list[ScriptEntry]
    seed: int = 0
    device_range_m: float = 0.05
    input_deadzone: float = 0.05
    max_time: float | None = None

    def __post_init__(self):
        if not (DT_MIN <= self.dt <= DT_MAX):
            raise ConfigError(f"dt {self.dt} outside [{DT_MIN}, {DT_MAX}]")

    def scripted_user(self, name: str) -> ScriptedUser:
        if name not in self.users:
            raise ConfigError(f"scenario has no scripted user {name!r}; has {list(self.users)}")
        return ScriptedUser(self.users[name])

    def doc(self) -> dict:
        """Fully resolved document (models and surfaces inlined) for hashing."""
        from .surface import surface_to_doc

        return _plain({
            "schema": SCENARIO_SCHEMA,
            "name": self.name,
            "dt": self.dt,
            "seed": self.seed,
            "device_range_m": self.device_range_m,
            "input_deadzone": self.input_deadzone,
            "max_time": self.max_time,
            "plant": {
                "k_p": self.plant.k_p,
                "k_s": self.plant.k_s,
                "contact_damping": self.plant.contact_damping,
                "v_max": self.plant.v_max,
                "track_gain": self.plant.track_gain,
                "param_rate_max": self.plant.param_rate_max,
            },
            "surfaces": {sid: surface_to_doc(s) for sid, s in self.surfaces.items()},
            "segments": [_segment_doc(seg, inline_model=True) for seg in self.segments],
            "injections": [inj.as_doc() for inj in self.injections],
            "success": _plain(self.success),
            "users": {
                name: [e.as_doc() for e in entries] for name, entries in self.users.items()
            },
        })

    def hash(self) -> str:
        return config_hash(self.doc())


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _orientation_doc(policy: OrientationPolicy) -> dict:
    if policy.mode == "prescribed":
        return {
            "policy": "prescribed",
            "keyframes": [[p, [float(c) for c in q]] for p, q in policy.keyframes],
        }
    if policy.mode == "surface_normal_static":
        return {
            "policy": "surface_normal_static",
            "spin_reference": [float(c) for c in policy.spin_reference],
        }
    return {"policy": "surface_normal_motion_aligned", "smoothing_tau": policy.smoothing_tau}


def _orientation_from_doc(doc: dict) -> OrientationPolicy:
    policy = doc.get("policy", "prescribed")
    if policy == "prescribed":
        keyframes = [(float(p), np.array(q, dtype=float)) for p, q in doc["keyframes"]]
        return OrientationPolicy("prescribed", keyframes=keyframes)
    if policy == "surface_normal_static":
        ref = doc.get("spin_reference")
        return OrientationPolicy(
            "surface_normal_static",
            spin_reference=None if ref is None else np.array(ref, dtype=float),
        )
    if policy == "surface_normal_motion_aligned":
        return OrientationPolicy(
            "surface_normal_motion_aligned", smoothing_tau=float(doc.get("smoothing_tau", 0.1))
        )
    raise ConfigError(f"unknown orientation policy {policy!r}")


def _segment_doc(seg: SegmentSpec, inline_model: bool = False, model_file: str | None = None) -> dict:
    scaling = {
        name: float(s)
        for name, s in zip(seg.channels.names, seg.scaling.s_bar)
        if s > 0
    }
    doc = {
        "id": seg.id,
        "mode": seg.mode,
        "scaling": scaling,
        "gamma": seg.gamma,
        "k_c": seg.k_c,
        "orientation": _orientation_doc(seg.orientation),
        "edge_margin": seg.edge_margin,
        "standoff_band": seg.standoff_band,
    }
    if inline_model:
        doc["model_doc"] = model_to_doc(seg.model)
    else:
        doc["model"] = model_file
    if seg.surface_id:
        doc["surface"] = seg.surface_id
    if seg.approach_surface_id:
        doc["approach"] = {
            "surface": seg.approach_surface_id,
            "uv": [float(v) for v in seg.approach_uv] if seg.approach_uv else None,
        }
    if seg.rate_mod_force_channels:
        doc["rate_mod_force_channels"] = True
    return doc


def _segment_from_doc(doc: dict, model: DmpSegmentModel) -> SegmentSpec:
    mode = doc["mode"]
    channels = HYBRID_CHANNELS if mode == HYBRID_SURFACE else FREE_SPACE_CHANNELS
    s_bar = np.zeros(len(channels))
    for name, value in (doc.get("scaling") or {}).items():
        if name not in channels.names:
            raise ConfigError(f"segment {doc['id']}: unknown scaling channel {name!r}")
        s_bar[channels.index(name)] = float(value)
    approach = doc.get("approach") or {}
    return SegmentSpec(
        id=doc["id"],
        mode=mode,
        model=model,
        scaling=CorrectionScaling(channels, s_bar),
        gamma=float(doc.get("gamma", 1.0)),
        k_c=float(doc.get("k_c", 100.0)),
        orientation=_orientation_from_doc(doc.get("orientation", {"policy": "prescribed", "keyframes": [[0.0, [1, 0, 0, 0]], [1.0, [1, 0, 0, 0]]]})),
        surface_id=doc.get("surface"),
        approach_surface_id=approach.get("surface"),
        approach_uv=tuple(approach["uv"]) if approach.get("uv") else None,
        edge_margin=float(doc.get("edge_margin", 0.005)),
        standoff_band=float(doc.get("standoff_band", 0.010)),
        rate_mod_force_channels=bool(doc.get("rate_mod_force_channels", False)),
    )


def save_scenario(scenario: Scenario, out_dir: str) -> str:
    """Write the bundle: scenario.yaml, models/<seg>.yaml, surfaces/<id>.yaml."""
    from .surface import surface_to_doc

    os.makedirs(os.path.join(out_dir, "models"), exist_ok=True)
    if scenario.surfaces:
        os.makedirs(os.path.join(out_dir, "surfaces"), exist_ok=True)

    seg_docs = []
    for seg in scenario.segments:
        model_rel = f"models/{seg.id}.yaml"
        with open(os.path.join(out_dir, model_rel), "w") as fh:
            yaml.safe_dump(model_to_doc(seg.model), fh, sort_keys=False)
        seg_docs.append(_segment_doc(seg, model_file=model_rel))

    surface_files = {}
    for sid, surf in scenario.surfaces.items():
        rel = f"surfaces/{sid}.yaml"
        with open(os.path.join(out_dir, rel), "w") as fh:
            yaml.safe_dump(surface_to_doc(surf), fh, sort_keys=False)
        surface_files[sid] = rel

    doc = {
        "schema": SCENARIO_SCHEMA,
        "name": scenario.name,
        "dt": scenario.dt,
        "seed": scenario.seed,
        "device_range_m": scenario.device_range_m,
        "input_deadzone": scenario.input_deadzone,
        "max_time": scenario.max_time,
        "plant": {
            "k_p": scenario.plant.k_p,
            "k_s": scenario.plant.k_s,
            "contact_damping": scenario.plant.contact_damping,
            "v_max": scenario.plant.v_max,
            "track_gain": scenario.plant.track_gain,
            "param_rate_max": scenario.plant.param_rate_max,
        },
        "surfaces": [{"id": sid, "file": rel} for sid, rel in surface_files.items()],
        "segments": seg_docs,
        "injections": [inj.as_doc() for inj in scenario.injections],
        "success": _plain(scenario.success),
        "users": {
            name: [e.as_doc() for e in entries] for name, entries in scenario.users.items()
        },
    }
    path = os.path.join(out_dir, "scenario.yaml")
    with open(path, "w") as fh:
        yaml.safe_dump(_plain(doc), fh, sort_keys=False)
    return path


def load_scenario(path: str) -> Scenario:
    """Load a scenario bundle from its scenario.yaml path."""
    from .surface import surface_from_doc

    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed scenario yaml: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != SCENARIO_SCHEMA:
        raise ConfigError(f"unsupported scenario schema {doc.get('schema') if isinstance(doc, dict) else doc!r}")
    base = os.path.dirname(os.path.abspath(path))

    surfaces = {}
    for entry in doc.get("surfaces", []):
        with open(os.path.join(base, entry["file"])) as fh:
            surfaces[entry["id"]] = surface_from_doc(yaml.safe_load(fh))

    segments = []
    for seg_doc in doc.get("segments", []):
        if "model_doc" in seg_doc:
            model = model_from_doc(seg_doc["model_doc"])
        else:
            with open(os.path.join(base, seg_doc["model"])) as fh:
                model = model_from_doc(yaml.safe_load(fh))
        try:
            segments.append(_segment_from_doc(seg_doc, model))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"segment {seg_doc.get('id')!r}: {exc}") from exc

    plant_doc = doc.get("plant", {})
    plant = PlantParams(
        k_p=float(plant_doc.get("k_p", 0.002)),
        k_s=float(plant_doc.get("k_s", 5000.0)),
        contact_damping=float(plant_doc.get("contact_damping", 2 * math.sqrt(5000.0))),
        v_max=float(plant_doc.get("v_max", 0.5)),
        track_gain=float(plant_doc.get("track_gain", 50.0)),
        param_rate_max=float(plant_doc.get("param_rate_max", 2.0)),
    )
    injections = [ErrorInjection.from_doc(d) for d in doc.get("injections", [])]
    users = {
        name: [ScriptEntry.from_doc(e) for e in entries]
        for name, entries in (doc.get("users") or {}).items()
    }
    try:
        return Scenario(
            name=doc.get("name", "unnamed"),
            dt=float(doc["dt"]),
            segments=segments,
            surfaces=surfaces,
            plant=plant,
            injections=injections,
            success=doc.get("success", {}),
            users=users,
            seed=int(doc.get("seed", 0)),
            device_range_m=float(doc.get("device_range_m", 0.05)),
            input_deadzone=float(doc.get("input_deadzone", 0.05)),
            max_time=doc.get("max_time"),
        )
    except KeyError as exc:
        raise ConfigError(f"scenario missing field {exc}") from exc
