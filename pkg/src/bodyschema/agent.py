"""Multilink agent model: cylindrical body parts, 2-DOF joints, surface sensors.

The agent is a tree of rigid cylinders. Each joint attaches a child part to an
anchor point on its parent and rotates about two perpendicular axes within
angle limits. Tactile sensors sit on the lateral surface of each cylinder with
outward unit normals, expressed in the owning part's local frame (the part's
axis is local +z, starting at the joint anchor).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
import yaml


class StructureError(ValueError):
    """Joint graph is not a tree (cycle, disconnection, or wrong edge count)."""


@dataclass(frozen=True)
class BodyPart:
    id: str
    length: float
    radius: float


@dataclass(frozen=True)
class Joint:
    child: str
    parent: str
    anchor: np.ndarray          # anchor point in parent-local frame, shape (3,)
    rest_axis: np.ndarray       # child +z direction in parent frame at zero angles
    limits: np.ndarray          # shape (2, 2): per-axis (lo, hi) in radians


@dataclass(frozen=True)
class SensorPlacement:
    sensor_id: int
    part: str
    position: np.ndarray        # part-local, shape (3,)
    normal: np.ndarray          # part-local outward unit normal, shape (3,)


@dataclass(frozen=True)
class AgentModel:
    parts: list[BodyPart]
    joints: list[Joint]
    sensors: list[SensorPlacement]
    ground_truth_tree: dict[str, str | None]   # part id -> parent id (root -> None)
    name: str = "agent"

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    @property
    def root(self) -> str:
        return next(p for p, parent in self.ground_truth_tree.items() if parent is None)

    def part_index(self) -> dict[str, int]:
        return {p.id: i for i, p in enumerate(self.parts)}

    def sensor_part_labels(self) -> np.ndarray:
        """Ground-truth part index per sensor, the labeling oracle for evaluation."""
        idx = self.part_index()
        return np.array([idx[s.part] for s in self.sensors], dtype=np.intp)

    def ground_truth_edges(self) -> set[frozenset[int]]:
        """Undirected ground-truth tree edges over part indices."""
        idx = self.part_index()
        return {
            frozenset((idx[c], idx[p]))
            for c, p in self.ground_truth_tree.items()
            if p is not None
        }

    def fingerprint(self) -> str:
        """Stable content hash of the model, used for log provenance."""
        blob = json.dumps(_agent_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class MotionConfig:
    p_coordination: float
    seed: int
    decision_interval: int = 500
    dt: float = 0.1
    total_steps: int = 100_000
    controller_gain: float = 1.0
    rho: float = 1010.0
    # The root part carries a virtual 2-DOF joint against the world frame that
    # takes part in the same lock/activate mechanism, standing in for the
    # whole-body reorientation a free-floating body would have. Without it the
    # root's sensors are silent and indistinguishable from each other.
    root_motion: bool = True

    def __post_init__(self):
        if not 0.0 <= self.p_coordination <= 1.0:
            raise ValueError(f"p_coordination must lie in [0, 1], got {self.p_coordination}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.total_steps < 2:
            raise ValueError("total_steps must be >= 2 (finite-difference velocity "
                             "needs a predecessor step)")
        if self.decision_interval < 1:
            raise ValueError("decision_interval must be >= 1")
        if not 0.0 < self.controller_gain * self.dt < 2.0:
            raise ValueError("controller_gain * dt must lie in (0, 2) for stable tracking")


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero-length direction vector")
    if abs(n - 1.0) < 1e-12:   # already unit; keep bits stable for roundtrips
        return v
    return v / n


def _validate_tree(parts: list[BodyPart], joints: list[Joint]) -> dict[str, str | None]:
    part_ids = [p.id for p in parts]
    if len(set(part_ids)) != len(part_ids):
        raise ValueError("duplicate part ids")
    known = set(part_ids)
    for j in joints:
        if j.child not in known or j.parent not in known:
            raise ValueError(f"joint references unknown part: {j.child} -> {j.parent}")
    if len(joints) != len(parts) - 1:
        raise StructureError(
            f"need exactly {len(parts) - 1} joints for {len(parts)} parts, got {len(joints)}")

    parent: dict[str, str | None] = {}
    for j in joints:
        if j.child in parent:
            raise StructureError(f"part {j.child!r} has two parents")
        parent[j.child] = j.parent
    roots = known - set(parent)
    if len(roots) != 1:
        raise StructureError(f"expected one root part, found {sorted(roots)}")
    root = roots.pop()
    parent[root] = None

    # Walk to the root from every part; a cycle never terminates within |parts| hops.
    for p in part_ids:
        cur, hops = p, 0
        while parent[cur] is not None:
            cur = parent[cur]
            hops += 1
            if hops > len(parts):
                raise StructureError("joint graph contains a cycle")
    return parent


def _place_sensors(parts: list[BodyPart], counts: dict[str, int]) -> list[SensorPlacement]:
    """Rings of sensors on each cylinder at uniform axial and angular spacing."""
    sensors: list[SensorPlacement] = []
    sid = 0
    for part in parts:
        n = counts[part.id]
        if n <= 0:
            continue
        circumference = 2 * math.pi * part.radius
        # ring layout roughly matching the surface aspect ratio
        n_rings = max(1, round(math.sqrt(n * part.length / max(circumference, 1e-9))))
        n_rings = min(n_rings, n)
        per_ring = n // n_rings
        extra = n % n_rings
        placed = 0
        for r in range(n_rings):
            count_r = per_ring + (1 if r < extra else 0)
            z = (r + 0.5) / n_rings * part.length
            for k in range(count_r):
                phi = 2 * math.pi * k / count_r
                nx, ny = math.cos(phi), math.sin(phi)
                sensors.append(SensorPlacement(
                    sensor_id=sid,
                    part=part.id,
                    position=np.array([part.radius * nx, part.radius * ny, z]),
                    normal=np.array([nx, ny, 0.0]),
                ))
                sid += 1
                placed += 1
        assert placed == n
    return sensors


def _proportional_counts(parts: list[BodyPart], total: int) -> dict[str, int]:
    """Apportion `total` sensors by lateral surface area (largest remainder)."""
    areas = np.array([2 * math.pi * p.radius * p.length for p in parts])
    quota = areas / areas.sum() * total
    counts = np.floor(quota).astype(int)
    remainder = quota - counts
    for i in np.argsort(-remainder)[: total - counts.sum()]:
        counts[i] += 1
    return {p.id: int(c) for p, c in zip(parts, counts)}


def build_agent(spec: dict | str) -> AgentModel:
    """Build a validated AgentModel from a spec dict or a YAML file path.

    Spec schema (see README for the full description)::

        name: star5
        parts:
          - {id: trunk, length: 0.4, radius: 0.1}
        joints:
          - child: arm_l
            parent: trunk
            anchor: [0.1, 0.0, 0.32]
            rest_axis: [1.0, 0.0, 0.3]     # optional, default [0, 0, 1]
            limits: [[-1.5708, 1.5708], [-1.5708, 1.5708]]   # optional
        sensors:
          total: 840            # apportioned by lateral surface area, or
          per_part: {trunk: 60, arm_l: 25}
    """
    if isinstance(spec, str):
        with open(spec) as fh:
            spec = yaml.safe_load(fh)
    if not spec.get("parts"):
        raise ValueError("agent spec must describe at least one part")

    parts = [BodyPart(id=str(p["id"]), length=float(p["length"]), radius=float(p["radius"]))
             for p in spec["parts"]]
    default_limits = [[-math.pi / 2, math.pi / 2], [-math.pi / 2, math.pi / 2]]
    joints = [
        Joint(
            child=str(j["child"]),
            parent=str(j["parent"]),
            anchor=np.asarray(j["anchor"], dtype=float),
            rest_axis=_unit(j.get("rest_axis", [0.0, 0.0, 1.0])),
            limits=np.asarray(j.get("limits", default_limits), dtype=float),
        )
        for j in spec.get("joints", [])
    ]
    tree = _validate_tree(parts, joints)

    sensor_spec = spec.get("sensors", {})
    if "per_part" in sensor_spec:
        counts = {p.id: int(sensor_spec["per_part"].get(p.id, 0)) for p in parts}
    else:
        counts = _proportional_counts(parts, int(sensor_spec.get("total", 0)))
    sensors = _place_sensors(parts, counts)

    model = AgentModel(parts=parts, joints=joints, sensors=sensors,
                       ground_truth_tree=tree, name=str(spec.get("name", "agent")))
    _check_invariants(model)
    return model


def _check_invariants(model: AgentModel) -> None:
    part_ids = {p.id for p in model.parts}
    for s in model.sensors:
        if s.part not in part_ids:
            raise ValueError(f"sensor {s.sensor_id} owned by unknown part {s.part!r}")
        if abs(np.linalg.norm(s.normal) - 1.0) > 1e-9:
            raise ValueError(f"sensor {s.sensor_id} normal is not unit length")
    induced = {j.child: j.parent for j in model.joints}
    induced[model.root] = None
    if induced != model.ground_truth_tree:
        raise StructureError("ground_truth_tree does not match the joint-induced tree")


def star_agent_spec(n_sensors: int = 840) -> dict:
    """Five-part agent: a slim trunk with four limbs.

    The trunk is kept slender so the surface-proportional sensor allocation
    stays roughly balanced across parts, which keeps every cluster in the
    body map well estimated at small sensor counts.
    """
    lim = [[-math.pi / 2, math.pi / 2], [-math.pi / 2, math.pi / 2]]
    return {
        "name": "star5",
        "parts": [
            {"id": "trunk", "length": 0.30, "radius": 0.05},
            {"id": "arm_l", "length": 0.30, "radius": 0.04},
            {"id": "arm_r", "length": 0.30, "radius": 0.04},
            {"id": "leg_l", "length": 0.30, "radius": 0.04},
            {"id": "leg_r", "length": 0.30, "radius": 0.04},
        ],
        "joints": [
            {"child": "arm_l", "parent": "trunk", "anchor": [0.05, 0.0, 0.26],
             "rest_axis": [1.0, 0.0, 0.2], "limits": lim},
            {"child": "arm_r", "parent": "trunk", "anchor": [-0.05, 0.0, 0.26],
             "rest_axis": [-1.0, 0.0, 0.2], "limits": lim},
            {"child": "leg_l", "parent": "trunk", "anchor": [0.03, 0.0, 0.03],
             "rest_axis": [0.5, 0.0, -1.0], "limits": lim},
            {"child": "leg_r", "parent": "trunk", "anchor": [-0.03, 0.0, 0.03],
             "rest_axis": [-0.5, 0.0, -1.0], "limits": lim},
        ],
        "sensors": {"total": n_sensors},
    }


def _agent_to_dict(model: AgentModel) -> dict:
    return {
        "name": model.name,
        "parts": [{"id": p.id, "length": p.length, "radius": p.radius} for p in model.parts],
        "joints": [
            {"child": j.child, "parent": j.parent, "anchor": j.anchor.tolist(),
             "rest_axis": j.rest_axis.tolist(), "limits": j.limits.tolist()}
            for j in model.joints
        ],
        "sensors": {"per_part": {
            p.id: sum(1 for s in model.sensors if s.part == p.id) for p in model.parts}},
    }


def save_agent_spec(model: AgentModel, path: str) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(_agent_to_dict(model), fh, sort_keys=False)
