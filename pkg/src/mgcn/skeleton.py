"""Body graphs at three scales.

Scale s1 holds one node per joint; s2 and s3 hold progressively fewer
component nodes, defined by partitions of the finer scale. Partitions must
be disjoint and exhaustive, and node counts must strictly decrease. Configs
load from a small YAML schema and round-trip losslessly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import yaml

from .errors import SchemaError, SkeletonReferenceError, ValidationError

SCHEMA_VERSION = 1


class ScaleId(enum.Enum):
    S1 = "s1"
    S2 = "s2"
    S3 = "s3"


@dataclass(frozen=True)
class SkeletonConfig:
    name: str
    joint_names: tuple[str, ...]
    dims_per_joint: int
    partitions_s1_to_s2: tuple[tuple[int, ...], ...]
    partitions_s2_to_s3: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        object.__setattr__(self, "partitions_s1_to_s2",
                           tuple(tuple(g) for g in self.partitions_s1_to_s2))
        object.__setattr__(self, "partitions_s2_to_s3",
                           tuple(tuple(g) for g in self.partitions_s2_to_s3))
        self._validate()

    def _validate(self) -> None:
        if not self.joint_names:
            raise ValidationError("skeleton has no joints")
        if len(set(self.joint_names)) != len(self.joint_names):
            raise ValidationError(f"duplicate joint names in {self.name!r}")
        if self.dims_per_joint < 1:
            raise ValidationError(f"dims_per_joint must be >= 1, got {self.dims_per_joint}")
        _check_partition(self.partitions_s1_to_s2, self.n_joints, "s1_to_s2")
        _check_partition(self.partitions_s2_to_s3, self.n_s2, "s2_to_s3")
        if not (self.n_joints > self.n_s2 > self.n_s3 >= 1):
            raise ValidationError(
                "node counts must strictly decrease across scales, got "
                f"{self.n_joints}/{self.n_s2}/{self.n_s3}")

    # -- derived sizes ---------------------------------------------------

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    @property
    def n_s2(self) -> int:
        return len(self.partitions_s1_to_s2)

    @property
    def n_s3(self) -> int:
        return len(self.partitions_s2_to_s3)

    @property
    def k(self) -> int:
        """Total pose dimensionality."""
        return self.n_joints * self.dims_per_joint

    def node_count(self, scale: ScaleId) -> int:
        return {ScaleId.S1: self.n_joints, ScaleId.S2: self.n_s2, ScaleId.S3: self.n_s3}[scale]

    def joint_groups_s3(self) -> tuple[tuple[int, ...], ...]:
        """Joint membership of each s3 node, composed through the s2 partition."""
        return tuple(
            tuple(j for s2 in group for j in self.partitions_s1_to_s2[s2])
            for group in self.partitions_s2_to_s3)

    def group_slices(self, from_scale: ScaleId) -> list[list[int]]:
        """Pose-vector column indices concatenated into each coarser node.

        ``from_scale`` is the finer side of the transition (s1 for s1->s2,
        s2 for s2->s3); columns are expressed in the joint-major K layout.
        """
        d = self.dims_per_joint
        if from_scale is ScaleId.S1:
            joint_groups = self.partitions_s1_to_s2
        elif from_scale is ScaleId.S2:
            joint_groups = self.joint_groups_s3()
        else:
            raise ValueError("group_slices is defined for transitions out of s1 or s2 only")
        return [[j * d + c for j in group for c in range(d)] for group in joint_groups]

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "dims_per_joint": self.dims_per_joint,
            "joint_names": list(self.joint_names),
            "partitions_s1_to_s2": [list(g) for g in self.partitions_s1_to_s2],
            "partitions_s2_to_s3": [list(g) for g in self.partitions_s2_to_s3],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SkeletonConfig":
        try:
            names = [str(n) for n in raw["joint_names"]]
            groups12 = raw["partitions_s1_to_s2"]
            groups23 = raw["partitions_s2_to_s3"]
            dims = int(raw["dims_per_joint"])
            name = str(raw.get("name", "unnamed"))
        except (KeyError, TypeError) as err:
            raise ValidationError(f"skeleton config missing field: {err}") from err
        index = {n: i for i, n in enumerate(names)}
        resolved12 = tuple(tuple(_resolve(m, index) for m in group) for group in groups12)
        resolved23 = tuple(tuple(int(m) for m in group) for group in groups23)
        return cls(name=name, joint_names=tuple(names), dims_per_joint=dims,
                   partitions_s1_to_s2=resolved12, partitions_s2_to_s3=resolved23)


def _resolve(member, index: dict[str, int]) -> int:
    if isinstance(member, str):
        if member not in index:
            raise SkeletonReferenceError(f"unknown joint name {member!r} in partition group")
        return index[member]
    return int(member)


def _check_partition(groups, n_source: int, label: str) -> None:
    if not groups:
        raise ValidationError(f"partition {label} is empty")
    seen: dict[int, int] = {}
    for gi, group in enumerate(groups):
        if not group:
            raise ValidationError(f"partition {label} group {gi} is empty")
        for m in group:
            if not 0 <= m < n_source:
                raise ValidationError(
                    f"partition {label} group {gi} references index {m}, "
                    f"valid range is [0, {n_source})")
            if m in seen:
                raise ValidationError(
                    f"partition {label}: index {m} appears in groups {seen[m]} and {gi}")
            seen[m] = gi
    missing = sorted(set(range(n_source)) - set(seen))
    if missing:
        raise ValidationError(f"partition {label} does not cover indices {missing}")


def load_skeleton(path) -> SkeletonConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValidationError(f"skeleton file {path} is not a mapping")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported skeleton schema_version {version!r}, expected {SCHEMA_VERSION}")
    return SkeletonConfig.from_dict(raw)


def save_skeleton(cfg: SkeletonConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)


# -- built-in configurations ----------------------------------------------

# 20-joint body at scale 1, paired into 10 limb/torso segments, paired again
# into 5 gross body parts. The exact grouping is implementer-chosen (anatomy
# guided); override it by loading a custom config file.
_H36M20 = {
    "schema_version": SCHEMA_VERSION,
    "name": "h36m20",
    "dims_per_joint": 3,
    "joint_names": [
        "r_hip", "r_knee", "r_ankle", "r_foot",
        "l_hip", "l_knee", "l_ankle", "l_foot",
        "spine_low", "spine_high", "neck", "head",
        "l_shoulder", "l_elbow", "l_wrist", "l_hand",
        "r_shoulder", "r_elbow", "r_wrist", "r_hand",
    ],
    "partitions_s1_to_s2": [
        ["r_hip", "r_knee"], ["r_ankle", "r_foot"],
        ["l_hip", "l_knee"], ["l_ankle", "l_foot"],
        ["spine_low", "spine_high"], ["neck", "head"],
        ["l_shoulder", "l_elbow"], ["l_wrist", "l_hand"],
        ["r_shoulder", "r_elbow"], ["r_wrist", "r_hand"],
    ],
    "partitions_s2_to_s3": [
        [0, 1], [2, 3], [4, 5], [6, 7], [8, 9],
    ],
}

# Toy 6-joint chain used throughout the tests; group sizes are deliberately
# unequal to exercise the general path.
_STICK6 = {
    "schema_version": SCHEMA_VERSION,
    "name": "stick6",
    "dims_per_joint": 3,
    "joint_names": ["pelvis", "spine", "head", "shoulder", "elbow", "wrist"],
    "partitions_s1_to_s2": [["pelvis", "spine"], ["head"], ["shoulder", "elbow", "wrist"]],
    "partitions_s2_to_s3": [[0, 1], [2]],
}

BUILTIN_SKELETONS = {"h36m20": _H36M20, "stick6": _STICK6}


def builtin_skeleton(name: str) -> SkeletonConfig:
    try:
        raw = BUILTIN_SKELETONS[name]
    except KeyError:
        raise ValidationError(
            f"unknown built-in skeleton {name!r}; available: {sorted(BUILTIN_SKELETONS)}")
    return SkeletonConfig.from_dict(raw)
