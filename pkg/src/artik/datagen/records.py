"""In-memory dataset records and their on-disk formats.

Records hold exactly what gets persisted (float32 coordinates, uint8 ids), so
reading a file back reproduces the writer's object bit for bit.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError
from ..mesh.io import read_ply, write_ply

SPLITS = ("train", "seen", "unseen")
POINTS_PER_CLOUD = 16384
ASDF_MAGIC = b"ASDF"
ASDF_RECORD = np.dtype([("x", "<f4", (3,)), ("sdf", "<f4"), ("part_id", "u1")])
SDF_CLASSES = ("on_surface", "near_surface", "bbox_uniform", "global_uniform")


@dataclass(eq=False)
class LabeledPointCloud:
    points: np.ndarray
    part_ids: np.ndarray
    psi: float
    category: str
    split: str
    is_abnormal: bool = False
    anomaly_labels: np.ndarray | None = None
    kind: str | None = None

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float32).reshape(-1, 3)
        self.part_ids = np.asarray(self.part_ids, dtype=np.uint8).reshape(-1)
        if self.anomaly_labels is not None:
            self.anomaly_labels = np.asarray(self.anomaly_labels, dtype=np.uint8).reshape(-1)
        self.psi = float(self.psi)
        self.is_abnormal = bool(self.is_abnormal)
        if self.split not in SPLITS:
            raise InvalidInputError(f"split must be one of {SPLITS}, got {self.split!r}")
        if len(self.part_ids) != len(self.points):
            raise InvalidInputError("part_ids not aligned with points")
        if (self.anomaly_labels is not None) != self.is_abnormal:
            raise InvalidInputError("anomaly labels must be present exactly for abnormal clouds")
        if self.anomaly_labels is not None and len(self.anomaly_labels) != len(self.points):
            raise InvalidInputError("anomaly labels not aligned with points")
        if self.split == "train" and self.is_abnormal:
            raise InvalidInputError("the train split holds normal samples only")

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, LabeledPointCloud):
            return NotImplemented
        same_labels = (
            self.anomaly_labels is None
            if other.anomaly_labels is None
            else self.anomaly_labels is not None and np.array_equal(self.anomaly_labels, other.anomaly_labels)
        )
        return (
            np.array_equal(self.points, other.points)
            and np.array_equal(self.part_ids, other.part_ids)
            and same_labels
            and self.psi == other.psi
            and self.category == other.category
            and self.split == other.split
            and self.is_abnormal == other.is_abnormal
            and self.kind == other.kind
        )

    def save(self, path):
        vertex = {
            "x": self.points[:, 0],
            "y": self.points[:, 1],
            "z": self.points[:, 2],
            "part_id": self.part_ids,
        }
        if self.anomaly_labels is not None:
            vertex["label"] = self.anomaly_labels
        comments = [
            f"artik category={self.category}",
            f"artik psi={self.psi!r}",
            f"artik split={self.split}",
            f"artik abnormal={int(self.is_abnormal)}",
        ]
        if self.kind is not None:
            comments.append(f"artik kind={self.kind}")
        write_ply(path, vertex, comments=comments)

    @classmethod
    def load(cls, path):
        ply = read_ply(path)
        meta = _meta(ply.comments)
        v = ply.elements["vertex"].data
        pts = np.stack([v["x"], v["y"], v["z"]], axis=1)
        return cls(
            points=pts,
            part_ids=v["part_id"],
            anomaly_labels=v.get("label"),
            psi=float(meta["psi"]),
            category=meta["category"],
            split=meta["split"],
            is_abnormal=meta["abnormal"] == "1",
            kind=meta.get("kind"),
        )


def _meta(comments):
    meta = {}
    for c in comments:
        if c.startswith("artik "):
            key, _, val = c[len("artik "):].partition("=")
            meta[key] = val
    return meta


@dataclass(eq=False)
class DenseCloud:
    """Unnormalized dense abnormal samples with part ids and anomaly labels."""

    points: np.ndarray
    part_ids: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float32).reshape(-1, 3)
        self.part_ids = np.asarray(self.part_ids, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.uint8)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return (
            np.array_equal(self.points, other.points)
            and np.array_equal(self.part_ids, other.part_ids)
            and np.array_equal(self.labels, other.labels)
        )

    def save(self, path):
        write_ply(
            path,
            {"x": self.points[:, 0], "y": self.points[:, 1], "z": self.points[:, 2],
             "part_id": self.part_ids, "label": self.labels},
            comments=["artik dense=1"],
        )

    @classmethod
    def load(cls, path):
        v = read_ply(path).elements["vertex"].data
        return cls(np.stack([v["x"], v["y"], v["z"]], axis=1), v["part_id"], v["label"])


@dataclass(eq=False)
class SdfTupleSet:
    """(x, sdf, part_id) supervision records for one articulation sample.

    Records are stored class by class in ``SDF_CLASSES`` order; ``counts``
    gives the run length of each class.
    """

    points: np.ndarray
    sdf: np.ndarray
    part_ids: np.ndarray
    psi: float
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float32).reshape(-1, 3)
        self.sdf = np.asarray(self.sdf, dtype=np.float32).reshape(-1)
        self.part_ids = np.asarray(self.part_ids, dtype=np.uint8).reshape(-1)
        self.psi = float(self.psi)
        if not (len(self.points) == len(self.sdf) == len(self.part_ids)):
            raise InvalidInputError("SDF tuple arrays have mismatched lengths")
        if self.counts and sum(self.counts.values()) != len(self.sdf):
            raise InvalidInputError("class counts do not sum to the record count")

    def __len__(self):
        return len(self.sdf)

    def class_slice(self, name):
        start = 0
        for cls_name in SDF_CLASSES:
            n = self.counts.get(cls_name, 0)
            if cls_name == name:
                return slice(start, start + n)
            start += n
        raise KeyError(name)

    def __eq__(self, other):
        return (
            np.array_equal(self.points, other.points)
            and np.array_equal(self.sdf, other.sdf)
            and np.array_equal(self.part_ids, other.part_ids)
        )

    def to_bytes(self):
        rec = np.empty(len(self), dtype=ASDF_RECORD)
        rec["x"] = self.points
        rec["sdf"] = self.sdf
        rec["part_id"] = self.part_ids
        return ASDF_MAGIC + struct.pack("<I", len(self)) + rec.tobytes()

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data, psi=float("nan"), counts=None):
        if data[:4] != ASDF_MAGIC:
            raise InvalidInputError("not an ASDF file (bad magic)")
        (count,) = struct.unpack("<I", data[4:8])
        expected = 8 + count * ASDF_RECORD.itemsize
        if len(data) != expected:
            raise InvalidInputError(f"ASDF size mismatch: {len(data)} bytes, expected {expected}")
        rec = np.frombuffer(data, dtype=ASDF_RECORD, count=count, offset=8)
        return cls(rec["x"], rec["sdf"], rec["part_id"], psi, dict(counts or {}))

    @classmethod
    def load(cls, path, psi=float("nan"), counts=None):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), psi, counts)
