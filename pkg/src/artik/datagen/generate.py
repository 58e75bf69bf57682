"""Per-sample generation: normal clouds with SDF supervision, abnormal clouds."""
from __future__ import annotations

import numpy as np

from ..errors import AnomalyRejectedError
from ..kinematics import pose_model
from ..mesh.normalization import normalize
from ..mesh.query import LabelIndex, nearest_part, signed_distance, unsigned_distance
from ..mesh.sampling import sample_surface
from ..mesh.trimesh import merge_meshes
from .anomaly import inject_anomaly
from .records import POINTS_PER_CLOUD, SDF_CLASSES, DenseCloud, LabeledPointCloud, SdfTupleSet

TAU_ALPHA = 0.001
DENSE_POINTS = 100_000
SDF_TUPLES = 30_000
NEAR_SIGMAS = (0.005, 0.05)
GLOBAL_BOX = 1.1
MAX_POSITIVE_FRACTION = 0.30


def tau_for(mesh, alpha=TAU_ALPHA):
    lo, hi = mesh.bounds
    return alpha * float(np.linalg.norm(hi - lo))


def label_anomaly(points, normal_mesh, alpha=TAU_ALPHA):
    """1 where a point lies farther than tau from the paired normal mesh.

    ``tau`` is ``alpha`` times the diagonal of the normal mesh's axis-aligned
    box, in the same coordinates as ``points``.
    """
    d = unsigned_distance(normal_mesh, np.asarray(points, dtype=np.float64).reshape(-1, 3))
    return (d > tau_for(normal_mesh, alpha)).astype(np.uint8)


def sdf_class_counts(total):
    n_on = int(round(0.4 * total))
    n_near = int(round(0.4 * total))
    n_box = int(round(0.1 * total))
    return dict(zip(SDF_CLASSES, (n_on, n_near, n_box, total - n_on - n_near - n_box)))


def sdf_queries(mesh, face_owner, total, rng):
    """Query points (float32-exact) and part ids of the reference surface.

    Returns ``(points, counts, surface_points, surface_labels)``; the surface
    set is the labeled reference that off-surface ids are propagated from.
    """
    counts = sdf_class_counts(total)
    on, on_face, _ = sample_surface(mesh, counts["on_surface"], rng)
    on_labels = face_owner[on_face]
    n_near = counts["near_surface"]
    base, _, _ = sample_surface(mesh, n_near, rng)
    sigma = np.where(np.arange(n_near) < n_near // 2, NEAR_SIGMAS[0], NEAR_SIGMAS[1])
    near = base + rng.normal(size=(n_near, 3)) * sigma[:, None]
    lo, hi = mesh.bounds
    box = rng.uniform(lo, hi, size=(counts["bbox_uniform"], 3))
    glob = rng.uniform(-GLOBAL_BOX, GLOBAL_BOX, size=(counts["global_uniform"], 3))
    pts = np.concatenate([on, near, box, glob]).astype(np.float32)
    return pts, counts, on, on_labels


def build_sdf_tuples(mesh, face_owner, psi, total, rng):
    pts, counts, ref, ref_labels = sdf_queries(mesh, face_owner, total, rng)
    x = pts.astype(np.float64)
    sdf = signed_distance(mesh, x)
    n_on = counts["on_surface"]
    part = np.empty(len(x), dtype=np.uint8)
    part[:n_on] = ref_labels
    part[n_on:] = LabelIndex(ref, ref_labels).query(x[n_on:])
    return SdfTupleSet(pts, sdf, part, psi, counts), sdf


def _normalized_parts(parts, norm_params):
    return [p.with_vertices(normalize(p.vertices, norm_params), validate=False) for p in parts]


def generate_normal(model, psi, norm_params, seed, split="train", with_sdf=True, n_points=POINTS_PER_CLOUD,
                    sdf_tuples=SDF_TUPLES):
    """Normal cloud at ``psi`` and, optionally, its SDF supervision."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    parts = _normalized_parts(pose_model(model, psi), norm_params)
    merged, owner = merge_meshes(parts)
    pts, _, _ = sample_surface(merged, n_points, rng)
    pts32 = pts.astype(np.float32)
    cloud = LabeledPointCloud(pts32, nearest_part(pts32, parts), psi, model.name, split)
    tuples = None
    if with_sdf:
        tuples, _ = build_sdf_tuples(merged, owner, psi, sdf_tuples, rng)
    return cloud, tuples


def generate_abnormal(model, psi, spec, norm_params, seed, split="seen", n_points=POINTS_PER_CLOUD,
                      n_dense=DENSE_POINTS, alpha=TAU_ALPHA):
    """Abnormal cloud at ``psi`` carrying the defect ``spec`` (rest frame).

    Returns ``(cloud, dense)``; the dense cloud stays in model units. Raises
    :class:`AnomalyRejectedError` (retryable) when the deformation is invalid
    or the final cloud has no positives or more than 30% of them.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    normal_parts = pose_model(model, psi)
    posed_spec = spec.transformed(model.part_transform(spec.target_part, psi))
    parts, modified = inject_anomaly(normal_parts, posed_spec)
    normal_mesh, _ = merge_meshes(normal_parts)
    deformed, owner = merge_meshes(parts)

    pts, face, _ = sample_surface(deformed, n_dense, rng)
    part_ids = owner[face].astype(np.uint8)
    labels = np.zeros(n_dense, dtype=np.uint8)
    # faces the defect left untouched coincide with the normal mesh
    offset = sum(len(p.faces) for p in parts[: spec.target_part])
    local = face - offset
    touched = (owner[face] == spec.target_part) & modified[np.clip(local, 0, len(modified) - 1)]
    labels[touched] = label_anomaly(pts[touched], normal_mesh, alpha)

    order = rng.permutation(n_dense)[:n_points]
    final_labels = labels[order]
    positives = int(final_labels.sum())
    if positives < 1 or positives > MAX_POSITIVE_FRACTION * n_points:
        raise AnomalyRejectedError(f"defect covers {positives} of {n_points} points")
    dense = DenseCloud(pts, part_ids, labels)
    cloud = LabeledPointCloud(
        normalize(pts[order], norm_params),
        part_ids[order],
        psi,
        model.name,
        split,
        is_abnormal=True,
        anomaly_labels=final_labels,
        kind=spec.kind,
    )
    return cloud, dense
