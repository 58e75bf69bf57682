import json
import math

import numpy as np
import pytest

from artik.datagen import (
    AnomalySpec,
    DenseCloud,
    LabeledPointCloud,
    Manifest,
    SdfTupleSet,
    build_sdf_tuples,
    build_splits,
    builtin_category,
    fit_category_normalization,
    generate_abnormal,
    generate_dataset,
    generate_normal,
    inject_anomaly,
    label_anomaly,
    tau_for,
)
from artik.datagen.anomaly import KINDS, falloff, sample_anomaly_spec
from artik.errors import InvalidConfigError, InvalidInputError
from artik.kinematics import pose_model
from artik.mesh.primitives import box
from artik.mesh.query import unsigned_distance
from artik.mesh.sampling import sample_surface
from artik.mesh.trimesh import merge_meshes

from oracles import brute_signed, brute_unsigned

SMALL = dict(n_train=4, n_seen=2, n_unseen=2, kinds=["dent", "missing"], points_per_cloud=1024,
             dense_points=8192, sdf_tuples=2000)


@pytest.fixture(scope="module")
def hinge():
    model, cfg = builtin_category("hinge")
    norm = fit_category_normalization(model, np.linspace(0, 251.3, 40))
    return model, cfg, norm


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    return generate_dataset("builtin:hinge", out, seed=3, overrides=SMALL)


def plate():
    return box((0.0, 0.0, 0.0), (1.0, 1.0, 0.2), cell=0.1)


def top_spec(kind, magnitude=0.03, radius=0.25):
    # columns: surface normal, then two tangents
    frame = ((0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (1.0, 0.0, 0.0))
    return AnomalySpec(kind, (0.5, 0.5, 0.2), radius, magnitude, 0, 11, frame)


@pytest.mark.parametrize("kind", KINDS)
def test_zero_magnitude_is_identity(kind):
    parts = [plate()]
    out, modified = inject_anomaly(parts, top_spec(kind, magnitude=0.0))
    assert out[0] == parts[0] and not modified.any()


def test_dent_moves_center_by_magnitude():
    mesh = plate()
    idx = int(np.argmin(np.linalg.norm(mesh.vertices - [0.5, 0.5, 0.2], axis=1)))
    out, _ = inject_anomaly([mesh], top_spec("dent"))
    assert np.allclose(out[0].vertices[idx], [0.5, 0.5, 0.17], atol=1e-15)
    bulge, _ = inject_anomaly([mesh], top_spec("bulge"))
    assert bulge[0].vertices[idx][2] == pytest.approx(0.23, abs=1e-15)


@pytest.mark.parametrize("kind", [k for k in KINDS if k != "missing"])
def test_vertices_beyond_radius_untouched(kind):
    mesh = plate()
    out, modified = inject_anomaly([mesh], top_spec(kind))
    far = np.linalg.norm(mesh.vertices - [0.5, 0.5, 0.2], axis=1) >= 0.25
    assert np.array_equal(out[0].vertices[far], mesh.vertices[far])
    assert modified.any()


def test_missing_material_stays_watertight():
    out, modified = inject_anomaly([plate()], top_spec("missing", magnitude=0.05))
    assert out[0].is_watertight and modified.any()


def test_falloff_profile():
    assert falloff(0.0, 2.0) == 1.0
    assert falloff(1.0, 2.0) == pytest.approx(0.5)
    assert falloff(2.0, 2.0) == 0.0


def test_spec_validation_and_round_trip():
    with pytest.raises(InvalidInputError):
        AnomalySpec("scratch", (0, 0, 0), 1.0, 1.0, 0, 0)
    with pytest.raises(InvalidInputError):
        AnomalySpec("dent", (0, 0, 0), 0.0, 1.0, 0, 0)
    spec = sample_anomaly_spec([plate()], "bend", np.random.default_rng(0), (0.1, 0.2), (0.01, 0.02))
    assert AnomalySpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_tau_for_unit_box():
    assert tau_for(box((0, 0, 0), (1, 1, 1))) == pytest.approx(0.001 * math.sqrt(3), abs=1e-18)


def test_points_on_normal_mesh_are_unlabeled():
    mesh = box((0, 0, 0), (1, 2, 3), cell=0.5)
    pts, _, _ = sample_surface(mesh, 5000, 0)
    assert not label_anomaly(pts, mesh).any()


def test_labels_match_exhaustive_scan(hinge):
    model = hinge[0]
    normal = pose_model(model, 40.0)
    spec = sample_anomaly_spec(model.parts, "bulge", np.random.default_rng(5), (0.15, 0.22), (0.05, 0.08))
    posed = spec.transformed(model.part_transform(spec.target_part, 40.0))
    parts, _ = inject_anomaly(normal, posed)
    normal_mesh, _ = merge_meshes(normal)
    pts, _, _ = sample_surface(parts[spec.target_part], 2000, 1)
    tau = tau_for(normal_mesh)
    expect = brute_unsigned(normal_mesh.vertices, normal_mesh.faces, pts) > tau
    got = label_anomaly(pts, normal_mesh)
    assert np.array_equal(got.astype(bool), expect)
    assert expect.any() and not expect.all()


def test_sdf_tuples_match_brute_force(hinge):
    model, _, norm = hinge
    from artik.datagen.generate import _normalized_parts

    parts = _normalized_parts(pose_model(model, 75.0), norm)
    merged, owner = merge_meshes(parts)
    tuples, sdf64 = build_sdf_tuples(merged, owner, 75.0, 1000, np.random.default_rng(2))
    pick = np.random.default_rng(3).choice(len(tuples), 200, replace=False)
    ref = brute_signed(merged.vertices, merged.faces, tuples.points[pick].astype(np.float64))
    assert np.max(np.abs(sdf64[pick] - ref)) < 1e-9
    assert np.array_equal(tuples.sdf, sdf64.astype(np.float32))
    on = tuples.class_slice("on_surface")
    assert np.all(np.abs(sdf64[on]) < 1e-6)
    assert all(tuples.counts[k] > 0 for k in tuples.counts)
    assert tuples.counts == {"on_surface": 400, "near_surface": 400, "bbox_uniform": 100, "global_uniform": 100}


def test_generate_normal_is_deterministic(hinge, tmp_path):
    model, _, norm = hinge
    files = []
    for i in range(2):
        cloud, tuples = generate_normal(model, 12.5, norm, 9, n_points=2048, sdf_tuples=500)
        cloud.save(tmp_path / f"c{i}.ply")
        tuples.save(tmp_path / f"s{i}.asdf")
        files.append(((tmp_path / f"c{i}.ply").read_bytes(), (tmp_path / f"s{i}.asdf").read_bytes()))
    assert files[0] == files[1]
    assert len(cloud) == 2048 and set(np.unique(cloud.part_ids)) == {0, 1}
    assert np.all(np.abs(cloud.points) <= 1.0 + 1e-6)


def test_generate_abnormal_default_sizes(hinge):
    model, _, norm = hinge
    spec = sample_anomaly_spec(model.parts, "dent", np.random.default_rng(4), (0.15, 0.22), (0.05, 0.08))
    cloud, dense = generate_abnormal(model, 100.0, spec, norm, 1)
    assert len(cloud) == 16384 and len(dense) == 100_000
    positives = int(cloud.anomaly_labels.sum())
    assert 1 <= positives <= 0.3 * 16384
    assert cloud.is_abnormal and cloud.kind == "dent"


def test_labels_outside_support_are_zero(hinge):
    model, _, norm = hinge
    spec = sample_anomaly_spec(model.parts, "distortion", np.random.default_rng(8), (0.15, 0.22), (0.05, 0.08))
    _, dense = generate_abnormal(model, 60.0, spec, norm, 2, n_dense=20000)
    center = spec.transformed(model.part_transform(spec.target_part, 60.0)).center
    # a displaced vertex moves at most the magnitude, so the deformed support stays inside R + m
    far = np.linalg.norm(dense.points - np.asarray(center), axis=1) > spec.radius + spec.magnitude
    assert far.any() and not dense.labels[far].any()


def test_labels_follow_the_part_across_poses(hinge):
    """Same spec and seed at two poses: identical source points, labels equal outside the tau band."""
    model, _, norm = hinge
    spec = AnomalySpec("dent", (0.5, 0.0, 1.06), 0.2, 0.06, 1, 3)
    out = {}
    for psi in (30.0, 200.0):
        _, dense = generate_abnormal(model, psi, spec, norm, 21, n_dense=20000)
        normal_mesh, _ = merge_meshes(pose_model(model, psi))
        d = unsigned_distance(normal_mesh, dense.points)
        back = dense.points.copy()
        moving = dense.part_ids == 1
        back[moving] = model.part_transform(1, psi).inverse().apply(back[moving])
        out[psi] = (back, dense.labels, d, tau_for(normal_mesh))
    (p1, l1, d1, t1), (p2, l2, d2, t2) = out[30.0], out[200.0]
    # dense positions are stored as float32
    assert np.allclose(p1, p2, atol=1e-6)
    lo, hi = min(t1, t2), max(t1, t2)
    eps = 1e-6
    clear = ((d1 < lo - eps) | (d1 > hi + eps)) & ((d2 < lo - eps) | (d2 > hi + eps))
    assert np.array_equal(l1[clear], l2[clear])
    assert l1.sum() > 0


def test_build_splits_partition(hinge):
    _, cfg, _ = hinge
    m = build_splits(cfg, 7)
    lo, top = m.train_interval
    train = [e.psi for e in m.select("train")]
    seen = [e.psi for e in m.select("seen")]
    unseen = [e.psi for e in m.select("unseen")]
    assert len(train) == 40 and len(set(seen)) == 20 and len(set(unseen)) == 20
    assert top == pytest.approx(0.7 * 359)
    assert all(lo <= p <= top for p in seen)
    assert all(top < p <= 359 for p in unseen)
    assert not set(train) & (set(seen) | set(unseen))
    assert len(m.select("seen", abnormal=True)) == 20 * 6
    assert m.select("train", abnormal=True) == []


def test_build_splits_rejects_narrow_range(hinge):
    _, cfg, _ = hinge
    bad = json.loads(json.dumps(cfg))
    bad["joint"]["range_max"] = 1e-12
    with pytest.raises(InvalidConfigError):
        build_splits(bad, 0)


def test_manifest_round_trip(hinge):
    m = build_splits(hinge[1], 5)
    back = Manifest.from_dict(json.loads(m.to_json()))
    assert back.to_json() == m.to_json()
    assert back.entries == m.entries


def test_small_dataset_files(small_dataset):
    m = small_dataset
    root = m.root
    assert (root / "manifest.json").exists() and (root / "normalization.json").exists()
    for e in m.entries:
        cloud = m.load_cloud(e)
        assert len(cloud) == 1024 and cloud.split == e.split and cloud.is_abnormal == e.abnormal
        assert cloud.psi == e.psi
        if e.abnormal:
            assert cloud.anomaly_labels.sum() == e.positives > 0
            assert len(m.load_dense(e)) == 8192
        if e.sdf:
            assert len(m.load_sdf(e)) == 2000
    assert Manifest.load(root).to_json() == m.to_json()


def test_dataset_generation_is_deterministic(small_dataset, tmp_path):
    again = generate_dataset("builtin:hinge", tmp_path, seed=3, overrides=SMALL)
    for e in again.entries:
        for rel in (e.cloud, e.sdf, e.dense):
            if rel:
                assert (tmp_path / rel).read_bytes() == (small_dataset.root / rel).read_bytes()
    assert (tmp_path / "manifest.json").read_bytes() == (small_dataset.root / "manifest.json").read_bytes()


def test_record_files_round_trip(small_dataset, tmp_path):
    m = small_dataset
    for e in m.entries:
        cloud = m.load_cloud(e)
        cloud.save(tmp_path / "c.ply")
        assert (tmp_path / "c.ply").read_bytes() == (m.root / e.cloud).read_bytes()
        assert LabeledPointCloud.load(tmp_path / "c.ply") == cloud
        if e.sdf:
            t = m.load_sdf(e)
            assert SdfTupleSet.from_bytes(t.to_bytes()) == t
            assert t.to_bytes() == (m.root / e.sdf).read_bytes()
        if e.dense:
            d = m.load_dense(e)
            d.save(tmp_path / "d.ply")
            assert DenseCloud.load(tmp_path / "d.ply") == d


def test_train_cloud_rejects_labels():
    with pytest.raises(InvalidInputError):
        LabeledPointCloud(np.zeros((2, 3)), [0, 0], 0.0, "x", "train", True, [0, 1])
