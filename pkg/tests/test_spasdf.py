import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artik.errors import ContractError, InvalidConfigError, NumericError
from artik.spasdf import (
    ABLATIONS,
    SpasdfConfig,
    SpasdfModel,
    articulation_encode,
    forward_np,
    forward_tape,
    init_params,
    loss_np,
    loss_tape,
    positional_encode,
)
from artik.tensor import backward

from conftest import generic_params
from oracles import grad_mismatch, refined_difference

TINY = dict(latent_dim=4, fourier_freqs=2, pe_freqs=2, shape_width=8, artic_width=8, pose_width=8,
            part_count=3, psi_range=(0.0, 90.0))


def tiny_batch(rng, n=12):
    x = rng.uniform(-1, 1, size=(n, 3))
    s = rng.uniform(-0.15, 0.15, size=n)
    part = rng.integers(0, 3, n)
    return x, s, part


def test_positional_encoding_at_origin():
    enc = positional_encode(np.zeros(3), 3)
    assert enc.shape == (1, 18)
    assert np.all(enc[0, 0::2] == 0.0) and np.all(enc[0, 1::2] == 1.0)


def test_positional_encoding_layout():
    enc = positional_encode([0.5, 0.0, 0.0], 1)[0]
    assert enc[0] == pytest.approx(1.0) and enc[1] == pytest.approx(0.0, abs=1e-16)
    enc2 = positional_encode([0.0, 0.25, 0.0], 2)[0]
    # k=1, axis 1 sits at offset 6 + 2
    assert enc2[8] == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1.1, 1.1), min_size=3, max_size=3))
def test_positional_encoding_bounded(x):
    assert np.all(np.abs(positional_encode(x, 10)) <= 1.0)


def test_articulation_encoding_examples():
    assert np.allclose(articulation_encode(0.0, (0.0, 10.0), 3)[0::2], 0.0)
    assert np.allclose(articulation_encode(0.0, (0.0, 10.0), 3)[1::2], 1.0)
    # quarter of the range maps to pi/2
    assert np.allclose(articulation_encode(2.5, (0.0, 10.0), 2), [1.0, 0.0, 0.0, -1.0], atol=1e-15)


def test_articulation_encoding_range_contract():
    with pytest.raises(ContractError):
        articulation_encode(11.0, (0.0, 10.0), 2)
    assert articulation_encode(11.0, (0.0, 10.0), 2, strict=False).shape == (4,)


@pytest.mark.parametrize("name", sorted(ABLATIONS))
def test_forward_shapes_for_every_ablation(name):
    cfg = SpasdfConfig(**TINY).with_flags(**ABLATIONS[name])
    params = init_params(cfg, np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(7, 3))
    sdf, logits = forward_np(params, cfg, x, 30.0)
    assert sdf.shape == (7,)
    if cfg.use_part_head:
        assert logits.shape == (7, 3)
    else:
        assert logits is None and "part.W" not in params
    assert ("pose.0.W" in params) == cfg.use_pose
    assert ("phi" in params) == cfg.use_shape_latent


def test_forward_is_pure():
    cfg = SpasdfConfig(**TINY)
    params = generic_params(cfg, np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(5, 3))
    a = forward_np(params, cfg, x, 10.0)[0]
    b = forward_np(params, cfg, x, 10.0)[0]
    assert np.array_equal(a, b)


def test_initial_predictions_start_inside_clamp_band():
    cfg = SpasdfConfig(**TINY)
    model = SpasdfModel.initialize(cfg, np.random.default_rng(3))
    assert not model.params["fa.out.W"].any() and not model.params["fa.out.b"].any()
    x = np.random.default_rng(4).normal(size=(16, 3))
    assert np.array_equal(model.predict(x, 45.0), np.zeros(16))


def test_latent_code_influences_output():
    cfg = SpasdfConfig(**TINY)
    model = SpasdfModel(cfg, generic_params(cfg, np.random.default_rng(3)))
    vals = model.values()
    x = np.random.default_rng(4).normal(size=(16, 3))
    sdf, _ = forward_tape(vals, cfg, x, 45.0)
    from artik.tensor import sum_sq

    backward(sum_sq(sdf), list(vals.values()))
    assert np.linalg.norm(vals["phi"].grad) > 0


def test_tape_and_numpy_losses_agree():
    rng = np.random.default_rng(5)
    cfg = SpasdfConfig(**TINY)
    params = generic_params(cfg, rng)
    params["phi"] = rng.normal(size=4)
    x, s, part = tiny_batch(rng)
    model = SpasdfModel(cfg, params)
    total, comps = loss_tape(model.values(), cfg, x, s, part, 20.0)
    ref = loss_np(params, cfg, x, s, part, 20.0)
    for k, v in comps.items():
        assert v.item() == pytest.approx(ref[k], abs=1e-12)
    assert total.item() == pytest.approx(ref["total"], abs=1e-12)


def test_zero_loss_when_prediction_is_exact():
    cfg = SpasdfConfig(**TINY, lambda_latent=0.0, lambda_part=0.0)
    params = generic_params(cfg, np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(6, 3))
    s = forward_np(params, cfg, x, 5.0)[0]
    assert loss_np(params, cfg, x, s, np.zeros(6, int), 5.0)["total"] == 0.0


def test_zero_latent_has_zero_penalty():
    cfg = SpasdfConfig(**TINY)
    params = init_params(cfg, np.random.default_rng(0))
    params["phi"][:] = 0.0
    x, s, part = tiny_batch(np.random.default_rng(2))
    assert loss_np(params, cfg, x, s, part, 5.0)["l_latent"] == 0.0


def test_nan_input_names_layer():
    cfg = SpasdfConfig(**TINY)
    params = init_params(cfg, np.random.default_rng(0))
    params["fs.1.W"][0, 0] = np.nan
    with pytest.raises(NumericError, match="fs.1"):
        forward_np(params, cfg, np.ones((2, 3)), 1.0)


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        SpasdfConfig(latent_dim=0)
    with pytest.raises(InvalidConfigError):
        SpasdfConfig(lambda_part=-1.0)
    cfg = SpasdfConfig(**TINY)
    assert SpasdfConfig.from_dict(cfg.to_dict()) == cfg


def test_model_checkpoint_round_trip(tmp_path):
    cfg = SpasdfConfig(**TINY)
    model = SpasdfModel(cfg, generic_params(cfg, np.random.default_rng(0)), {"category": "hinge"})
    model.save(tmp_path / "m.bin")
    back = SpasdfModel.load(tmp_path / "m.bin")
    assert back.cfg == cfg and back.meta == {"category": "hinge"}
    x = np.random.default_rng(1).normal(size=(4, 3))
    assert np.array_equal(back.predict(x, 3.0), model.predict(x, 3.0))


def loss_gradient_mismatches(seed, flags=None):
    """Taped gradients of the full loss vs refined central differences of the numpy loss."""
    rng = np.random.default_rng(seed)
    cfg = SpasdfConfig(**TINY).with_flags(**(flags or {}))
    params = generic_params(cfg, rng)
    if "phi" in params:
        params["phi"] = rng.normal(0, 0.5, size=cfg.latent_dim)
    x, s, part = tiny_batch(rng)
    psi = float(rng.uniform(0, 90))
    model = SpasdfModel(cfg, params)
    vals = model.values()
    total, _ = loss_tape(vals, cfg, x, s, part, psi)
    backward(total, list(vals.values()))
    bad = {}
    for name, v in vals.items():
        fd = refined_difference(lambda: loss_np(params, cfg, x, s, part, psi)["total"], params[name])
        idx = grad_mismatch(v.grad, fd)
        if len(idx):
            bad[name] = idx
    return bad


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(sorted(ABLATIONS)))
def test_loss_gradients_match_finite_differences(seed, ablation):
    assert loss_gradient_mismatches(seed, ABLATIONS[ablation]) == {}
