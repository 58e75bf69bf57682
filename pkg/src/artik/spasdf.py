"""Pose-conditioned SDF network with a category shape latent and a part head.

Two evaluation paths share one parameter dict (name -> float64 array):

* ``forward_tape`` / ``loss_tape`` build an autodiff graph for training;
* ``forward_np`` / ``loss_np`` are plain numpy, used for inference and as an
  independent cross-check of the taped version.

Row-constant inputs (the latent code and the pose embedding) are never tiled
onto every row. Their slice of the first-layer weight is applied once and
added as a row bias, which is the same affine map as concatenating them.

Encoding layouts:

* ``positional_encode``: k-major, then axis, then (sin, cos), length 6K.
* ``articulation_encode``: k-major, then (sin, cos), length 2L, after mapping
  psi linearly from the joint range onto [0, 2*pi].
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import ContractError, InvalidConfigError, NumericError
from .tensor import autodiff as ad
from .tensor import kaiming_uniform

LATENT_INIT_STD = 0.01


@dataclass(frozen=True)
class SpasdfConfig:
    latent_dim: int = 256
    fourier_freqs: int = 16
    pe_freqs: int = 10
    shape_width: int = 256
    shape_layers: int = 5
    skip_layer: int = 2
    artic_width: int = 256
    artic_layers: int = 4
    pose_width: int = 64
    part_count: int = 2
    lambda_latent: float = 1e-4
    lambda_part: float = 0.1
    psi_range: tuple = (0.0, 1.0)
    clamp: float | None = 0.1
    use_pe: bool = True
    use_shape_latent: bool = True
    use_pose: bool = True
    use_part_head: bool = True

    def __post_init__(self):
        for name in ("latent_dim", "fourier_freqs", "pe_freqs", "shape_width", "shape_layers",
                     "artic_width", "artic_layers", "pose_width", "part_count"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.lambda_latent < 0 or self.lambda_part < 0:
            raise InvalidConfigError("loss weights must be non-negative")
        if not 0 <= self.skip_layer < self.shape_layers:
            raise InvalidConfigError(f"skip_layer must index one of the {self.shape_layers} shape layers")
        lo, hi = (float(v) for v in self.psi_range)
        if not lo < hi:
            raise InvalidConfigError(f"psi_range [{lo}, {hi}] is empty")
        if self.clamp is not None and not self.clamp > 0:
            raise InvalidConfigError("clamp must be positive or None")
        object.__setattr__(self, "psi_range", (lo, hi))

    def to_dict(self):
        d = asdict(self)
        d["psi_range"] = list(self.psi_range)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfigError(f"unknown model config keys {sorted(unknown)}")
        d = dict(d)
        if "psi_range" in d:
            d["psi_range"] = tuple(d["psi_range"])
        return cls(**d)

    @property
    def input_width(self):
        """Width of the per-point input [x, PE(x)]."""
        return 3 + (6 * self.pe_freqs if self.use_pe else 0)

    def with_flags(self, **flags):
        return replace(self, **flags)


ABLATIONS = {
    "A0": dict(use_pe=False, use_shape_latent=False, use_pose=False, use_part_head=False),
    "A1": dict(use_pe=True, use_shape_latent=False, use_pose=False, use_part_head=False),
    "A2": dict(use_pe=False, use_shape_latent=True, use_pose=False, use_part_head=False),
    "A3": dict(use_pe=True, use_shape_latent=True, use_pose=False, use_part_head=False),
    "A4": dict(use_pe=True, use_shape_latent=False, use_pose=True, use_part_head=False),
    "full": dict(use_pe=True, use_shape_latent=True, use_pose=True, use_part_head=True),
}


# -- encodings -------------------------------------------------------------------

def positional_encode(x, K):
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    ang = (2.0 ** np.arange(K) * np.pi)[:, None, None] * x.T[None]  # (K, 3, n)
    enc = np.stack([np.sin(ang), np.cos(ang)], axis=2)  # (K, 3, 2, n)
    return enc.reshape(6 * K, -1).T


def normalized_psi(psi, psi_range):
    lo, hi = psi_range
    return 2.0 * np.pi * (float(psi) - lo) / (hi - lo)


def articulation_encode(psi, psi_range, L, strict=True):
    lo, hi = psi_range
    if strict and not lo <= psi <= hi:
        raise ContractError(f"psi {psi} outside the model's range [{lo}, {hi}]")
    ang = 2.0 ** np.arange(L) * normalized_psi(psi, psi_range)
    return np.stack([np.sin(ang), np.cos(ang)], axis=1).reshape(-1)


def point_inputs(x, cfg):
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    if cfg.use_pe:
        return np.concatenate([x, positional_encode(x, cfg.pe_freqs)], axis=1)
    return x


# -- parameters --------------------------------------------------------------------

def _layer_inputs(cfg):
    """(name, per-point fan-in, row-constant fan-in) for the shape layers."""
    w, u = cfg.shape_width, cfg.input_width
    d = cfg.latent_dim if cfg.use_shape_latent else 0
    out = []
    for i in range(cfg.shape_layers):
        if i == 0:
            out.append((u, d))
        elif i == cfg.skip_layer:
            out.append((w + u, d))
        else:
            out.append((w, 0))
    return out


def init_params(cfg, rng):
    p = {}
    if cfg.use_shape_latent:
        p["phi"] = rng.normal(0.0, LATENT_INIT_STD, size=cfg.latent_dim)
    w = cfg.shape_width
    for i, (fan_pt, fan_row) in enumerate(_layer_inputs(cfg)):
        full = kaiming_uniform(rng, fan_pt + fan_row, w)
        p[f"fs.{i}.W"] = full[:fan_pt]
        if fan_row:
            p[f"fs.{i}.Wphi"] = full[fan_pt:]
        p[f"fs.{i}.b"] = np.zeros(w)
    if cfg.use_pose:
        p["pose.0.W"] = kaiming_uniform(rng, 2 * cfg.fourier_freqs, cfg.pose_width)
        p["pose.0.b"] = np.zeros(cfg.pose_width)
        p["pose.1.W"] = kaiming_uniform(rng, cfg.pose_width, cfg.pose_width)
        p["pose.1.b"] = np.zeros(cfg.pose_width)
    wa = cfg.artic_width
    fan_pt = cfg.input_width + w
    fan_row = cfg.pose_width if cfg.use_pose else 0
    full = kaiming_uniform(rng, fan_pt + fan_row, wa)
    p["fa.0.W"] = full[:fan_pt]
    if fan_row:
        p["fa.0.Wpose"] = full[fan_pt:]
    p["fa.0.b"] = np.zeros(wa)
    for i in range(1, cfg.artic_layers):
        p[f"fa.{i}.W"] = kaiming_uniform(rng, wa, wa)
        p[f"fa.{i}.b"] = np.zeros(wa)
    # zero head: every prediction starts inside the clamp band, where the
    # clamped L1 has a gradient; a Kaiming head can start wholly outside it
    p["fa.out.W"] = np.zeros((wa, 1))
    p["fa.out.b"] = np.zeros(1)
    if cfg.use_part_head:
        p["part.W"] = kaiming_uniform(rng, w, cfg.part_count)
        p["part.b"] = np.zeros(cfg.part_count)
    return p


def expected_shapes(cfg):
    return {k: v.shape for k, v in init_params(cfg, np.random.default_rng(0)).items()}


def check_params(params, cfg):
    want = expected_shapes(cfg)
    if set(want) != set(params):
        raise InvalidConfigError(
            f"parameter names do not match the config: missing {sorted(set(want) - set(params))}, "
            f"unexpected {sorted(set(params) - set(want))}"
        )
    for k, shape in want.items():
        if params[k].shape != shape:
            raise InvalidConfigError(f"parameter {k} has shape {params[k].shape}, config wants {shape}")


def _finite(arr, layer):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in layer {layer}")
    return arr


# -- taped path ----------------------------------------------------------------------

def forward_tape(values, cfg, x, psi):
    """SDF (n,) and part logits (n, P) or None, as graph nodes."""
    u = ad.constant(point_inputs(x, cfg))
    phi = ad.reshape(values["phi"], (1, -1)) if cfg.use_shape_latent else None
    h = u
    for i, (_, fan_row) in enumerate(_layer_inputs(cfg)):
        inp = ad.concat([h, u]) if i == cfg.skip_layer and i > 0 else h
        row = values[f"fs.{i}.b"]
        if fan_row:
            row = ad.add(ad.reshape(ad.matmul(phi, values[f"fs.{i}.Wphi"]), (-1,)), row)
        h = ad.relu(ad.add_bias(ad.matmul(inp, values[f"fs.{i}.W"]), row))
        _finite(h.data, f"fs.{i}")
    hs = h
    row = values["fa.0.b"]
    if cfg.use_pose:
        g = ad.constant(articulation_encode(psi, cfg.psi_range, cfg.fourier_freqs).reshape(1, -1))
        e = ad.relu(ad.add_bias(ad.matmul(g, values["pose.0.W"]), values["pose.0.b"]))
        e = ad.relu(ad.add_bias(ad.matmul(e, values["pose.1.W"]), values["pose.1.b"]))
        _finite(e.data, "pose")
        row = ad.add(ad.reshape(ad.matmul(e, values["fa.0.Wpose"]), (-1,)), row)
    a = ad.relu(ad.add_bias(ad.matmul(ad.concat([u, hs]), values["fa.0.W"]), row))
    for i in range(1, cfg.artic_layers):
        a = ad.relu(ad.add_bias(ad.matmul(a, values[f"fa.{i}.W"]), values[f"fa.{i}.b"]))
        _finite(a.data, f"fa.{i}")
    sdf = ad.reshape(ad.add_bias(ad.matmul(a, values["fa.out.W"]), values["fa.out.b"]), (-1,))
    _finite(sdf.data, "fa.out")
    logits = None
    if cfg.use_part_head:
        logits = ad.add_bias(ad.matmul(hs, values["part.W"]), values["part.b"])
    return sdf, logits


def loss_tape(values, cfg, x, sdf, part_ids, psi):
    """Total loss node and the three component nodes."""
    if len(sdf) == 0:
        raise ContractError("empty batch")
    pred, logits = forward_tape(values, cfg, x, psi)
    target = np.asarray(sdf, dtype=np.float64)
    if cfg.clamp is not None:
        pred = ad.clip(pred, -cfg.clamp, cfg.clamp)
        target = np.clip(target, -cfg.clamp, cfg.clamp)
    l_sdf = ad.mean_abs(ad.sub(pred, target))
    l_latent = ad.sum_sq(values["phi"]) if cfg.use_shape_latent else ad.constant(0.0)
    l_part = ad.softmax_cross_entropy(logits, part_ids) if cfg.use_part_head else ad.constant(0.0)
    total = ad.add(ad.add(l_sdf, ad.scale(l_latent, cfg.lambda_latent)), ad.scale(l_part, cfg.lambda_part))
    return total, {"l_sdf": l_sdf, "l_latent": l_latent, "l_part": l_part}


# -- plain numpy path ----------------------------------------------------------------

def _relu(z):
    return np.maximum(z, 0.0)


def shape_features(params, cfg, x):
    """psi-independent part of the network: (h_s, first-layer f_a pre-activation)."""
    u = point_inputs(x, cfg)
    phi = params.get("phi")
    h = u
    for i, (_, fan_row) in enumerate(_layer_inputs(cfg)):
        inp = np.concatenate([h, u], axis=1) if i == cfg.skip_layer and i > 0 else h
        bias = params[f"fs.{i}.b"] + (phi @ params[f"fs.{i}.Wphi"] if fan_row else 0.0)
        h = _finite(_relu(inp @ params[f"fs.{i}.W"] + bias), f"fs.{i}")
    pre = np.concatenate([u, h], axis=1) @ params["fa.0.W"]
    return h, pre


def pose_row(params, cfg, psi, strict=False):
    """The row added to the first f_a layer for articulation ``psi``."""
    row = params["fa.0.b"]
    if cfg.use_pose:
        g = articulation_encode(psi, cfg.psi_range, cfg.fourier_freqs, strict=strict)
        e = _relu(g @ params["pose.0.W"] + params["pose.0.b"])
        e = _relu(e @ params["pose.1.W"] + params["pose.1.b"])
        row = e @ params["fa.0.Wpose"] + row
    return row


def sdf_from_features(params, cfg, pre, psi):
    a = _relu(pre + pose_row(params, cfg, psi))
    for i in range(1, cfg.artic_layers):
        a = _relu(a @ params[f"fa.{i}.W"] + params[f"fa.{i}.b"])
    return _finite((a @ params["fa.out.W"] + params["fa.out.b"]).reshape(-1), "fa.out")


def forward_np(params, cfg, x, psi):
    hs, pre = shape_features(params, cfg, x)
    sdf = sdf_from_features(params, cfg, pre, psi)
    logits = hs @ params["part.W"] + params["part.b"] if cfg.use_part_head else None
    return sdf, logits


def loss_np(params, cfg, x, sdf, part_ids, psi):
    pred, logits = forward_np(params, cfg, x, psi)
    target = np.asarray(sdf, dtype=np.float64)
    if cfg.clamp is not None:
        pred = np.clip(pred, -cfg.clamp, cfg.clamp)
        target = np.clip(target, -cfg.clamp, cfg.clamp)
    l_sdf = float(np.mean(np.abs(pred - target)))
    l_latent = float(np.sum(params["phi"] ** 2)) if cfg.use_shape_latent else 0.0
    l_part = 0.0
    if cfg.use_part_head:
        z = logits - logits.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        l_part = float(-np.mean(logp[np.arange(len(z)), np.asarray(part_ids, dtype=np.int64)]))
    total = l_sdf + cfg.lambda_latent * l_latent + cfg.lambda_part * l_part
    return {"l_sdf": l_sdf, "l_latent": l_latent, "l_part": l_part, "total": total}


class SpasdfModel:
    """Config plus parameters, with the checkpoint metadata that travels along."""

    def __init__(self, cfg, params, meta=None):
        check_params(params, cfg)
        self.cfg = cfg
        self.params = params
        self.meta = dict(meta or {})

    @classmethod
    def initialize(cls, cfg, rng, meta=None):
        return cls(cfg, init_params(cfg, rng), meta)

    def values(self):
        """Fresh autodiff leaves that share memory with ``params``."""
        return {k: ad.Value(v, requires_grad=True, name=k) for k, v in self.params.items()}

    def predict(self, x, psi):
        return forward_np(self.params, self.cfg, x, psi)[0]

    def checkpoint_meta(self):
        return {**self.meta, "config": self.cfg.to_dict()}

    def save(self, path):
        from .tensor import save_checkpoint

        save_checkpoint(path, self.params, self.checkpoint_meta())

    @classmethod
    def load(cls, path):
        from .tensor import load_checkpoint

        params, meta = load_checkpoint(path)
        if "config" not in meta:
            from .errors import CheckpointMismatchError

            raise CheckpointMismatchError(f"{path} carries no model config")
        cfg = SpasdfConfig.from_dict(meta.pop("config"))
        return cls(cfg, params, meta)
