"""Auto-decoder training of the SDF network on the train split."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import InvalidConfigError, InvalidInputError, NumericError, TrainingDivergedError
from .rng import rng_for
from .spasdf import SpasdfModel, loss_np, loss_tape
from .tensor import Adam, backward

log = logging.getLogger(__name__)

LOG_COLUMNS = ("epoch", "l_sdf", "l_latent", "l_part", "total")
VAL_BATCH = 4096


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 800
    lr: float = 1e-4
    batch_size: int = 4096
    batches_per_sample: int = 1
    seed: int = 0
    checkpoint_every: int = 100
    use_pe: bool = True
    use_shape_latent: bool = True
    use_pose: bool = True
    use_part_head: bool = True
    clamp: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidConfigError("epochs must be >= 1")
        if self.batch_size < 1 or self.batches_per_sample < 1:
            raise InvalidConfigError("batch sizes must be >= 1")
        if not self.lr > 0:
            raise InvalidConfigError("learning rate must be positive")

    @property
    def flags(self):
        return {k: getattr(self, k) for k in ("use_pe", "use_shape_latent", "use_pose", "use_part_head")}

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfigError(f"unknown train config keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainResult:
    model: SpasdfModel
    checkpoint: Path | None
    history: list = field(default_factory=list)
    val_initial: float = float("nan")
    val_history: list = field(default_factory=list)
    seconds: float = 0.0


def _model_config(manifest, model_cfg, train_cfg):
    clamp = model_cfg.clamp if train_cfg.clamp else None
    if train_cfg.clamp and clamp is None:
        clamp = 0.1
    lo, hi = float(manifest.joint["range_min"]), float(manifest.joint["range_max"])
    return model_cfg.with_flags(
        psi_range=(lo, hi), part_count=int(manifest.part_count), clamp=clamp, **train_cfg.flags
    )


def load_training_data(manifest):
    entries = manifest.select("train")
    if not entries:
        raise InvalidInputError("manifest has no train-split samples")
    sets = [manifest.load_sdf(e) for e in entries]
    return [(e.psi, s.points.astype(np.float64), s.sdf.astype(np.float64), s.part_ids.astype(np.int64))
            for e, s in zip(entries, sets)]


def validation_batch(data, seed, size=VAL_BATCH):
    rng = rng_for(seed, "validation")
    psi, x, s, part = data[0]
    idx = np.sort(rng.choice(len(s), size=min(size, len(s)), replace=False))
    return psi, x[idx], s[idx], part[idx]


def train(manifest, model_cfg, train_cfg, out=None, log_path=None, category=None, data=None):
    """Fit weights and the latent code; returns a :class:`TrainResult`.

    ``out`` receives the checkpoint every ``checkpoint_every`` epochs and at
    the end (atomically replaced). ``log_path`` receives one CSV row of mean
    loss components per epoch.
    """
    if category is not None and category != manifest.category:
        raise InvalidInputError(f"manifest holds category {manifest.category!r}, not {category!r}")
    cfg = _model_config(manifest, model_cfg, train_cfg)
    data = data if data is not None else load_training_data(manifest)
    seed = train_cfg.seed
    meta = {
        "category": manifest.category,
        "seed": seed,
        "epoch": 0,
        "train": train_cfg.to_dict(),
        "normalization": manifest.load_normalization().to_dict() if manifest.root else None,
        "train_interval": list(manifest.train_interval),
    }
    model = SpasdfModel.initialize(cfg, rng_for(seed, "init"), meta)
    values = model.values()
    order_names = list(values)
    opt = Adam([values[k] for k in order_names], lr=train_cfg.lr)
    val = validation_batch(data, seed)
    result = TrainResult(model, Path(out) if out else None)
    result.val_initial = loss_np(model.params, cfg, val[1], val[2], val[3], val[0])["total"]

    log_fh = None
    writer = None
    if log_path:
        log_fh = open(log_path, "w", newline="")
        writer = csv.writer(log_fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
    t0 = time.perf_counter()
    last_ck = None
    try:
        for epoch in range(1, train_cfg.epochs + 1):
            rng = rng_for(seed, "epoch", epoch)
            jobs = np.repeat(np.arange(len(data)), train_cfg.batches_per_sample)
            jobs = jobs[rng.permutation(len(jobs))]
            sums = np.zeros(4)
            for j in jobs:
                psi, x, s, part = data[j]
                n = min(train_cfg.batch_size, len(s))
                idx = rng.choice(len(s), size=n, replace=False)
                opt.zero_grad()
                try:
                    total, comps = loss_tape(values, cfg, x[idx], s[idx], part[idx], psi)
                except NumericError as exc:
                    raise TrainingDivergedError(f"epoch {epoch}: {exc}", last_checkpoint=last_ck) from exc
                if not np.isfinite(total.data):
                    raise TrainingDivergedError(f"epoch {epoch}: loss is not finite", last_checkpoint=last_ck)
                backward(total, opt.params)
                try:
                    opt.step()
                except TrainingDivergedError as exc:
                    raise TrainingDivergedError(f"epoch {epoch}: {exc}", last_checkpoint=last_ck) from exc
                sums += [comps["l_sdf"].item(), comps["l_latent"].item(), comps["l_part"].item(), total.item()]
            means = sums / len(jobs)
            result.history.append((epoch, *means))
            if writer:
                writer.writerow([epoch, *(repr(float(m)) for m in means)])
            model.meta["epoch"] = epoch
            if epoch % 10 == 0 or epoch == train_cfg.epochs:
                v = loss_np(model.params, cfg, val[1], val[2], val[3], val[0])["total"]
                result.val_history.append((epoch, v))
                log.info("epoch %d loss %.5f val %.5f", epoch, means[3], v)
            if out and (epoch % train_cfg.checkpoint_every == 0 or epoch == train_cfg.epochs):
                model.save(out)
                last_ck = str(out)
    finally:
        if log_fh:
            log_fh.close()
    result.seconds = time.perf_counter() - t0
    return result
