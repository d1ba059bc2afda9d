"""Training orchestration: discriminator pretraining, adversarial
training with the halving learning-rate schedule, checkpointing, and
full-pipeline inference.

Checkpoints are directories holding ``manifest.txt`` (array names with
shapes plus a config snapshot) and one little-endian float32 ``.f32``
blob per named parameter array; the canonical LDR histogram rides
along as one of the arrays so inference is self-contained.
"""

import math
import os
import shutil
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import losses as L
from .autodiff import Tensor
from .image import HdrImage, LuminanceMap, luminance, reproduce_color
from .nets import DiscriminatorSpec, DiscriminatorEnsemble, Generator, \
    GeneratorSpec
from .optim import Adam, lr_at_epoch
from .rangecompress import CompressionParams, Histogram, SearchConfig, \
    compress, estimate_lambda

DEFAULT_SATURATION = 0.5


class TrainingDiverged(RuntimeError):
    """A loss term went non-finite; the message names the term."""


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class Ablations:
    fixed_lambda: float = None
    raw_luminance: bool = False
    sqrt_skips: bool = True
    single_discriminator: bool = False


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    pretrain_epochs: int = 50
    lr_gen: float = 1e-4
    lr_disc: float = 1.5e-4
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 50
    batch_size: int = 4
    w_struct: float = 1.0
    seed: int = 0
    checkpoint_every: int = 50
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    ablations: Ablations = field(default_factory=Ablations)

    def __post_init__(self):
        if self.lr_gen <= 0 or self.lr_disc <= 0:
            raise ValueError("learning rates must be positive")
        if self.pretrain_epochs < 0 or self.epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.lr_decay_every < 1 or self.checkpoint_every < 1:
            raise ValueError("schedule periods must be >= 1")
        if self.checkpoint_every % self.lr_decay_every:
            raise ValueError("checkpoint period must be a multiple of the "
                             "decay period")


@dataclass(frozen=True)
class Checkpoint:
    config: TrainConfig
    epoch: int
    arrays: dict  # name -> float32 ndarray

    def histogram(self):
        bins = self.arrays.get("canonical_histogram")
        if bins is None:
            return None
        bins = bins.astype(np.float64)
        return Histogram(bins / bins.sum())


def build_models(cfg, dtype=np.float32):
    """Generator + discriminator ensemble with seeds derived from the
    config seed; returns (gen, disc, adversarial scales)."""
    root = np.random.default_rng(cfg.seed)
    gen_seed, disc_seed = root.integers(0, 2 ** 63 - 1, size=2)
    gen = Generator(GeneratorSpec(sqrt_skips=cfg.ablations.sqrt_skips),
                    seed=gen_seed, dtype=dtype)
    count = 1 if cfg.ablations.single_discriminator else 3
    disc = DiscriminatorEnsemble(DiscriminatorSpec(count=count),
                                 seed=disc_seed, dtype=dtype)
    scales = tuple(range(count))
    return gen, disc, scales


def _lambda_seed(base_seed, index):
    return int(np.random.SeedSequence((base_seed, 0x1A3B, index))
               .generate_state(1)[0])


def compressed_input(y, cfg, hist, lam_seed):
    """Map a raw luminance map to the network input in [0, 1] following
    the config (adaptive, fixed-level, or raw-normalized)."""
    if cfg.ablations.raw_luminance:
        peak = y.data.max()
        if peak <= 0:
            raise ValueError("cannot normalize an all-zero luminance map")
        return y.data / peak, None
    if cfg.ablations.fixed_lambda is not None:
        lam = float(cfg.ablations.fixed_lambda)
    else:
        if hist is None:
            raise ValueError("adaptive compression requires a canonical "
                             "histogram (or a fixed compression level)")
        lam = estimate_lambda(y, hist, SearchConfig(rng_seed=lam_seed))
    return compress(y, CompressionParams(lam)).data, lam


def prepare_hdr_batch(hdr_set, cfg, hist):
    """Per-image compressed luma, stacked to (N, 1, H, W) float32."""
    if not hdr_set:
        raise ValueError("HDR training set is empty")
    maps = []
    for i, img in enumerate(hdr_set):
        y = luminance(img)
        x, _ = compressed_input(y, cfg, hist, _lambda_seed(cfg.seed, i))
        maps.append(x)
    return _stack_maps(maps)


def prepare_ldr_batch(ldr_set):
    if not ldr_set:
        raise ValueError("LDR training set is empty")
    return _stack_maps([luminance(img).data for img in ldr_set])


def _stack_maps(maps):
    shapes = {m.shape for m in maps}
    if len(shapes) != 1:
        raise ValueError(f"images must share dimensions, got {shapes}")
    h, w = maps[0].shape
    if h % 16 or w % 16:
        raise ValueError(f"training images must be divisible by 16, "
                         f"got {h}x{w}")
    return np.stack(maps)[:, None].astype(np.float32)


def _check_finite(value, term):
    if not math.isfinite(value):
        raise TrainingDiverged(f"loss term '{term}' became {value}")


def _disc_step(disc, d_opt, scales, real_batch, fake_batch, lr):
    real_pyr = L.luma_pyramid(Tensor(real_batch), scales)
    fake_pyr = L.luma_pyramid(Tensor(fake_batch), scales)
    real_scores = {k: disc(k, real_pyr[k]) for k in scales}
    fake_scores = {k: disc(k, fake_pyr[k]) for k in scales}
    l_d = L.lsgan_discriminator_loss(real_scores, fake_scores, scales)
    _check_finite(l_d.item(), "discriminator")
    d_opt.zero_grad()
    l_d.backward()
    d_opt.step(lr)
    return l_d.item()


def pretrain_discriminators(hdr_set, ldr_set, cfg, hist=None):
    """Pretrain the critics to tell compressed HDR luma from LDR luma
    (the generator is left untouched); returns the ensemble."""
    _, disc, scales = build_models(cfg)
    yc = prepare_hdr_batch(hdr_set, cfg, hist)
    yl = prepare_ldr_batch(ldr_set)
    _run_pretrain(disc, scales, yc, yl, cfg)
    return disc


def _run_pretrain(disc, scales, yc, yl, cfg):
    d_opt = Adam(disc.parameters(), cfg.lr_disc,
                 cfg.adam_beta1, cfg.adam_beta2)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xD0)))
    for _ in range(cfg.pretrain_epochs):
        for real_b, fake_b in _batches(rng, yl, yc, cfg.batch_size):
            _disc_step(disc, d_opt, scales, real_b, fake_b, cfg.lr_disc)
    return d_opt


def _batches(rng, real, fake, batch_size):
    n = min(real.shape[0], fake.shape[0])
    steps = n // batch_size
    ri = rng.permutation(real.shape[0])
    fi = rng.permutation(fake.shape[0])
    for s in range(steps):
        sel_r = ri[s * batch_size:(s + 1) * batch_size]
        sel_f = fi[s * batch_size:(s + 1) * batch_size]
        yield real[sel_r], fake[sel_f]


def train(hdr_set, ldr_set, cfg, hist=None, out_dir=None, on_epoch=None):
    """Full adversarial training; returns the final Checkpoint.

    Per batch: one critic step on the adversarial loss, then one
    generator step on the naturalness + structure objective.  Learning
    rates halve every ``lr_decay_every`` epochs; checkpoints are
    written every ``checkpoint_every`` epochs (and at the end) when
    ``out_dir`` is given.
    """
    gen, disc, scales = build_models(cfg)
    yc = prepare_hdr_batch(hdr_set, cfg, hist)
    yl = prepare_ldr_batch(ldr_set)
    _run_pretrain(disc, scales, yc, yl, cfg)
    g_opt = Adam(gen.parameters(), cfg.lr_gen,
                 cfg.adam_beta1, cfg.adam_beta2)
    d_opt = Adam(disc.parameters(), cfg.lr_disc,
                 cfg.adam_beta1, cfg.adam_beta2)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x7E)))

    def snapshot(epoch):
        return Checkpoint(config=cfg, epoch=epoch,
                          arrays=_model_arrays(gen, disc, hist))

    for epoch in range(cfg.epochs):
        lr_g = lr_at_epoch(cfg.lr_gen, epoch,
                           cfg.lr_decay_factor, cfg.lr_decay_every)
        lr_d = lr_at_epoch(cfg.lr_disc, epoch,
                           cfg.lr_decay_factor, cfg.lr_decay_every)
        last = None
        for real_b, fake_src in _batches(rng, yl, yc, cfg.batch_size):
            fake = gen(Tensor(fake_src)).detach()
            l_d = _disc_step(disc, d_opt, scales, real_b, fake.data, lr_d)

            out = gen(Tensor(fake_src))
            out_pyr = L.luma_pyramid(out, scales)
            fake_scores = {k: disc(k, out_pyr[k]) for k in scales}
            l_nat = L.lsgan_generator_loss(fake_scores, scales)
            l_struct = L.structural_loss(Tensor(fake_src), out)
            total = ad.add(l_nat, ad.mul(l_struct, cfg.w_struct))
            _check_finite(l_nat.item(), "naturalness")
            _check_finite(l_struct.item(), "structure")
            g_opt.zero_grad()
            total.backward()
            g_opt.step(lr_g)
            last = L.LossBreakdown(l_disc=l_d, l_natural=l_nat.item(),
                                   l_struct=l_struct.item(),
                                   w_struct=cfg.w_struct)
        if on_epoch is not None and last is not None:
            on_epoch(epoch, last)
        if out_dir and (epoch + 1) % cfg.checkpoint_every == 0 \
                and epoch + 1 < cfg.epochs:
            save_checkpoint(os.path.join(out_dir, f"epoch_{epoch + 1:04d}"),
                            snapshot(epoch + 1))
    final = snapshot(cfg.epochs)
    if out_dir:
        save_checkpoint(os.path.join(out_dir, "final"), final)
    return final


def _model_arrays(gen, disc, hist):
    arrays = {}
    for name, p in gen.parameters().items():
        arrays[name] = p.data.astype(np.float32)
    for name, p in disc.parameters().items():
        arrays[name] = p.data.astype(np.float32)
    if hist is not None:
        arrays["canonical_histogram"] = hist.bins.astype(np.float32)
    return arrays


# ---------------------------------------------------------------------------
# checkpoint disk format
# ---------------------------------------------------------------------------

def save_checkpoint(dirpath, ck):
    tmp = f"{dirpath}.tmp.{os.getpid()}"
    if os.path.exists(tmp):
        shutil.rmtree(tmp)
    os.makedirs(tmp)
    lines = ["# hdrgan checkpoint", f"epoch={ck.epoch}", "unpool_kernel=2",
             "[config]"]
    lines += config_to_lines(ck.config)
    lines.append("[arrays]")
    for name in sorted(ck.arrays):
        arr = ck.arrays[name]
        shape = ",".join(str(s) for s in arr.shape)
        lines.append(f"{name} {shape} f32le")
        with open(os.path.join(tmp, f"{name}.f32"), "wb") as fh:
            fh.write(arr.astype("<f4").tobytes())
    with open(os.path.join(tmp, "manifest.txt"), "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    if os.path.exists(dirpath):
        shutil.rmtree(dirpath)
    os.replace(tmp, dirpath)


def load_checkpoint(dirpath):
    manifest = os.path.join(dirpath, "manifest.txt")
    if not os.path.isfile(manifest):
        raise CheckpointError(f"{dirpath}: missing manifest.txt")
    with open(manifest, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    epoch = 0
    section = None
    cfg_lines = []
    specs = []
    for ln in lines:
        if not ln or ln.startswith("#"):
            continue
        if ln == "[config]":
            section = "config"
            continue
        if ln == "[arrays]":
            section = "arrays"
            continue
        if section is None and ln.startswith("epoch="):
            epoch = int(ln.split("=", 1)[1])
        elif section == "config":
            cfg_lines.append(ln)
        elif section == "arrays":
            specs.append(ln)
    cfg = config_from_lines(cfg_lines)
    arrays = {}
    for spec in specs:
        try:
            name, shape_s, dtype_s = spec.split(" ")
            shape = tuple(int(s) for s in shape_s.split(","))
        except ValueError as exc:
            raise CheckpointError(f"{dirpath}: bad array line {spec!r}") \
                from exc
        if dtype_s != "f32le":
            raise CheckpointError(f"{dirpath}: unknown dtype {dtype_s}")
        blob_path = os.path.join(dirpath, f"{name}.f32")
        try:
            blob = np.fromfile(blob_path, dtype="<f4")
        except OSError as exc:
            raise CheckpointError(f"{dirpath}: missing array {name}") from exc
        if blob.size != int(np.prod(shape)):
            raise CheckpointError(f"{dirpath}: array {name} has "
                                  f"{blob.size} values, expected {shape}")
        arrays[name] = blob.reshape(shape)
    return Checkpoint(config=cfg, epoch=epoch, arrays=arrays)


def restore_models(ck):
    """Rebuild generator + ensemble and load the checkpoint arrays."""
    gen, disc, scales = build_models(ck.config)
    params = dict(gen.parameters())
    params.update(disc.parameters())
    for name, p in params.items():
        arr = ck.arrays.get(name)
        if arr is None:
            raise CheckpointError(f"checkpoint is missing array {name}")
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"array {name} has shape {arr.shape}, "
                f"model expects {p.data.shape}")
        p.data = arr.astype(np.float32)
    return gen, disc, scales


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

def tonemap(hdr, ck, saturation=DEFAULT_SATURATION):
    """Tone-map an HDR image with a trained checkpoint.

    Deterministic; the compression level comes from the config's fixed
    level or is estimated against the checkpoint's stored canonical
    histogram.  The image is peak-normalized first, which makes the
    whole pipeline exactly invariant to input scaling.
    """
    gen, _, _ = restore_models(ck)
    peak = float(hdr.data.max())
    if peak <= 0.0:
        raise ValueError("cannot tone-map a constant-black image")
    norm = HdrImage(hdr.data / peak)
    y = luminance(norm)
    x, _ = compressed_input(y, ck.config, ck.histogram(),
                            lam_seed=ck.config.seed)
    out = _run_generator_padded(gen, x)
    return reproduce_color(norm, y, LuminanceMap(out), saturation)


def _run_generator_padded(gen, x):
    """Reflect-pad to a multiple of 16, run the generator, crop back."""
    h, w = x.shape
    ph = (-h) % 16
    pw = (-w) % 16
    if min(h, w) < 16 and (ph or pw):
        raise ValueError(f"image {h}x{w} is too small to pad for inference")
    padded = np.pad(x, ((0, ph), (0, pw)), mode="reflect") if (ph or pw) \
        else x
    out = gen(padded[None, None].astype(np.float32)).data[0, 0]
    out = out[:h, :w].astype(np.float64)
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# config text format (key=value, one per line)
# ---------------------------------------------------------------------------

_CONFIG_FIELDS = {
    "epochs": int,
    "pretrain_epochs": int,
    "lr_gen": float,
    "lr_disc": float,
    "lr_decay_factor": float,
    "lr_decay_every": int,
    "batch_size": int,
    "w_struct": float,
    "seed": int,
    "checkpoint_every": int,
    "adam_beta1": float,
    "adam_beta2": float,
}

_ABLATION_FIELDS = {
    "fixed_lambda": float,
    "raw_luminance": bool,
    "sqrt_skips": bool,
    "single_discriminator": bool,
}


def config_to_lines(cfg):
    lines = []
    for name in _CONFIG_FIELDS:
        value = getattr(cfg, name)
        lines.append(f"{name}={value!r}" if isinstance(value, float)
                     else f"{name}={value}")
    for name in _ABLATION_FIELDS:
        value = getattr(cfg.ablations, name)
        if value is None:
            lines.append(f"ablations.{name}=none")
        elif isinstance(value, bool):
            lines.append(f"ablations.{name}={'true' if value else 'false'}")
        else:
            lines.append(f"ablations.{name}={value!r}")
    return lines


def config_from_lines(lines, base=None):
    cfg_kwargs = {}
    abl_kwargs = {}
    for ln in lines:
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise ValueError(f"bad config line {ln!r} (expected key=value)")
        key, value = ln.split("=", 1)
        key = key.strip()
        value = value.strip()
        if key.startswith("ablations."):
            name = key[len("ablations."):]
            if name not in _ABLATION_FIELDS:
                raise ValueError(f"unknown ablation flag {name!r}")
            abl_kwargs[name] = _parse_value(value, _ABLATION_FIELDS[name])
        else:
            if key not in _CONFIG_FIELDS:
                raise ValueError(f"unknown config key {key!r}")
            cfg_kwargs[key] = _parse_value(value, _CONFIG_FIELDS[key])
    base = base or TrainConfig()
    ablations = replace(base.ablations, **abl_kwargs)
    return replace(base, ablations=ablations, **cfg_kwargs)


def _parse_value(text, typ):
    if text.lower() == "none":
        return None
    if typ is bool:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean {text!r}")
    return typ(text)
