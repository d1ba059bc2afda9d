"""Tone-mapping generator and the shallow discriminator ensemble.

The generator is a four-level U-Net (32 filters at the top, doubling
per level, 512-filter double-conv bottleneck) whose skip connections
pass each activation concatenated with its guarded square root, which
doubles the skip channel count; the decoder brings that back down and
a sigmoid head emits luma in (0, 1).

Each discriminator is four layers: two 4x4 stride-2 convolutions (16
then 32 filters, LeakyReLU), an unstrided 1x1 convolution, and a
global-average-pooled fully-connected sigmoid scalar.  The ensemble
holds three such networks with disjoint weights, one per pyramid
scale.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass(frozen=True)
class GeneratorSpec:
    levels: int = 4
    base_filters: int = 32
    bottleneck_filters: int = 512
    decoder_filters: tuple = (64, 32, 16, 8)  # deepest stage first
    sqrt_skips: bool = True
    sqrt_guard: float = 1e-6

    def __post_init__(self):
        if len(self.decoder_filters) != self.levels:
            raise ValueError("decoder_filters must list one width per level")


@dataclass(frozen=True)
class DiscriminatorSpec:
    count: int = 3
    filters: tuple = (16, 32)
    head_channels: int = 64
    leaky_slope: float = 0.2


class _Conv:
    """3x3 (or kxk) convolution with reflect padding preserving H and W
    for stride 1; Kaiming fan-in init, zero bias."""

    def __init__(self, rng, name, cin, cout, k=3, stride=1, pad=None,
                 dtype=np.float32):
        std = np.sqrt(2.0 / (cin * k * k))
        self.w = Tensor(rng.normal(0.0, std, (cout, cin, k, k)).astype(dtype),
                        requires_grad=True, name=f"{name}.w")
        self.b = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True,
                        name=f"{name}.b")
        self.stride = (stride, stride)
        self.pad = (k - 1) // 2 if pad is None else pad

    def __call__(self, x):
        if self.pad:
            x = ad.pad_reflect(x, self.pad, self.pad)
        return ad.conv2d(x, self.w, self.b, stride=self.stride)

    def params(self):
        return [self.w, self.b]


class _ConvT2:
    """Kernel-2 stride-2 transposed convolution (exact 2x unpooling)."""

    def __init__(self, rng, name, cin, cout, dtype=np.float32):
        std = np.sqrt(2.0 / (cin * 4))
        self.w = Tensor(rng.normal(0.0, std, (cin, cout, 2, 2)).astype(dtype),
                        requires_grad=True, name=f"{name}.w")
        self.b = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True,
                        name=f"{name}.b")

    def __call__(self, x):
        return ad.conv_transpose2x2(x, self.w, self.b)

    def params(self):
        return [self.w, self.b]


class _Linear:
    def __init__(self, rng, name, cin, cout, dtype=np.float32):
        std = np.sqrt(2.0 / cin)
        self.w = Tensor(rng.normal(0.0, std, (cin, cout)).astype(dtype),
                        requires_grad=True, name=f"{name}.w")
        self.b = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True,
                        name=f"{name}.b")

    def __call__(self, x):
        return ad.add(ad.matmul(x, self.w), self.b)

    def params(self):
        return [self.w, self.b]


def _collect(named_layers):
    out = {}
    for layer in named_layers:
        for p in layer.params():
            out[p.name] = p
    return out


class Generator:
    """U-Net luma-to-luma network with square-root skip connections."""

    def __init__(self, spec=GeneratorSpec(), seed=0, dtype=np.float32):
        self.spec = spec
        rng = np.random.default_rng(seed)
        enc_f = [spec.base_filters * (1 << i) for i in range(spec.levels)]
        self.enc = []
        cin = 1
        for i, f in enumerate(enc_f):
            c1 = _Conv(rng, f"gen.enc{i + 1}.c1", cin, f, dtype=dtype)
            c2 = _Conv(rng, f"gen.enc{i + 1}.c2", f, f, dtype=dtype)
            self.enc.append((c1, c2))
            cin = f
        self.bott1 = _Conv(rng, "gen.bott.c1", cin, spec.bottleneck_filters,
                           dtype=dtype)
        self.bott2 = _Conv(rng, "gen.bott.c2", spec.bottleneck_filters,
                           spec.bottleneck_filters, dtype=dtype)
        self.dec = []
        cin = spec.bottleneck_filters
        skip_mult = 2 if spec.sqrt_skips else 1
        for i, f in enumerate(spec.decoder_filters):
            level = spec.levels - i  # deepest encoder level first
            skip_ch = enc_f[level - 1] * skip_mult
            up = _ConvT2(rng, f"gen.dec{level}.up", cin, f, dtype=dtype)
            c1 = _Conv(rng, f"gen.dec{level}.c1", f + skip_ch, f, dtype=dtype)
            c2 = _Conv(rng, f"gen.dec{level}.c2", f, f, dtype=dtype)
            self.dec.append((up, c1, c2))
            cin = f
        self.out = _Conv(rng, "gen.out", cin, 1, dtype=dtype)
        layers = [c for pair in self.enc for c in pair]
        layers += [self.bott1, self.bott2]
        layers += [c for triple in self.dec for c in triple]
        layers.append(self.out)
        self._params = _collect(layers)

    def parameters(self):
        return self._params

    def num_params(self):
        return sum(p.data.size for p in self._params.values())

    def __call__(self, x):
        if not isinstance(x, Tensor):
            x = Tensor(x)
        b, c, h, w = x.data.shape
        div = 1 << self.spec.levels
        if c != 1:
            raise ValueError(f"generator expects one channel, got {c}")
        if h % div or w % div:
            raise ValueError(
                f"spatial dims must be divisible by {div}, got {h}x{w}")
        if np.isnan(x.data).any():
            raise ValueError("generator input contains NaN")
        skips = []
        for c1, c2 in self.enc:
            x = ad.relu(c2(ad.relu(c1(x))))
            skips.append(x)
            x = ad.maxpool2(x)
        x = ad.relu(self.bott2(ad.relu(self.bott1(x))))
        for (up, c1, c2), skip in zip(self.dec, reversed(skips)):
            x = up(x)
            if self.spec.sqrt_skips:
                skip = ad.concat(
                    [skip, ad.sqrt(ad.add(skip, self.spec.sqrt_guard))],
                    axis=1)
            x = ad.concat([x, skip], axis=1)
            x = ad.relu(c2(ad.relu(c1(x))))
        return ad.sigmoid(self.out(x))


class Discriminator:
    """One shallow real/fake critic producing a sigmoid score per image."""

    def __init__(self, spec=DiscriminatorSpec(), seed=0, name="d0",
                 dtype=np.float32):
        self.spec = spec
        rng = np.random.default_rng(seed)
        f1, f2 = spec.filters
        self.c1 = _Conv(rng, f"{name}.c1", 1, f1, k=4, stride=2, pad=1,
                        dtype=dtype)
        self.c2 = _Conv(rng, f"{name}.c2", f1, f2, k=4, stride=2, pad=1,
                        dtype=dtype)
        self.c3 = _Conv(rng, f"{name}.c3", f2, spec.head_channels, k=1,
                        pad=0, dtype=dtype)
        self.fc = _Linear(rng, f"{name}.fc", spec.head_channels, 1,
                          dtype=dtype)
        self._params = _collect([self.c1, self.c2, self.c3, self.fc])

    def parameters(self):
        return self._params

    def __call__(self, x):
        if not isinstance(x, Tensor):
            x = Tensor(x)
        h, w = x.data.shape[-2:]
        if h < 16 or w < 16:
            raise ValueError(
                f"discriminator input must be at least 16x16, got {h}x{w}")
        slope = self.spec.leaky_slope
        x = ad.leaky_relu(self.c1(x), slope)
        x = ad.leaky_relu(self.c2(x), slope)
        x = ad.leaky_relu(self.c3(x), slope)
        x = ad.mean(x, axis=(2, 3))  # global average pool -> (B, C)
        score = ad.sigmoid(self.fc(x))
        return ad.reshape(score, (score.data.shape[0],))


class DiscriminatorEnsemble:
    """Per-scale critics with disjoint parameter sets."""

    def __init__(self, spec=DiscriminatorSpec(), seed=0, dtype=np.float32):
        self.spec = spec
        root = np.random.default_rng(seed)
        seeds = root.integers(0, 2 ** 63 - 1, size=spec.count)
        self.nets = [
            Discriminator(spec, seed=seeds[k], name=f"disc{k}", dtype=dtype)
            for k in range(spec.count)
        ]

    def __call__(self, k, x):
        if not 0 <= k < len(self.nets):
            raise ValueError(f"scale index {k} out of range "
                             f"[0, {len(self.nets) - 1}]")
        return self.nets[k](x)

    def parameters(self):
        out = {}
        for net in self.nets:
            out.update(net.parameters())
        return out

    def num_params(self):
        return sum(p.data.size for p in self.parameters().values())
