"""Three-stream encoder/decoder for glass-region segmentation.

One shared 5-stage conv encoder feeds three decoder streams: an interior
stream on the two deepest levels (coarse localization), a boundary stream
over all five levels, and a glass stream over levels 1, 2, and 5. Each
decoder level merges its encoder feature with upsampled context from the
deeper levels of the same stream, runs a multi-dilation context block, and
emits a supervised side map. Predicted boundary/interior maps then gate the
glass features channel-wise (attention products + squeeze-excite) before the
final prediction head.

Every enable_* switch removes exactly its modules and loss terms; with the
fusion disabled the final head reads the raw glass features, and a disabled
auxiliary stream contributes a neutral all-ones attention map instead.
"""

from dataclasses import dataclass, field

import numpy as np

from . import neural as nn
from .errors import InvalidInputError
from .neural import functional as F


@dataclass
class NetworkConfig:
    input_size: int = 64
    encoder_channels: tuple[int, ...] = (8, 16, 32, 64, 128)
    decoder_width: int = 8
    dilation_rates: tuple[int, ...] = (2, 4, 8, 16)
    enable_boundary_stream: bool = True
    enable_interior_stream: bool = True
    enable_bfm: bool = True
    enable_mid: bool = True
    se_reduction: int = 4

    def __post_init__(self):
        self.encoder_channels = tuple(int(c) for c in self.encoder_channels)
        self.dilation_rates = tuple(int(r) for r in self.dilation_rates)
        if len(self.encoder_channels) != 5 or any(c < 1 for c in self.encoder_channels):
            raise InvalidInputError(f"encoder_channels must be 5 positive widths, got {self.encoder_channels}")
        if any(r < 1 for r in self.dilation_rates) or any(
            a >= b for a, b in zip(self.dilation_rates, self.dilation_rates[1:])
        ):
            raise InvalidInputError(f"dilation_rates must be strictly increasing positive, got {self.dilation_rates}")
        if self.input_size < 16 or self.input_size % 16 != 0:
            raise InvalidInputError(f"input_size must be a positive multiple of 16, got {self.input_size}")
        if self.decoder_width < self.se_reduction:
            raise InvalidInputError(
                f"decoder_width {self.decoder_width} smaller than se_reduction {self.se_reduction}"
            )

    @property
    def n_glass_branches(self) -> int:
        return 3

    @property
    def n_boundary_branches(self) -> int:
        return 5 if self.enable_boundary_stream else 0


@dataclass
class PredictionBundle:
    """All supervised logit maps of one forward pass, at input resolution."""

    interior_logits: nn.Tensor | None
    boundary_logits: list[nn.Tensor]
    glass_logits: list[nn.Tensor]
    final_logits: nn.Tensor
    glass_features: nn.Tensor = field(repr=False, default=None)

    def supervised_maps(self):
        maps = [] if self.interior_logits is None else [self.interior_logits]
        return maps + list(self.boundary_logits) + list(self.glass_logits) + [self.final_logits]


class EncoderStage(nn.Module):
    """Stride-2 entry conv then a stride-1 conv, both conv+norm+ReLU."""

    def __init__(self, cin, cout, rng, dtype):
        super().__init__()
        self.entry = nn.ConvBlock(cin, cout, rng, stride=2, dtype=dtype)
        self.refine = nn.ConvBlock(cout, cout, rng, dtype=dtype)

    def __call__(self, x):
        return self.refine(self.entry(x))


class Encoder(nn.Module):
    """Five stages at strides /2../32 of the input (floored at one pixel)."""

    def __init__(self, cfg: NetworkConfig, rng, dtype):
        super().__init__()
        widths = cfg.encoder_channels
        self.stages = [EncoderStage(cin, cout, rng, dtype) for cin, cout in zip((3,) + widths[:-1], widths)]

    def __call__(self, image):
        if image.ndim != 4 or image.shape[1] != 3:
            raise InvalidInputError(f"encoder expects [B,3,H,W] input, got shape {image.shape}")
        h, w = image.shape[2], image.shape[3]
        if h < 16 or w < 16 or h % 16 or w % 16:
            raise InvalidInputError(f"input extents must be multiples of 16, got {h}x{w}")
        features = []
        x = image
        for stage in self.stages:
            x = stage(x)
            features.append(x)
        return features


class MultiDilationBlock(nn.Module):
    """Parallel dilated 3x3 branches with chained short connections.

    Branch 0 is a plain conv; branch k adds branch k-1's output to its own
    feature conv before a dilated conv at rate r_k. Branch outputs are
    concatenated, fused by a conv, and added residually to the input. When
    disabled, degrades to a single size-preserving conv block.
    """

    def __init__(self, width, rates, rng, dtype, enabled=True):
        super().__init__()
        self.enabled = enabled
        if not enabled:
            self.passthrough = nn.ConvBlock(width, width, rng, dtype=dtype)
            return
        self.local = nn.ConvBlock(width, width, rng, dtype=dtype)
        self.branch_features = [nn.ConvBlock(width, width, rng, dtype=dtype) for _ in rates]
        self.branch_dilated = [nn.ConvBlock(width, width, rng, dilation=r, dtype=dtype) for r in rates]
        self.fuse = nn.ConvBlock(width * (1 + len(rates)), width, rng, dtype=dtype)

    def __call__(self, x):
        if not self.enabled:
            return self.passthrough(x)
        branches = [self.local(x)]
        prev = branches[0]
        for feature_conv, dilated_conv in zip(self.branch_features, self.branch_dilated):
            prev = dilated_conv(nn.add(feature_conv(x), prev))
            branches.append(prev)
        return nn.add(self.fuse(nn.concat_channels(branches)), x)


class SqueezeExcite(nn.Module):
    """Global pool -> bottleneck MLP -> sigmoid channel gate."""

    def __init__(self, channels, reduction, rng, dtype):
        super().__init__()
        if channels < reduction:
            raise InvalidInputError(f"squeeze-excite needs channels >= reduction, got {channels} < {reduction}")
        hidden = channels // reduction
        self.fc1 = nn.Linear(channels, hidden, rng, dtype=dtype)
        self.fc2 = nn.Linear(hidden, channels, rng, dtype=dtype)
        self.channels = channels

    def __call__(self, x):
        b, c = x.shape[0], x.shape[1]
        squeezed = nn.reshape(F.global_avg_pool(x), (b, c))
        gate = nn.sigmoid(self.fc2(nn.relu(self.fc1(squeezed))))
        return nn.mul(x, nn.reshape(gate, (b, c, 1, 1)))


class PredictHead(nn.Module):
    """conv+norm+ReLU, 1x1 conv to one channel, bilinear upsample to target."""

    def __init__(self, width, rng, dtype):
        super().__init__()
        self.refine = nn.ConvBlock(width, width, rng, dtype=dtype)
        self.project = nn.Conv2d(width, 1, 1, rng, dtype=dtype)

    def __call__(self, feat, out_hw):
        logits = self.project(self.refine(feat))
        return F.bilinear_resize(logits, out_hw[0], out_hw[1])


class MergeBlock(nn.Module):
    """Fuse one encoder level with upsampled context from deeper levels."""

    def __init__(self, enc_channels, width, n_higher, rng, dtype):
        super().__init__()
        self.n_higher = n_higher
        if n_higher == 0:
            self.merge = nn.ConvBlock(enc_channels, width, rng, dtype=dtype)
            self.project = None
        else:
            self.project = nn.Conv2d(enc_channels, width, 1, rng, dtype=dtype)
            self.merge = nn.ConvBlock(width * (1 + n_higher), width, rng, dtype=dtype)

    def __call__(self, enc_feat, higher_contexts):
        if len(higher_contexts) != self.n_higher:
            raise InvalidInputError(f"expected {self.n_higher} higher-level contexts, got {len(higher_contexts)}")
        if self.project is None:
            return self.merge(enc_feat)
        h, w = enc_feat.shape[2], enc_feat.shape[3]
        operands = [self.project(enc_feat)] + [F.bilinear_resize(c, h, w) for c in higher_contexts]
        return self.merge(nn.concat_channels(operands))


class DecoderStream(nn.Module):
    """Top-down decoder over a subset of encoder levels with side outputs."""

    def __init__(self, levels, cfg: NetworkConfig, rng, dtype):
        super().__init__()
        self.levels = tuple(sorted(levels))
        w = cfg.decoder_width
        deepest = self.levels[-1]
        self.merges = [
            MergeBlock(
                cfg.encoder_channels[lv],
                w,
                n_higher=sum(1 for j in self.levels if j > lv) if lv != deepest else 0,
                rng=rng,
                dtype=dtype,
            )
            for lv in self.levels
        ]
        self.contexts = [
            MultiDilationBlock(w, cfg.dilation_rates, rng, dtype, enabled=cfg.enable_mid) for _ in self.levels
        ]
        self.heads = [PredictHead(w, rng, dtype) for _ in self.levels]

    def __call__(self, enc_feats, out_hw):
        """Returns (side logits in ascending level order, finest context feature)."""
        context: dict[int, nn.Tensor] = {}
        side: dict[int, nn.Tensor] = {}
        for pos in range(len(self.levels) - 1, -1, -1):
            lv = self.levels[pos]
            higher = [context[j] for j in self.levels if j > lv]
            merged = self.merges[pos](enc_feats[lv], higher)
            context[lv] = self.contexts[pos](merged)
            side[lv] = self.heads[pos](context[lv], out_hw)
        return [side[lv] for lv in self.levels], context[self.levels[0]]


class InteriorStream(nn.Module):
    """Coarse localization from the two deepest encoder levels."""

    def __init__(self, cfg: NetworkConfig, rng, dtype):
        super().__init__()
        w = cfg.decoder_width
        self.project4 = nn.Conv2d(cfg.encoder_channels[3], w, 1, rng, dtype=dtype)
        self.project5 = nn.Conv2d(cfg.encoder_channels[4], w, 1, rng, dtype=dtype)
        self.context = MultiDilationBlock(w, cfg.dilation_rates, rng, dtype, enabled=cfg.enable_mid)
        self.head = PredictHead(w, rng, dtype)

    def __call__(self, ef4, ef5, out_hw):
        h, w = ef4.shape[2], ef4.shape[3]
        summed = nn.add(self.project4(ef4), F.bilinear_resize(self.project5(ef5), h, w))
        return self.head(self.context(summed), out_hw)


class BoundaryFusion(nn.Module):
    """Gate glass features with boundary/interior attention maps.

    Each branch multiplies the features by its probability map, concatenates
    the map itself, runs a conv block and a squeeze-excite, and the two
    enhanced branches are added residually onto the input features.
    """

    def __init__(self, width, reduction, rng, dtype):
        super().__init__()
        self.boundary_conv = nn.ConvBlock(width + 1, width, rng, dtype=dtype)
        self.boundary_se = SqueezeExcite(width, reduction, rng, dtype)
        self.interior_conv = nn.ConvBlock(width + 1, width, rng, dtype=dtype)
        self.interior_se = SqueezeExcite(width, reduction, rng, dtype)

    def __call__(self, glass_feat, boundary_prob, interior_prob):
        if boundary_prob.shape[2:] != glass_feat.shape[2:] or interior_prob.shape[2:] != glass_feat.shape[2:]:
            raise InvalidInputError("attention maps must be resized to the glass feature resolution")
        enhanced_b = self.boundary_se(
            self.boundary_conv(nn.concat_channels([nn.mul(glass_feat, boundary_prob), boundary_prob]))
        )
        enhanced_i = self.interior_se(
            self.interior_conv(nn.concat_channels([nn.mul(glass_feat, interior_prob), interior_prob]))
        )
        return nn.add(nn.add(glass_feat, enhanced_b), enhanced_i)


class ThreeStreamNet(nn.Module):
    GLASS_LEVELS = (0, 1, 4)
    BOUNDARY_LEVELS = (0, 1, 2, 3, 4)

    def __init__(self, cfg: NetworkConfig, rng, dtype=np.float32):
        super().__init__()
        self.cfg = cfg
        self.dtype = dtype
        self.encoder = Encoder(cfg, rng, dtype)
        if cfg.enable_interior_stream:
            self.interior = InteriorStream(cfg, rng, dtype)
        else:
            self.interior = None
        if cfg.enable_boundary_stream:
            self.boundary = DecoderStream(self.BOUNDARY_LEVELS, cfg, rng, dtype)
        else:
            self.boundary = None
        # the combined boundary map only feeds the attention fusion, so its
        # fusion conv exists exactly when that path does
        if cfg.enable_boundary_stream and cfg.enable_bfm:
            self.boundary_fuse = nn.Conv2d(len(self.BOUNDARY_LEVELS), 1, 3, rng, padding=1, dtype=dtype)
        else:
            self.boundary_fuse = None
        self.glass = DecoderStream(self.GLASS_LEVELS, cfg, rng, dtype)
        self.fusion = BoundaryFusion(cfg.decoder_width, cfg.se_reduction, rng, dtype) if cfg.enable_bfm else None
        self.final_head = PredictHead(cfg.decoder_width, rng, dtype)

    def _neutral_attention(self, glass_feat):
        b, _, h, w = glass_feat.shape
        return nn.Tensor(np.ones((b, 1, h, w), dtype=self.dtype))

    def forward(self, image: nn.Tensor) -> PredictionBundle:
        out_hw = (image.shape[2], image.shape[3])
        enc = self.encoder(image)

        interior_logits = None
        if self.interior is not None:
            interior_logits = self.interior(enc[3], enc[4], out_hw)

        boundary_logits: list[nn.Tensor] = []
        boundary_attention_src = None
        if self.boundary is not None:
            boundary_logits, _ = self.boundary(enc, out_hw)
            if self.boundary_fuse is not None:
                fused_map = self.boundary_fuse(nn.concat_channels(boundary_logits))
                boundary_attention_src = nn.sigmoid(fused_map)

        glass_logits, glass_feat = self.glass(enc, out_hw)

        if self.fusion is not None:
            gh, gw = glass_feat.shape[2], glass_feat.shape[3]
            if boundary_attention_src is not None:
                boundary_attn = F.bilinear_resize(boundary_attention_src, gh, gw)
            else:
                boundary_attn = self._neutral_attention(glass_feat)
            if interior_logits is not None:
                interior_attn = F.bilinear_resize(nn.sigmoid(interior_logits), gh, gw)
            else:
                interior_attn = self._neutral_attention(glass_feat)
            fused = self.fusion(glass_feat, boundary_attn, interior_attn)
        else:
            fused = glass_feat

        final_logits = self.final_head(fused, out_hw)
        return PredictionBundle(
            interior_logits=interior_logits,
            boundary_logits=boundary_logits,
            glass_logits=glass_logits,
            final_logits=final_logits,
            glass_features=glass_feat,
        )

    __call__ = forward


def build_network(cfg: NetworkConfig, rng, dtype=np.float32) -> ThreeStreamNet:
    return ThreeStreamNet(cfg, rng, dtype)
