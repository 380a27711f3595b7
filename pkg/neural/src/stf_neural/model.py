"""Dual-branch spatio-temporal fusion network.

Five input frames (three dense low-resolution, two sparse high-resolution)
are embedded into a common feature space, aligned to the reference LR
frame with pyramid deformable convolutions, fused through temporal and
spatial attention, and decoded by a residual reconstruction trunk whose
output is added to the bilinearly up-sampled reference frame. The
spatially averaged post-sigmoid temporal-attention maps of the two HR
inputs are exported as the backward/forward attention scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F
from torchvision.ops import deform_conv2d

SCALE = 4  # fixed spatial ratio between the HR and LR streams


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 128
    lr_extract_convs: int = 1
    hr_extract_convs: int = 3
    shared_res_blocks: int = 5
    pyramid_levels: int = 3
    recon_res_blocks: int = 40
    upsample_stages: int = 2
    n_lr_inputs: int = 3
    n_hr_inputs: int = 2
    deform_groups: int = 8
    init: str = "content"  # "content" (image-preserving start) or "standard"

    def __post_init__(self):
        if self.channels % self.deform_groups:
            raise ValueError("channels must divide evenly into deform groups")
        if self.pyramid_levels < 1 or self.upsample_stages != 2:
            raise ValueError("pyramid_levels >= 1 and exactly 2 up-sampling stages")
        if self.init not in ("content", "standard"):
            raise ValueError("init must be 'content' or 'standard'")


def _lrelu():
    return nn.LeakyReLU(0.1, inplace=True)


def _content_init(conv: nn.Conv2d, content: bool, noise: float = 0.03) -> nn.Conv2d:
    """Delta-kernel init plus noise: the layer starts as a (replicated)
    copy of its input, so features carry image content from step zero
    instead of having to rediscover cross-branch correspondence. With
    ``content`` false, plain Kaiming init is applied instead."""
    if not content:
        nn.init.kaiming_normal_(conv.weight, a=0.1)
        if conv.bias is not None:
            nn.init.zeros_(conv.bias)
        return conv
    with torch.no_grad():
        out_c, in_c, kh, kw = conv.weight.shape
        conv.weight.zero_()
        for o in range(out_c):
            conv.weight[o, o % in_c, kh // 2, kw // 2] = 1.0
        conv.weight.add_(noise * torch.randn_like(conv.weight))
        if conv.bias is not None:
            conv.bias.zero_()
    return conv


def _mean_init(conv: nn.Conv2d, n_groups: int, content: bool,
               noise: float = 0.03) -> nn.Conv2d:
    """Init a (n_groups*C -> C) conv to average the groups per channel."""
    if not content:
        nn.init.kaiming_normal_(conv.weight, a=0.1)
        if conv.bias is not None:
            nn.init.zeros_(conv.bias)
        return conv
    with torch.no_grad():
        out_c = conv.weight.shape[0]
        kh, kw = conv.weight.shape[-2:]
        conv.weight.zero_()
        for o in range(out_c):
            for g in range(n_groups):
                conv.weight[o, g * out_c + o, kh // 2, kw // 2] = 1.0 / n_groups
        conv.weight.add_(noise * torch.randn_like(conv.weight))
        if conv.bias is not None:
            conv.bias.zero_()
    return conv


class ResidualBlock(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        nn.init.kaiming_normal_(self.conv1.weight, a=0.1)
        nn.init.zeros_(self.conv2.weight)
        nn.init.zeros_(self.conv2.bias)

    def forward(self, x):
        return x + self.conv2(F.leaky_relu(self.conv1(x), 0.1))


class DeformBlock(nn.Module):
    """Modulated deformable conv whose offsets come from a guide tensor."""

    def __init__(self, channels, groups, content=True):
        super().__init__()
        self.groups = groups
        self.offset_head = nn.Conv2d(channels, groups * 27, 3, padding=1)
        self.weight = nn.Parameter(torch.zeros(channels, channels, 3, 3))
        self.bias = nn.Parameter(torch.zeros(channels))
        with torch.no_grad():
            if content:
                # identity warp at init: delta kernel at amplitude 2 cancels
                # the sigmoid(0) = 0.5 modulation mask, zero offsets leave
                # the taps in place
                for o in range(channels):
                    self.weight[o, o, 1, 1] = 2.0
                self.weight.add_(0.03 * torch.randn_like(self.weight))
            else:
                nn.init.kaiming_normal_(self.weight, a=0.1)
        nn.init.zeros_(self.offset_head.weight)
        nn.init.zeros_(self.offset_head.bias)

    def forward(self, feat, guide):
        head = self.offset_head(guide)
        offsets, mask = torch.split(head, [self.groups * 18, self.groups * 9], dim=1)
        return deform_conv2d(feat, offsets, self.weight, self.bias, padding=1,
                             mask=torch.sigmoid(mask))


class PyramidAlign(nn.Module):
    """Coarse-to-fine deformable alignment of one feature set onto the
    reference features, with a cascading refinement at full resolution."""

    def __init__(self, channels, levels, groups, content=True):
        super().__init__()
        self.levels = levels
        self.guide1 = nn.ModuleList()
        self.guide2 = nn.ModuleList()
        self.deform = nn.ModuleList()
        self.merge = nn.ModuleList()
        for level in range(levels):
            self.guide1.append(nn.Conv2d(2 * channels, channels, 3, padding=1))
            extra = channels if level + 1 < levels else 0
            self.guide2.append(nn.Conv2d(channels + extra, channels, 3, padding=1))
            self.deform.append(DeformBlock(channels, groups, content))
            # at init keep the current level's features (first input half)
            self.merge.append(
                _content_init(nn.Conv2d(2 * channels, channels, 3, padding=1), content)
                if level + 1 < levels else nn.Identity())
        self.cascade_guide = nn.Conv2d(2 * channels, channels, 3, padding=1)
        self.cascade_deform = DeformBlock(channels, groups, content)

    def forward(self, nbr_pyramid, ref_pyramid):
        aligned = None
        guide_up = None
        for level in reversed(range(self.levels)):
            guide = F.leaky_relu(
                self.guide1[level](torch.cat([nbr_pyramid[level], ref_pyramid[level]], 1)),
                0.1)
            if guide_up is not None:
                guide = torch.cat([guide, guide_up], dim=1)
            guide = F.leaky_relu(self.guide2[level](guide), 0.1)
            feat = self.deform[level](nbr_pyramid[level], guide)
            if aligned is not None:
                feat = self.merge[level](torch.cat([feat, aligned], dim=1))
            if level > 0:
                aligned = F.interpolate(feat, scale_factor=2, mode="bilinear",
                                        align_corners=False)
                guide_up = F.interpolate(guide, scale_factor=2, mode="bilinear",
                                         align_corners=False) * 2.0
            else:
                aligned = feat
        refine = F.leaky_relu(
            self.cascade_guide(torch.cat([aligned, ref_pyramid[0]], 1)), 0.1)
        return F.leaky_relu(self.cascade_deform(aligned, refine), 0.1)


class AttentionFusion(nn.Module):
    """Temporal similarity weighting followed by a spatial affine mask."""

    def __init__(self, channels, n_frames, content=True):
        super().__init__()
        self.embed_ref = _content_init(nn.Conv2d(channels, channels, 3, padding=1), content)
        self.embed_nbr = _content_init(nn.Conv2d(channels, channels, 3, padding=1), content)
        self.fuse = _mean_init(nn.Conv2d(n_frames * channels, channels, 1), n_frames, content)
        self.spatial1 = _content_init(nn.Conv2d(channels, channels, 3, padding=1), content)
        self.spatial2 = _content_init(nn.Conv2d(channels, channels, 3, padding=1), content)
        self.mask_head = nn.Conv2d(channels, channels, 3, padding=1)
        self.add_head = nn.Conv2d(channels, channels, 3, padding=1)
        if content:  # mask starts flat (x2 * 0.5 = 1), no additive term
            nn.init.zeros_(self.mask_head.weight)
            nn.init.zeros_(self.mask_head.bias)
            nn.init.zeros_(self.add_head.weight)
            nn.init.zeros_(self.add_head.bias)
        # temperature of the similarity sigmoid; bounds the attention away
        # from 0/1 and keeps it responsive at any channel width
        self.temperature = nn.Parameter(torch.tensor(4.0))

    def forward(self, feats, ref_index):
        # feats: (B, T, C, H, W); attention maps are (B, T, 1, H, W)
        b, t, c, h, w = feats.shape
        emb_ref = self.embed_ref(feats[:, ref_index])
        emb = self.embed_nbr(feats.reshape(-1, c, h, w)).reshape(b, t, c, h, w)
        # cosine similarity along channels: brightness-invariant and bounded,
        # so the sigmoid stays in its responsive range
        dot = (emb * emb_ref.unsqueeze(1)).sum(dim=2, keepdim=True)
        norms = (emb.square().sum(dim=2, keepdim=True).sqrt()
                 * emb_ref.square().sum(dim=1, keepdim=True).sqrt().unsqueeze(1))
        attention = torch.sigmoid(self.temperature * dot / (norms + 1e-8))
        weighted = (feats * attention).reshape(b, t * c, h, w)
        fused = F.leaky_relu(self.fuse(weighted), 0.1)

        m = F.leaky_relu(self.spatial1(fused), 0.1)
        pooled = F.max_pool2d(m, 2) + F.avg_pool2d(m, 2)
        pooled = F.leaky_relu(self.spatial2(pooled), 0.1)
        m = m + F.interpolate(pooled, size=(h, w), mode="bilinear", align_corners=False)
        mask = torch.sigmoid(self.mask_head(m))
        fused = fused * mask * 2.0 + self.add_head(m)
        return fused, attention


class FusionNet(nn.Module):
    """End-to-end network; see the module docstring for the data flow."""

    def __init__(self, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.cfg = cfg
        c = cfg.channels

        content = cfg.init == "content"
        self.lr_head = _content_init(nn.Conv2d(1, c, 3, padding=1), content)
        hr_convs = [_content_init(nn.Conv2d(1, c, 3, padding=1), content), _lrelu()]
        for _ in range(cfg.hr_extract_convs - 1):
            hr_convs += [_content_init(nn.Conv2d(c, c, 3, padding=1), content), _lrelu(),
                         nn.MaxPool2d(2, 2)]
        self.hr_head = nn.Sequential(*hr_convs)

        self.shared = nn.Sequential(*[ResidualBlock(c) for _ in range(cfg.shared_res_blocks)])

        pyramid = []
        for _ in range(cfg.pyramid_levels - 1):
            pyramid.append(nn.Sequential(
                _content_init(nn.Conv2d(c, c, 3, stride=2, padding=1), content), _lrelu(),
                _content_init(nn.Conv2d(c, c, 3, padding=1), content), _lrelu()))
        self.pyramid_down = nn.ModuleList(pyramid)

        self.align = PyramidAlign(c, cfg.pyramid_levels, cfg.deform_groups, content)
        n_frames = cfg.n_lr_inputs + cfg.n_hr_inputs
        self.fusion = AttentionFusion(c, n_frames, content)

        self.recon = nn.Sequential(*[ResidualBlock(c) for _ in range(cfg.recon_res_blocks)])
        # sub-pixel heads replicate features into every phase, so each
        # pixel-shuffle starts as nearest-neighbor up-sampling
        self.up1 = _content_init(nn.Conv2d(c, 4 * c, 3, padding=1), content)
        self.up2 = _content_init(nn.Conv2d(c, 4 * c, 3, padding=1), content)
        self.tail1 = _content_init(nn.Conv2d(c, c, 3, padding=1), content)
        self.tail2 = nn.Conv2d(c, 1, 3, padding=1)
        if content:  # residual starts at zero; output = up-sampled reference
            nn.init.zeros_(self.tail2.weight)
            nn.init.zeros_(self.tail2.bias)

    def extract(self, lr_frames, hr_frames):
        """Per-frame feature sets, all at LR spatial resolution."""
        b = lr_frames.shape[0]
        lr_feat = F.leaky_relu(
            self.lr_head(lr_frames.reshape(-1, 1, *lr_frames.shape[-2:])), 0.1)
        hr_feat = self.hr_head(hr_frames.reshape(-1, 1, *hr_frames.shape[-2:]))
        feats = torch.cat([
            lr_feat.reshape(b, -1, *lr_feat.shape[-3:]),
            hr_feat.reshape(b, -1, *hr_feat.shape[-3:]),
        ], dim=1)
        t = feats.shape[1]
        flat = self.shared(feats.reshape(-1, *feats.shape[-3:]))
        return flat.reshape(b, t, *flat.shape[-3:])

    def _pyramids(self, feats):
        b, t, c, h, w = feats.shape
        levels = [feats.reshape(-1, c, h, w)]
        for down in self.pyramid_down:
            levels.append(down(levels[-1]))
        return [lvl.reshape(b, t, *lvl.shape[-3:]) for lvl in levels]

    def forward(self, lr_frames: torch.Tensor, hr_frames: torch.Tensor):
        """lr_frames (B, 3, h, w), hr_frames (B, 2, 4h, 4w) ->
        (estimate (B, 1, 4h, 4w), backward score (B,), forward score (B,))."""
        if lr_frames.ndim != 4 or hr_frames.ndim != 4:
            raise ValueError("expected (B, T, H, W) inputs")
        if hr_frames.shape[-1] != SCALE * lr_frames.shape[-1] or \
                hr_frames.shape[-2] != SCALE * lr_frames.shape[-2]:
            raise ValueError("HR inputs must be 4x the LR dimensions")

        h, w = lr_frames.shape[-2:]
        pad_h = (-h) % SCALE
        pad_w = (-w) % SCALE
        if pad_h or pad_w:
            lr_frames = F.pad(lr_frames, (0, pad_w, 0, pad_h), mode="replicate")
            hr_frames = F.pad(hr_frames, (0, SCALE * pad_w, 0, SCALE * pad_h),
                              mode="replicate")

        feats = self.extract(lr_frames, hr_frames)
        ref_index = self.cfg.n_lr_inputs // 2
        pyramids = self._pyramids(feats)

        aligned = []
        t = feats.shape[1]
        for i in range(t):
            nbr = [lvl[:, i] for lvl in pyramids]
            ref = [lvl[:, ref_index] for lvl in pyramids]
            aligned.append(self.align(nbr, ref))
        aligned = torch.stack(aligned, dim=1)

        fused, attention = self.fusion(aligned, ref_index)

        body = self.recon(fused)
        x = F.leaky_relu(F.pixel_shuffle(self.up1(body), 2), 0.1)
        x = F.leaky_relu(F.pixel_shuffle(self.up2(x), 2), 0.1)
        residual = self.tail2(F.leaky_relu(self.tail1(x), 0.1))
        base = F.interpolate(lr_frames[:, ref_index:ref_index + 1], scale_factor=SCALE,
                             mode="bilinear", align_corners=False)
        estimate = base + residual

        if pad_h or pad_w:
            estimate = estimate[..., :SCALE * h, :SCALE * w]
        hr_attention = attention[:, self.cfg.n_lr_inputs:]
        scores = hr_attention.mean(dim=(2, 3, 4))
        return estimate, scores[:, 0], scores[:, 1]
