"""Image-to-latent encoder.

Only the encoder half of the autoencoder exists here; extraction never
decodes. encode_mean returns the posterior mean (no sampling noise) already
multiplied by the latent scaling factor, which is what the U-Net consumes.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .blocks import ResnetBlock, SelfAttention2d
from .config import VaeConfig


class VaeDownStage(nn.Module):
    def __init__(self, cfg: VaeConfig, in_channels: int, out_channels: int,
                 with_downsample: bool):
        super().__init__()
        self.resnets = nn.ModuleList(
            ResnetBlock(in_channels if j == 0 else out_channels, out_channels,
                        cfg.norm_groups)
            for j in range(cfg.layers_per_block)
        )
        # stride-2 conv with one-sided padding keeps even output sizes
        self.downsample = (
            nn.Conv2d(out_channels, out_channels, 3, stride=2) if with_downsample else None
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for resnet in self.resnets:
            x = resnet(x)
        if self.downsample is not None:
            x = self.downsample(F.pad(x, (0, 1, 0, 1)))
        return x


class VaeEncoder(nn.Module):
    def __init__(self, cfg: VaeConfig):
        super().__init__()
        self.cfg = cfg
        channels = cfg.block_out_channels
        self.conv_in = nn.Conv2d(cfg.in_channels, channels[0], 3, padding=1)
        self.down_stages = nn.ModuleList()
        for i, out_ch in enumerate(channels):
            in_ch = channels[i - 1] if i else channels[0]
            self.down_stages.append(
                VaeDownStage(cfg, in_ch, out_ch, with_downsample=i < len(channels) - 1))
        mid = channels[-1]
        self.mid_resnet1 = ResnetBlock(mid, mid, cfg.norm_groups)
        self.mid_attention = SelfAttention2d(mid, cfg.norm_groups)
        self.mid_resnet2 = ResnetBlock(mid, mid, cfg.norm_groups)
        self.norm_out = nn.GroupNorm(cfg.norm_groups, mid, eps=1e-6)
        self.conv_out = nn.Conv2d(mid, 2 * cfg.latent_channels, 3, padding=1)
        self.quant_conv = nn.Conv2d(2 * cfg.latent_channels, 2 * cfg.latent_channels, 1)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """(N, 3, S, S) in [-1, 1] -> (N, 2*latent, S/f, S/f) moments."""
        x = self.conv_in(images)
        for stage in self.down_stages:
            x = stage(x)
        x = self.mid_resnet1(x)
        x = self.mid_attention(x)
        x = self.mid_resnet2(x)
        x = self.conv_out(F.silu(self.norm_out(x)))
        return self.quant_conv(x)

    def encode_mean(self, images: torch.Tensor) -> torch.Tensor:
        """Scaled posterior mean, the deterministic latent for extraction."""
        moments = self.forward(images)
        mean = moments[:, : self.cfg.latent_channels]
        return mean * self.cfg.scaling_factor
