"""Conditional denoising U-Net with addressable activation taps.

The forward pass reproduces the four-stage downsampling encoder, the
attention middle block, and the skip-connected decoder of the v1.5
denoiser. Every residual block is registered under a LayerAddress at
construction time, so hooks can be attached by name and the enumeration
never depends on module-tree string matching.
"""

from __future__ import annotations

import math

import torch
from torch import nn
from torch.nn import functional as F

from .blocks import Downsample, ResnetBlock, SpatialTransformer, Upsample
from .config import UNetConfig
from .layers import LayerAddress


def timestep_embedding(timesteps: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal embedding; t=0 maps to all-zero sines and all-one cosines."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half
    ).to(timesteps.device)
    args = timesteps.float()[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class DownStage(nn.Module):
    def __init__(self, cfg: UNetConfig, in_channels: int, out_channels: int,
                 with_attention: bool, with_downsample: bool):
        super().__init__()
        self.resnets = nn.ModuleList()
        self.attentions = nn.ModuleList()
        for j in range(cfg.layers_per_block):
            self.resnets.append(ResnetBlock(
                in_channels if j == 0 else out_channels, out_channels,
                cfg.norm_groups, cfg.time_embed_dim))
            if with_attention:
                self.attentions.append(SpatialTransformer(
                    out_channels, cfg.cross_attention_dim,
                    cfg.attention_heads, cfg.norm_groups))
        self.downsample = Downsample(out_channels) if with_downsample else None

    def forward(self, x, temb, context, skips):
        for i, resnet in enumerate(self.resnets):
            x = resnet(x, temb)
            if self.attentions:
                x = self.attentions[i](x, context)
            skips.append(x)
        if self.downsample is not None:
            x = self.downsample(x)
            skips.append(x)
        return x


class MidStage(nn.Module):
    def __init__(self, cfg: UNetConfig):
        super().__init__()
        ch = cfg.block_out_channels[-1]
        self.resnet1 = ResnetBlock(ch, ch, cfg.norm_groups, cfg.time_embed_dim)
        self.attention = SpatialTransformer(
            ch, cfg.cross_attention_dim, cfg.attention_heads, cfg.norm_groups)
        self.resnet2 = ResnetBlock(ch, ch, cfg.norm_groups, cfg.time_embed_dim)

    def forward(self, x, temb, context):
        x = self.resnet1(x, temb)
        x = self.attention(x, context)
        return self.resnet2(x, temb)


class UpStage(nn.Module):
    def __init__(self, cfg: UNetConfig, prev_channels: int, out_channels: int,
                 skip_channels: list[int], with_attention: bool, with_upsample: bool):
        super().__init__()
        self.resnets = nn.ModuleList()
        self.attentions = nn.ModuleList()
        for j in range(cfg.layers_per_block + 1):
            in_ch = (prev_channels if j == 0 else out_channels) + skip_channels[j]
            self.resnets.append(ResnetBlock(
                in_ch, out_channels, cfg.norm_groups, cfg.time_embed_dim))
            if with_attention:
                self.attentions.append(SpatialTransformer(
                    out_channels, cfg.cross_attention_dim,
                    cfg.attention_heads, cfg.norm_groups))
        self.upsample = Upsample(out_channels) if with_upsample else None

    def forward(self, x, temb, context, skips):
        for i, resnet in enumerate(self.resnets):
            x = resnet(torch.cat([x, skips.pop()], dim=1), temb)
            if self.attentions:
                x = self.attentions[i](x, context)
        if self.upsample is not None:
            x = self.upsample(x)
        return x


class UNetModel(nn.Module):
    def __init__(self, cfg: UNetConfig):
        super().__init__()
        self.cfg = cfg
        channels = cfg.block_out_channels
        n = len(channels)

        self.conv_in = nn.Conv2d(cfg.in_channels, channels[0], 3, padding=1)
        self.time_mlp = nn.Sequential(
            nn.Linear(channels[0], cfg.time_embed_dim),
            nn.SiLU(),
            nn.Linear(cfg.time_embed_dim, cfg.time_embed_dim),
        )

        self.down_stages = nn.ModuleList()
        for i, out_ch in enumerate(channels):
            in_ch = channels[i - 1] if i else channels[0]
            self.down_stages.append(DownStage(
                cfg, in_ch, out_ch,
                with_attention=cfg.down_attention[i],
                with_downsample=i < n - 1))

        self.mid_stage = MidStage(cfg)

        # skip widths per up-stage resnet mirror what the down path pushed
        reversed_ch = tuple(reversed(channels))
        up_attention = tuple(reversed(cfg.down_attention))
        self.up_stages = nn.ModuleList()
        prev = channels[-1]
        for i, out_ch in enumerate(reversed_ch):
            deeper = reversed_ch[min(i + 1, n - 1)]
            skip_channels = [
                deeper if j == cfg.layers_per_block else out_ch
                for j in range(cfg.layers_per_block + 1)
            ]
            self.up_stages.append(UpStage(
                cfg, prev, out_ch, skip_channels,
                with_attention=up_attention[i],
                with_upsample=i < n - 1))
            prev = out_ch

        self.norm_out = nn.GroupNorm(cfg.norm_groups, channels[0], eps=1e-6)
        self.conv_out = nn.Conv2d(channels[0], cfg.out_channels, 3, padding=1)

        self.taps: list[tuple[LayerAddress, nn.Module]] = []
        self._register_taps()

    def _register_taps(self) -> None:
        size = self.cfg.sample_size
        n = len(self.cfg.block_out_channels)
        for i, stage in enumerate(self.down_stages):
            for j, resnet in enumerate(stage.resnets):
                self.taps.append((LayerAddress("encoder", size >> i, j), resnet))
        deepest = size >> (n - 1)
        self.taps.append((LayerAddress("bottleneck", deepest, 0), self.mid_stage.resnet1))
        self.taps.append((LayerAddress("bottleneck", deepest, 1), self.mid_stage.resnet2))
        for i, stage in enumerate(self.up_stages):
            for j, resnet in enumerate(stage.resnets):
                self.taps.append((LayerAddress("decoder", size >> (n - 1 - i), j), resnet))

    def tap_module(self, address: LayerAddress) -> nn.Module:
        for addr, module in self.taps:
            if addr == address:
                return module
        raise ValueError(f"no such layer: {address}")

    def forward(self, latents: torch.Tensor, timesteps: torch.Tensor,
                context: torch.Tensor) -> torch.Tensor:
        temb = self.time_mlp(
            timestep_embedding(timesteps, self.cfg.block_out_channels[0]))
        x = self.conv_in(latents)
        skips = [x]
        for stage in self.down_stages:
            x = stage(x, temb, context, skips)
        x = self.mid_stage(x, temb, context)
        for stage in self.up_stages:
            x = stage(x, temb, context, skips)
        return self.conv_out(F.silu(self.norm_out(x)))
