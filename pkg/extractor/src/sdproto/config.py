"""Model shape configuration.

Channel counts, block layouts, and embedding widths live here and nowhere
else; every dimension the extractor reports is derived from these values at
runtime. The defaults describe Stable Diffusion v1.5. The tiny variants
keep the same topology at a fraction of the width so tests run in seconds.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class UNetConfig:
    """Denoising U-Net: 4 stages down, a middle block, 4 stages up."""

    in_channels: int = 4
    out_channels: int = 4
    block_out_channels: tuple[int, ...] = (320, 640, 1280, 1280)
    layers_per_block: int = 2
    cross_attention_dim: int = 768
    attention_heads: int = 8
    norm_groups: int = 32
    sample_size: int = 64
    # which down stages carry cross-attention; up stages mirror in reverse
    down_attention: tuple[bool, ...] = (True, True, True, False)

    def __post_init__(self) -> None:
        if len(self.block_out_channels) != len(self.down_attention):
            raise ValueError("down_attention must match block_out_channels")
        for c in self.block_out_channels:
            if c % self.norm_groups:
                raise ValueError(f"channel count {c} not divisible by norm_groups")
            if c % self.attention_heads:
                raise ValueError(f"channel count {c} not divisible by attention_heads")

    @property
    def time_embed_dim(self) -> int:
        return self.block_out_channels[0] * 4


@dataclass(frozen=True)
class VaeConfig:
    """Image-to-latent encoder half of the autoencoder."""

    in_channels: int = 3
    latent_channels: int = 4
    block_out_channels: tuple[int, ...] = (128, 256, 512, 512)
    layers_per_block: int = 2
    norm_groups: int = 32
    scaling_factor: float = 0.18215

    @property
    def downsample_factor(self) -> int:
        return 2 ** (len(self.block_out_channels) - 1)


@dataclass(frozen=True)
class TextConfig:
    """Causal transformer producing the conditioning sequence."""

    vocab_size: int = 49408
    hidden_size: int = 768
    num_layers: int = 12
    num_heads: int = 12
    max_length: int = 77
    bos_token_id: int = 49406
    eos_token_id: int = 49407

    def empty_prompt_ids(self) -> list[int]:
        # the empty prompt tokenizes to start-of-text followed by
        # end-of-text padding for the rest of the window
        return [self.bos_token_id] + [self.eos_token_id] * (self.max_length - 1)


@dataclass(frozen=True)
class PipelineConfig:
    unet: UNetConfig = field(default_factory=UNetConfig)
    vae: VaeConfig = field(default_factory=VaeConfig)
    text: TextConfig = field(default_factory=TextConfig)

    def __post_init__(self) -> None:
        if self.vae.latent_channels != self.unet.in_channels:
            raise ValueError("latent channels must match U-Net input channels")
        if self.text.hidden_size != self.unet.cross_attention_dim:
            raise ValueError("text hidden size must match cross-attention dim")

    @property
    def image_size(self) -> int:
        """Input side length implied by the latent grid and VAE stride."""
        return self.unet.sample_size * self.vae.downsample_factor

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        raw = json.loads(text)
        return cls(
            unet=_build(UNetConfig, raw.get("unet", {})),
            vae=_build(VaeConfig, raw.get("vae", {})),
            text=_build(TextConfig, raw.get("text", {})),
        )

    @classmethod
    def load(cls, path: Path | str) -> "PipelineConfig":
        return cls.from_json(Path(path).read_text())


def _build(cls, raw: dict):
    kwargs = {}
    for name, value in raw.items():
        if name not in cls.__dataclass_fields__:
            raise ValueError(f"unknown {cls.__name__} field: {name}")
        kwargs[name] = tuple(value) if isinstance(value, list) else value
    return cls(**kwargs)


def sd15_config() -> PipelineConfig:
    """The published v1.5 dimensions."""
    return PipelineConfig()


def tiny_config() -> PipelineConfig:
    """Same topology, toy widths: 32px images, 16px latents."""
    return PipelineConfig(
        unet=UNetConfig(
            block_out_channels=(8, 12, 16, 16),
            cross_attention_dim=16,
            attention_heads=2,
            norm_groups=2,
            sample_size=16,
        ),
        vae=VaeConfig(
            block_out_channels=(8, 16),
            layers_per_block=1,
            norm_groups=2,
        ),
        text=TextConfig(
            vocab_size=64,
            hidden_size=16,
            num_layers=2,
            num_heads=2,
            max_length=8,
            bos_token_id=62,
            eos_token_id=63,
        ),
    )
