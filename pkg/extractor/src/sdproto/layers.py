"""Addresses for the tappable activations inside the U-Net.

An address is stage + spatial resolution + index within that stage's run at
that resolution, written "decoder_16_0". Tap points are the residual-block
outputs; attention modules transform the stream between taps but are not
separately addressable, which keeps "first layer of the decoder at 16x16"
unambiguous.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .config import UNetConfig

STAGES = ("encoder", "bottleneck", "decoder")


@dataclass(frozen=True)
class LayerAddress:
    stage: str
    resolution: int
    index: int

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage: {self.stage!r}")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.index < 0:
            raise ValueError("index must be non-negative")

    def __str__(self) -> str:
        return f"{self.stage}_{self.resolution}_{self.index}"


def parse_address(text: str) -> LayerAddress:
    parts = text.split("_")
    if len(parts) != 3:
        raise ValueError(f"layer address must look like 'decoder_16_0', got {text!r}")
    stage, res, idx = parts
    if stage not in STAGES:
        raise ValueError(f"unknown stage in layer address: {stage!r}")
    try:
        return LayerAddress(stage, int(res), int(idx))
    except ValueError as exc:
        raise ValueError(f"bad layer address {text!r}: {exc}") from None


@dataclass(frozen=True)
class LayerEntry:
    """One tappable activation: where it lives and how wide it is."""

    address: LayerAddress
    channels: int


def layer_menu(config: UNetConfig) -> tuple[LayerEntry, ...]:
    """Every tap the U-Net exposes, in forward-pass order.

    Pure config arithmetic; no model is instantiated. The encoder visits
    resolutions from the latent size downward, the decoder back up, and
    channel widths follow block_out_channels. Prototype length for an
    address is exactly the channels recorded here.
    """
    out = []
    n = len(config.block_out_channels)
    size = config.sample_size

    for i, channels in enumerate(config.block_out_channels):
        res = size >> i
        for j in range(config.layers_per_block):
            out.append(LayerEntry(LayerAddress("encoder", res, j), channels))

    deepest = size >> (n - 1)
    mid_channels = config.block_out_channels[-1]
    for j in range(2):
        out.append(LayerEntry(LayerAddress("bottleneck", deepest, j), mid_channels))

    reversed_channels = tuple(reversed(config.block_out_channels))
    for i, channels in enumerate(reversed_channels):
        res = size >> (n - 1 - i)
        for j in range(config.layers_per_block + 1):
            out.append(LayerEntry(LayerAddress("decoder", res, j), channels))

    return tuple(out)


def menu_channels(config: UNetConfig, address: LayerAddress) -> int:
    for entry in layer_menu(config):
        if entry.address == address:
            return entry.channels
    raise ValueError(f"no such layer: {address}")


def enumerate_layers(model) -> list[LayerAddress]:
    """Addresses exposed by a loaded model, forward order, stable.

    Anything without tap metadata yields an empty list with a warning
    rather than an error, so sweeps over mixed checkpoints keep going.
    """
    taps = getattr(model, "taps", None)
    if taps is None:
        warnings.warn(
            f"cannot enumerate layers of {type(model).__name__}: "
            "not a recognized U-Net", stacklevel=2)
        return []
    return [address for address, _ in taps]
