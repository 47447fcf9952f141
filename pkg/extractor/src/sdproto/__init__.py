"""Prototype-vector extraction from a pre-trained denoising U-Net.

Images go in, FPRO feature files come out: each image is resized, encoded
to its latent posterior mean, pushed through one U-Net forward pass at
timestep zero with empty-prompt conditioning, and the addressed layer's
feature map is spatially averaged into a single vector.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, TextConfig, UNetConfig, VaeConfig, sd15_config, tiny_config
from .extract import (
    ExtractionJob,
    Extractor,
    ImageEntry,
    Pipeline,
    init_pipeline,
    load_pipeline,
    preprocess_image,
    run_job,
    save_pipeline,
)
from .fpro import FAKE, GENERATOR_NAMES, REAL, ProtoRecord, read_fpro, write_fpro
from .layers import LayerAddress, LayerEntry, enumerate_layers, layer_menu, menu_channels, parse_address
from .manifest import read_manifest
from .text import TextEncoder
from .unet import UNetModel
from .vae import VaeEncoder

__all__ = [
    "ExtractionJob",
    "Extractor",
    "FAKE",
    "GENERATOR_NAMES",
    "ImageEntry",
    "LayerAddress",
    "LayerEntry",
    "Pipeline",
    "PipelineConfig",
    "ProtoRecord",
    "REAL",
    "TextConfig",
    "TextEncoder",
    "UNetConfig",
    "UNetModel",
    "VaeConfig",
    "VaeEncoder",
    "enumerate_layers",
    "init_pipeline",
    "layer_menu",
    "load_pipeline",
    "menu_channels",
    "parse_address",
    "preprocess_image",
    "read_fpro",
    "read_manifest",
    "run_job",
    "save_pipeline",
    "sd15_config",
    "tiny_config",
    "write_fpro",
    "__version__",
]
