"""Image -> prototype extraction.

One prototype per image: resize, map to [-1, 1], encode to the latent
posterior mean, run the U-Net once at timestep zero with the empty-prompt
conditioning, capture the addressed activation with a forward hook, and
average it over the spatial grid. The result is a C-vector where C is the
addressed layer's channel count.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .config import PipelineConfig
from .fpro import ProtoRecord, write_fpro
from .layers import LayerAddress
from .text import TextEncoder
from .unet import UNetModel
from .vae import VaeEncoder

WEIGHT_FILES = ("unet.pt", "vae.pt", "text.pt")


@dataclass
class Pipeline:
    config: PipelineConfig
    unet: UNetModel
    vae: VaeEncoder
    text: TextEncoder
    _context: torch.Tensor | None = field(default=None, repr=False)

    def empty_prompt(self) -> torch.Tensor:
        if self._context is None:
            with torch.no_grad():
                self._context = self.text.empty_prompt()
        return self._context


def init_pipeline(config: PipelineConfig, seed: int = 0) -> Pipeline:
    """Freshly initialized weights; extraction quality needs real ones."""
    torch.manual_seed(seed)
    pipe = Pipeline(config, UNetModel(config.unet), VaeEncoder(config.vae),
                    TextEncoder(config.text))
    pipe.unet.eval()
    pipe.vae.eval()
    pipe.text.eval()
    return pipe


def save_pipeline(pipe: Pipeline, directory: Path | str) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.json").write_text(pipe.config.to_json())
    torch.save(pipe.unet.state_dict(), directory / "unet.pt")
    torch.save(pipe.vae.state_dict(), directory / "vae.pt")
    torch.save(pipe.text.state_dict(), directory / "text.pt")


def load_pipeline(directory: Path | str) -> Pipeline:
    directory = Path(directory)
    config_path = directory / "config.json"
    if not config_path.exists():
        raise FileNotFoundError(f"missing weights: no config.json in {directory}")
    for name in WEIGHT_FILES:
        if not (directory / name).exists():
            raise FileNotFoundError(f"missing weights: no {name} in {directory}")

    # fixed single-thread math keeps extraction bitwise reproducible
    torch.set_num_threads(1)
    config = PipelineConfig.load(config_path)
    pipe = Pipeline(config, UNetModel(config.unet), VaeEncoder(config.vae),
                    TextEncoder(config.text))
    for model, name in ((pipe.unet, "unet.pt"), (pipe.vae, "vae.pt"),
                        (pipe.text, "text.pt")):
        state = torch.load(directory / name, map_location="cpu", weights_only=True)
        model.load_state_dict(state, strict=True)
        model.eval()
    return pipe


def preprocess_image(path: Path | str, image_size: int) -> torch.Tensor:
    """Decode, bicubic-resize without cropping, scale to [-1, 1]."""
    try:
        with Image.open(path) as img:
            img = img.convert("RGB").resize((image_size, image_size), Image.BICUBIC)
            array = np.asarray(img, dtype=np.float32)
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"cannot decode image {path}: {exc}") from None
    array = array / 127.5 - 1.0
    return torch.from_numpy(array).permute(2, 0, 1)


class Extractor:
    """Hooks one layer of a pipeline and turns image batches into vectors.

    `feature_transform` is a test hook applied to the captured feature map
    before spatial averaging; production use leaves it None.
    """

    def __init__(self, pipe: Pipeline, address: LayerAddress,
                 feature_transform=None):
        self.pipe = pipe
        self.address = address
        self.module = pipe.unet.tap_module(address)  # raises for unknown layers
        self.feature_transform = feature_transform
        self._captured: torch.Tensor | None = None

    def _hook(self, module, args, output):
        self._captured = output

    def extract(self, images: torch.Tensor) -> np.ndarray:
        """(N, 3, S, S) images in [-1, 1] -> (N, C) float32 prototypes."""
        handle = self.module.register_forward_hook(self._hook)
        try:
            with torch.no_grad():
                latents = self.pipe.vae.encode_mean(images)
                timesteps = torch.zeros(images.shape[0], dtype=torch.long)
                context = self.pipe.empty_prompt().expand(images.shape[0], -1, -1)
                self.pipe.unet(latents, timesteps, context)
        finally:
            handle.remove()
        captured = self._captured
        self._captured = None
        if captured is None:
            raise RuntimeError(f"hook on {self.address} never fired")
        if self.feature_transform is not None:
            captured = self.feature_transform(captured)
        return captured.mean(dim=(2, 3)).to(torch.float32).numpy()


@dataclass(frozen=True)
class ImageEntry:
    path: Path
    image_id: str
    authenticity: int
    generator: str | None
    class_hint: int | None


@dataclass(frozen=True)
class ExtractionJob:
    entries: tuple[ImageEntry, ...]
    layer: LayerAddress
    out_path: Path
    batch_size: int = 8

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("extraction job has no images")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")


def run_job(pipe: Pipeline, job: ExtractionJob, feature_transform=None,
            log=None) -> tuple[int, int]:
    """Extract every entry and write one FPRO file.

    Returns (record count, prototype dim). Throughput is logged, never
    asserted; speed depends entirely on the host.
    """
    extractor = Extractor(pipe, job.layer, feature_transform)
    size = pipe.config.image_size
    records: list[ProtoRecord] = []
    started = time.perf_counter()

    for lo in range(0, len(job.entries), job.batch_size):
        batch = job.entries[lo:lo + job.batch_size]
        images = torch.stack([preprocess_image(e.path, size) for e in batch])
        vectors = extractor.extract(images)
        for entry, vec in zip(batch, vectors):
            records.append(ProtoRecord(
                entry.image_id, entry.authenticity, entry.generator,
                entry.class_hint, vec))

    elapsed = time.perf_counter() - started
    dim = records[0].features.shape[0]
    write_fpro(job.out_path, dim, str(job.layer), records)
    if log is not None:
        per_image = elapsed / len(records)
        log(f"extracted {len(records)} prototypes (D={dim}) in {elapsed:.2f}s "
            f"({per_image:.3f}s/image) -> {job.out_path}")
    return len(records), dim
