import numpy as np
import pytest
from PIL import Image

import sdproto


@pytest.fixture(scope="session")
def tiny_weights(tmp_path_factory):
    """Saved tiny-config pipeline; tests load it like real weights."""
    directory = tmp_path_factory.mktemp("weights")
    pipe = sdproto.init_pipeline(sdproto.tiny_config(), seed=5)
    sdproto.save_pipeline(pipe, directory)
    return directory


@pytest.fixture(scope="session")
def tiny_pipeline(tiny_weights):
    return sdproto.load_pipeline(tiny_weights)


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    """Four deterministic PNGs of varying aspect ratio."""
    directory = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(7)
    shapes = [(48, 48), (64, 40), (32, 56), (41, 41)]
    for i, (h, w) in enumerate(shapes):
        arr = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        Image.fromarray(arr).save(directory / f"img{i}.png")
    return directory


@pytest.fixture(scope="session")
def manifest_csv(image_dir):
    path = image_dir / "manifest.csv"
    lines = [
        "path,authenticity,generator,class_hint",
        "img0.png,real,,17",
        "img1.png,fake,SDV15,",
        "img2.png,fake,BigGAN,3",
        "img3.png,real,,",
    ]
    path.write_text("\n".join(lines) + "\n")
    return path
