"""Session fixtures; the builders themselves live in builders.py."""

import pytest

from builders import tiny_world


@pytest.fixture(scope="session")
def world16():
    """Session-wide tiny world: dim 16, 8 sigma separation, 40 per class."""
    return tiny_world()
