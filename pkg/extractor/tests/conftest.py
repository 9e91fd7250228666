import numpy as np
import pytest
from PIL import Image


@pytest.fixture
def image_dataset(tmp_path):
    """Ten paired images: two categories, five samples each, both trees."""
    rng = np.random.default_rng(7)
    root = tmp_path / "dataset"
    for category in ("kitchen", "office"):
        for sub in ("rgb", "depth"):
            (root / sub / category).mkdir(parents=True)
        for i in range(5):
            for sub in ("rgb", "depth"):
                pixels = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
                Image.fromarray(pixels).save(root / sub / category / f"img_{i:02d}.png")
    return root
