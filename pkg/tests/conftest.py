import numpy as np
import pytest

from hitok.config import HierarchyConfig, LayerConfig
from hitok.core.tensor import precision


@pytest.fixture
def float64():
    with precision(np.float64):
        yield


@pytest.fixture
def tiny_hierarchy():
    """Hiérarchie minuscule (8x16x16) pour les tests rapides du tokenizer."""
    return HierarchyConfig(
        input_shape=(8, 16, 16, 3),
        layers=[LayerConfig(6, (2, 4, 4)), LayerConfig(4, (1, 2, 2))],
        encoder_widths=[8, 8],
        encoder_strides=[(2, 2), (2, 2)],
        compressor_width=8,
        norm_groups=4,
    )


@pytest.fixture
def small_generator(tiny_hierarchy):
    """Générateur à deux blocs sur la hiérarchie minuscule."""
    from hitok.config import GeneratorConfig
    from hitok.generator import Generator, SequenceLayout

    cfg = GeneratorConfig(num_layers=2, hidden=32, heads=2, rope_allocation=(6, 6, 4), text_length=8)
    return Generator(cfg, SequenceLayout.from_hierarchy(tiny_hierarchy, 8), seed=0)
