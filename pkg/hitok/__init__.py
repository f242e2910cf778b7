"""
hitok - tokenizer vidéo hiérarchique et générateur autorégressif texte-vers-vidéo.
"""
from .settings import apply_thread_limit

# avant le premier import de numpy
apply_thread_limit()

from .config import HierarchyConfig, LayerConfig, RunConfig, SamplingParams  # noqa: E402
from .errors import HitokError  # noqa: E402
from .metrics import psnr, ssim  # noqa: E402
from .tokenizer import HierTokenizer, HierTokenStream, token_shapes  # noqa: E402
from .generator import Generator, generate  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    'HierarchyConfig', 'LayerConfig', 'RunConfig', 'SamplingParams', 'HitokError',
    'psnr', 'ssim', 'HierTokenizer', 'HierTokenStream', 'token_shapes', 'Generator', 'generate',
]
