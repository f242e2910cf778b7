"""
Génération de bout en bout: flux guidé (CFG) puis décodage par le tokenizer,
et études associées (balayage d'échelles CFG, diversité des graines,
précision en forçage par l'enseignant).
"""
import itertools
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..config import SamplingParams
from ..core import functional as F
from ..core.tensor import no_grad
from ..data.captions import encode_caption
from ..errors import ConfigError, ShapeError
from ..tokenizer.hier_vae import HierLatents, HierTokenizer
from ..tokenizer.tokens import HierTokenStream
from .sampling import cfg_logits, sample_token
from .transformer import Generator, IncrementalDecoder

logger = logging.getLogger(__name__)

DEFAULT_SWEEP = (1.0, 5.0, 7.5)


@dataclass
class GenerationResult:
    """Flux échantillonné, clip décodé et paramètres utilisés."""

    caption: str
    params: SamplingParams
    stream: HierTokenStream
    video: Optional[np.ndarray] = None


def check_compatible(tokenizer: HierTokenizer, generator: Generator) -> None:
    if not generator.layout.matches(tokenizer.cfg.layers):
        raise ConfigError("le générateur et le tokenizer n'ont pas la même hiérarchie de couches")


def generate_tokens(generator: Generator, caption: str, params: SamplingParams) -> HierTokenStream:
    """
    Échantillonne un flux complet avec deux caches (conditionnel et
    inconditionnel) combinés par `cfg_logits`.
    """
    params.validate()
    layout = generator.layout
    total = layout.video_length
    if params.max_tokens is not None and params.max_tokens < total:
        raise ConfigError(f"max_tokens {params.max_tokens} < {total} jetons requis par la hiérarchie")
    rng = np.random.default_rng(params.seed)
    text_ids = encode_caption(caption, layout.text_length)
    tokens = np.empty(total, dtype=np.int64)
    with no_grad():
        cond = IncrementalDecoder(generator, text_ids)
        uncond = IncrementalDecoder(generator, None, uncond=True)
        cond_logits, uncond_logits = cond.start(), uncond.start()
        for j in range(total):
            logits = cfg_logits(cond_logits, uncond_logits, params.cfg_scale)
            token = sample_token(logits, rng, params.temperature, params.top_k)
            assert token < layout.vocab_size(layout.owner(j))
            tokens[j] = token
            cond_logits, uncond_logits = cond.feed(token), uncond.feed(token)
    return HierTokenStream.from_flat(tokens, list(layout.layers))


def generate(tokenizer: HierTokenizer, generator: Generator, caption: str,
             params: Optional[SamplingParams] = None) -> GenerationResult:
    """Flux guidé puis clip [T, H, W, C] décodé."""
    params = params or SamplingParams()
    check_compatible(tokenizer, generator)
    stream = generate_tokens(generator, caption, params)
    video = tokenizer.decode(HierLatents.from_stream(stream))[0]
    logger.info("généré : '%s' (graine %d, cfg %.2f)", caption, params.seed, params.cfg_scale)
    return GenerationResult(caption, params, stream, video)


def generate_sweep(tokenizer: HierTokenizer, generator: Generator, caption: str,
                   params: Optional[SamplingParams] = None,
                   scales: Sequence[float] = DEFAULT_SWEEP) -> List[GenerationResult]:
    """Une génération par échelle CFG, même légende et même graine."""
    params = params or SamplingParams()
    return [generate(tokenizer, generator, caption, replace(params, cfg_scale=float(scale))) for scale in scales]


def seed_diversity(generator: Generator, caption: str, seeds: Sequence[int],
                   params: Optional[SamplingParams] = None) -> Dict[str, object]:
    """
    Nombre de jetons différents entre chaque paire de graines.

    Returns:
        Matrice des différences, nombre de paires distinctes et total de paires
    """
    params = params or SamplingParams()
    streams = [generate_tokens(generator, caption, replace(params, seed=int(seed))).flatten() for seed in seeds]
    n = len(streams)
    differences = np.zeros((n, n), dtype=np.int64)
    for i, j in itertools.combinations(range(n), 2):
        differences[i, j] = differences[j, i] = int((streams[i] != streams[j]).sum())
    pairs = n * (n - 1) // 2
    distinct = int((differences[np.triu_indices(n, 1)] > 0).sum())
    return {'seeds': [int(s) for s in seeds], 'differences': differences.tolist(),
            'distinct_pairs': distinct, 'pairs': pairs}


def teacher_forced_accuracy(generator: Generator, caption: str, stream: HierTokenStream) -> Dict[int, float]:
    """
    Part des jetons de chaque couche retrouvés par argmax quand le préfixe
    vrai est fourni à chaque position.
    """
    if not generator.layout.matches(stream.layer_configs()):
        raise ShapeError("flux incompatible avec la disposition du générateur")
    tokens = stream.flatten()[None]
    text_ids = encode_caption(caption, generator.layout.text_length)[None]
    with no_grad():
        logits = generator.training_logits(text_ids, np.array([False]), tokens, training=False)
    targets = generator.layout.split_tokens(tokens)
    return {m: float((logits[m].data.argmax(axis=-1) == targets[m].reshape(-1)).mean())
            for m in range(generator.layout.num_layers)}


def layer_cross_entropy(generator: Generator, caption: str, stream: HierTokenStream) -> Dict[int, float]:
    """Entropie croisée par couche (forçage par l'enseignant, condition texte)."""
    tokens = stream.flatten()[None]
    text_ids = encode_caption(caption, generator.layout.text_length)[None]
    with no_grad():
        logits = generator.training_logits(text_ids, np.array([False]), tokens, training=False)
    targets = generator.layout.split_tokens(tokens)
    return {m: float(F.cross_entropy(logits[m], targets[m].reshape(-1)).item())
            for m in range(generator.layout.num_layers)}
