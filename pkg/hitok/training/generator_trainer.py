"""
Entraînement du générateur sur les flux d'un tokenizer figé: supervision
décalée, entropie croisée pondérée par couche, abandon de condition.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..config import RunConfig
from ..core.params import adam_step
from ..core.tensor import no_grad
from ..data.captions import encode_caption
from ..errors import ConfigError, DivergenceError, NonFiniteError
from ..generator.layout import SequenceLayout
from ..generator.transformer import Generator
from ..tokenizer.hier_vae import HierTokenizer
from .losses import generator_loss, layer_weights
from .metric_log import MetricLog

logger = logging.getLogger(__name__)


@dataclass
class GeneratorRun:
    generator: Generator
    weights: np.ndarray
    history: List[Dict[str, float]] = field(default_factory=list)


def tokenize_clips(tokenizer: HierTokenizer, clips: Sequence[np.ndarray], batch_size: int = 8) -> np.ndarray:
    """Flux aplatis [n, N] (ordre grossier vers dense) de chaque clip."""
    streams = []
    with no_grad():
        for start in range(0, len(clips), batch_size):
            latents = tokenizer.encode(np.stack(clips[start:start + batch_size]))
            streams.extend(latents.to_stream(i).flatten() for i in range(latents.batch_size))
    return np.stack(streams)


def encode_captions(captions: Sequence[str], length: int) -> np.ndarray:
    return np.stack([encode_caption(caption, length) for caption in captions])


def train_generator(run_config: RunConfig, tokenizer: HierTokenizer, items: Sequence[Tuple[np.ndarray, str]],
                    out_path: Optional[str] = None, log_path: Optional[str] = None,
                    progress: bool = False) -> GeneratorRun:
    """
    Entraîne le générateur; le tokenizer n'est jamais modifié.

    Args:
        run_config: Sections `generator` et `generator_train`
        tokenizer: Tokenizer entraîné (figé)
        items: Paires (clip, légende)
        out_path: Checkpoint HTCK à écrire (avec sa configuration)
        log_path: Journal JSON lines
        progress: Barre de progression tqdm
    """
    gcfg = run_config.generator
    cfg = run_config.generator_train
    if len(items) == 0:
        raise ConfigError("jeu d'entraînement vide")
    run_config = replace(run_config, hierarchy=tokenizer.cfg)
    layout = SequenceLayout.from_hierarchy(tokenizer.cfg, gcfg.text_length)
    generator = Generator(gcfg, layout, seed=cfg.seed)
    tokens = tokenize_clips(tokenizer, [clip for clip, _ in items])
    texts = encode_captions([caption for _, caption in items], gcfg.text_length)
    weights = layer_weights(tokenizer.cfg.token_counts(), cfg.layer_weights)
    rng = np.random.default_rng(cfg.seed)
    batch_size = min(cfg.batch_size, len(tokens))
    run = GeneratorRun(generator, weights)
    logger.info("générateur : %d paramètres, %d flux de %d jetons", generator.num_parameters(),
                len(tokens), layout.video_length)

    with MetricLog(log_path) as log:
        log.header(run_config.to_dict(), layer_weights=weights.tolist(), lr=cfg.lr, batch_size=cfg.batch_size,
                   condition_dropout=cfg.condition_dropout)
        for step in tqdm(range(cfg.steps), desc="générateur", disable=not progress):
            index = rng.choice(len(tokens), size=batch_size, replace=False)
            uncond = rng.random(batch_size) < cfg.condition_dropout
            try:
                logits = generator.training_logits(texts[index], uncond, tokens[index], rng=rng, training=True)
                loss, parts = generator_loss(logits, layout.split_tokens(tokens[index]), weights)
                generator.store.zero_grad()
                loss.backward()
                adam_step(generator.store, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
            except NonFiniteError as e:
                raise DivergenceError(f"étape {step} : {e.message}") from e
            run.history.append(parts)
            log.log(step, **parts)
            if step % cfg.log_every == 0 or step == cfg.steps - 1:
                logger.info("étape %d/%d  ce=%.4f", step, cfg.steps, parts['total'])
        log.summary(final_loss=run.history[-1]['total'])

    if out_path:
        generator.save(out_path, run_config)
        logger.info("checkpoint écrit : %s", out_path)
    return run


def uniform_baseline(hierarchy, weights: Sequence[float]) -> float:
    """Entropie croisée pondérée de logits uniformes: somme des w_m * quant_dim_m * ln 2."""
    return float(sum(w * layer.quant_dim * np.log(2.0) for w, layer in zip(weights, hierarchy.layers)))


def evaluate_generator(generator: Generator, tokens: np.ndarray, texts: np.ndarray,
                       weights: Sequence[float]) -> Dict[str, float]:
    """Entropie croisée pondérée (forçage par l'enseignant) comparée à la référence uniforme."""
    with no_grad():
        logits = generator.training_logits(texts, np.zeros(len(tokens), dtype=bool), tokens, training=False)
        _, parts = generator_loss(logits, generator.layout.split_tokens(tokens), weights)
    baseline = uniform_baseline(generator.layout, weights)
    parts['uniform_baseline'] = baseline
    parts['relative_gain'] = 1.0 - parts['total'] / baseline
    return parts
