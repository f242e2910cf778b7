"""Générateur autorégressif: disposition, RoPE 3D, cache, transformeur, échantillonnage."""
from .layout import SequenceLayout
from .rope import rope3d, rope_tables
from .kv_cache import KvCache
from .sampling import cfg_logits, sample_token, token_probabilities, top_k_filter
from .transformer import Generator, IncrementalDecoder
from .pipeline import (
    GenerationResult, generate, generate_tokens, generate_sweep, seed_diversity, teacher_forced_accuracy,
)

__all__ = [
    'SequenceLayout', 'rope3d', 'rope_tables', 'KvCache', 'cfg_logits', 'sample_token',
    'token_probabilities', 'top_k_filter', 'Generator', 'IncrementalDecoder', 'GenerationResult',
    'generate', 'generate_tokens', 'generate_sweep', 'seed_diversity', 'teacher_forced_accuracy',
]
