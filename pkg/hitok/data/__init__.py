"""Données synthétiques: légendes, clips procéduraux, oracle, stockage."""
from .captions import VOCAB, VOCAB_SIZE, encode_caption, make_caption, parse_caption
from .synth import SceneSpec, dataset, make_clip, random_spec
from .oracle import OracleResult, caption_oracle
from .store import read_dataset, write_dataset, split_holdout

__all__ = [
    'VOCAB', 'VOCAB_SIZE', 'encode_caption', 'make_caption', 'parse_caption',
    'SceneSpec', 'dataset', 'make_clip', 'random_spec', 'OracleResult', 'caption_oracle',
    'read_dataset', 'write_dataset', 'split_holdout',
]
