"""Tokenizer vidéo hiérarchique: LFQ, blocs causaux, encodeur/décodeur."""
from .lfq import LfqCodes, quantize, index_to_signs, signs_to_indices, entropy_penalty
from .tokens import TokenGrid, HierTokenStream
from .hier_vae import HierTokenizer, HierLatents, TokenShapes, token_shapes

__all__ = [
    'LfqCodes', 'quantize', 'index_to_signs', 'signs_to_indices', 'entropy_penalty',
    'TokenGrid', 'HierTokenStream', 'HierTokenizer', 'HierLatents', 'TokenShapes', 'token_shapes',
]
