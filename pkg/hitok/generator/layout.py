"""
Disposition de la séquence du générateur.

Préfixe texte de longueur fixe (complété à droite), puis les couches de la
plus grossière à la plus dense, chacune en ordre raster (t, h, w).
"""
from dataclasses import dataclass
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np

from ..config import HierarchyConfig, LayerConfig
from ..errors import ShapeError


@dataclass(frozen=True)
class SequenceLayout:
    """Positions et métadonnées (couche, t, h, w) de toute la séquence."""

    text_length: int
    layers: Tuple[LayerConfig, ...]

    @classmethod
    def from_hierarchy(cls, cfg: HierarchyConfig, text_length: int) -> 'SequenceLayout':
        return cls(int(text_length), tuple(cfg.layers))

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def text_layer_id(self) -> int:
        """Identifiant de couche réservé au préfixe texte."""
        return self.num_layers

    def stream_order(self) -> List[int]:
        return list(range(self.num_layers - 1, -1, -1))

    @property
    def video_length(self) -> int:
        return sum(layer.token_count for layer in self.layers)

    @property
    def total_length(self) -> int:
        return self.text_length + self.video_length

    @cached_property
    def segments(self) -> Tuple[Tuple[int, int, int], ...]:
        """(couche, début, fin) dans l'index vidéo, dans l'ordre du flux."""
        result = []
        offset = 0
        for m in self.stream_order():
            count = self.layers[m].token_count
            result.append((m, offset, offset + count))
            offset += count
        return tuple(result)

    @cached_property
    def video_layers(self) -> np.ndarray:
        """Couche propriétaire de chaque jeton vidéo [N]."""
        owner = np.empty(self.video_length, dtype=np.int64)
        for m, start, end in self.segments:
            owner[start:end] = m
        return owner

    @cached_property
    def layer_ids(self) -> np.ndarray:
        """Identifiant de couche de chaque position absolue [L_text + N]."""
        return np.concatenate([np.full(self.text_length, self.text_layer_id, dtype=np.int64), self.video_layers])

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Coordonnées (t, h, w) de chaque position; le texte occupe (i, 0, 0)."""
        coords = [np.stack([np.arange(self.text_length), np.zeros(self.text_length, dtype=np.int64),
                            np.zeros(self.text_length, dtype=np.int64)], axis=1)]
        for m, _, _ in self.segments:
            t, h, w = self.layers[m].latent_shape
            grid = np.stack(np.meshgrid(np.arange(t), np.arange(h), np.arange(w), indexing='ij'), axis=-1)
            coords.append(grid.reshape(-1, 3))
        return np.concatenate(coords).astype(np.int64)

    def segment_of(self, m: int) -> Tuple[int, int]:
        for layer, start, end in self.segments:
            if layer == m:
                return start, end
        raise ShapeError(f"couche {m} absente de la disposition")

    def owner(self, video_index: int) -> int:
        if not 0 <= video_index < self.video_length:
            raise ShapeError(f"jeton vidéo {video_index} hors de [0, {self.video_length})")
        return int(self.video_layers[video_index])

    def vocab_size(self, m: int) -> int:
        return self.layers[m].codebook_size

    def split_tokens(self, tokens: np.ndarray) -> List[np.ndarray]:
        """Découpe un flux [..., N] en segments par couche (indice 0 = la plus dense)."""
        tokens = np.asarray(tokens)
        if tokens.shape[-1] != self.video_length:
            raise ShapeError(f"flux de {tokens.shape[-1]} jetons, {self.video_length} attendus")
        parts: List[np.ndarray] = [None] * self.num_layers
        for m, start, end in self.segments:
            parts[m] = tokens[..., start:end]
        return parts

    def matches(self, layers: Sequence[LayerConfig]) -> bool:
        return len(layers) == self.num_layers and all(
            a.quant_dim == b.quant_dim and tuple(a.latent_shape) == tuple(b.latent_shape)
            for a, b in zip(layers, self.layers))
