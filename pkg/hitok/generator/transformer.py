"""
Transformeur décodeur sur le flux hiérarchique.

Entrée: préfixe texte (ou plongements inconditionnels appris) puis jetons
vidéo; plongements par couche + plongement d'identité de couche; RoPE 3D
dans l'attention; une tête de sortie par couche. La sortie à la position
absolue L_text - 1 + j prédit le jeton vidéo j.
"""
import logging
from typing import List, Optional, Sequence

import numpy as np

from ..config import GeneratorConfig, RunConfig, load_sidecar, sidecar_path
from ..core import functional as F
from ..core.checkpoint import load_checkpoint, save_checkpoint
from ..core.params import ParamStore
from ..core.tensor import Tensor
from ..data.captions import VOCAB_SIZE
from ..errors import ShapeError
from .kv_cache import KvCache
from .layout import SequenceLayout
from .rope import axis_blocks, check_allocation, rope_tables

logger = logging.getLogger(__name__)


class Block:
    """Bloc pré-normalisé: attention causale puis FFN GELU, chacun résiduel."""

    def __init__(self, store: ParamStore, name: str, cfg: GeneratorConfig):
        d = cfg.hidden
        self.heads = cfg.heads
        self.ln1_gamma = store.create(f"{name}.ln1.gamma", (d,), init='ones')
        self.ln1_beta = store.create(f"{name}.ln1.beta", (d,), init='zeros')
        self.qkv_weight = store.create(f"{name}.attn.qkv.weight", (d, 3 * d))
        self.qkv_bias = store.create(f"{name}.attn.qkv.bias", (3 * d,), init='zeros')
        self.out_weight = store.create(f"{name}.attn.out.weight", (d, d))
        self.out_bias = store.create(f"{name}.attn.out.bias", (d,), init='zeros')
        self.ln2_gamma = store.create(f"{name}.ln2.gamma", (d,), init='ones')
        self.ln2_beta = store.create(f"{name}.ln2.beta", (d,), init='zeros')
        self.up_weight = store.create(f"{name}.ffn.up.weight", (d, cfg.ffn_mult * d))
        self.up_bias = store.create(f"{name}.ffn.up.bias", (cfg.ffn_mult * d,), init='zeros')
        self.down_weight = store.create(f"{name}.ffn.down.weight", (cfg.ffn_mult * d, d))
        self.down_bias = store.create(f"{name}.ffn.down.bias", (d,), init='zeros')

    def _split_heads(self, x: Tensor) -> Tensor:
        b, s, d = x.shape
        return F.transpose(F.reshape(x, (b, s, self.heads, d // self.heads)), (0, 2, 1, 3))

    def __call__(self, x: Tensor, cos: np.ndarray, sin: np.ndarray, blocks, start: int,
                 cache: Optional[KvCache], index: int, cfg: GeneratorConfig,
                 rng: Optional[np.random.Generator], training: bool) -> Tensor:
        b, s, d = x.shape
        h = F.layer_norm(x, self.ln1_gamma, self.ln1_beta)
        qkv = F.linear(h, self.qkv_weight, self.qkv_bias)
        q = self._split_heads(F.getitem(qkv, (slice(None), slice(None), slice(0, d))))
        k = self._split_heads(F.getitem(qkv, (slice(None), slice(None), slice(d, 2 * d))))
        v = self._split_heads(F.getitem(qkv, (slice(None), slice(None), slice(2 * d, 3 * d))))
        q = F.rotary(q, cos, sin, blocks)
        k = F.rotary(k, cos, sin, blocks)
        if cache is not None:
            past_k, past_v = cache.past(index)
            if past_k is not None:
                k = F.concat([Tensor(past_k, dtype=past_k.dtype), k], axis=2)
                v = F.concat([Tensor(past_v, dtype=past_v.dtype), v], axis=2)
            cache.store(index, k.data, v.data)
        att = F.scaled_dot_product_attention(q, k, v, offset=start)
        att = F.reshape(F.transpose(att, (0, 2, 1, 3)), (b, s, d))
        att = F.linear(att, self.out_weight, self.out_bias)
        x = F.add(x, F.dropout(att, cfg.residual_dropout, rng, training))

        h = F.layer_norm(x, self.ln2_gamma, self.ln2_beta)
        h = F.dropout(F.gelu(F.linear(h, self.up_weight, self.up_bias)), cfg.ffn_dropout, rng, training)
        h = F.linear(h, self.down_weight, self.down_bias)
        return F.add(x, F.dropout(h, cfg.residual_dropout, rng, training))


class Generator:
    """Modèle autorégressif sur la disposition `SequenceLayout`."""

    def __init__(self, cfg: GeneratorConfig, layout: SequenceLayout, store: Optional[ParamStore] = None,
                 seed: int = 0, text_vocab: int = VOCAB_SIZE):
        """
        Construit le transformeur.

        Args:
            cfg: Dimensions et taux de dropout
            layout: Disposition de la séquence (texte + couches)
            store: Registre existant (sinon registre neuf de graine `seed`)
            text_vocab: Taille du vocabulaire des légendes
        """
        cfg.validate()
        check_allocation(cfg.rope_allocation, cfg.head_dim)
        if layout.text_length != cfg.text_length:
            raise ShapeError(f"disposition texte {layout.text_length} != configuration {cfg.text_length}")
        self.cfg = cfg
        self.layout = layout
        self.text_vocab = text_vocab
        self.store = store if store is not None else ParamStore(seed)
        store = self.store
        d = cfg.hidden
        self.text_embed = store.create('text.embed', (text_vocab, d), scale=0.02)
        self.uncond_embed = store.create('text.uncond', (cfg.text_length, d), scale=0.02)
        self.layer_embed = store.create('layer.embed', (layout.num_layers + 1, d), scale=0.02)
        self.token_embeds = [store.create(f'tokens{m}.embed', (layout.vocab_size(m), d), scale=0.02)
                             for m in range(layout.num_layers)]
        self.blocks = [Block(store, f'block{i}', cfg) for i in range(cfg.num_layers)]
        self.final_gamma = store.create('final_ln.gamma', (d,), init='ones')
        self.final_beta = store.create('final_ln.beta', (d,), init='zeros')
        self.heads = [(store.create(f'head{m}.weight', (d, layout.vocab_size(m))),
                       store.create(f'head{m}.bias', (layout.vocab_size(m),), init='zeros'))
                      for m in range(layout.num_layers)]
        cos, sin = rope_tables(layout.coordinates, cfg.rope_allocation, cfg.rope_base)
        self._cos, self._sin = cos, sin
        self._blocks = axis_blocks(cfg.rope_allocation)
        logger.debug("générateur : %d paramètres, séquence %d", store.num_parameters(), layout.total_length)

    # ------------------------------------------------------------------
    # Plongements
    # ------------------------------------------------------------------

    def embed_text(self, text_ids: np.ndarray, uncond: np.ndarray) -> Tensor:
        """
        Préfixe texte [B, L_text, D]; les lignes où `uncond` est vrai utilisent
        les plongements inconditionnels appris.
        """
        text_ids = np.asarray(text_ids, dtype=np.int64)
        uncond = np.asarray(uncond, dtype=bool)
        if text_ids.ndim != 2 or text_ids.shape[1] != self.layout.text_length or uncond.shape != (text_ids.shape[0],):
            raise ShapeError(f"texte {text_ids.shape}, drapeaux {uncond.shape}")
        table = F.concat([self.text_embed, self.uncond_embed], axis=0)
        ids = np.where(uncond[:, None], self.text_vocab + np.arange(self.layout.text_length)[None, :], text_ids)
        return F.embedding(table, ids)

    def embed_video(self, tokens: np.ndarray, start: int) -> Tensor:
        """Plongements [B, n, D] des jetons vidéo d'index start..start+n-1."""
        tokens = np.asarray(tokens, dtype=np.int64)
        pieces = []
        for m, seg_start, seg_end in self.layout.segments:
            lo, hi = max(seg_start, start), min(seg_end, start + tokens.shape[1])
            if lo >= hi:
                continue
            chunk = tokens[:, lo - start:hi - start]
            if chunk.min() < 0 or chunk.max() >= self.layout.vocab_size(m):
                raise ShapeError(f"jeton hors du vocabulaire de la couche {m}")
            pieces.append(F.embedding(self.token_embeds[m], chunk))
        return pieces[0] if len(pieces) == 1 else F.concat(pieces, axis=1)

    def _with_layer_ids(self, x: Tensor, start: int) -> Tensor:
        ids = self.layout.layer_ids[start:start + x.shape[1]]
        return F.add(x, F.embedding(self.layer_embed, ids))

    # ------------------------------------------------------------------
    # Passe avant
    # ------------------------------------------------------------------

    def hidden_states(self, x: Tensor, start: int = 0, cache: Optional[KvCache] = None,
                      rng: Optional[np.random.Generator] = None, training: bool = False) -> Tensor:
        """
        États cachés normalisés pour les positions absolues start..start+S-1.

        Args:
            x: Plongements d'entrée [B, S, D] (identité de couche non ajoutée)
            start: Position absolue du premier élément
            cache: Cache à compléter; sa longueur doit valoir `start`
        """
        s = x.shape[1]
        if start + s > self.layout.total_length:
            raise ShapeError(f"positions {start}..{start + s - 1} au-delà de la séquence {self.layout.total_length}")
        if cache is not None and cache.length != start:
            raise ShapeError(f"cache de longueur {cache.length} pour un préfixe de {start} positions")
        x = self._with_layer_ids(x, start)
        x = F.dropout(x, self.cfg.token_dropout, rng, training)
        cos = self._cos[start:start + s].astype(x.dtype)
        sin = self._sin[start:start + s].astype(x.dtype)
        for i, block in enumerate(self.blocks):
            x = block(x, cos, sin, self._blocks, start, cache, i, self.cfg, rng, training)
        return F.layer_norm(x, self.final_gamma, self.final_beta)

    def head(self, m: int, hidden: Tensor) -> Tensor:
        weight, bias = self.heads[m]
        return F.linear(hidden, weight, bias)

    def sequence_inputs(self, text_ids: np.ndarray, uncond: np.ndarray, tokens: np.ndarray) -> Tensor:
        """Plongements texte + jetons vidéo fournis (préfixe du flux)."""
        x = self.embed_text(text_ids, uncond)
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.shape[1] == 0:
            return x
        return F.concat([x, self.embed_video(tokens, 0)], axis=1)

    def training_logits(self, text_ids: np.ndarray, uncond: np.ndarray, tokens: np.ndarray,
                        rng: Optional[np.random.Generator] = None, training: bool = True) -> List[Tensor]:
        """
        Logits de supervision décalée pour un flux complet [B, N].

        Returns:
            Par couche m (indice 0 = la plus dense), logits [B * N_m, V_m]
            alignés sur `layout.split_tokens(tokens)[m]`
        """
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.shape[1] != self.layout.video_length:
            raise ShapeError(f"flux de {tokens.shape[1]} jetons, {self.layout.video_length} attendus")
        # le dernier jeton n'est jamais une entrée: il n'a pas de cible
        hidden = self.hidden_states(self.sequence_inputs(text_ids, uncond, tokens[:, :-1]), rng=rng,
                                    training=training)
        b = tokens.shape[0]
        base = self.layout.text_length - 1
        logits: List[Optional[Tensor]] = [None] * self.layout.num_layers
        for m, start, end in self.layout.segments:
            h = F.getitem(hidden, (slice(None), slice(base + start, base + end)))
            h = F.reshape(h, (b * (end - start), self.cfg.hidden))
            logits[m] = self.head(m, h)
        return logits

    def next_logits(self, text_ids: np.ndarray, tokens: np.ndarray, uncond: bool = False) -> np.ndarray:
        """
        Logits du jeton vidéo suivant un préfixe, sans cache (recalcul complet).

        Args:
            text_ids: Légende encodée [L_text]
            tokens: Préfixe du flux [n], n < N
        """
        tokens = np.asarray(tokens, dtype=np.int64).reshape(1, -1)
        n = tokens.shape[1]
        if n >= self.layout.video_length:
            raise ShapeError(f"préfixe de {n} jetons : aucun jeton suivant")
        x = self.sequence_inputs(np.asarray(text_ids).reshape(1, -1), np.array([uncond]), tokens)
        hidden = self.hidden_states(x)
        last = F.getitem(hidden, (slice(None), x.shape[1] - 1))
        return self.head(self.layout.owner(n), last).data[0]

    # ------------------------------------------------------------------
    # Persistance
    # ------------------------------------------------------------------

    def num_parameters(self) -> int:
        return self.store.num_parameters()

    def save(self, path: str, run_config: RunConfig) -> None:
        save_checkpoint(self.store, path)
        run_config.echo(sidecar_path(path))

    @classmethod
    def load(cls, path: str) -> 'Generator':
        run_config = load_sidecar(path)
        layout = SequenceLayout.from_hierarchy(run_config.hierarchy, run_config.generator.text_length)
        generator = cls(run_config.generator, layout)
        generator.store.load_state_dict(load_checkpoint(path))
        logger.info("générateur chargé : %s (%d paramètres)", path, generator.num_parameters())
        return generator


class IncrementalDecoder:
    """Décodage pas à pas avec cache clés/valeurs pour un préfixe texte."""

    def __init__(self, generator: Generator, text_ids: Optional[Sequence[int]], uncond: bool = False):
        self.generator = generator
        self.uncond = uncond
        length = generator.layout.text_length
        self.text_ids = np.zeros(length, dtype=np.int64) if text_ids is None else np.asarray(text_ids, dtype=np.int64)
        self.cache = KvCache(len(generator.blocks))
        self.consumed = 0
        self.started = False

    def start(self) -> np.ndarray:
        """Remplit le cache avec le préfixe texte; retourne les logits du premier jeton vidéo."""
        if self.started:
            raise ShapeError("décodeur déjà amorcé")
        self.started = True
        gen = self.generator
        x = gen.embed_text(self.text_ids.reshape(1, -1), np.array([self.uncond]))
        hidden = gen.hidden_states(x, 0, self.cache)
        return gen.head(gen.layout.owner(0), F.getitem(hidden, (slice(None), x.shape[1] - 1))).data[0]

    def feed(self, token: int) -> Optional[np.ndarray]:
        """
        Ajoute le jeton vidéo courant; retourne les logits du suivant
        (None après le dernier jeton).
        """
        if not self.started:
            raise ShapeError("décodeur non amorcé : appeler start()")
        gen = self.generator
        index = self.consumed
        if index >= gen.layout.video_length:
            raise ShapeError("flux déjà complet")
        self.consumed += 1
        if self.consumed == gen.layout.video_length:
            return None
        x = gen.embed_video(np.array([[token]], dtype=np.int64), index)
        hidden = gen.hidden_states(x, gen.layout.text_length + index, self.cache)
        return gen.head(gen.layout.owner(self.consumed), F.getitem(hidden, (slice(None), 0))).data[0]
