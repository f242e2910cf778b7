"""
Tokenizer vidéo hiérarchique causal.

Un encodeur principal (4 étages résiduels) produit le latent de la couche 0;
des compresseurs légers en cascade produisent les couches plus grossières,
chacune quantifiée par LFQ. Le décodeur remonte la hiérarchie en sommant
chaque couche à la couche plus fine, puis applique le décodeur principal.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from ..config import HierarchyConfig, RunConfig, load_sidecar, sidecar_path
from ..core import functional as F
from ..core.checkpoint import load_checkpoint, save_checkpoint
from ..core.params import ParamStore
from ..core.tensor import Tensor, no_grad
from ..errors import ShapeError, StrategyError
from ..masking.dyn_mask import MaskPlan, apply_mask, plan_for_grid
from ..video_functions import is_valid_video, nearest_indices, to_signed, to_unit
from .layers import Compressor, Conv3d, Decompressor, GroupNorm, ResBlock
from .lfq import LfqCodes, codes_from_indices, quantize
from .tokens import HierTokenStream, TokenGrid

logger = logging.getLogger(__name__)

PLACEHOLDERS = ('learned', 'zero')


@dataclass(frozen=True)
class TokenShapes:
    """Nombre de jetons et bits par jeton de chaque couche (indice 0 = la plus dense)."""

    per_layer: Tuple[Tuple[int, int], ...]

    @property
    def total_tokens(self) -> int:
        return sum(n for n, _ in self.per_layer)

    @property
    def total_bits(self) -> int:
        return sum(n * qd for n, qd in self.per_layer)


def token_shapes(cfg: HierarchyConfig) -> TokenShapes:
    return TokenShapes(tuple((layer.token_count, layer.quant_dim) for layer in cfg.layers))


@dataclass(eq=False)
class HierLatents:
    """Sortie de l'encodeur: codes par couche, latents avant quantification, masques."""

    codes: List[LfqCodes]
    pre_quant: List[Optional[Tensor]] = field(default_factory=list)
    masks: Dict[int, MaskPlan] = field(default_factory=dict)

    @property
    def num_layers(self) -> int:
        return len(self.codes)

    @property
    def batch_size(self) -> int:
        return self.codes[0].indices.shape[0]

    def to_stream(self, sample: int = 0) -> HierTokenStream:
        """Flux de jetons d'un échantillon; les positions masquées sont mises à 0."""
        grids = []
        strategy = None
        for m, code in enumerate(self.codes):
            indices = code.indices[sample].copy()
            plan = self.masks.get(m)
            mask = None
            if plan is not None:
                mask = plan.mask if plan.mask.ndim == 3 else plan.mask[sample]
                indices[mask] = 0
                strategy = plan.strategy
            grids.append(TokenGrid(code.quant_dim, indices, mask))
        return HierTokenStream(grids, strategy)

    @classmethod
    def from_stream(cls, stream: HierTokenStream) -> 'HierLatents':
        """Latents (lot de 1) reconstruits depuis un flux lu sur disque."""
        codes = [codes_from_indices(grid.indices[None], grid.quant_dim) for grid in stream.grids]
        masks = {m: MaskPlan(grid.mask, stream.strategy or 'repeat_prev')
                 for m, grid in enumerate(stream.grids) if grid.mask is not None}
        return cls(codes, [None] * len(codes), masks)


class HierTokenizer:
    """Encodeur/décodeur hiérarchique; paramètres dans un ParamStore."""

    def __init__(self, cfg: HierarchyConfig, store: Optional[ParamStore] = None, seed: int = 0):
        """
        Construit le réseau.

        Args:
            cfg: Structure de la hiérarchie (validée ici)
            store: Registre existant (sinon un registre neuf de graine `seed`)
            seed: Graine d'initialisation
        """
        cfg.validate()
        self.cfg = cfg
        self.store = store if store is not None else ParamStore(seed)
        store = self.store
        channels = cfg.input_shape[3]
        k, groups = cfg.kernel_size, cfg.norm_groups
        widths = cfg.encoder_widths
        quant_dims = [layer.quant_dim for layer in cfg.layers]
        strides = [(st, ss, ss) for st, ss in cfg.encoder_strides]

        self.enc_in = Conv3d(store, 'encoder.conv_in', channels, widths[0], k)
        self.enc_stages = []
        width = widths[0]
        for i, (out, stride) in enumerate(zip(widths, strides)):
            res = ResBlock(store, f'encoder.stage{i}.res', width, out, k, groups)
            down = Conv3d(store, f'encoder.stage{i}.down', out, out, k, stride) if stride != (1, 1, 1) else None
            self.enc_stages.append((res, down))
            width = out
        self.enc_norm = GroupNorm(store, 'encoder.norm_out', width, groups)
        self.enc_out = Conv3d(store, 'encoder.conv_out', width, quant_dims[0], 1)

        ratios = cfg.compressor_strides()
        self.compressors = [
            Compressor(store, f'compressor{m + 1}', quant_dims[m], cfg.compressor_width,
                       quant_dims[m + 1], k, ratios[m])
            for m in range(cfg.num_layers - 1)
        ]

        fused = widths[-1]
        self.match = [Conv3d(store, f'decoder.match{m}', qd, fused, 1, bias=False)
                      for m, qd in enumerate(quant_dims)]
        self.decompressors = [
            Decompressor(store, f'decompressor{m + 1}', fused, cfg.compressor_width, fused, k, ratios[m])
            for m in range(cfg.num_layers - 1)
        ]
        self.mask_tokens = [store.create(f'decoder.mask_token{m}', (qd,), init='zeros')
                            for m, qd in enumerate(quant_dims)]

        self.dec_in = Conv3d(store, 'decoder.conv_in', fused, fused, k)
        self.dec_stages = []
        width = fused
        for i in range(len(widths) - 1, -1, -1):
            up = (Conv3d(store, f'decoder.stage{i}.up', width, width, k, strides[i], transpose=True)
                  if strides[i] != (1, 1, 1) else None)
            res = ResBlock(store, f'decoder.stage{i}.res', width, widths[i], k, groups)
            self.dec_stages.append((up, res))
            width = widths[i]
        self.dec_norm = GroupNorm(store, 'decoder.norm_out', width, groups)
        self.dec_out = Conv3d(store, 'decoder.conv_out', width, channels, k)
        logger.debug("tokenizer: %d paramètres, %d couches", store.num_parameters(), cfg.num_layers)

    # ------------------------------------------------------------------
    # Encodage
    # ------------------------------------------------------------------

    def _prepare(self, video: np.ndarray) -> np.ndarray:
        video = np.asarray(video, dtype=np.float64)
        if video.ndim == 4:
            video = video[None]
        if video.ndim != 5 or video.shape[1:] != tuple(self.cfg.input_shape):
            raise ShapeError(f"clip {video.shape} incompatible avec input_shape {self.cfg.input_shape}")
        if not all(is_valid_video(clip) for clip in video):
            raise ShapeError("clip invalide : valeurs finies dans [0, 1] attendues")
        if self.cfg.resize_to is not None:
            _, _, h, w, _ = video.shape
            rh, rw = self.cfg.resize_to
            video = video[:, :, nearest_indices(h, rh)][:, :, :, nearest_indices(w, rw)]
        return to_signed(video)

    def encode(self, video: np.ndarray) -> HierLatents:
        """
        Encode un clip [T, H, W, C] ou un lot [B, T, H, W, C] à valeurs dans [0, 1].

        Returns:
            HierLatents avec un lot explicite (B = 1 pour un clip seul)
        """
        h = self.enc_in(Tensor(self._prepare(video)))
        for res, down in self.enc_stages:
            h = res(h)
            if down is not None:
                h = down(h)
        pre_quant = [self.enc_out(F.silu(self.enc_norm(h)))]
        for compressor in self.compressors:
            pre_quant.append(compressor(pre_quant[-1]))
        for m, (z, layer) in enumerate(zip(pre_quant, self.cfg.layers)):
            if z.shape[1:] != tuple(layer.latent_shape) + (layer.quant_dim,):
                raise ShapeError(f"couche {m} : latent {z.shape[1:]} au lieu de {layer.latent_shape}")
        codes = [quantize(z, layer.quant_dim) for z, layer in zip(pre_quant, self.cfg.layers)]
        return HierLatents(codes, pre_quant)

    # ------------------------------------------------------------------
    # Masquage
    # ------------------------------------------------------------------

    def plan_masks(self, latents: HierLatents, strategy: Optional[str] = None, cap: Optional[float] = None,
                   layers: Optional[Iterable[int]] = None, seed: int = 0) -> Dict[int, MaskPlan]:
        """Plans de masquage (lot de 1) pour les couches masquables de la configuration."""
        if latents.batch_size != 1:
            raise ShapeError("le masquage dynamique s'applique clip par clip (lot de 1)")
        strategy = strategy or self.cfg.mask_strategy
        cap = self.cfg.mask_cap if cap is None else cap
        layers = self.cfg.mask_layers if layers is None else list(layers)
        rng = np.random.default_rng(seed)
        return {m: plan_for_grid(latents.codes[m].indices[0], latents.codes[m].quant_dim, cap, strategy, rng)
                for m in layers}

    # ------------------------------------------------------------------
    # Décodage
    # ------------------------------------------------------------------

    def _check_latents(self, latents: HierLatents) -> None:
        if latents.num_layers != self.cfg.num_layers:
            raise ShapeError(f"{latents.num_layers} couches reçues, {self.cfg.num_layers} attendues")
        for m, (code, layer) in enumerate(zip(latents.codes, self.cfg.layers)):
            if code.indices.shape[1:] != tuple(layer.latent_shape) or code.quant_dim != layer.quant_dim:
                raise ShapeError(f"couche {m} : grille {code.indices.shape[1:]}x{code.quant_dim}, "
                                 f"attendu {layer.latent_shape}x{layer.quant_dim}")

    def _layer_input(self, m: int, signs: Tensor, plan: Optional[MaskPlan], active: bool,
                     placeholder: str) -> Tensor:
        if not active:
            token = self.mask_tokens[m] if placeholder == 'learned' else None
            return F.masked_substitute(signs, np.ones(signs.shape[:-1], dtype=bool), token)
        if plan is None:
            return signs
        token = self.mask_tokens[m] if plan.strategy == 'learned' else None
        return apply_mask(signs, plan, token)

    def reconstruct(self, latents: HierLatents, masks: Optional[Dict[int, MaskPlan]] = None,
                    active_layers: Optional[Iterable[int]] = None, placeholder: str = 'learned') -> Tensor:
        """
        Décodage différentiable, sortie dans [-1, 1] non bornée.

        Args:
            latents: Sortie de `encode` ou de `HierLatents.from_stream`
            masks: Plans par couche (défaut: ceux portés par `latents`)
            active_layers: Couches utilisées; les autres sont remplacées par
                le jeton appris ('learned') ou par zéro ('zero')
            placeholder: Substitut des couches inactives

        Returns:
            Tenseur [B, T, H, W, C]
        """
        self._check_latents(latents)
        if placeholder not in PLACEHOLDERS:
            raise StrategyError(f"substitut de couche inconnu : {placeholder}")
        masks = latents.masks if masks is None else masks
        active = set(range(self.cfg.num_layers)) if active_layers is None else set(active_layers)

        top = self.cfg.num_layers - 1
        inputs = [self._layer_input(m, code.signs, masks.get(m), m in active, placeholder)
                  for m, code in enumerate(latents.codes)]
        fused = self.match[top](inputs[top])
        for m in range(top - 1, -1, -1):
            fused = F.add(self.match[m](inputs[m]), self.decompressors[m](fused))

        y = self.dec_in(fused)
        for up, res in self.dec_stages:
            if up is not None:
                y = up(y)
            y = res(y)
        y = self.dec_out(F.silu(self.dec_norm(y)))

        t, h, w = self.cfg.encoder_input_shape
        y = F.getitem(y, (slice(None), slice(0, t), slice(0, h), slice(0, w)))
        if self.cfg.resize_to is not None:
            _, out_h, out_w, _ = self.cfg.input_shape
            y = F.getitem(y, (slice(None), slice(None), nearest_indices(h, out_h)))
            y = F.getitem(y, (slice(None), slice(None), slice(None), nearest_indices(w, out_w)))
        return y

    def decode(self, latents: HierLatents, masks: Optional[Dict[int, MaskPlan]] = None,
               active_layers: Optional[Iterable[int]] = None, placeholder: str = 'learned') -> np.ndarray:
        """Décodage d'inférence: clip(s) [B, T, H, W, C] bornés à [0, 1]."""
        with no_grad():
            y = self.reconstruct(latents, masks, active_layers, placeholder)
        return to_unit(y.data)

    def decode_coarse(self, latents: HierLatents) -> np.ndarray:
        """Reconstruction par les couches grossières seules (couche 0 à zéro)."""
        return self.decode(latents, masks={}, active_layers=range(1, self.cfg.num_layers), placeholder='zero')

    # ------------------------------------------------------------------
    # Persistance
    # ------------------------------------------------------------------

    def num_parameters(self) -> int:
        return self.store.num_parameters()

    def save(self, path: str, run_config: Optional[RunConfig] = None) -> None:
        """Écrit le checkpoint HTCK et sa configuration résolue (`<path>.config.json`)."""
        run_config = run_config or RunConfig(hierarchy=self.cfg)
        save_checkpoint(self.store, path)
        run_config.echo(sidecar_path(path))

    @classmethod
    def load(cls, path: str) -> 'HierTokenizer':
        run_config = load_sidecar(path)
        tokenizer = cls(run_config.hierarchy)
        tokenizer.store.load_state_dict(load_checkpoint(path))
        logger.info("tokenizer chargé : %s (%d paramètres)", path, tokenizer.num_parameters())
        return tokenizer
