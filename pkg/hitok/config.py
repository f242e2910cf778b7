"""
Configuration d'exécution (document JSON à sections).

Sections: hierarchy, tokenizer_train, generator, generator_train, sampling, data.
Tous les champs sont optionnels; les clés inconnues sont refusées et tout est
validé avant le moindre calcul.
"""
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

from .errors import ConfigError
from .video_functions import atomic_write_text, ceil_div

MASK_STRATEGIES = ('repeat_prev', 'zero', 'learned')


def _check_keys(cls, data: Dict[str, Any], section: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"section '{section}' : objet JSON attendu")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"clés inconnues dans '{section}' : {', '.join(unknown)}")


def _tuple(value, length: int, name: str) -> Tuple[int, ...]:
    try:
        result = tuple(int(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} : liste de {length} entiers attendue") from None
    if len(result) != length:
        raise ConfigError(f"{name} : {length} valeurs attendues, reçu {len(result)}")
    return result


def _probability(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} doit être dans [0, 1], reçu {value}")


@dataclass
class LayerConfig:
    """Une couche de la hiérarchie: bits par jeton et grille latente (Tm, Hm, Wm)."""

    quant_dim: int
    latent_shape: Tuple[int, int, int]

    @property
    def token_count(self) -> int:
        t, h, w = self.latent_shape
        return t * h * w

    @property
    def codebook_size(self) -> int:
        return 2 ** self.quant_dim

    @classmethod
    def from_dict(cls, data: Dict[str, Any], section: str = 'layer') -> 'LayerConfig':
        _check_keys(cls, data, section)
        if 'quant_dim' not in data or 'latent_shape' not in data:
            raise ConfigError(f"{section} : quant_dim et latent_shape sont requis")
        return cls(int(data['quant_dim']), _tuple(data['latent_shape'], 3, f"{section}.latent_shape"))


def _desk_layers() -> List[LayerConfig]:
    return [LayerConfig(10, (4, 4, 4)), LayerConfig(8, (2, 2, 2)), LayerConfig(6, (1, 1, 1))]


@dataclass
class HierarchyConfig:
    """
    Structure du tokenizer: forme d'entrée, couches (indice 0 = la plus dense),
    largeurs et pas de l'encodeur principal, réglages du masquage.
    """

    input_shape: Tuple[int, int, int, int] = (16, 32, 32, 3)
    layers: List[LayerConfig] = field(default_factory=_desk_layers)
    encoder_widths: List[int] = field(default_factory=lambda: [16, 32, 32, 32])
    encoder_strides: List[Tuple[int, int]] = field(default_factory=lambda: [(2, 2), (2, 2), (1, 2), (1, 1)])
    compressor_width: int = 32
    kernel_size: int = 3
    norm_groups: int = 8
    resize_to: Optional[Tuple[int, int]] = None
    mask_strategy: str = 'repeat_prev'
    mask_cap: float = 0.85
    mask_layers: List[int] = field(default_factory=lambda: [0])

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'HierarchyConfig':
        _check_keys(cls, data, 'hierarchy')
        cfg = cls()
        if 'input_shape' in data:
            cfg.input_shape = _tuple(data['input_shape'], 4, 'hierarchy.input_shape')
        if 'layers' in data:
            cfg.layers = [LayerConfig.from_dict(layer, f"hierarchy.layers[{i}]")
                          for i, layer in enumerate(data['layers'])]
        if 'encoder_widths' in data:
            cfg.encoder_widths = [int(w) for w in data['encoder_widths']]
        if 'encoder_strides' in data:
            cfg.encoder_strides = [_tuple(s, 2, 'hierarchy.encoder_strides') for s in data['encoder_strides']]
        for name in ('compressor_width', 'kernel_size', 'norm_groups'):
            if name in data:
                setattr(cfg, name, int(data[name]))
        if data.get('resize_to') is not None:
            cfg.resize_to = _tuple(data['resize_to'], 2, 'hierarchy.resize_to')
        if 'mask_strategy' in data:
            cfg.mask_strategy = str(data['mask_strategy'])
        if 'mask_cap' in data:
            cfg.mask_cap = float(data['mask_cap'])
        if 'mask_layers' in data:
            cfg.mask_layers = [int(m) for m in data['mask_layers']]
        cfg.validate()
        return cfg

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def encoder_input_shape(self) -> Tuple[int, int, int]:
        """Forme (T, H, W) vue par l'encodeur, après interpolation éventuelle."""
        t, h, w, _ = self.input_shape
        if self.resize_to is not None:
            h, w = self.resize_to
        return t, h, w

    @property
    def stride_product(self) -> Tuple[int, int, int]:
        t = h = 1
        for st, ss in self.encoder_strides:
            t *= st
            h *= ss
        return t, h, h

    def compressor_strides(self) -> List[Tuple[int, int, int]]:
        """Pas du compresseur léger menant de la couche m-1 à la couche m (m >= 1)."""
        strides = []
        for prev, nxt in zip(self.layers[:-1], self.layers[1:]):
            strides.append(tuple(p // n for p, n in zip(prev.latent_shape, nxt.latent_shape)))
        return strides

    def token_counts(self) -> List[int]:
        return [layer.token_count for layer in self.layers]

    @property
    def total_tokens(self) -> int:
        return sum(self.token_counts())

    def validate(self) -> None:
        """Vérifie l'arithmétique des formes et les bornes des champs."""
        if len(self.input_shape) != 4 or min(self.input_shape) < 1:
            raise ConfigError(f"input_shape invalide : {self.input_shape}")
        if not 1 <= len(self.layers) <= 127:
            raise ConfigError("entre 1 et 127 couches attendues")
        if not self.encoder_widths or len(self.encoder_widths) != len(self.encoder_strides):
            raise ConfigError("encoder_widths et encoder_strides doivent avoir la même longueur (>= 1)")
        if any(w < 1 for w in self.encoder_widths) or self.compressor_width < 1:
            raise ConfigError("largeurs de canaux invalides")
        if any(s < 1 for pair in self.encoder_strides for s in pair):
            raise ConfigError("pas d'encodeur invalides")
        if self.kernel_size < 1 or self.norm_groups < 1:
            raise ConfigError("kernel_size et norm_groups doivent être >= 1")
        for i, layer in enumerate(self.layers):
            if not 1 <= layer.quant_dim <= 63:
                raise ConfigError(f"couche {i} : quant_dim {layer.quant_dim} hors de [1, 63]")
            if min(layer.latent_shape) < 1 or max(layer.latent_shape) > 65535:
                raise ConfigError(f"couche {i} : latent_shape invalide {layer.latent_shape}")
        expected = ceil_div(self.encoder_input_shape, self.stride_product)
        if tuple(self.layers[0].latent_shape) != expected:
            raise ConfigError(f"couche 0 : latent {self.layers[0].latent_shape}, "
                              f"l'encodeur produit {expected}")
        for m in range(1, len(self.layers)):
            prev, nxt = self.layers[m - 1].latent_shape, self.layers[m].latent_shape
            if any(n > p for p, n in zip(prev, nxt)) or math.prod(nxt) >= math.prod(prev):
                raise ConfigError(f"couche {m} : {nxt} ne rétrécit pas strictement {prev}")
            if any(p % n for p, n in zip(prev, nxt)):
                raise ConfigError(f"couche {m} : {prev} n'est pas un multiple de {nxt}")
        if self.mask_strategy not in MASK_STRATEGIES:
            raise ConfigError(f"stratégie de masque inconnue : {self.mask_strategy}")
        if not 0.0 < self.mask_cap <= 1.0:
            raise ConfigError(f"mask_cap doit être dans (0, 1], reçu {self.mask_cap}")
        if any(not 0 <= m < len(self.layers) for m in self.mask_layers):
            raise ConfigError(f"mask_layers hors limites : {self.mask_layers}")


@dataclass
class TrainConfig:
    """Entraînement du tokenizer (L1 + pénalité d'entropie, programme progressif)."""

    steps: int = 2000
    batch_size: int = 4
    lr: float = 3e-4
    seed: int = 0
    progressive_boundary: float = 0.3
    entropy_weight: float = 0.1
    entropy_tau: float = 1.0
    entropy_gamma: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_every: int = 50

    @classmethod
    def from_dict(cls, data: Dict[str, Any], section: str = 'tokenizer_train') -> 'TrainConfig':
        _check_keys(cls, data, section)
        cfg = cls(**{k: type(getattr(cls(), k))(v) for k, v in data.items()})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.steps < 1 or self.batch_size < 1 or self.log_every < 1:
            raise ConfigError("steps, batch_size et log_every doivent être >= 1")
        if self.lr <= 0 or self.entropy_tau <= 0:
            raise ConfigError("lr et entropy_tau doivent être > 0")
        _probability(self.progressive_boundary, 'progressive_boundary')


@dataclass
class GeneratorConfig:
    """Transformeur décodeur (échelle bureau par défaut)."""

    num_layers: int = 4
    hidden: int = 128
    heads: int = 4
    rope_allocation: Tuple[int, int, int] = (12, 10, 10)
    rope_base: float = 10000.0
    text_length: int = 8
    ffn_mult: int = 4
    residual_dropout: float = 0.1
    ffn_dropout: float = 0.1
    token_dropout: float = 0.1

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GeneratorConfig':
        _check_keys(cls, data, 'generator')
        data = dict(data)
        if 'rope_allocation' in data:
            data['rope_allocation'] = _tuple(data['rope_allocation'], 3, 'generator.rope_allocation')
        cfg = cls(**{k: v if k == 'rope_allocation' else type(getattr(cls(), k))(v) for k, v in data.items()})
        cfg.validate()
        return cfg

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    def validate(self) -> None:
        if min(self.num_layers, self.hidden, self.heads, self.text_length, self.ffn_mult) < 1:
            raise ConfigError("dimensions du générateur invalides")
        if self.hidden % self.heads:
            raise ConfigError(f"hidden {self.hidden} non divisible par heads {self.heads}")
        if any(d < 0 or d % 2 for d in self.rope_allocation) or sum(self.rope_allocation) != self.head_dim:
            raise ConfigError(f"rope_allocation {self.rope_allocation} : tailles paires de somme {self.head_dim} attendues")
        for name in ('residual_dropout', 'ffn_dropout', 'token_dropout'):
            _probability(getattr(self, name), name)


@dataclass
class GeneratorTrainConfig:
    """Entraînement du générateur (supervision décalée, abandon de condition)."""

    steps: int = 3000
    batch_size: int = 8
    lr: float = 3e-4
    seed: int = 0
    condition_dropout: float = 0.1
    layer_weights: Optional[List[float]] = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_every: int = 50

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GeneratorTrainConfig':
        _check_keys(cls, data, 'generator_train')
        data = dict(data)
        weights = data.pop('layer_weights', None)
        cfg = cls(**{k: type(getattr(cls(), k))(v) for k, v in data.items()})
        cfg.layer_weights = None if weights is None else [float(w) for w in weights]
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.steps < 1 or self.batch_size < 1 or self.log_every < 1:
            raise ConfigError("steps, batch_size et log_every doivent être >= 1")
        if self.lr <= 0:
            raise ConfigError("lr doit être > 0")
        _probability(self.condition_dropout, 'condition_dropout')
        if self.layer_weights is not None and any(w < 0 for w in self.layer_weights):
            raise ConfigError("layer_weights doivent être >= 0")


@dataclass
class SamplingParams:
    """Paramètres d'échantillonnage: guidage CFG, température, top-k, graine."""

    cfg_scale: float = 7.5
    temperature: float = 1.0
    top_k: int = 0
    seed: int = 0
    max_tokens: Optional[int] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SamplingParams':
        _check_keys(cls, data, 'sampling')
        data = dict(data)
        max_tokens = data.pop('max_tokens', None)
        cfg = cls(**{k: type(getattr(cls(), k))(v) for k, v in data.items()})
        cfg.max_tokens = None if max_tokens is None else int(max_tokens)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.cfg_scale < 0:
            raise ConfigError(f"cfg_scale doit être >= 0, reçu {self.cfg_scale}")
        if self.temperature <= 0:
            raise ConfigError(f"temperature doit être > 0, reçu {self.temperature}")
        if self.top_k < 0:
            raise ConfigError(f"top_k doit être >= 0, reçu {self.top_k}")
        if self.max_tokens is not None and self.max_tokens < 0:
            raise ConfigError("max_tokens doit être >= 0")


@dataclass
class DataConfig:
    """Jeu de données synthétique."""

    count: int = 256
    seed: int = 0
    shape: Tuple[int, int, int] = (16, 32, 32)
    holdout: int = 32

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DataConfig':
        _check_keys(cls, data, 'data')
        cfg = cls()
        for name in ('count', 'seed', 'holdout'):
            if name in data:
                setattr(cfg, name, int(data[name]))
        if 'shape' in data:
            cfg.shape = _tuple(data['shape'], 3, 'data.shape')
        if cfg.count < 1 or cfg.holdout < 0 or min(cfg.shape) < 1:
            raise ConfigError("data : count >= 1, holdout >= 0 et shape positive attendus")
        return cfg


_SECTIONS = {
    'hierarchy': HierarchyConfig,
    'tokenizer_train': TrainConfig,
    'generator': GeneratorConfig,
    'generator_train': GeneratorTrainConfig,
    'sampling': SamplingParams,
    'data': DataConfig,
}


@dataclass
class RunConfig:
    """Document de configuration complet."""

    hierarchy: HierarchyConfig = field(default_factory=HierarchyConfig)
    tokenizer_train: TrainConfig = field(default_factory=TrainConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    generator_train: GeneratorTrainConfig = field(default_factory=GeneratorTrainConfig)
    sampling: SamplingParams = field(default_factory=SamplingParams)
    data: DataConfig = field(default_factory=DataConfig)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        _check_keys(cls, data, 'racine')
        sections = {name: _SECTIONS[name].from_dict(value) for name, value in data.items()}
        return cls(**sections)

    @classmethod
    def load(cls, path: str) -> 'RunConfig':
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except OSError as e:
            raise ConfigError(f"lecture impossible de {path} : {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"JSON invalide dans {path} : {e}") from None
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return json.loads(json.dumps(asdict(self)))

    def echo(self, path: str) -> None:
        """Écrit la configuration entièrement résolue."""
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def sidecar_path(checkpoint: str) -> str:
    """Chemin de la configuration résolue écrite à côté d'un checkpoint."""
    return checkpoint + '.config.json'


def load_sidecar(checkpoint: str) -> RunConfig:
    """Relit la configuration qui a produit un checkpoint."""
    path = sidecar_path(checkpoint)
    if not os.path.exists(path):
        raise ConfigError(f"configuration absente pour {checkpoint} (attendu : {path})")
    return RunConfig.load(path)
