"""
Blocs du VAE causal: convolution 3D (directe ou transposée), normalisation
par image, bloc résiduel, compresseur léger et son miroir.

Chaque bloc enregistre ses paramètres dans le ParamStore à sa construction.
"""
import math
from typing import Optional, Sequence, Tuple, Union

from ..core import functional as F
from ..core.params import ParamStore
from ..core.tensor import Tensor

Size3 = Union[int, Sequence[int]]


def _triple(value: Size3) -> Tuple[int, int, int]:
    if isinstance(value, int):
        return value, value, value
    return tuple(int(v) for v in value)


class Conv3d:
    """Convolution 3D causale; `transpose=True` pour le suréchantillonnage."""

    def __init__(self, store: ParamStore, name: str, in_channels: int, out_channels: int,
                 kernel_size: Size3 = 3, stride: Size3 = 1, bias: bool = True, transpose: bool = False):
        self.stride = _triple(stride)
        self.transpose = transpose
        self.kernel = store.create(f"{name}.kernel", _triple(kernel_size) + (in_channels, out_channels))
        self.bias: Optional[Tensor] = store.create(f"{name}.bias", (out_channels,), init='zeros') if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if self.transpose:
            return F.transpose_causal_conv3d(x, self.kernel, self.bias, self.stride)
        return F.causal_conv3d(x, self.kernel, self.bias, self.stride)


class GroupNorm:
    """Normalisation par groupes, statistiques calculées image par image."""

    def __init__(self, store: ParamStore, name: str, channels: int, groups: int):
        self.groups = math.gcd(groups, channels)
        self.gamma = store.create(f"{name}.gamma", (channels,), init='ones')
        self.beta = store.create(f"{name}.beta", (channels,), init='zeros')

    def __call__(self, x: Tensor) -> Tensor:
        return F.group_norm_frames(x, self.gamma, self.beta, self.groups)


class ResBlock:
    """norm -> SiLU -> conv, deux fois, plus un raccourci 1x1x1 si les largeurs diffèrent."""

    def __init__(self, store: ParamStore, name: str, in_channels: int, out_channels: int,
                 kernel_size: int, groups: int):
        self.norm1 = GroupNorm(store, f"{name}.norm1", in_channels, groups)
        self.conv1 = Conv3d(store, f"{name}.conv1", in_channels, out_channels, kernel_size)
        self.norm2 = GroupNorm(store, f"{name}.norm2", out_channels, groups)
        self.conv2 = Conv3d(store, f"{name}.conv2", out_channels, out_channels, kernel_size)
        self.skip = Conv3d(store, f"{name}.skip", in_channels, out_channels, 1) if in_channels != out_channels else None

    def __call__(self, x: Tensor) -> Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = self.conv2(F.silu(self.norm2(h)))
        shortcut = x if self.skip is None else self.skip(x)
        return F.add(shortcut, h)


class Compressor:
    """Bloc léger entre deux couches: conv de pas `stride`, SiLU, conv."""

    def __init__(self, store: ParamStore, name: str, in_channels: int, width: int, out_channels: int,
                 kernel_size: int, stride: Size3):
        self.down = Conv3d(store, f"{name}.down", in_channels, width, kernel_size, stride)
        self.proj = Conv3d(store, f"{name}.proj", width, out_channels, kernel_size)

    def __call__(self, x: Tensor) -> Tensor:
        return self.proj(F.silu(self.down(x)))


class Decompressor:
    """Miroir du compresseur: conv transposée de pas `stride`, SiLU, conv."""

    def __init__(self, store: ParamStore, name: str, in_channels: int, width: int, out_channels: int,
                 kernel_size: int, stride: Size3):
        self.up = Conv3d(store, f"{name}.up", in_channels, width, kernel_size, stride, transpose=True)
        self.proj = Conv3d(store, f"{name}.proj", width, out_channels, kernel_size)

    def __call__(self, x: Tensor) -> Tensor:
        return self.proj(F.silu(self.up(x)))
