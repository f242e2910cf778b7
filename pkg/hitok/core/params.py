"""
Registre de paramètres nommés et optimiseur Adam.
"""
import logging
from collections import OrderedDict
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, MissingGradientError, ShapeError
from .tensor import Tensor, default_dtype

logger = logging.getLogger(__name__)


class ParamStore:
    """Paramètres nommés (noms pointés uniques) et moments d'Adam."""

    def __init__(self, seed: int = 0):
        """
        Initialise le registre.

        Args:
            seed: Graine du générateur utilisé pour l'initialisation
        """
        self.params: 'OrderedDict[str, Tensor]' = OrderedDict()
        self.step = 0
        self.first_moment: Dict[str, np.ndarray] = {}
        self.second_moment: Dict[str, np.ndarray] = {}
        self.rng = np.random.default_rng(seed)

    def create(self, name: str, shape: Sequence[int], init: str = 'normal',
               scale: Optional[float] = None) -> Tensor:
        """
        Crée et enregistre un paramètre.

        Args:
            name: Nom pointé unique (ex: `encoder.stage0.conv1.kernel`)
            shape: Forme du paramètre
            init: 'normal' (écart-type 1/sqrt(fan_in) par défaut), 'zeros' ou 'ones'
            scale: Écart-type explicite pour 'normal'

        Returns:
            Le tenseur créé (requires_grad=True)
        """
        if name in self.params:
            raise ConfigError(f"paramètre déjà enregistré : {name}")
        shape = tuple(int(n) for n in shape)
        if init == 'zeros':
            data = np.zeros(shape)
        elif init == 'ones':
            data = np.ones(shape)
        elif init == 'normal':
            fan_in = int(np.prod(shape[:-1])) if len(shape) > 1 else shape[0]
            std = scale if scale is not None else 1.0 / np.sqrt(max(fan_in, 1))
            data = self.rng.normal(0.0, std, size=shape)
        else:
            raise ConfigError(f"initialisation inconnue : {init}")
        tensor = Tensor(data, requires_grad=True)
        self.params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self.params.items())

    def num_parameters(self) -> int:
        return int(sum(t.size for t in self.params.values()))

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.grad = None

    def state_dict(self) -> 'OrderedDict[str, np.ndarray]':
        return OrderedDict((name, t.data.copy()) for name, t in self.params.items())

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        """Copie des valeurs dans les paramètres existants (les références restent valides)."""
        if strict:
            missing = set(self.params) - set(state)
            unexpected = set(state) - set(self.params)
            if missing or unexpected:
                raise ShapeError(f"checkpoint incompatible (manquants: {sorted(missing)[:5]}, "
                                 f"inattendus: {sorted(unexpected)[:5]})")
        for name, values in state.items():
            if name not in self.params:
                continue
            tensor = self.params[name]
            if tuple(values.shape) != tensor.shape:
                raise ShapeError(f"{name}: forme {values.shape} au lieu de {tensor.shape}")
            tensor.data = np.array(values, dtype=tensor.data.dtype)

    def cast(self, dtype=None) -> None:
        """Convertit tous les paramètres au type donné (défaut: type courant)."""
        dtype = dtype or default_dtype()
        for tensor in self.params.values():
            tensor.data = tensor.data.astype(dtype)


def adam_step(store: ParamStore, lr: float = 3e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> ParamStore:
    """
    Mise à jour Adam avec correction de biais.

    Les paramètres sans gradient (hors du graphe de cette étape) ne bougent
    pas; une étape où aucun paramètre n'a de gradient est une erreur.
    """
    with_grad = [(name, t) for name, t in store.items() if t.grad is not None]
    if not with_grad:
        raise MissingGradientError("aucun gradient : backward() n'a pas été appelé")
    store.step += 1
    correction1 = 1.0 - beta1 ** store.step
    correction2 = 1.0 - beta2 ** store.step
    for name, tensor in with_grad:
        grad = tensor.grad
        m = store.first_moment.get(name)
        v = store.second_moment.get(name)
        if m is None:
            m = np.zeros_like(tensor.data)
            v = np.zeros_like(tensor.data)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        store.first_moment[name] = m
        store.second_moment[name] = v
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        tensor.data = (tensor.data - update).astype(tensor.data.dtype)
    return store
