"""
Tenseur à différentiation automatique en mode inverse.

Le graphe est construit à la volée par les opérations de `functional`;
`backward` parcourt le graphe en ordre topologique inverse.
"""
import contextlib
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import NonFiniteError, ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_STATE = {
    'dtype': np.float32,
    'grad_enabled': True,
}


def default_dtype():
    """Type flottant courant (float32 par défaut, float64 en mode vérification)."""
    return _STATE['dtype']


def set_default_dtype(dtype) -> None:
    """Change le type flottant utilisé pour les nouveaux tenseurs."""
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ShapeError(f"type non supporté : {dtype}")
    _STATE['dtype'] = dtype


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """Active temporairement un type flottant (ex: float64 pour les tests numériques)."""
    previous = _STATE['dtype']
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _STATE['dtype'] = previous


def is_grad_enabled() -> bool:
    return _STATE['grad_enabled']


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Désactive l'enregistrement du graphe (inférence, génération)."""
    previous = _STATE['grad_enabled']
    _STATE['grad_enabled'] = False
    try:
        yield
    finally:
        _STATE['grad_enabled'] = previous


class Tensor:
    """Tableau multidimensionnel avec gradient optionnel."""

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        """
        Crée un tenseur feuille.

        Args:
            data: Valeurs (copiées) convertibles en tableau numpy
            requires_grad: Accumule un gradient lors de `backward`
            dtype: Type flottant, par défaut `default_dtype()`
        """
        self.data = np.array(data, dtype=dtype or default_dtype())
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.op = 'leaf'
        self._parents: Tuple['Tensor', ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence['Tensor'],
                backward: BackwardFn, op: str) -> 'Tensor':
        """Construit le résultat d'une opération et l'attache au graphe."""
        data = np.asarray(data)
        if data.dtype.kind == 'f' and not np.isfinite(data).all():
            raise NonFiniteError(f"valeurs non finies après l'opération '{op}'")
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.op = op
        tracked = is_grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = tracked
        out._parents = tuple(parents) if tracked else ()
        out._backward = backward if tracked else None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> 'Tensor':
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """
        Propage le gradient depuis une perte scalaire.

        Les feuilles accumulent dans `grad`; deux appels successifs sans
        remise à zéro additionnent donc leurs contributions.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward exige une perte scalaire, reçu {self.shape}")
        if not self.requires_grad:
            return
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topological_order()):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + parent_grad if key in grads else parent_grad

    def _topological_order(self) -> List['Tensor']:
        # parcours en profondeur itératif: les graphes du VAE dépassent la pile Python
        order: List[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    # Raccourcis vers les opérations de `functional`

    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    def __radd__(self, other):
        from . import functional as F
        return F.add(other, self)

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    def __rmul__(self, other):
        from . import functional as F
        return F.mul(other, self)

    def __neg__(self):
        from . import functional as F
        return F.neg(self)

    def __truediv__(self, other):
        from . import functional as F
        return F.mul(self, 1.0 / float(other))

    def __pow__(self, exponent):
        from . import functional as F
        return F.power(self, exponent)

    def __matmul__(self, other):
        from . import functional as F
        return F.matmul(self, other)

    def __getitem__(self, index):
        from . import functional as F
        return F.getitem(self, index)

    def reshape(self, *shape):
        from . import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes):
        from . import functional as F
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return F.transpose(self, axes)

    def sum(self, axis=None, keepdims: bool = False):
        from . import functional as F
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import functional as F
        return F.mean(self, axis=axis, keepdims=keepdims)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op}, requires_grad={self.requires_grad})"


def as_tensor(value) -> Tensor:
    """Convertit une valeur en tenseur constant si nécessaire."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
