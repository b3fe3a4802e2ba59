"""
Тензор с обратным проходом (reverse-mode) и граф с именованными листьями.

Каждая операция создаёт новый Tensor, запоминая родителей и функцию,
которая по градиенту выхода возвращает градиенты входов. Топологический
порядок строится при backward (итеративно, без рекурсии).
"""

from __future__ import annotations

import logging
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from core.exceptions import GraphError, ShapeError


logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """
    Массив значений + флаг requires_grad + (опционально) запись операции.

    Инвариант: grad, если есть, имеет ту же форму, что и data.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")

    # ndarray слева от Tensor отдаёт операцию нашим __radd__/__rmul__/...
    __array_ufunc__ = None

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        name: str | None = None,
        dtype: np.dtype | type | None = None,
    ) -> None:
        array = np.asarray(data, dtype=dtype)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    # --- свойства ---------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item() только для тензора из одного элемента", {"shape": self.shape})
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # --- операторы (реализация в ndgrad.ops) -------------------------------

    def __add__(self, other: TensorLike) -> Tensor:
        from ndgrad import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: TensorLike) -> Tensor:
        from ndgrad import ops
        return ops.sub(self, other)

    def __rsub__(self, other: TensorLike) -> Tensor:
        from ndgrad import ops
        return ops.sub(other, self)

    def __mul__(self, other: TensorLike) -> Tensor:
        from ndgrad import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> Tensor:
        from ndgrad import ops
        if isinstance(other, Tensor):
            raise ShapeError("Деление на тензор не поддерживается", {"op": "div"})
        return ops.mul(self, 1.0 / other)

    def __neg__(self) -> Tensor:
        from ndgrad import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from ndgrad import ops
        return ops.matmul(self, other)

    def __getitem__(self, index) -> Tensor:
        from ndgrad import ops
        return ops.getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> Tensor:
        from ndgrad import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> Tensor:
        from ndgrad import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> Tensor:
        from ndgrad import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    # --- обратный проход ---------------------------------------------------

    def backward(self, seed: ArrayLike | None = None) -> None:
        """
        Распространить градиент от этого тензора к листьям.

        Градиенты листьев с requires_grad накапливаются в .grad.

        Args:
            seed: градиент выхода; по умолчанию единицы (для скаляра — 1.0).

        Raises:
            GraphError: тензор не требует градиента.
            ShapeError: форма seed не совпадает с формой тензора.
        """
        if not self.requires_grad:
            raise GraphError("backward() у тензора без requires_grad", {"shape": self.shape})

        if seed is None:
            seed_array = np.ones_like(self.data)
        else:
            seed_array = np.asarray(seed, dtype=self.data.dtype)
            if seed_array.shape != self.data.shape:
                raise ShapeError(
                    "Форма seed не совпадает с формой выхода",
                    {"seed": seed_array.shape, "output": self.data.shape},
                )

        order = _topological_order(self)
        grads: Dict[int, np.ndarray] = {id(self): seed_array}

        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            parent_grads = node._backward(grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad


TensorLike = Union[Tensor, ArrayLike]


def _topological_order(root: Tensor) -> list[Tensor]:
    """Узлы, требующие градиента, в топологическом порядке (входы раньше выходов)."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[Tuple[Tensor, bool]] = [(root, False)]
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


def as_tensor(value: TensorLike, like: Tensor | None = None) -> Tensor:
    """Обернуть константу в Tensor (dtype берётся у like, если задан)."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def make_result(
    data: np.ndarray,
    parents: Iterable[Tensor],
    backward: BackwardFn,
) -> Tensor:
    """Создать выход операции; история пишется только если она нужна."""
    parents = tuple(parents)
    needs_grad = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs_grad)
    if needs_grad:
        out._parents = parents
        out._backward = backward
    return out


class Graph:
    """
    Вычисление с именованными листьями: forward по привязкам, затем backward.

    Пример:
        graph = Graph(lambda x, w: ops.sum(x * w), leaves=["x", "w"])
        graph.forward({"x": x, "w": w})
        grads = graph.backward()
    """

    def __init__(
        self,
        fn: Callable[..., Tensor],
        leaves: Sequence[str],
        trainable: Iterable[str] | None = None,
    ) -> None:
        """
        Args:
            fn: функция от именованных тензоров-листьев, возвращает Tensor.
            leaves: имена листьев.
            trainable: листья с requires_grad; по умолчанию все.
        """
        self.fn = fn
        self.leaves = list(leaves)
        self.trainable = set(self.leaves if trainable is None else trainable)
        unknown = self.trainable - set(self.leaves)
        if unknown:
            raise GraphError("trainable содержит неизвестные листья", {"unknown": sorted(unknown)})
        self._bound: Dict[str, Tensor] = {}
        self._output: Tensor | None = None

    def forward(self, bindings: Mapping[str, ArrayLike]) -> Tensor:
        """
        Привязать листья и выполнить вычисление.

        Raises:
            GraphError: не привязан один из листьев.
        """
        missing = [name for name in self.leaves if name not in bindings]
        if missing:
            raise GraphError("Не привязаны листья графа", {"missing": missing})

        self._bound = {}
        for name in self.leaves:
            value = bindings[name]
            array = value.data if isinstance(value, Tensor) else value
            self._bound[name] = Tensor(
                np.array(array, copy=True),
                requires_grad=name in self.trainable,
                name=name,
            )
        self._output = self.fn(**self._bound)
        return self._output

    def backward(self, seed: ArrayLike | None = None) -> Dict[str, np.ndarray]:
        """
        Градиенты по обучаемым листьям.

        Raises:
            GraphError: backward до forward.
            ShapeError: форма seed не совпадает с выходом.
        """
        if self._output is None:
            raise GraphError("backward() вызван до forward()")
        for leaf in self._bound.values():
            leaf.grad = None
        if self._output.requires_grad:
            self._output.backward(seed)
        elif seed is not None and np.shape(seed) != self._output.shape:
            raise ShapeError(
                "Форма seed не совпадает с формой выхода",
                {"seed": np.shape(seed), "output": self._output.shape},
            )
        return {
            name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data))
            for name, leaf in self._bound.items()
            if leaf.requires_grad
        }
