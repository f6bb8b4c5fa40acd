"""Dense double-precision tensors and the tape that differentiates them.

Layout is H×W×C row-major everywhere. A ``Graph`` is rebuilt for every forward
pass: leaves are registered by name, each primitive op appends one node, and
``backward`` sweeps the nodes in reverse insertion order (which is a
topological order by construction).

Branch decisions (relu masks, max-pool arg-max, abs signs, clamp masks, ...)
are routed through ``Graph.branch``. A graph built with ``routing=`` replays
the decisions recorded by an earlier pass instead of recomputing them; the
finite-difference checker uses this to stay on one smooth piece.
"""

import logging
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import GraphError, ShapeError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence]
VJP = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Node(NamedTuple):
    op: str
    parents: Tuple[Optional[int], ...]
    vjp: Optional[VJP]
    shape: Tuple[int, ...]


class Tensor:
    """Immutable N-dimensional float64 array, optionally attached to a graph"""

    __slots__ = ("data", "graph", "node_id")

    def __init__(self, data: ArrayLike, graph: Optional["Graph"] = None, node_id: Optional[int] = None):
        array = np.array(data, dtype=np.float64)
        if any(extent <= 0 for extent in array.shape):
            raise ShapeError(f"Tensor extents must be positive, got {array.shape}")
        array.setflags(write=False)
        self.data = array
        self.graph = graph
        self.node_id = node_id

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        """Writable copy of the values"""
        return np.array(self.data)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self) -> str:
        where = f"node={self.node_id}" if self.graph is not None else "constant"
        return f"Tensor(shape={self.shape}, {where})"

    # Arithmetic is defined in ops; imported lazily to keep the module graph acyclic.
    def __add__(self, other):
        from .ops import add

        return add(self, other)

    def __radd__(self, other):
        from .ops import add

        return add(other, self)

    def __sub__(self, other):
        from .ops import sub

        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub

        return sub(other, self)

    def __mul__(self, other):
        from .ops import mul

        return mul(self, other)

    def __rmul__(self, other):
        from .ops import mul

        return mul(other, self)

    def __truediv__(self, other):
        from .ops import div

        return div(self, other)

    def __rtruediv__(self, other):
        from .ops import div

        return div(other, self)

    def __neg__(self):
        from .ops import neg

        return neg(self)


class Graph:
    """Tape recording executed operations for one forward pass"""

    def __init__(self, routing: Optional[Sequence[np.ndarray]] = None):
        self._nodes: List[Node] = []
        self._leaves: Dict[str, int] = {}
        self._replay: Optional[List[np.ndarray]] = list(routing) if routing is not None else None
        self._branches: List[np.ndarray] = []

    @property
    def nodes(self) -> Tuple[Node, ...]:
        return tuple(self._nodes)

    @property
    def leaves(self) -> Dict[str, int]:
        return dict(self._leaves)

    @property
    def routing(self) -> Tuple[np.ndarray, ...]:
        """Branch decisions taken so far, in execution order"""
        return tuple(self._branches)

    def leaf(self, value: ArrayLike, name: str) -> Tensor:
        """Register a differentiable input under a unique name"""
        if name in self._leaves:
            raise GraphError(f"Leaf '{name}' already registered on this graph")
        tensor = Tensor(value)
        node_id = len(self._nodes)
        self._nodes.append(Node("leaf", (), None, tensor.shape))
        self._leaves[name] = node_id
        tensor.graph = self
        tensor.node_id = node_id
        return tensor

    def record(self, op: str, value: np.ndarray, inputs: Sequence[Optional[Tensor]], vjp: VJP) -> Tensor:
        """Append a node computed from ``inputs``; constants get no parent id"""
        parents = tuple(t.node_id if isinstance(t, Tensor) and t.graph is self else None for t in inputs)
        tensor = Tensor(value)
        node_id = len(self._nodes)
        self._nodes.append(Node(op, parents, vjp, tensor.shape))
        tensor.graph = self
        tensor.node_id = node_id
        return tensor

    def branch(self, decision: np.ndarray) -> np.ndarray:
        """Record (or replay) one branch decision"""
        index = len(self._branches)
        if self._replay is not None:
            if index >= len(self._replay):
                raise GraphError("Routing replay exhausted; the replayed pass executed more branches")
            recorded = self._replay[index]
            if recorded.shape != np.shape(decision):
                raise GraphError(
                    f"Routing replay mismatch at branch {index}: recorded {recorded.shape}, "
                    f"got {np.shape(decision)}"
                )
            decision = recorded
        decision = np.array(decision)
        decision.setflags(write=False)
        self._branches.append(decision)
        return decision


def common_graph(inputs: Sequence[Optional[Tensor]]) -> Optional[Graph]:
    """The single graph shared by ``inputs`` (None when all are constants)"""
    graph = None
    for tensor in inputs:
        if isinstance(tensor, Tensor) and tensor.graph is not None:
            if graph is None:
                graph = tensor.graph
            elif tensor.graph is not graph:
                raise GraphError("Operands belong to different graphs")
    return graph


def apply_op(op: str, value: np.ndarray, inputs: Sequence[Optional[Tensor]], vjp: VJP) -> Tensor:
    """Wrap a forward value as a tensor, recording it when any input is tracked.

    ``vjp`` maps the upstream gradient to one gradient (or None) per input.
    """
    graph = common_graph(inputs)
    if graph is None:
        return Tensor(value)
    return graph.record(op, value, inputs, vjp)


def branch(inputs: Sequence[Optional[Tensor]], decision: np.ndarray) -> np.ndarray:
    """Route a branch decision through the inputs' graph, if any"""
    graph = common_graph(inputs)
    if graph is None:
        return decision
    return graph.branch(decision)


def backward(graph: Graph, loss: Tensor) -> Dict[str, np.ndarray]:
    """Reverse-mode sweep from a scalar loss.

    Args:
        graph (Graph): The graph the loss was recorded on
        loss (Tensor): Scalar (0-d) tensor

    Returns:
        Dict[str, np.ndarray]: Gradient per registered leaf name; leaves the
        loss does not depend on get zeros
    """
    if loss.graph is not graph or loss.node_id is None:
        raise GraphError("Loss was not recorded on the given graph")
    if loss.shape != ():
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")

    nodes = graph.nodes
    grads: List[Optional[np.ndarray]] = [None] * len(nodes)
    grads[loss.node_id] = np.ones((), dtype=np.float64)

    for index in range(loss.node_id, -1, -1):
        upstream = grads[index]
        node = nodes[index]
        if upstream is None or node.vjp is None:
            continue
        for parent, grad in zip(node.parents, node.vjp(upstream)):
            if parent is None or grad is None:
                continue
            if grad.shape != nodes[parent].shape:
                raise GraphError(
                    f"Gradient shape {grad.shape} from '{node.op}' does not match "
                    f"input shape {nodes[parent].shape}"
                )
            grads[parent] = grad if grads[parent] is None else grads[parent] + grad

    return {
        name: grads[node_id] if grads[node_id] is not None else np.zeros(nodes[node_id].shape)
        for name, node_id in graph.leaves.items()
    }
