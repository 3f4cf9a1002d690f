from functools import lru_cache
from itertools import combinations
from typing import Any, Callable, Iterator, Mapping, Sequence, TypeVar

import networkx as nx
from pydantic import BaseModel, ConfigDict, model_validator
from typing_extensions import Self

from ..errors import BudgetExceededError

MAX_GRAPH_VERTICES = 6

T = TypeVar("T")


class LabeledGraph(BaseModel):
    """Simple graph on the vertices 0..n-1, edges stored as ordered pairs i < j"""

    model_config = ConfigDict(frozen=True)

    n: int
    edges: tuple[tuple[int, int], ...]

    @model_validator(mode="after")
    def _simple(self) -> Self:
        if self.n < 1:
            raise ValueError(f"a graph needs at least one vertex, got {self.n}")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("multiple edges are not allowed")
        for i, j in self.edges:
            if not 0 <= i < j < self.n:
                raise ValueError(f"edge ({i}, {j}) is a loop, unordered or out of range")
        return self

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph

    @property
    def connected(self) -> bool:
        return nx.is_connected(self.to_networkx())


def _check_size(n: int) -> None:
    if n < 1:
        raise ValueError(f"graphs need n >= 1, got {n}")
    if n > MAX_GRAPH_VERTICES:
        raise BudgetExceededError(f"graph enumeration stops at {MAX_GRAPH_VERTICES} vertices, got {n}")


def all_graphs(n: int) -> Iterator[LabeledGraph]:
    """Every simple graph on n labeled vertices, the empty one included"""
    _check_size(n)
    pairs = list(combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        yield LabeledGraph(n=n, edges=tuple(p for k, p in enumerate(pairs) if mask >> k & 1))


@lru_cache(maxsize=MAX_GRAPH_VERTICES)
def _connected(n: int) -> tuple[LabeledGraph, ...]:
    return tuple(graph for graph in all_graphs(n) if graph.connected)


def connected_graphs(n: int) -> Iterator[LabeledGraph]:
    _check_size(n)
    yield from _connected(n)


def set_partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in set_partitions(rest):
        yield [[first], *partition]
        for k in range(len(partition)):
            yield partition[:k] + [[first, *partition[k]]] + partition[k + 1 :]


def graph_weight(
    graph: LabeledGraph,
    edge_factor: Callable[[int, int], T],
    one: T,
    relabel: Sequence[int] | None = None,
) -> T:
    """Product of edge factors; `relabel` maps graph vertices to particle labels"""
    value = one
    for i, j in graph.edges:
        a, b = (relabel[i], relabel[j]) if relabel is not None else (i, j)
        value = value * edge_factor(min(a, b), max(a, b))
    return value


def connected_sum(
    vertices: Sequence[int], edge_factor: Callable[[int, int], T], zero: T, one: T
) -> T:
    """Sum over connected graphs on the given particles of the edge-factor products"""
    total = zero
    for graph in connected_graphs(len(vertices)):
        total = total + graph_weight(graph, edge_factor, one, vertices)
    return total


class PartitionIdentity(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int
    all_graphs: Any
    partitions: Any

    @property
    def holds(self) -> bool:
        return self.all_graphs == self.partitions


def partition_identity(n: int, weights: Mapping[tuple[int, int], T]) -> PartitionIdentity:
    """
    Sum over all simple graphs of the edge-weight products next to the sum
    over set partitions of products of connected-graph blocks. Exact for
    exact arithmetic such as Fraction weights.
    """
    _check_size(n)
    missing = [p for p in combinations(range(n), 2) if p not in weights]
    if missing:
        raise ValueError(f"weights are missing pairs {missing}")
    values = list(weights.values())
    zero = values[0] - values[0] if values else 0
    one = zero + 1

    def factor(i: int, j: int) -> T:
        return weights[(i, j)]

    lhs = zero
    for graph in all_graphs(n):
        lhs = lhs + graph_weight(graph, factor, one)
    rhs = zero
    for partition in set_partitions(list(range(n))):
        term = one
        for block in partition:
            term = term * connected_sum(block, factor, zero, one)
        rhs = rhs + term
    return PartitionIdentity(n=n, all_graphs=lhs, partitions=rhs)
