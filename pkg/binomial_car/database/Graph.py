from typing import Dict, List, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import sparse

from ..errors import GraphError


def check_adjacency(region_ids: Sequence[str], adjacency: Sequence[Sequence[int]]) -> None:
    """Raise GraphError unless the lists describe a symmetric, loop-free graph
    in which every region has at least one neighbour."""
    size = len(region_ids)
    if size == 0:
        raise GraphError("graph has no regions")
    if len(adjacency) != size:
        raise GraphError(f"{len(adjacency)} adjacency lists for {size} regions")
    if len(set(region_ids)) != size:
        raise GraphError("duplicate region id")
    neighbours = [set(adj) for adj in adjacency]
    for i, adj in enumerate(adjacency):
        rid = region_ids[i]
        if not adj:
            raise GraphError(f"region {rid!r} has no neighbours")
        if len(neighbours[i]) != len(adj):
            raise GraphError(f"region {rid!r} lists a neighbour twice")
        for j in adj:
            if not 0 <= j < size:
                raise GraphError(f"region {rid!r} has neighbour index {j} out of range")
            if j == i:
                raise GraphError(f"region {rid!r} lists itself as a neighbour")
            if i not in neighbours[j]:
                raise GraphError(
                    f"asymmetric edge: {rid!r} lists {region_ids[j]!r} but not the reverse"
                )


class RegionGraph(BaseModel):
    """Symmetric adjacency over regions, in file order.

    `adjacency[i]` holds the neighbour indices of region i. All vectors in the
    models index against `region_ids`.
    """

    model_config = ConfigDict(frozen=True)

    region_ids: Tuple[str, ...]
    adjacency: Tuple[Tuple[int, ...], ...]

    @model_validator(mode="after")
    def check_structure(self):
        check_adjacency(self.region_ids, self.adjacency)
        return self

    @property
    def size(self) -> int:
        return len(self.region_ids)

    @property
    def m(self) -> np.ndarray:
        return np.array([len(adj) for adj in self.adjacency], dtype=int)

    def neighbor_count(self, i: int) -> int:
        if not 0 <= i < self.size:
            raise IndexError(f"region index {i} out of range for {self.size} regions")
        return len(self.adjacency[i])

    def index(self, region_id: str) -> int:
        try:
            return self.region_ids.index(region_id)
        except ValueError:
            raise GraphError(f"unknown region id {region_id!r}") from None

    def edges(self) -> np.ndarray:
        pairs = [(i, j) for i, adj in enumerate(self.adjacency) for j in adj if i < j]
        return np.array(pairs, dtype=int).reshape(-1, 2)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.size))
        g.add_edges_from(map(tuple, self.edges()))
        return g

    @property
    def n_components(self) -> int:
        return nx.number_connected_components(self.to_networkx())

    def weights(self) -> sparse.csr_matrix:
        """Binary adjacency matrix W with W[i, j] = 1 when j ~ i."""
        e = self.edges()
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows))
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.size, self.size))


def neighbor_count(g: RegionGraph, i: int) -> int:
    return g.neighbor_count(i)


def color_classes(g: RegionGraph) -> List[np.ndarray]:
    """Partition regions into independent sets (no two neighbours share a class)."""
    coloring: Dict[int, int] = nx.greedy_color(g.to_networkx(), strategy="largest_first")
    n_colors = max(coloring.values()) + 1
    return [
        np.array(sorted(i for i, c in coloring.items() if c == color), dtype=int)
        for color in range(n_colors)
    ]
