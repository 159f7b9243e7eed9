from typing import List, Sequence

import numpy as np
import pytest

from binomial_car.database.Counts import CountData
from binomial_car.database.Graph import RegionGraph
from binomial_car.model.Sampler import ChainConfig

# Row widths of a 67-region rook lattice: six rows of ten and a short row of seven.
STATE_ROWS = (10, 10, 10, 10, 10, 10, 7)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run simulation-study reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def rook_lattice(widths: Sequence[int], prefix: str = "C") -> RegionGraph:
    """Rows of cells, left-aligned; cells touching edge-to-edge are neighbours."""
    cells = [(r, c) for r, width in enumerate(widths) for c in range(width)]
    index = {cell: i for i, cell in enumerate(cells)}
    adjacency: List[tuple] = []
    for r, c in cells:
        around = [(r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)]
        adjacency.append(tuple(index[p] for p in around if p in index))
    ids = tuple(f"{prefix}{i + 1:02d}" for i in range(len(cells)))
    return RegionGraph(region_ids=ids, adjacency=tuple(adjacency))


def adjacency_text(graph: RegionGraph) -> str:
    return "".join(
        f"{rid}: " + ",".join(graph.region_ids[j] for j in adj) + "\n"
        for rid, adj in zip(graph.region_ids, graph.adjacency)
    )


@pytest.fixture(scope="session")
def state_graph() -> RegionGraph:
    return rook_lattice(STATE_ROWS)


@pytest.fixture(scope="session")
def small_graph() -> RegionGraph:
    return rook_lattice((3, 3, 3))


@pytest.fixture
def quick_chain() -> ChainConfig:
    return ChainConfig(iterations=3000, burn_in=1000, thin=2, seed=11)


@pytest.fixture(scope="session")
def outlier_county_data(state_graph) -> CountData:
    """One region at 70/594, everything else pooled at about 0.071 with large n."""
    size = state_graph.size
    n = np.full(size, 2000)
    y = np.full(size, 142)
    focal = state_graph.index("C15")
    n[focal], y[focal] = 594, 70
    return CountData.from_arrays(n, y, state_graph.region_ids, stratum="all")


@pytest.fixture(scope="session")
def spatial_data(state_graph) -> CountData:
    """About 40 trials per region with a smooth west-to-east gradient in the rate."""
    rng = np.random.default_rng(2024)
    columns = np.array([c for width in (10, 10, 10, 10, 10, 10, 7) for c in range(width)])
    p = 0.05 + 0.04 * columns / 9.0
    n = rng.integers(35, 46, size=state_graph.size)
    y = rng.binomial(n, p)
    return CountData.from_arrays(n, y, state_graph.region_ids, stratum="all")


@pytest.fixture(scope="session")
def disparity_rows(state_graph) -> List[tuple]:
    """(region_id, stratum, n, y): a large city at 14.4% vs 7.0% and a rural
    region with 21 reference births and 1 comparison birth."""
    rows = []
    city, rural = state_graph.index("C25"), state_graph.index("C61")
    for i, rid in enumerate(state_graph.region_ids):
        if i == city:
            rows += [(rid, "black", 10000, 1440), (rid, "white", 10000, 700)]
        elif i == rural:
            rows += [(rid, "black", 1, 0), (rid, "white", 21, 1)]
        else:
            rows += [(rid, "black", 30, 4 + (i % 2)), (rid, "white", 1500, 105)]
    return rows
