import re
from pathlib import Path
from typing import IO, Dict, List, Union

from ..errors import GraphError
from ..model.Model import get_logger
from .Graph import RegionGraph, check_adjacency

logger = get_logger(__name__)

Source = Union[str, Path, IO[str]]

LINE_RE = re.compile(r"^\s*([^:#\s][^:]*?)\s*:\s*(.*?)\s*$")


def read_text(source: Source) -> str:
    if isinstance(source, (str, Path)):
        try:
            return Path(source).read_text(encoding="utf-8")
        except OSError as e:
            raise GraphError(f"cannot read adjacency file {source}: {e}") from e
    return source.read()


class AdjacencyParser:
    """Parses `region_id: neighbor_id,neighbor_id,...` lines.

    `#` starts a comment line, blank lines are skipped, an empty neighbour
    list is an error. Nothing is symmetrised: a one-sided edge fails.
    """

    def __init__(self):
        self.region_ids: List[str] = []
        self.neighbor_names: List[List[str]] = []
        self.lines: Dict[str, int] = {}

    def parse(self, content: str) -> RegionGraph:
        for lineno, raw in enumerate(content.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            self._parse_line(line, lineno)

        if not self.region_ids:
            raise GraphError("adjacency source defines no regions")

        adjacency = self._resolve()
        check_adjacency(self.region_ids, adjacency)
        graph = RegionGraph(
            region_ids=tuple(self.region_ids),
            adjacency=tuple(tuple(adj) for adj in adjacency),
        )
        components = graph.n_components
        if components > 1:
            logger.warning(
                f"adjacency graph has {components} connected components; "
                "spatial effects are identified per component only through the sum-to-zero recentring"
            )
        return graph

    def _parse_line(self, line: str, lineno: int) -> None:
        match = LINE_RE.match(line)
        if not match:
            raise GraphError(f"expected 'region_id: neighbor,...', got {line!r}", line=lineno)
        region_id, rest = match.group(1), match.group(2)
        if region_id in self.lines:
            raise GraphError(
                f"duplicate region id {region_id!r} (first defined on line {self.lines[region_id]})",
                line=lineno,
            )
        names = [name.strip() for name in rest.split(",")] if rest else []
        if not names or any(not name for name in names):
            raise GraphError(f"region {region_id!r} has a blank neighbour list", line=lineno)
        self.lines[region_id] = lineno
        self.region_ids.append(region_id)
        self.neighbor_names.append(names)

    def _resolve(self) -> List[List[int]]:
        index = {rid: i for i, rid in enumerate(self.region_ids)}
        adjacency = []
        for rid, names in zip(self.region_ids, self.neighbor_names):
            resolved = []
            for name in names:
                if name not in index:
                    raise GraphError(f"region {rid!r} names unknown neighbour {name!r}", line=self.lines[rid])
                resolved.append(index[name])
            adjacency.append(resolved)
        return adjacency


def load_adjacency(source: Source) -> RegionGraph:
    return AdjacencyParser().parse(read_text(source))


def serialize_adjacency(g: RegionGraph) -> str:
    lines = [
        f"{rid}: " + ",".join(g.region_ids[j] for j in adj)
        for rid, adj in zip(g.region_ids, g.adjacency)
    ]
    return "\n".join(lines) + "\n"
