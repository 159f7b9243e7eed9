import io
import re
from pathlib import Path
from typing import IO, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import CountsError, GraphError
from ..model.Model import get_logger
from .Graph import RegionGraph

logger = get_logger(__name__)

COLUMNS = ["region_id", "stratum", "n", "y"]
LINE_RE = re.compile(r"line (\d+)")


class CountData(BaseModel):
    """Trials and events per region for one stratum."""

    model_config = ConfigDict(frozen=True)

    region_ids: Tuple[str, ...]
    n: Tuple[int, ...]
    y: Tuple[int, ...]
    stratum: str = "all"

    @model_validator(mode="after")
    def check_counts(self):
        if not (len(self.region_ids) == len(self.n) == len(self.y)):
            raise ValueError("region_ids, n and y must have equal lengths")
        for rid, n, y in zip(self.region_ids, self.n, self.y):
            if n < 0 or y < 0:
                raise ValueError(f"region {rid!r}: negative count (n={n}, y={y})")
            if y > n:
                raise ValueError(f"region {rid!r}: events exceed trials (y={y} > n={n})")
        return self

    @property
    def size(self) -> int:
        return len(self.region_ids)

    @property
    def trials(self) -> np.ndarray:
        return np.asarray(self.n, dtype=float)

    @property
    def events(self) -> np.ndarray:
        return np.asarray(self.y, dtype=float)

    @classmethod
    def from_arrays(cls, n, y, region_ids=None, stratum: str = "all") -> "CountData":
        n = [int(v) for v in n]
        if region_ids is None:
            region_ids = [f"R{i + 1}" for i in range(len(n))]
        return cls(region_ids=tuple(region_ids), n=tuple(n), y=tuple(int(v) for v in y), stratum=stratum)

    @classmethod
    def from_table(cls, table: "CountTable", stratum: str, graph: Optional[RegionGraph] = None) -> "CountData":
        rows = table.frame[table.frame["stratum"] == stratum]
        if rows.empty:
            raise CountsError(f"no rows for stratum {stratum!r}; available: {', '.join(table.strata()) or 'none'}")
        if graph is None:
            return cls.from_arrays(rows["n"], rows["y"], rows["region_id"], stratum)

        known = set(graph.region_ids)
        extra = sorted(set(rows["region_id"]) - known)
        if extra:
            raise GraphError(f"stratum {stratum!r} has regions missing from the adjacency graph: {', '.join(extra)}")
        indexed = rows.set_index("region_id")
        missing = [rid for rid in graph.region_ids if rid not in indexed.index]
        if missing:
            logger.warning(
                f"stratum {stratum!r}: {len(missing)} graph regions have no counts and enter with n = y = 0"
            )
        aligned = indexed.reindex(list(graph.region_ids)).fillna({"n": 0, "y": 0})
        return cls.from_arrays(aligned["n"], aligned["y"], graph.region_ids, stratum)


class CountTable(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    frame: pd.DataFrame
    provenance: str = Field("", description="where the rows came from")

    def strata(self) -> List[str]:
        return list(dict.fromkeys(self.frame["stratum"]))

    def __len__(self) -> int:
        return len(self.frame)


def _parse_count(value: str, field: str, lineno: int) -> int:
    try:
        parsed = int(value)
    except (TypeError, ValueError):
        raise CountsError(f"{field}={value!r} is not an integer", line=lineno) from None
    if parsed < 0:
        raise CountsError(f"{field}={parsed} is negative", line=lineno)
    return parsed


def _cells(row: pd.Series) -> List[str]:
    # short rows come back padded with NaN
    return ["" if pd.isna(cell) else str(cell).strip() for cell in row]


def _read_frame(text: str) -> pd.DataFrame:
    try:
        return pd.read_csv(
            io.StringIO(text), header=None, dtype=str, keep_default_na=False, skip_blank_lines=False
        )
    except pd.errors.EmptyDataError:
        raise CountsError(f"header must be {','.join(COLUMNS)}, got an empty file", line=1) from None
    except pd.errors.ParserError as e:
        match = LINE_RE.search(str(e))
        raise CountsError(str(e).split("C error: ")[-1].strip(), line=int(match.group(1)) if match else None) from None


def load_counts(source: Union[str, Path, IO[str]]) -> CountTable:
    """Read a `region_id,stratum,n,y` CSV, validating every row."""
    if isinstance(source, (str, Path)):
        provenance = str(source)
        try:
            text = Path(source).read_text(encoding="utf-8-sig")
        except OSError as e:
            raise CountsError(f"cannot read counts file {source}: {e}") from e
    else:
        provenance = getattr(source, "name", "<stream>")
        text = source.read().lstrip("\ufeff")

    raw = _read_frame(text)
    header = _cells(raw.iloc[0])
    if header != COLUMNS:
        raise CountsError(f"header must be {','.join(COLUMNS)}, got {header!r}", line=1)

    records = []
    seen = {}
    # Blank lines are kept as empty rows, so row k of the frame is file line k + 1.
    for index in range(1, len(raw)):
        lineno = index + 1
        cells = _cells(raw.iloc[index])
        if not any(cells):
            continue
        region_id, stratum = cells[0], cells[1]
        if not region_id or not stratum:
            raise CountsError("region_id and stratum must be non-empty", line=lineno)
        n = _parse_count(cells[2], "n", lineno)
        y = _parse_count(cells[3], "y", lineno)
        if y > n:
            raise CountsError(f"events exceed trials (y={y} > n={n})", line=lineno)
        key = (region_id, stratum)
        if key in seen:
            raise CountsError(f"duplicate (region_id, stratum) {key} first seen on line {seen[key]}", line=lineno)
        seen[key] = lineno
        records.append((region_id, stratum, n, y))

    if not records:
        logger.warning(f"count table {provenance} has a header but no rows")
    frame = pd.DataFrame.from_records(records, columns=COLUMNS).astype(
        {"region_id": str, "stratum": str, "n": "int64", "y": "int64"}
    )
    return CountTable(frame=frame, provenance=provenance)


def write_counts(table: CountTable, destination: Union[str, Path]) -> Path:
    path = Path(destination)
    table.frame[COLUMNS].to_csv(path, index=False, lineterminator="\n")
    return path
