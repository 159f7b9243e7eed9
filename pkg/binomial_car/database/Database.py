import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import pandas as pd

from .. import __version__
from ..errors import OutputError
from ..model.Model import get_logger

FLOAT_FORMAT = "%.12g"


def config_hash(payload: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a run configuration."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def format_value(value: Any) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def fit_metadata(fit, config: Optional[Mapping[str, Any]] = None, **extra) -> Dict[str, Any]:
    """Sidecar fields describing one fit: schedule, seed, constraint settings."""
    chain = fit.samples.config
    meta: Dict[str, Any] = {
        "software_version": __version__,
        "model": fit.kind,
        "stratum": fit.stratum,
        "seed": chain.seed,
        "iterations": chain.iterations,
        "burn_in": chain.burn_in,
        "thin": chain.thin,
        "retained": fit.n_draws,
        "a0_max": "none",
        "a0_min": "none",
        "m0": "none",
        "config_hash": config_hash(config if config is not None else {"settings": fit.settings, "chain": chain.model_dump()}),
    }
    meta.update(fit.settings)
    meta.update(extra)
    for name, rate in fit.samples.acceptance.items():
        meta[f"acceptance_{name}"] = rate
    return meta


class ResultsStore:
    """Writes result files under one output directory.

    Every table is CSV with 12 significant digits and `\\n` line endings, and
    the metadata sidecar is sorted `key=value` lines, so identical inputs give
    byte-identical files.
    """

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.logger = get_logger(__name__ + ".ResultsStore")
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputError(f"cannot create output directory {self.root}: {e}") from e
        self.written: List[Path] = []

    def path(self, name: str) -> Path:
        return self.root / name

    def save_frame(self, name: str, frame: pd.DataFrame) -> Path:
        target = self.path(name)
        try:
            frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        except OSError as e:
            raise OutputError(f"cannot write {target}: {e}") from e
        self.written.append(target)
        self.logger.debug(f"wrote {len(frame)} rows to {target}")
        return target

    def write_summary(self, frame: pd.DataFrame, stratum: str) -> Path:
        return self.save_frame(f"summary_{stratum}.csv", frame)

    def write_disparity(self, frame: pd.DataFrame, comparison: str, reference: str) -> Path:
        return self.save_frame(f"disparity_{comparison}_vs_{reference}.csv", frame)

    def write_samples(self, fit) -> Path:
        return self.save_frame(f"samples_{fit.kind}_{fit.stratum}.csv", fit.samples.to_frame())

    def write_study(self, result) -> List[Path]:
        return [
            self.save_frame("study_records.csv", result.records),
            self.save_frame("study_summary.csv", result.summary()),
        ]

    def write_metadata(self, metadata: Mapping[str, Any], name: str = "metadata.txt") -> Path:
        target = self.path(name)
        lines = [f"{key}={format_value(metadata[key])}" for key in sorted(metadata)]
        try:
            target.write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as e:
            raise OutputError(f"cannot write {target}: {e}") from e
        self.written.append(target)
        return target


def read_metadata(path: Union[str, Path]) -> Dict[str, str]:
    meta = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line:
            key, _, value = line.partition("=")
            meta[key] = value
    return meta


def write_results(
    destination: Union[str, Path],
    summaries: Optional[Mapping[str, pd.DataFrame]] = None,
    disparities: Optional[Mapping[tuple, pd.DataFrame]] = None,
    study=None,
    metadata: Optional[Mapping[str, Any]] = None,
) -> List[Path]:
    """Write a full result set: per-stratum summaries, disparity tables,
    simulation study tables and the metadata sidecar."""
    store = ResultsStore(destination)
    for stratum, frame in (summaries or {}).items():
        store.write_summary(frame, stratum)
    for (comparison, reference), frame in (disparities or {}).items():
        store.write_disparity(frame, comparison, reference)
    if study is not None:
        store.write_study(study)
    meta = dict(metadata or {})
    meta.setdefault("software_version", __version__)
    store.write_metadata(meta)
    return list(store.written)
