"""
Run artifacts: JSON, JSON-lines and CSV files plus the manifest tying them together.

Everything except timing.* and manifest.json is a pure function of flags,
config and seed, so reruns must produce byte-identical files.
"""

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, Field

PathLike = Union[str, Path]


def ensure_dir(path: PathLike) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: PathLike, data: Any) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    path.write_text(json.dumps(data, indent=2) + "\n")
    logging.debug(f"Wrote {path}")
    return path


def read_json(path: PathLike) -> Any:
    with open(path, "r") as f:
        return json.load(f)


def write_jsonl(path: PathLike, rows: Iterable[Dict[str, Any]]) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
    logging.debug(f"Wrote {path}")
    return path


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    with open(path, "r") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_csv(path: PathLike, rows: Union[pd.DataFrame, Sequence[Dict[str, Any]]]) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    frame.to_csv(path, index=False)
    logging.debug(f"Wrote {path} ({len(frame)} rows)")
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path)


def write_timing(out_dir: PathLike, rows: Sequence[Dict[str, Any]]) -> List[Path]:
    """Wall-clock measurements live apart from the deterministic outputs"""
    out_dir = Path(out_dir)
    return [write_csv(out_dir / "timing.csv", rows), write_json(out_dir / "timing.json", list(rows))]


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunManifest(BaseModel):
    """One per CLI invocation; every output file is listed here"""

    subcommand: str
    argv: List[str] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)
    seeds: Dict[str, int] = Field(default_factory=dict)
    tool_version: str = ""
    out_dir: str = ""
    outputs: List[str] = Field(default_factory=list)
    started_at: str = Field(default_factory=utc_now)
    finished_at: Optional[str] = None
    status: str = "running"
    timing: Dict[str, float] = Field(default_factory=dict)

    def add_output(self, path: PathLike):
        path = Path(path)
        try:
            relative = path.relative_to(self.out_dir) if self.out_dir else path
        except ValueError:
            relative = path
        if str(relative) not in self.outputs:
            self.outputs.append(str(relative))

    def finish(self, status: str = "ok"):
        self.finished_at = utc_now()
        self.status = status

    def write(self, path: Optional[PathLike] = None) -> Path:
        path = Path(path) if path is not None else Path(self.out_dir) / "manifest.json"
        ensure_dir(path.parent)
        path.write_text(self.model_dump_json(indent=2) + "\n")
        return path

    @classmethod
    def read(cls, path: PathLike) -> "RunManifest":
        return cls.model_validate_json(Path(path).read_text())
