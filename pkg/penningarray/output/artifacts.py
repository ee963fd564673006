""" Result files and run manifests """

from __future__ import annotations

import datetime
import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from .. import __version__
from ..error.error import ManifestMismatch

from typing import Dict, Iterable

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def file_sha256(path: str | os.PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_atomic(path: Path, payload: bytes) -> None:
    """Writes to a temporary file next to ``path`` and renames it into place"""

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _shortest(value) -> str:
    return repr(float(value))


def format_frame(frame: pd.DataFrame) -> str:
    """CSV text with a header row, LF line endings and shortest round-trip floats"""

    out = frame.copy()
    for column in out.columns:
        if pd.api.types.is_float_dtype(out[column]):
            out[column] = [_shortest(v) for v in out[column]]
    return out.to_csv(index=False, lineterminator="\n")


def write_csv(frame: pd.DataFrame, path: str | os.PathLike) -> str:
    """Writes ``frame`` atomically and returns the sha256 of the written bytes"""

    payload = format_frame(frame).encode("utf-8")
    _write_atomic(Path(path), payload)
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return hashlib.sha256(payload).hexdigest()


class RunManifest(BaseModel):
    command: str
    version: str = __version__
    config_hash: str = Field(description="sha256 of the normalized configuration")
    seed: int
    started: datetime.datetime
    finished: datetime.datetime | None = None
    files: Dict[str, str] = Field(default_factory=dict, description="File name -> sha256")

    class Config:
        title = "Run Manifest"
        extra = "forbid"

    def write(self, directory: str | os.PathLike) -> Path:
        path = Path(directory) / MANIFEST_NAME
        _write_atomic(path, (self.json(indent=2, sort_keys=True) + "\n").encode("utf-8"))
        return path

    @classmethod
    def read(cls, directory: str | os.PathLike) -> RunManifest:
        path = Path(directory) / MANIFEST_NAME
        try:
            return cls.parse_file(path)
        except (OSError, ValueError) as err:
            raise ManifestMismatch(ext_message=f"can't read <{path}> ({err})")

    def mismatches(self, other: RunManifest) -> Dict[str, str]:
        """Files whose checksums differ between two runs, or that only one of them wrote"""

        found = {}
        if self.config_hash != other.config_hash:
            found["config"] = "configuration hash differs"
        for name in sorted(set(self.files) | set(other.files)):
            mine, theirs = self.files.get(name), other.files.get(name)
            if mine is None or theirs is None:
                found[name] = "missing"
            elif mine != theirs:
                found[name] = "checksum differs"
        return found


class ArtifactWriter:
    """Collects the result files of one command and finishes with a manifest listing all of them"""

    def __init__(self, directory: str | os.PathLike, command: str, config_hash: str, seed: int) -> None:
        self.directory = Path(directory)
        self.manifest = RunManifest(
            command=command,
            config_hash=config_hash,
            seed=seed,
            started=datetime.datetime.now(datetime.timezone.utc),
        )

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.directory / name
        self.manifest.files[name] = write_csv(frame, path)
        return path

    def finish(self) -> RunManifest:
        self.manifest.finished = datetime.datetime.now(datetime.timezone.utc)
        path = self.manifest.write(self.directory)
        logger.info(f"Wrote {len(self.manifest.files)} files and {path}")
        return self.manifest


def check_files(directory: str | os.PathLike) -> RunManifest:
    """Recomputes the checksums of the files listed in the manifest of ``directory``"""

    directory = Path(directory)
    manifest = RunManifest.read(directory)
    bad = {}
    for name, expected in manifest.files.items():
        path = directory / name
        if not path.is_file():
            bad[name] = "missing"
        elif file_sha256(path) != expected:
            bad[name] = "checksum differs"

    if bad:
        raise ManifestMismatch(ext_message=json.dumps(bad), data=bad)
    return manifest


def verify_against(reference: RunManifest, fresh: RunManifest) -> None:
    bad = reference.mismatches(fresh)
    if bad:
        logger.error(f"Re-run differs from the recorded run: {bad}")
        raise ManifestMismatch(ext_message=json.dumps(bad), data=bad)
    logger.info(f"All {len(reference.files)} files reproduced")


def long_format(matrix: np.ndarray, columns: Iterable[str]) -> pd.DataFrame:
    """Upper-triangle entries of a square matrix as (row, column, value) records"""

    rows, cols = np.triu_indices(matrix.shape[0], k=1)
    first, second, value = columns
    return pd.DataFrame({first: rows, second: cols, value: matrix[rows, cols]})
