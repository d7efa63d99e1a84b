"""On-disk cache of reference endpoints keyed by an experiment digest.

File layout (``<digest>.ref``, UTF-8 text)::

    # ibcsplit-reference v1
    # digest: <sha256 hex>
    # created: <ISO-8601 UTC>
    # abs_tol: <float>
    # rel_tol: <float>
    # n: <vector length>
    <value 0 as %.17g>
    ...

Writes go to a temporary file that is atomically renamed into place.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

log = logging.getLogger(__name__)

MAGIC = "# ibcsplit-reference v1"


def default_cache_dir() -> Path:
    env = os.environ.get("IBCSPLIT_CACHE_DIR")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "ibcsplit"


def spec_digest(payload: Mapping[str, Any]) -> str:
    """SHA-256 over canonical JSON (sorted keys, repr-exact floats)."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()


class ReferenceCache:
    def __init__(self, directory=None, enabled: bool = True):
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self.enabled = enabled

    def path(self, digest: str) -> Path:
        return self.directory / f"{digest}.ref"

    def lookup(self, digest: str) -> Optional[np.ndarray]:
        if not self.enabled:
            return None
        path = self.path(digest)
        if not path.exists():
            return None
        try:
            return _read(path, digest)
        except (OSError, ValueError) as exc:
            log.warning("ignoring corrupt reference cache entry %s: %s", path, exc)
            return None

    def store(self, digest: str, u: np.ndarray, meta: Optional[Mapping[str, Any]] = None) -> Optional[Path]:
        if not self.enabled:
            return None
        self.directory.mkdir(parents=True, exist_ok=True)
        u = np.asarray(u, dtype=float).ravel()
        lines = [MAGIC, f"# digest: {digest}",
                 f"# created: {datetime.now(timezone.utc).isoformat(timespec='seconds')}"]
        for key, value in (meta or {}).items():
            lines.append(f"# {key}: {value}")
        lines.append(f"# n: {u.size}")
        lines.extend(f"{v:.17g}" for v in u)
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-", suffix=".ref")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write("\n".join(lines) + "\n")
            os.replace(tmp, self.path(digest))
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return self.path(digest)


def _read(path: Path, digest: str) -> np.ndarray:
    header = {}
    values = []
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != MAGIC:
            raise ValueError("bad magic line")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                header[key.strip()] = value.strip()
            else:
                values.append(float(line))
    if header.get("digest") != digest:
        raise ValueError("digest mismatch")
    n = int(header.get("n", -1))
    if n != len(values):
        raise ValueError(f"expected {n} values, found {len(values)}")
    return np.array(values)
