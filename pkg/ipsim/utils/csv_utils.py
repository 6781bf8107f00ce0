# ipsim/utils/csv_utils.py

import hashlib
import os
import tempfile
from typing import Iterable, Optional

import pandas as pd

from ipsim.exceptions import ArtifactError


def _atomic_write(path: str, write) -> str:
    """Write through a temp file in the target directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=os.path.basename(path), dir=directory)
    except OSError as exc:
        raise ArtifactError(path, exc.strerror or str(exc)) from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException as exc:
        if os.path.exists(tmp):
            os.remove(tmp)
        if isinstance(exc, OSError):
            raise ArtifactError(path, exc.strerror or str(exc)) from exc
        raise
    return path


def write_csv(df: pd.DataFrame, path: str, header_lines: Optional[Iterable[str]] = None) -> str:
    """CSV with '.' decimals, '\\n' line endings, header row first (after any '# ' comment lines)."""

    def _write(fh):
        for line in header_lines or ():
            fh.write(f"# {line}\n")
        df.to_csv(fh, index=False, lineterminator="\n", float_format="%.10g")

    return _atomic_write(path, _write)


def write_text(text: str, path: str) -> str:
    return _atomic_write(path, lambda fh: fh.write(text))


def read_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()
