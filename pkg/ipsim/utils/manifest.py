# ipsim/utils/manifest.py

import json
import os
from datetime import datetime, timezone
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from ipsim import __version__
from ipsim.utils.csv_utils import sha256_file, write_text


class RunManifest(BaseModel):
    """Written last, after every artifact it lists."""

    subcommand: str
    config_hash: str
    version: str = __version__
    seed: int
    timestamp: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    rng_algorithm: str
    grid: List[float] = Field(default_factory=list)
    checksums: Dict[str, str] = Field(default_factory=dict)
    exit_status: int = 0
    notes: Optional[str] = None

    def record(self, path: str) -> None:
        self.checksums[os.path.basename(path)] = sha256_file(path)

    def write(self, directory: str) -> str:
        path = os.path.join(directory, "manifest.json")
        return write_text(json.dumps(self.model_dump(), indent=2, sort_keys=True) + "\n", path)
