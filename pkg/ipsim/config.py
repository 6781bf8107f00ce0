# ipsim/config.py

import os
from dotenv import load_dotenv

load_dotenv()

def _bool(val) -> bool:
    if isinstance(val, bool):
        return val
    return str(val).strip().lower() in {"1", "true", "yes", "y", "on"}

class Config:
    # Workers
    THREADS = int(os.getenv("IPSIM_THREADS", "1"))
    SHOW_PROGRESS = _bool(os.getenv("IPSIM_PROGRESS", "false"))

    # Caps
    STATE_SPACE_CAP = int(os.getenv("IPSIM_STATE_SPACE_CAP", str(2 ** 20)))
    PATTERN_CAP = int(os.getenv("IPSIM_PATTERN_CAP", str(10 ** 6)))
    MAX_VERTICES = int(os.getenv("IPSIM_MAX_VERTICES", "500000"))

    # Numerics
    UNIFORMIZATION_TOL = float(os.getenv("IPSIM_UNIFORMIZATION_TOL", "1e-10"))
    LILLIEFORS_SAMPLES = int(os.getenv("IPSIM_LILLIEFORS_SAMPLES", "5000"))

    # Output
    OUTPUT_DIR = os.getenv("IPSIM_OUTPUT_DIR", "./runs")
    LOG_LEVEL = os.getenv("IPSIM_LOG_LEVEL", "INFO")

config = Config()
