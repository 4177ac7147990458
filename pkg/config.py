import os
import sys
import logging
from dotenv import load_dotenv

load_dotenv()

# Alignment (misalignment correction of scanned boards)
ALIGN_N = int(os.getenv("KNOTDET_ALIGN_N", 100))
ALIGN_P = float(os.getenv("KNOTDET_ALIGN_P", 1.0))
ALIGN_K = int(os.getenv("KNOTDET_ALIGN_K", 2))
ALIGN_MAX_SHIFT = int(os.getenv("KNOTDET_ALIGN_MAX_SHIFT", 200))
ALIGN_PAD = int(os.getenv("KNOTDET_ALIGN_PAD", 0))
THRESHOLD = int(os.getenv("KNOTDET_THRESHOLD", 40))

# Dataset construction
CROP_SIZE = int(os.getenv("KNOTDET_CROP_SIZE", 512))
MIN_CROP_SIDE = int(os.getenv("KNOTDET_MIN_CROP_SIDE", 256))

# Ellipse fitting
FIT_STEP = float(os.getenv("KNOTDET_FIT_STEP", 1.0))
FIT_MAX_ITERS = int(os.getenv("KNOTDET_FIT_MAX_ITERS", 5000))
FIT_GRAD_TOL = float(os.getenv("KNOTDET_FIT_GRAD_TOL", 1e-6))

WORKERS = int(os.getenv("KNOTDET_WORKERS", 1))
LOG_LEVEL = os.getenv("KNOTDET_LOG_LEVEL", "INFO")

# CORS configuration for the HTTP service
CORS_ORIGINS = [
    origin.strip()
    for origin in os.getenv(
        "KNOTDET_CORS_ORIGINS", "http://localhost:5173,http://127.0.0.1:5173"
    ).split(",")
    if origin.strip()
]

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class _StderrHandler(logging.StreamHandler):
    """Stream handler bound to whatever sys.stderr is when a record is emitted."""

    _knotdet = True

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


def configure_logging(level: str | int | None = None) -> None:
    """
    Install a single line-oriented stream handler on the root logger.
    Calling it again only adjusts the level.
    """
    root = logging.getLogger()
    resolved = level if level is not None else LOG_LEVEL
    if isinstance(resolved, str):
        resolved = logging.getLevelName(resolved.upper())
        if not isinstance(resolved, int):
            resolved = logging.INFO
    if not any(getattr(h, "_knotdet", False) for h in root.handlers):
        handler = _StderrHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
    root.setLevel(resolved)
