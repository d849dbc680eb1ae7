"""Worker pool used by the engines for independent jobs (routes, heights)."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor

from errors import ConfigurationError

logger = logging.getLogger(__name__)

THREADS_ENV = "AERONET_THREADS"


def worker_count():
    """Number of workers, capped by AERONET_THREADS when it is set"""
    default = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return default
    try:
        count = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if count < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be >= 1, got {count}")
    return min(count, default)


def parallel_map(func, items):
    """Map func over items on a thread pool; results come back in input order"""
    items = list(items)
    workers = min(worker_count(), max(1, len(items)))
    if workers == 1:
        return [func(item) for item in items]
    logger.debug("running %d jobs on %d threads", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
