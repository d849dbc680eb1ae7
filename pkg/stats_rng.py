"""Seeded random streams and the sample statistics shared by the engines.

Every random draw in the simulator comes from a stream derived from the
master seed plus a tuple of labels (purpose, cell, ue/route, ...). The
labels are hashed into a ``SeedSequence`` spawn key and fed to the
counter-based Philox generator, so a stream depends only on its labels and
never on the order in which other streams were used.
"""

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from errors import ConfigurationError, EmptySampleError

DEFAULT_SEED = 1


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    purpose: str
    labels: tuple = field(default_factory=tuple)


def purpose_code(purpose):
    """Stable integer for a purpose label (str hash() is salted per process)"""
    return zlib.crc32(purpose.encode("utf-8"))


def derive_stream(spec):
    """Build the generator for one labelled stream"""
    if spec.master_seed < 0 or spec.master_seed >= 2**64:
        raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {spec.master_seed}")
    key = [purpose_code(spec.purpose)]
    for label in spec.labels:
        label = int(label)
        if label < 0:
            raise ConfigurationError(f"stream labels must be non-negative, got {label}")
        key.append(label)
    seq = np.random.SeedSequence(entropy=spec.master_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(seq))


def stream(master_seed, purpose, *labels):
    """Shorthand for derive_stream(SeedSpec(...))"""
    return derive_stream(SeedSpec(master_seed, purpose, tuple(labels)))


def height_label(height_m):
    """Integer stream label for a height, decimetre resolution"""
    return int(round(height_m * 10))


def _sorted_samples(samples):
    values = np.asarray(samples, dtype=float).ravel()
    if values.size == 0:
        raise EmptySampleError("no samples")
    # np.sort puts +inf last, which is where undelivered packets belong
    return np.sort(values, kind="stable")


def nearest_rank(p, n):
    """1-based nearest-rank index for percentile p of n samples"""
    if not 0 <= p <= 100:
        raise ConfigurationError(f"percentile must be in [0, 100], got {p}")
    return max(1, math.ceil(round(p * n / 100.0, 9)))


def percentile(samples, p):
    """Nearest-rank percentile, no interpolation"""
    values = _sorted_samples(samples)
    return float(values[nearest_rank(p, values.size) - 1])


def percentiles(samples, ps):
    """Several nearest-rank percentiles from one sort"""
    values = _sorted_samples(samples)
    return {p: float(values[nearest_rank(p, values.size) - 1]) for p in ps}


def ecdf_export(samples):
    """Empirical CDF as (value, cumulative fraction) pairs, one per distinct value"""
    values = _sorted_samples(samples)
    distinct, counts = np.unique(values, return_counts=True)
    fractions = np.cumsum(counts) / values.size
    fractions[-1] = 1.0
    return [(float(v), float(f)) for v, f in zip(distinct, fractions)]
