"""Seed derivation and keyed random streams.

Every random quantity in the package is derived from a single user seed by
labeled hashing, so that independent subsystems (field synthesis, the two
detectors, control runs) get decorrelated streams and a run is reproducible
from its config alone.  Streams handed to numpy use the counter-based Philox
generator; the numba kernels use a splitmix64 hash keyed by
(seed, frame, unit) so that per-sample draws do not depend on chunking or
thread count.
"""

from __future__ import annotations

import hashlib

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

MASK64 = 0xFFFFFFFFFFFFFFFF


def derive_seed(seed: int, label: str, *indices: int) -> int:
    """Derive a 64-bit subsystem seed from ``seed`` and a text label."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode())
    h.update(b"/")
    h.update(label.encode())
    for i in indices:
        h.update(b"/")
        h.update(str(int(i)).encode())
    return int.from_bytes(h.digest()[:8], "little")


def generator(seed: int, label: str, *indices: int) -> Generator:
    """Philox generator on the stream derived from (seed, label, indices)."""
    return Generator(Philox(SeedSequence(derive_seed(seed, label, *indices))))


def splitmix64(z: int) -> int:
    """Pure-python splitmix64 finalizer (reference for the numba twin)."""
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def keyed_u01(seed: int, frame: int, unit: int) -> float:
    """Uniform in [0, 1) keyed by (seed, frame, unit); matches the kernels."""
    h = splitmix64(splitmix64(splitmix64(seed & MASK64) ^ (frame & MASK64)) ^ (unit & MASK64))
    return (h >> 11) * (1.0 / 9007199254740992.0)


def poisson_from_u01(lam: float, u: float, max_count: int = 200) -> int:
    """Poisson sample by CDF inversion of a single uniform (reference impl)."""
    if lam <= 0.0:
        return 0
    p = np.exp(-lam)
    s = p
    k = 0
    while u >= s and k < max_count:
        k += 1
        p *= lam / k
        s += p
    return k
