"""Search and enumeration caps shared by every module."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass


class CapExceeded(RuntimeError):
    """A configured cap would be exceeded; no partial result is returned."""


@dataclass(frozen=True)
class Caps:
    """One record for all caps.

    Defaults are sized so that every check at the bounds used in the test
    suite finishes in seconds on a laptop.
    """

    carrier: int = 4096  # largest carrier built by product / power
    canonical: int = 9  # largest structure canonicalised by permutation search
    enumeration: int = 2 ** 24  # |b| ** |a| guard for enumerate_homomorphisms
    member_size: int = 6  # largest size handled by enumerate_members
    one_point_options: int = 2 ** 16  # tuple subsets tried per new element
    polymorphisms: int = 100_000
    arity: int = 3
    depth: int = 6
    superpositions: int = 20_000_000  # argument tuples per complex product
    stages: int = 500
    tasks: int = 200_000

    def replace(self, **changes: int) -> "Caps":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_pairs(cls, pairs: list[str] | None) -> "Caps":
        """Build from ``key=val`` strings as given on the command line."""
        known = {f.name for f in dataclasses.fields(cls)}
        values: dict[str, int] = {}
        for item in pairs or []:
            key, sep, val = item.partition("=")
            if not sep or key not in known:
                raise ValueError(f"unknown cap {item!r}")
            values[key] = int(val)
            if values[key] <= 0:
                raise ValueError(f"cap {key} must be positive")
        return cls(**values)


DEFAULT_CAPS = Caps()


def worker_count() -> int:
    """Worker count from ``FORGE_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("FORGE_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Order-preserving map; fans out over threads when FORGE_THREADS > 1."""
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
