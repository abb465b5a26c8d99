"""Interval systems on the sampling grid.

An interval ``GridInterval(i, j)`` stands for ``[i/n, j/n)`` and covers the
cells ``i .. j-1``. Systems enumerate members ordered by start, then end.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "GridInterval",
    "IntervalSystem",
    "KINDS",
    "enumerate_system",
    "contained_in",
    "is_normal",
    "dyadic_partition_members",
]

KINDS = ("full", "dyadic-partition", "dyadic-length")


@dataclass(frozen=True, order=True)
class GridInterval:
    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid grid interval [{self.start}, {self.end})")

    @property
    def cells(self) -> int:
        return self.end - self.start

    def length(self, n: int) -> float:
        return (self.end - self.start) / n

    def __contains__(self, other: "GridInterval") -> bool:
        return self.start <= other.start and other.end <= self.end


def _log2_floor(n: int) -> int:
    return n.bit_length() - 1


def dyadic_partition_members(n: int) -> np.ndarray:
    """Members ``[i*ceil(n/2^j), (i+1)*ceil(n/2^j))`` clipped to n, plus all cells."""
    pairs = set()
    for j in range(_log2_floor(n) + 1):
        w = -(-n // (2 ** j))
        for i in range(2 ** j):
            s, e = i * w, min((i + 1) * w, n)
            if s < e:
                pairs.add((s, e))
    pairs.update((i, i + 1) for i in range(n))
    return np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)


def _dyadic_length_members(n: int) -> np.ndarray:
    lengths = 2 ** np.arange(_log2_floor(n) + 1)
    starts = np.concatenate([np.arange(n - w + 1) for w in lengths])
    ends = np.concatenate([np.arange(n - w + 1) + w for w in lengths])
    order = np.lexsort((ends, starts))
    return np.stack([starts[order], ends[order]], axis=1).astype(np.int64)


class IntervalSystem:
    """A family of grid intervals on ``n`` cells.

    ``kind`` is one of ``full``, ``dyadic-partition``, ``dyadic-length`` or
    ``custom`` (explicit members via :meth:`from_members`). Member arrays are
    built lazily; the full system is iterated without materializing it.
    """

    def __init__(self, kind: str, n: int):
        if kind not in KINDS and kind != "custom":
            raise ValueError(f"unknown interval system {kind!r}")
        if n < 1:
            raise ValueError("n must be >= 1")
        self.kind = kind
        self.n = int(n)
        self._members: np.ndarray | None = None

    @classmethod
    def from_members(cls, n: int, members: Sequence) -> "IntervalSystem":
        arr = np.array([(int(s), int(e)) for s, e in members], dtype=np.int64).reshape(-1, 2)
        if arr.size and ((arr[:, 0] < 0) | (arr[:, 1] > n) | (arr[:, 0] >= arr[:, 1])).any():
            raise ValueError("members must satisfy 0 <= start < end <= n")
        arr = np.unique(arr, axis=0)
        sys = cls("custom", n)
        sys._members = arr
        return sys

    def __repr__(self):
        return f"IntervalSystem({self.kind!r}, n={self.n})"

    def __eq__(self, other):
        if not isinstance(other, IntervalSystem):
            return NotImplemented
        if self.kind != other.kind or self.n != other.n:
            return False
        return self.kind != "custom" or np.array_equal(self.members(), other.members())

    def __hash__(self):
        return hash((self.kind, self.n))

    def members(self) -> np.ndarray:
        """``(m, 2)`` int array of (start, end), sorted by start then end."""
        if self._members is None:
            if self.kind == "full":
                s, e = np.triu_indices(self.n + 1, k=1)
                self._members = np.stack([s, e], axis=1).astype(np.int64)
            elif self.kind == "dyadic-length":
                self._members = _dyadic_length_members(self.n)
            else:
                self._members = dyadic_partition_members(self.n)
        return self._members

    def __len__(self) -> int:
        if self.kind == "full":
            return self.n * (self.n + 1) // 2
        return len(self.members())

    def __iter__(self) -> Iterator[GridInterval]:
        if self.kind == "full" and self._members is None:
            for i in range(self.n):
                for j in range(i + 1, self.n + 1):
                    yield GridInterval(i, j)
            return
        for s, e in self.members():
            yield GridInterval(int(s), int(e))

    @property
    def member_lengths(self) -> np.ndarray:
        """Distinct member lengths in cells (ascending)."""
        if self.kind == "full":
            return np.arange(1, self.n + 1)
        if self.kind == "dyadic-length":
            return 2 ** np.arange(_log2_floor(self.n) + 1)
        m = self.members()
        return np.unique(m[:, 1] - m[:, 0])

    def contained_members(self, i: int, j: int) -> np.ndarray:
        """Members inside cells ``i .. j-1`` as an ``(m, 2)`` array."""
        if self.kind == "full":
            s, e = np.triu_indices(j - i + 1, k=1)
            return np.stack([s + i, e + i], axis=1).astype(np.int64)
        if self.kind == "dyadic-length":
            parts = []
            for w in self.member_lengths:
                if w > j - i:
                    break
                st = np.arange(i, j - w + 1)
                parts.append(np.stack([st, st + w], axis=1))
            arr = np.concatenate(parts).astype(np.int64)
            return arr[np.lexsort((arr[:, 1], arr[:, 0]))]
        m = self.members()
        lo = np.searchsorted(m[:, 0], i, side="left")
        hi = np.searchsorted(m[:, 0], j, side="left")
        sub = m[lo:hi]
        return sub[sub[:, 1] <= j]


def enumerate_system(system: IntervalSystem) -> list[GridInterval]:
    return list(system)


def contained_in(system: IntervalSystem, segment: GridInterval) -> list[GridInterval]:
    """System members ``I`` with ``I`` inside ``segment``, in enumeration order."""
    if segment.end > system.n:
        raise ValueError("segment exceeds the grid")
    return [GridInterval(int(s), int(e))
            for s, e in system.contained_members(segment.start, segment.end)]


def _longest_contained(system: IntervalSystem) -> np.ndarray:
    """``M[a, b]`` = longest member inside cells ``a .. b-1`` (0 if none)."""
    n = system.n
    M = np.zeros((n + 1, n + 1), dtype=np.int64)
    m = system.members() if system.kind != "full" else None
    if m is None:
        a, b = np.triu_indices(n + 1, k=1)
        M[a, b] = b - a
        return M
    np.maximum.at(M, (m[:, 0], m[:, 1]), m[:, 1] - m[:, 0])
    # dominance max: start >= a and end <= b
    M = np.maximum.accumulate(M[::-1], axis=0)[::-1]
    return np.maximum.accumulate(M, axis=1)


def is_normal(system: IntervalSystem, c: float, probe_resolution: int = 4) -> bool:
    """Check the normality conditions on a refined probe grid.

    Every probe interval with endpoints on ``{k / (probe_resolution * n)}`` and
    length above ``c / n`` must contain a member at least ``1/c`` of its
    length; all members must lie on the grid and every single cell must be a
    member. This is a finite check, not a proof.
    """
    if c <= 1:
        raise ValueError("c must exceed 1")
    if probe_resolution < 2:
        raise ValueError("probe_resolution must be >= 2")
    n, p = system.n, int(probe_resolution)
    members = system.members()
    if ((members < 0) | (members > n)).any():
        return False
    singles = members[members[:, 1] - members[:, 0] == 1, 0]
    if np.unique(singles).size != n:
        return False
    M = _longest_contained(system)
    fine = np.arange(p * n + 1)
    a, b = np.meshgrid(fine, fine, indexing="ij")
    # lengths are compared in units of 1/(p n) to stay in integers
    probe = (b - a) > c * p
    a, b = a[probe], b[probe]
    cell_a = -(-a // p)
    cell_b = b // p
    longest = np.where(cell_b > cell_a, M[cell_a, np.maximum(cell_b, cell_a)], 0)
    return bool(np.all(longest * p * c >= (b - a)))
