"""S-paths: integer sequences recording the cell maxima and cell sizes of a
set partition of {1, ..., m}.

A path ``S = (S_0, ..., S_m)`` satisfies ``S_0 = 0``, ``S_m = m`` and
``S_j <= min(j, S_{j+1})``.  ``S_j - S_{j-1} > 0`` marks a cell whose
largest element is ``j`` and whose size is that difference.
"""
from __future__ import annotations

import itertools
from math import comb, lgamma
from typing import Iterator, Sequence

import numpy as np

#: Largest ``m`` accepted by the exhaustive enumerators.  Tests may raise it.
ENUMERATION_CAP = 12


class PathError(ValueError):
    """Raised for sequences violating the S-path constraints."""


class EnumerationCapError(ValueError):
    """Raised when an enumeration would exceed :data:`ENUMERATION_CAP`."""


def validate(path: Sequence[int]) -> tuple[int, ...]:
    s = tuple(int(v) for v in path)
    if len(s) == 0:
        raise PathError("empty path")
    m = len(s) - 1
    if s[0] != 0 or s[-1] != m:
        raise PathError(f"path must start at 0 and end at {m}: {s}")
    for j in range(1, m):
        if s[j] > j or s[j] > s[j + 1] or s[j] < s[j - 1]:
            raise PathError(f"coordinate {j} violates S_j <= min(j, S_(j+1)): {s}")
    return s


def jumps(path: Sequence[int]) -> list[tuple[int, int]]:
    """Locations ``j`` with ``S_j > S_{j-1}`` and the jump sizes there."""
    s = validate(path)
    return [(j, s[j] - s[j - 1]) for j in range(1, len(s)) if s[j] > s[j - 1]]


def _log_binom(n: int, k: int) -> float:
    return lgamma(n + 1) - lgamma(k + 1) - lgamma(n - k + 1)


def log_card(path: Sequence[int]) -> float:
    """Log of the number of partitions corresponding to ``path``."""
    s = validate(path)
    total = 0.0
    for j, _ in jumps(s):
        total += _log_binom(j - 1 - s[j - 1], j - s[j])
    return total


def card(path: Sequence[int]) -> int:
    """Exact integer count of partitions corresponding to ``path``."""
    s = validate(path)
    out = 1
    for j, _ in jumps(s):
        out *= comb(j - 1 - s[j - 1], j - s[j])
    return out


def identity_path(m: int) -> tuple[int, ...]:
    return tuple(range(m + 1))


def _check_cap(m: int, cap: int | None) -> None:
    cap = ENUMERATION_CAP if cap is None else cap
    if m > cap:
        raise EnumerationCapError(f"m={m} exceeds enumeration cap {cap}")


def enumerate_paths(m: int, cap: int | None = None) -> Iterator[tuple[int, ...]]:
    """Yield every S-path of ``m + 1`` coordinates exactly once.

    ``m = 0`` yields the single path ``(0,)`` used for an empty side.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    _check_cap(m, cap)
    if m == 0:
        yield (0,)
        return

    # Build right to left: S_j ranges over 0..min(j, S_{j+1}).
    def rec(j: int, upper: int, tail: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        if j == 0:
            yield (0,) + tail
            return
        for v in range(0, min(j, upper) + 1):
            yield from rec(j - 1, v, (v,) + tail)

    yield from rec(m - 1, m, (m,))


def path_of_partition(cells: Sequence[Sequence[int]], m: int) -> tuple[int, ...]:
    """Map a partition of {1..m} to its S-path via cell maxima and sizes."""
    inc = [0] * (m + 1)
    for cell in cells:
        inc[max(cell)] += len(cell)
    return tuple(itertools.accumulate(inc))


def set_partitions(m: int, cap: int | None = None) -> Iterator[list[list[int]]]:
    """All set partitions of {1, ..., m} (restricted growth strings)."""
    _check_cap(m, cap)
    if m == 0:
        yield []
        return

    def rec(i: int, blocks: list[list[int]]) -> Iterator[list[list[int]]]:
        if i > m:
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(1, [])


def partitions_for_path(path: Sequence[int], cap: int | None = None) -> list[frozenset[frozenset[int]]]:
    """All partitions in ``C_S``.

    Built constructively: scanning ``j = 1..m``, a jump of size ``l`` at ``j``
    closes a cell containing ``j`` plus ``l - 1`` of the still-open indices
    below ``j``.
    """
    s = validate(path)
    m = len(s) - 1
    _check_cap(m, cap)
    out: list[frozenset[frozenset[int]]] = []

    def rec(j: int, open_: tuple[int, ...], closed: tuple[frozenset[int], ...]) -> None:
        if j > m:
            if not open_:
                out.append(frozenset(closed))
            return
        size = s[j] - s[j - 1]
        if size == 0:
            rec(j + 1, open_ + (j,), closed)
            return
        for chosen in itertools.combinations(open_, size - 1):
            rest = tuple(i for i in open_ if i not in chosen)
            rec(j + 1, rest, closed + (frozenset(chosen + (j,)),))

    rec(1, (), ())
    return out


def as_array(path: Sequence[int]) -> np.ndarray:
    return np.asarray(path, dtype=np.int64)
