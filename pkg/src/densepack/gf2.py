"""Small GF(2) linear-algebra helpers over rows packed into Python ints."""

from __future__ import annotations

from typing import Iterable, Sequence


def pack_rows(rows: Iterable[Iterable[int]]) -> list[int]:
    """Pack each row given as an iterable of set column indices into an int bitmask."""
    out = []
    for row in rows:
        mask = 0
        for j in row:
            mask ^= 1 << j
        out.append(mask)
    return out


def rank(rows: Sequence[int]) -> int:
    pivots: dict[int, int] = {}
    for row in rows:
        while row:
            top = row.bit_length() - 1
            if top in pivots:
                row ^= pivots[top]
            else:
                pivots[top] = row
                break
    return len(pivots)


class Eliminator:
    """Incremental row reduction that remembers which input rows combine into each pivot.

    ``add`` returns the combination mask of earlier rows equal to the new row when it is
    dependent, or ``None`` when the row extends the span.
    """

    def __init__(self) -> None:
        self._pivots: dict[int, tuple[int, int]] = {}
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def reduce(self, row: int) -> tuple[int, int]:
        """Reduce ``row`` against the pivots; return (residual, combination of rows used)."""
        combo = 0
        while row:
            top = row.bit_length() - 1
            hit = self._pivots.get(top)
            if hit is None:
                break
            row ^= hit[0]
            combo ^= hit[1]
        return row, combo

    def add(self, row: int) -> int | None:
        index = self._count
        self._count += 1
        residual, combo = self.reduce(row)
        if residual:
            self._pivots[residual.bit_length() - 1] = (residual, combo ^ (1 << index))
            return None
        return combo

    def solve(self, target: int) -> int | None:
        """Combination mask of added rows whose XOR equals ``target``, or None if outside the span."""
        residual, combo = self.reduce(target)
        return None if residual else combo
