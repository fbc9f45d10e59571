"""Geometry of standalone and densely packed rotated surface codes.

Coordinates use a doubled lattice with the origin at the top-left corner of the
bounding box: data qubits sit on odd-odd sites ``(2r+1, 2c+1)`` for data cell
``(r, c)``, measure qubits on even-even sites between them. Rows grow downward.

Every layout is described as a union of rectangular patch footprints
(:class:`Rect`). A footprint carries its own boundary orientation: ``"lr"``
puts the weight-2 X checks on its left/right sides (a standard patch whose
logical X runs horizontally) and ``"tb"`` puts them on top/bottom (a rotated
patch). A measure site belongs to the layout when it lies strictly inside a
footprint, or on a footprint side whose boundary type matches the site's
checkerboard colour. Its support is every data qubit of the union diagonally
adjacent to it, which yields weight-3 checks at concave corners of fused rows.

The boundary basis of a side is named after the Pauli type of the weight-2
checks that live on it.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import gf2
from .regions import default_region_map, codeword_anchors

LAYOUT_SCHEMA_VERSION = 1
DEFAULT_SEARCH_CAP = 1 << 22

BASES = ("X", "Z")
# diagonal offsets from a measure site, keyed by corner name
CORNERS = {"NW": (-1, -1), "NE": (-1, 1), "SW": (1, -1), "SE": (1, 1)}


class Coord(NamedTuple):
    row: int
    col: int


def data_coord(r: int, c: int) -> Coord:
    """Doubled-lattice coordinate of data cell (r, c)."""
    return Coord(2 * r + 1, 2 * c + 1)


def _check_distance(d: int) -> None:
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool):
        raise TypeError(f"distance must be an integer, got {type(d).__name__}")
    if d < 3 or d % 2 == 0:
        raise ValueError(f"distance must be odd and >= 3, got {d}")


def _check_positive(name: str, value: int) -> None:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer")
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")


@dataclass(frozen=True)
class PatchSpec:
    d: int

    def __post_init__(self):
        _check_distance(self.d)


@dataclass(frozen=True)
class GridSpec:
    d: int
    n_h: int = 1
    n_w: int = 1

    def __post_init__(self):
        _check_distance(self.d)
        _check_positive("n_h", self.n_h)
        _check_positive("n_w", self.n_w)


@dataclass(frozen=True)
class DenseRowSpec:
    d: int
    n: int

    def __post_init__(self):
        _check_distance(self.d)
        _check_positive("n", self.n)


@dataclass(frozen=True)
class Rect:
    """Patch footprint in data cells, with its boundary orientation and colouring.

    ``z_parity`` fixes the checkerboard: a measure site (R, C) is Z-type when
    ``(R + C) % 4 == z_parity``.
    """

    top: int
    left: int
    height: int
    width: int
    x_sides: str = "lr"
    z_parity: int = 2

    def __post_init__(self):
        if self.x_sides not in ("lr", "tb"):
            raise ValueError(f"x_sides must be 'lr' or 'tb', got {self.x_sides!r}")
        if self.height < 1 or self.width < 1:
            raise ValueError("empty footprint")

    @property
    def rotated(self) -> bool:
        return self.x_sides == "tb"

    @property
    def bottom(self) -> int:
        return self.top + self.height - 1

    @property
    def right(self) -> int:
        return self.left + self.width - 1

    def data(self) -> Iterable[Coord]:
        for r in range(self.top, self.top + self.height):
            for c in range(self.left, self.left + self.width):
                yield data_coord(r, c)

    def site_type(self, site: Coord) -> str:
        return "Z" if (site.row + site.col) % 4 == self.z_parity else "X"

    def side_type(self, side: str) -> str:
        horizontal = side in ("top", "bottom")
        return "Z" if horizontal == (self.x_sides == "lr") else "X"

    def claims(self, site: Coord) -> str | None:
        """Type this footprint assigns to a measure site, or None if it does not claim it."""
        r0, c0 = 2 * self.top, 2 * self.left
        r1, c1 = r0 + 2 * self.height, c0 + 2 * self.width
        R, C = site
        if not (r0 <= R <= r1 and c0 <= C <= c1):
            return None
        on_r = R in (r0, r1)
        on_c = C in (c0, c1)
        kind = self.site_type(site)
        if not on_r and not on_c:
            return kind
        if on_r and on_c:
            return None
        if on_r:
            side = "top" if R == r0 else "bottom"
        else:
            side = "left" if C == c0 else "right"
        return kind if self.side_type(side) == kind else None

    def sites(self) -> Iterable[Coord]:
        for R in range(2 * self.top, 2 * (self.top + self.height) + 1, 2):
            for C in range(2 * self.left, 2 * (self.left + self.width) + 1, 2):
                yield Coord(R, C)

    def translated(self, drow: int, dcol: int) -> "Rect":
        z = (self.z_parity + 2 * drow + 2 * dcol) % 4
        return Rect(self.top + drow, self.left + dcol, self.height, self.width, self.x_sides, z)

    def to_dict(self) -> dict:
        return {
            "top": self.top, "left": self.left, "height": self.height,
            "width": self.width, "x_sides": self.x_sides, "z_parity": self.z_parity,
        }


def standard_rect(top: int, left: int, height: int, width: int, x_sides: str = "lr") -> Rect:
    """Footprint whose top-left measure corner is X-coloured for "lr" and Z-coloured for "tb".

    This is the colouring under which the weight-2 checks sit on the sides named by
    ``x_sides`` and the corners carry no check.
    """
    z = (2 * top + 2 * left + (2 if x_sides == "lr" else 0)) % 4
    return Rect(top, left, height, width, x_sides, z)


@dataclass(frozen=True)
class Plaquette:
    basis: str
    support: tuple[Coord, ...]
    measure: Coord
    region: str = "bulk"

    @property
    def weight(self) -> int:
        return len(self.support)

    def corner_of(self, q: Coord) -> str:
        offset = (q.row - self.measure.row, q.col - self.measure.col)
        for name, off in CORNERS.items():
            if off == offset:
                return name
        raise ValueError(f"{q} is not adjacent to {self.measure}")

    def at(self, corner: str) -> Coord | None:
        dr, dc = CORNERS[corner]
        q = Coord(self.measure.row + dr, self.measure.col + dc)
        return q if q in self.support else None


@dataclass(frozen=True)
class CodewordView:
    index: int
    logical_x: frozenset
    logical_z: frozenset
    footprint: Rect | None = None


@dataclass(frozen=True)
class AreaReport:
    total_cells: int
    per_logical: Fraction
    ratio_to_standalone: Fraction
    codewords: int

    def __post_init__(self):
        if self.per_logical * self.codewords != self.total_cells:
            raise ValueError("per_logical x codewords must equal total_cells")


@dataclass(frozen=True)
class Layout:
    """A fused or standalone arrangement of patch footprints with named codewords.

    Only the footprints, codewords, and bounding box are stored; qubit sets and
    plaquettes are derived lazily so area bookkeeping stays cheap.
    """

    kind: str
    d: int
    footprints: tuple[Rect, ...]
    bounding_box: tuple[int, int]
    origin: tuple[int, int] = (0, 0)
    reserved_rows: int = 0
    meta: tuple[tuple[str, int], ...] = ()
    logical_rule: str = "explicit"
    explicit_codewords: tuple[CodewordView, ...] = ()

    @cached_property
    def codewords(self) -> tuple[CodewordView, ...]:
        rule = self.logical_rule
        if rule == "explicit":
            return self.explicit_codewords
        if rule == "basis":
            return tuple(CodewordView(i, x, z) for i, (x, z) in enumerate(logical_basis(self)))
        if rule == "standalone":
            pairs = [_standalone_logicals(r) for r in self.footprints]
        elif rule == "dense_row":
            pairs = dense_row_logicals(self.footprints)
        elif rule == "grid_lines":
            n_w = self.meta_value("n_w", 1)
            pairs = line_logicals(self, [(i % n_w) % 2 == 1 for i in range(len(self.footprints))])
        else:
            raise ValueError(f"unknown logical rule {rule!r}")
        return tuple(
            CodewordView(i, frozenset(x), frozenset(z), rect)
            for i, ((x, z), rect) in enumerate(zip(pairs, self.footprints))
        )

    @cached_property
    def data_qubits(self) -> frozenset:
        out = set()
        for rect in self.footprints:
            out.update(rect.data())
        return frozenset(out)

    @cached_property
    def _measure_types(self) -> dict:
        types: dict[Coord, str] = {}
        for rect in self.footprints:
            for site in rect.sites():
                kind = rect.claims(site)
                if kind is None:
                    continue
                prev = types.get(site)
                if prev is not None and prev != kind:
                    raise ValueError(f"footprints disagree on the type of measure site {site}")
                types[site] = kind
        # a site enclosed by four data qubits is never left without a check
        data = self.data_qubits
        for rect in self.footprints:
            for site in rect.sites():
                if site not in types and all(
                    Coord(site.row + dr, site.col + dc) in data for dr, dc in CORNERS.values()
                ):
                    types[site] = rect.site_type(site)
        return types

    @cached_property
    def plaquettes(self) -> tuple[Plaquette, ...]:
        data = self.data_qubits
        zone_of = self._zone_function()
        out = []
        for site in sorted(self._measure_types):
            kind = self._measure_types[site]
            support = tuple(
                q for q in (Coord(site.row + dr, site.col + dc) for dr, dc in CORNERS.values()) if q in data
            )
            if len(support) < 2:
                continue
            out.append(Plaquette(kind, tuple(sorted(support)), site, self._region(site, support, zone_of)))
        return tuple(out)

    @cached_property
    def measure_qubits(self) -> frozenset:
        return frozenset(p.measure for p in self.plaquettes)

    @cached_property
    def boundaries(self) -> tuple[tuple[str, tuple[Coord, ...]], ...]:
        """Maximal runs of data qubits on each footprint side that face outside the union."""
        data = self.data_qubits
        out = []
        steps = {"top": (-2, 0), "bottom": (2, 0), "left": (0, -2), "right": (0, 2)}
        for rect in self.footprints:
            for side, (dr, dc) in steps.items():
                if side in ("top", "bottom"):
                    r = rect.top if side == "top" else rect.bottom
                    line = [data_coord(r, c) for c in range(rect.left, rect.right + 1)]
                else:
                    c = rect.left if side == "left" else rect.right
                    line = [data_coord(r, c) for r in range(rect.top, rect.bottom + 1)]
                run: list[Coord] = []
                for q in line + [None]:
                    if q is not None and Coord(q.row + dr, q.col + dc) not in data:
                        run.append(q)
                        continue
                    if len(run) >= 1:
                        out.append((rect.side_type(side), tuple(run)))
                    run = []
        return tuple(out)

    @cached_property
    def qubit_index(self) -> dict:
        """Stable qubit numbering: data qubits first, then measure qubits, each in row-major order."""
        order = sorted(self.data_qubits) + sorted(self.measure_qubits)
        return {q: i for i, q in enumerate(order)}

    def _zone_function(self):
        if self.kind != "dense_row" or self.meta_value("n", 1) < 2:
            return None
        anchors = codeword_anchors(self.footprints)
        rmap = default_region_map()
        return lambda site: rmap.zone_of(site, anchors, self.d).name

    def _region(self, site: Coord, support, zone_of) -> str:
        if zone_of is not None and zone_of(site) == "fusion_seam":
            return "fusion_seam"
        if len(support) == 4:
            return "bulk"
        mid = self.origin[0] + self.bounding_box[0]  # doubled-lattice middle row
        return "top_boundary" if site.row < mid else "bottom_boundary"

    def meta_value(self, key: str, default=None):
        return dict(self.meta).get(key, default)

    def stabilizers(self, basis: str) -> list[Plaquette]:
        return [p for p in self.plaquettes if p.basis == basis]

    def logical(self, codeword: int, basis: str) -> frozenset:
        cw = self.codewords[codeword]
        return cw.logical_x if basis == "X" else cw.logical_z

    def translated(self, drow: int, dcol: int) -> "Layout":
        """Same layout shifted by whole data cells (bounding box shifts with it)."""
        shift = lambda qs: frozenset(Coord(q.row + 2 * drow, q.col + 2 * dcol) for q in qs)  # noqa: E731
        explicit = tuple(
            CodewordView(cw.index, shift(cw.logical_x), shift(cw.logical_z),
                         None if cw.footprint is None else cw.footprint.translated(drow, dcol))
            for cw in self.explicit_codewords
        )
        return Layout(
            self.kind, self.d, tuple(r.translated(drow, dcol) for r in self.footprints),
            self.bounding_box, (self.origin[0] + drow, self.origin[1] + dcol), self.reserved_rows, self.meta,
            self.logical_rule, explicit,
        )


# ---------------------------------------------------------------- builders

def _assemble(kind, d, footprints, rule="explicit", logicals=(), *, reserved_rows=0, meta=(), cw_rects=None) -> Layout:
    top = min(r.top for r in footprints)
    left = min(r.left for r in footprints)
    bottom = max(r.bottom for r in footprints)
    right = max(r.right for r in footprints)
    bbox = (bottom - top + 1 + reserved_rows, right - left + 1)
    rects = cw_rects or [None] * len(logicals)
    codewords = tuple(
        CodewordView(i, frozenset(lx), frozenset(lz), rects[i]) for i, (lx, lz) in enumerate(logicals)
    )
    return Layout(kind, d, tuple(footprints), bbox, (top, left), reserved_rows, tuple(meta), rule, codewords)


def _row(r: int, c0: int, c1: int) -> list[Coord]:
    return [data_coord(r, c) for c in range(c0, c1 + 1)]


def _col(c: int, r0: int, r1: int) -> list[Coord]:
    return [data_coord(r, c) for r in range(r0, r1 + 1)]


def _standalone_logicals(rect: Rect) -> tuple[list[Coord], list[Coord]]:
    # logical X joins the two X boundaries, logical Z the two Z boundaries
    mid_c = rect.left + rect.width // 2
    mid_r = rect.top + rect.height // 2
    horizontal = _row(rect.top, rect.left, rect.right)
    vertical = _col(mid_c, rect.top, rect.bottom)
    if rect.x_sides == "lr":
        return horizontal, vertical
    return _col(rect.left, rect.top, rect.bottom), _row(mid_r, rect.left, rect.right)


def build_standalone_patch(spec: PatchSpec | int) -> Layout:
    """Single d x d rotated patch with X boundaries on the left and right."""
    if not isinstance(spec, PatchSpec):
        spec = PatchSpec(spec)
    rect = standard_rect(0, 0, spec.d, spec.d)
    return _assemble("standalone", spec.d, [rect], "standalone")


def build_standalone_grid(spec: GridSpec) -> Layout:
    """n_h x n_w separated patches with one idle row/column of cells between neighbours."""
    d = spec.d
    rects = [standard_rect(i * (d + 1), j * (d + 1), d, d) for i in range(spec.n_h) for j in range(spec.n_w)]
    kind = "standalone" if spec.n_h * spec.n_w == 1 else "standalone_grid"
    return _assemble(kind, d, rects, "standalone", meta=(("n_h", spec.n_h), ("n_w", spec.n_w)))


def dense_row_rects(d: int, n: int, top: int = 0, left: int = 0) -> list[Rect]:
    """Footprints of a dense row: even codewords hang from the top edge, odd ones sit lower."""
    if n == 1:
        return [standard_rect(top, left, (3 * d - 1) // 2, d)]
    half = (d + 1) // 2
    rects = []
    for i in range(n):
        if i % 2 == 0:
            rects.append(standard_rect(top, left + i * half, d, d, "lr"))
        else:
            rects.append(standard_rect(top + (d - 1) // 2, left + i * half, d, d, "tb"))
    return rects


def dense_row_logicals(rects: Sequence[Rect]) -> list[tuple[list[Coord], list[Coord]]]:
    if len(rects) == 1:
        return [_standalone_logicals(rects[0])]
    out = []
    for rect in rects:
        mid_c = rect.left + rect.width // 2
        if not rect.rotated:
            # X along the top edge, Z down the middle column
            out.append((_row(rect.top, rect.left, rect.right), _col(mid_c, rect.top, rect.bottom)))
        else:
            # X down the middle column through the notch, Z along the bottom edge
            out.append((_col(mid_c, rect.top, rect.bottom), _row(rect.bottom, rect.left, rect.right)))
    return out


def build_dense_row(spec: DenseRowSpec) -> Layout:
    d, n = spec.d, spec.n
    rects = dense_row_rects(d, n)
    return _assemble("dense_row", d, rects, "dense_row", meta=(("n", n),))


def dense_grid_rects(d: int, n_h: int, n_w: int) -> list[Rect]:
    """Dense rows stacked so that each row shares its last data row with the next one.

    Stacked rows keep the global checkerboard, so for d = 3 mod 4 the footprints
    of alternate rows carry the mirrored colouring.
    """
    pitch = (3 * d - 3) // 2
    rects = []
    for k in range(n_h):
        for rect in dense_row_rects(d, n_w):
            rects.append(Rect(rect.top + k * pitch, rect.left, rect.height, rect.width, rect.x_sides, rect.z_parity))
    return rects


def _line_candidates(rect: Rect, horizontal: bool, prefer_low: bool) -> list[list[Coord]]:
    if horizontal:
        rows = sorted(range(rect.top, rect.bottom + 1), key=lambda r: (rect.bottom - r) if prefer_low else (r - rect.top))
        return [_row(r, rect.left, rect.right) for r in rows]
    mid = rect.left + rect.width // 2
    cols = sorted(range(rect.left, rect.right + 1), key=lambda c: (abs(c - mid), c))
    return [_col(c, rect.top, rect.bottom) for c in cols]


def _commutes(op: Iterable[Coord], checks: Sequence[Plaquette]) -> bool:
    op = set(op)
    return all(len(op.intersection(p.support)) % 2 == 0 for p in checks)


def line_logicals(layout: Layout, lower_rows: Sequence[bool]) -> list[tuple[list[Coord], list[Coord]]]:
    """Pick straight-line logical operators per footprint that commute with the layout's checks.

    Horizontal lines join the left and right sides, vertical lines the top and
    bottom sides; the operator type follows the sides it joins. Footprints
    flagged in ``lower_rows`` prefer their bottom row, others their top row.
    """
    x_checks, z_checks = layout.stabilizers("X"), layout.stabilizers("Z")
    out = []
    for rect, low in zip(layout.footprints, lower_rows):
        chosen = {}
        for horizontal in (True, False):
            basis = rect.side_type("left" if horizontal else "top")
            checks = z_checks if basis == "X" else x_checks
            for line in _line_candidates(rect, horizontal, low):
                if set(line) <= layout.data_qubits and _commutes(line, checks):
                    chosen[basis] = line
                    break
            else:
                raise ValueError(f"no straight {basis} logical fits footprint {rect}")
        out.append((chosen["X"], chosen["Z"]))
    return out


class InfeasibleGeometry(ValueError):
    """The requested arrangement cannot host the requested number of codewords."""


def _single_column_rects(d: int, n_h: int) -> list[Rect]:
    # one codeword per row: separated patches, the last one as tall as a dense row
    pitch = (3 * d - 3) // 2
    rects = [standard_rect(k * pitch, 0, pitch - 1, d) for k in range(n_h - 1)]
    rects.append(standard_rect((n_h - 1) * pitch, 0, (3 * d - 1) // 2, d))
    return rects


def build_dense_grid(spec: GridSpec, allow_degenerate: bool = False) -> Layout:
    """Dense rows stacked vertically, sharing one data row between neighbours, plus one reserved access row.

    A single column (n_w = 1) has nothing to fuse horizontally and is laid out as
    separated patches inside the same bounding box. At d = 3 the shared rows merge
    logical qubits, so fewer than n_h * n_w codewords survive; this raises
    :class:`InfeasibleGeometry` unless ``allow_degenerate`` is set, in which case
    the returned layout carries whatever logical qubits the checks leave.
    """
    d = spec.d
    meta = (("n_h", spec.n_h), ("n_w", spec.n_w))
    if spec.n_w == 1 and spec.n_h > 1:
        rects = _single_column_rects(d, spec.n_h)
        if d < 5:
            # patches would be shorter than d; fall through to the degenerate handling below
            rects = dense_grid_rects(d, spec.n_h, 1)
    else:
        rects = dense_grid_rects(d, spec.n_h, spec.n_w)
    if d == 3 and spec.n_h > 1:
        if not allow_degenerate:
            raise InfeasibleGeometry(
                "stacking distance-3 dense rows merges logical qubits; use d >= 5 or allow_degenerate=True"
            )
        return _assemble("dense_grid", d, rects, "basis", reserved_rows=1, meta=meta)
    rule = "standalone" if spec.n_w == 1 else "grid_lines"
    return _assemble("dense_grid", d, rects, rule, reserved_rows=1, meta=meta)


# ---------------------------------------------------------------- area accounting

def enumerate_cells(layout: Layout) -> int:
    """Count every cell of the bounding box, occupied or idle, by marking an occupancy grid."""
    h, w = layout.bounding_box
    grid = np.zeros((h, w), dtype=np.int8)
    t0, l0 = layout.origin
    for rect in layout.footprints:
        grid[rect.top - t0: rect.bottom - t0 + 1, rect.left - l0: rect.right - l0 + 1] = 1
    occupied = int(grid.sum())
    idle = int((grid == 0).sum())
    return occupied + idle


def _standalone_per_logical_limit(d: int) -> Fraction:
    return Fraction((d + 1) ** 2)


def area_standalone(spec: GridSpec) -> AreaReport:
    d, nh, nw = spec.d, spec.n_h, spec.n_w
    total = (nh * d + (nh - 1)) * (nw * d + (nw - 1))
    per = Fraction((d + 1) ** 2) - Fraction((nh + nw) * (d + 1), nh * nw) + Fraction(1, nh * nw)
    return AreaReport(total, per, per / _standalone_per_logical_limit(d), nh * nw)


def area_dense_row(spec: DenseRowSpec) -> AreaReport:
    d, n = spec.d, spec.n
    total = Fraction((3 * d - 1) * (d + 1) * n, 4) + Fraction((3 * d - 1) * (d - 1), 4)
    if total.denominator != 1:
        raise ArithmeticError("dense-row area is not integral")
    per = total / n
    return AreaReport(int(total), per, per / _standalone_per_logical_limit(d), n)


def area_dense_grid(spec: GridSpec) -> AreaReport:
    d, nh, nw = spec.d, spec.n_h, spec.n_w
    total = Fraction(
        (3 * d - 3) * (d + 1) * nh * nw + (3 * d - 3) * (d - 1) * nh + 4 * (d + 1) * nw + 4 * (d - 1), 4
    )
    if total.denominator != 1:
        raise ArithmeticError("dense-grid area is not integral")
    per = total / (nh * nw)
    return AreaReport(int(total), per, per / _standalone_per_logical_limit(d), nh * nw)


def area_dense_grid_factored(spec: GridSpec) -> tuple[int, int]:
    """(height, width) factors of the dense-grid area."""
    d = spec.d
    height = (3 * d - 3) // 2 * (spec.n_h - 1) + (3 * d - 1) // 2 + 1
    width = (d - 1) + (d + 1) // 2 * (spec.n_w - 1) + 1
    return height, width


# ---------------------------------------------------------------- code checks

def _masks(layout: Layout, qubits: Iterable[Coord]) -> int:
    index = layout.qubit_index
    mask = 0
    for q in qubits:
        mask |= 1 << index[q]
    return mask


def check_layout(layout: Layout) -> list[str]:
    """Human-readable list of broken invariants (empty when the layout is a valid code)."""
    problems = []
    data = layout.data_qubits
    plaqs = layout.plaquettes
    for p in plaqs:
        if not set(p.support) <= data:
            problems.append(f"plaquette at {tuple(p.measure)} has support outside the data qubits")
        if p.measure in data:
            problems.append(f"measure site {tuple(p.measure)} collides with a data qubit")
    x_masks = [_masks(layout, p.support) for p in plaqs if p.basis == "X"]
    z_masks = [_masks(layout, p.support) for p in plaqs if p.basis == "Z"]
    x_plaqs = [p for p in plaqs if p.basis == "X"]
    z_plaqs = [p for p in plaqs if p.basis == "Z"]
    for px, mx in zip(x_plaqs, x_masks):
        for pz, mz in zip(z_plaqs, z_masks):
            if bin(mx & mz).count("1") % 2:
                problems.append(f"X plaquette {tuple(px.measure)} anticommutes with Z plaquette {tuple(pz.measure)}")
    independent = gf2.rank(x_masks) + gf2.rank(z_masks)
    expected = len(data) - len(layout.codewords)
    if independent != expected:
        problems.append(f"{independent} independent stabilizers, expected {expected}")
    lx = [_masks(layout, cw.logical_x) for cw in layout.codewords]
    lz = [_masks(layout, cw.logical_z) for cw in layout.codewords]
    for i, cw in enumerate(layout.codewords):
        if not (cw.logical_x <= data and cw.logical_z <= data):
            problems.append(f"codeword {i} logical operator leaves the data qubits")
        for m in z_masks:
            if bin(lx[i] & m).count("1") % 2:
                problems.append(f"codeword {i} logical X anticommutes with a Z plaquette")
                break
        for m in x_masks:
            if bin(lz[i] & m).count("1") % 2:
                problems.append(f"codeword {i} logical Z anticommutes with an X plaquette")
                break
        for j in range(len(layout.codewords)):
            odd = bin(lx[i] & lz[j]).count("1") % 2
            if odd != (i == j):
                problems.append(f"logical X{i} and Z{j} overlap with the wrong parity")
    # logicals must not be stabilizers themselves
    if gf2.rank(x_masks + lx) != gf2.rank(x_masks) + len(lx):
        problems.append("logical X operators are not independent of the X stabilizers")
    if gf2.rank(z_masks + lz) != gf2.rank(z_masks) + len(lz):
        problems.append("logical Z operators are not independent of the Z stabilizers")
    return problems


class SearchSpaceExceeded(RuntimeError):
    pass


class LogicalGraph:
    """Matching graph of one Pauli type, lifted by parities against the conjugate logicals.

    Nodes are the checks of the opposite type plus one boundary node; each data
    qubit is an edge carrying the bit-vector of conjugate logicals it touches. A
    path from the boundary back to itself with label ``L`` is an operator of the
    requested type whose logical class is ``L``.
    """

    def __init__(self, layout: Layout, basis: str, cap: int = DEFAULT_SEARCH_CAP):
        other = "Z" if basis == "X" else "X"
        checks = layout.stabilizers(other)
        self.layout = layout
        self.basis = basis
        self.num_checks = len(checks)
        self.boundary = len(checks)
        self.k = len(layout.codewords)
        self.num_states = (self.num_checks + 1) << self.k
        if self.num_states > cap:
            raise SearchSpaceExceeded(
                f"{self.num_states} lifted states exceed the cap of {cap}; restrict the layout or raise the cap"
            )
        touching: dict[Coord, list[int]] = {q: [] for q in layout.data_qubits}
        for ci, p in enumerate(checks):
            for q in p.support:
                touching[q].append(ci)
        conj = [layout.logical(i, other) for i in range(self.k)]
        self.edges: dict[Coord, tuple[int, int, int]] = {}
        adjacency: list[list[tuple[int, int]]] = [[] for _ in range(self.num_checks + 1)]
        for q, cs in touching.items():
            if len(cs) > 2:
                raise ValueError(f"data qubit {tuple(q)} touches {len(cs)} {other} checks")
            a = cs[0] if cs else self.boundary
            b = cs[1] if len(cs) == 2 else self.boundary
            label = 0
            for i, op in enumerate(conj):
                if q in op:
                    label |= 1 << i
            self.edges[q] = (a, b, label)
            adjacency[a].append((b, label))
            if a != b:
                adjacency[b].append((a, label))
        self.adjacency = adjacency

    @cached_property
    def distances(self) -> np.ndarray:
        """BFS distances from (boundary, label 0) to every (node, label)."""
        size = 1 << self.k
        dist = np.full((self.num_checks + 1, size), -1, dtype=np.int64)
        dist[self.boundary, 0] = 0
        queue = deque([(self.boundary, 0)])
        adj = self.adjacency
        while queue:
            node, lab = queue.popleft()
            dn = dist[node, lab] + 1
            for nxt, elab in adj[node]:
                nl = lab ^ elab
                if dist[nxt, nl] < 0:
                    dist[nxt, nl] = dn
                    queue.append((nxt, nl))
        return dist

    @cached_property
    def _float_distances(self) -> np.ndarray:
        dist = self.distances.astype(float)
        dist[dist < 0] = np.inf
        return dist

    def weight(self, label: int) -> int:
        w = int(self.distances[self.boundary, label])
        if w < 0:
            raise ValueError(f"no {self.basis} operator realizes logical class {label:b}")
        return w

    def weight_with_shortcut(self, a: int, b: int, edge_label: int, label: int) -> int:
        """Minimum weight of class ``label`` after adding a unit-weight edge between checks a and b."""
        dist = self._float_distances
        labels = np.arange(1 << self.k)
        via = dist[a, labels] + 1 + dist[b, labels ^ edge_label ^ label]
        return int(min(self.weight(label), via.min()))


def min_logical_weight(layout: Layout, codeword: int | Iterable[int], basis: str,
                       cap: int = DEFAULT_SEARCH_CAP) -> int:
    """Minimum weight over the coset of a logical operator (or a product of several).

    ``codeword`` may be one index or several, in which case the class is the
    product of those codewords' logical operators. The search runs over the
    matching graph lifted by logical parities, so its size grows as
    (number of checks) x 2^(number of codewords); :class:`SearchSpaceExceeded`
    is raised past ``cap``.
    """
    if basis not in BASES:
        raise ValueError(f"basis must be X or Z, got {basis!r}")
    indices = [codeword] if isinstance(codeword, (int, np.integer)) else list(codeword)
    label = 0
    for i in indices:
        if not 0 <= i < len(layout.codewords):
            raise IndexError(f"codeword {i} out of range")
        label ^= 1 << i
    if label == 0:
        raise ValueError("empty logical class")
    return LogicalGraph(layout, basis, cap).weight(label)


def code_distance(layout: Layout, basis: str, cap: int = DEFAULT_SEARCH_CAP) -> int:
    """Minimum weight over every non-trivial logical class of one Pauli type."""
    graph = LogicalGraph(layout, basis, cap)
    return min(graph.weight(label) for label in range(1, 1 << graph.k))


# ---------------------------------------------------------------- serialization

def _coords(qs: Iterable[Coord]) -> list[list[int]]:
    return [[q.row, q.col] for q in sorted(qs)]


def layout_to_dict(layout: Layout) -> dict:
    return {
        "version": LAYOUT_SCHEMA_VERSION,
        "kind": layout.kind,
        "d": layout.d,
        "meta": dict(layout.meta),
        "bounding_box": list(layout.bounding_box),
        "origin": list(layout.origin),
        "reserved_rows": layout.reserved_rows,
        "footprints": [r.to_dict() for r in layout.footprints],
        "data_qubits": _coords(layout.data_qubits),
        "measure_qubits": _coords(layout.measure_qubits),
        "plaquettes": [
            {"basis": p.basis, "measure": [p.measure.row, p.measure.col],
             "support": _coords(p.support), "region": p.region}
            for p in layout.plaquettes
        ],
        "boundaries": [{"basis": b, "path": [[q.row, q.col] for q in path]} for b, path in layout.boundaries],
        "codewords": [
            {"index": cw.index, "logical_x": _coords(cw.logical_x), "logical_z": _coords(cw.logical_z),
             "footprint": None if cw.footprint is None else cw.footprint.to_dict()}
            for cw in layout.codewords
        ],
    }


def layout_from_dict(doc: dict) -> Layout:
    """Rebuild a layout from its footprints; logical operators are taken verbatim."""
    if doc.get("version") != LAYOUT_SCHEMA_VERSION:
        raise ValueError(f"unsupported layout schema version {doc.get('version')!r}")
    rects = tuple(Rect(**r) for r in doc["footprints"])
    codewords = tuple(
        CodewordView(
            cw["index"],
            frozenset(Coord(*q) for q in cw["logical_x"]),
            frozenset(Coord(*q) for q in cw["logical_z"]),
            None if cw["footprint"] is None else Rect(**cw["footprint"]),
        )
        for cw in doc["codewords"]
    )
    return Layout(
        doc["kind"], doc["d"], rects, tuple(doc["bounding_box"]), tuple(doc["origin"]),
        doc["reserved_rows"], tuple(sorted(doc["meta"].items())), "explicit", codewords,
    )


def layout_to_json(layout: Layout) -> str:
    return json.dumps(layout_to_dict(layout), indent=1, sort_keys=True)


def render(layout: Layout) -> str:
    """ASCII picture: 'o' data, 'X'/'Z' measure qubits."""
    kinds = {p.measure: p.basis for p in layout.plaquettes}
    data = layout.data_qubits
    t0, l0 = layout.origin
    h, w = layout.bounding_box
    lines = []
    for R in range(2 * t0, 2 * (t0 + h) + 1):
        line = []
        for C in range(2 * l0, 2 * (l0 + w) + 1):
            q = Coord(R, C)
            line.append("o" if q in data else kinds.get(q, " "))
        lines.append("".join(line).rstrip())
    return "\n".join(lines)


def _kernel_mod_rowspace(checks: list[int], conj_checks: list[int], n: int) -> list[int]:
    """Basis of {v : v commutes with every conj check} modulo span(checks)."""
    # null space of conj_checks over n bits, by elimination on columns
    pivots: dict[int, int] = {}
    rows = []
    for row in conj_checks:
        for col, prow in pivots.items():
            if row >> col & 1:
                row ^= prow
        if row:
            col = row.bit_length() - 1
            for c2 in list(pivots):
                if pivots[c2] >> col & 1:
                    pivots[c2] ^= row
            pivots[col] = row
            rows.append(row)
    free = [c for c in range(n) if c not in pivots]
    kernel = []
    for f in free:
        v = 1 << f
        for col, prow in pivots.items():
            if prow >> f & 1:
                v |= 1 << col
        kernel.append(v)
    elim = gf2.Eliminator()
    for c in checks:
        elim.add(c)
    out = []
    for v in kernel:
        if elim.add(v) is None:
            out.append(v)
    return out


def logical_basis(layout: Layout) -> list[tuple[frozenset, frozenset]]:
    """A symplectic basis of logical operator pairs computed from the checks alone."""
    data = sorted(layout.data_qubits)
    index = {q: i for i, q in enumerate(data)}
    mask = lambda qs: sum(1 << index[q] for q in qs)  # noqa: E731
    hx = [mask(p.support) for p in layout.stabilizers("X")]
    hz = [mask(p.support) for p in layout.stabilizers("Z")]
    xs = _kernel_mod_rowspace(hx, hz, len(data))
    zs = _kernel_mod_rowspace(hz, hx, len(data))
    pairs = []
    odd = lambda a, b: bin(a & b).count("1") & 1  # noqa: E731
    while xs:
        x = xs.pop()
        j = next((j for j, z in enumerate(zs) if odd(x, z)), None)
        if j is None:
            raise ValueError("degenerate logical space")
        z = zs.pop(j)
        xs = [v ^ x if odd(v, z) else v for v in xs]
        zs = [w ^ z if odd(x, w) else w for w in zs]
        pairs.append((x, z))
    to_set = lambda m: frozenset(q for q, i in index.items() if m >> i & 1)  # noqa: E731
    return [(to_set(x), to_set(z)) for x, z in pairs]
