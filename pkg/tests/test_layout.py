import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from densepack.layout import (
    Coord, DenseRowSpec, GridSpec, InfeasibleGeometry, PatchSpec, Rect, area_dense_grid, area_dense_grid_factored,
    area_dense_row, area_standalone, build_dense_grid, build_dense_row, build_standalone_grid,
    build_standalone_patch, check_layout, code_distance, dense_row_rects, enumerate_cells, layout_from_dict,
    layout_to_dict, layout_to_json, logical_basis, min_logical_weight, render,
)

from oracles import painted_cells, rotated_patch_checks

odd_d = st.sampled_from([3, 5, 7])


def _flat(layout, qubits):
    return frozenset(((q.row - 1) // 2) * layout.d + (q.col - 1) // 2 for q in qubits)


@pytest.mark.parametrize("d", [3, 5, 7, 9])
def test_standalone_patch_matches_textbook_checks(d):
    layout = build_standalone_patch(PatchSpec(d))
    xs = {_flat(layout, p.support) for p in layout.stabilizers("X")}
    zs = {_flat(layout, p.support) for p in layout.stabilizers("Z")}
    options = [tuple(map(set, rotated_patch_checks(d, off))) for off in (0, 1)]
    assert (xs, zs) in options


@pytest.mark.parametrize("d", [3, 5, 7])
def test_standalone_patch_counts_and_distance(d):
    layout = build_standalone_patch(d)
    assert len(layout.data_qubits) == d * d
    assert len(layout.plaquettes) == d * d - 1
    assert check_layout(layout) == []
    assert code_distance(layout, "X") == d
    assert code_distance(layout, "Z") == d


# [DERIVED] occupied data cells of a dense row, painted cell by cell (tests/oracles.painted_cells)
DENSE_ROW_DATA = {
    (3, 2): 16, (3, 3): 23, (3, 5): 37,
    (5, 2): 44, (5, 3): 63, (5, 5): 101,
    (7, 3): 123, (7, 5): 197,
}


@pytest.mark.parametrize("d,n", sorted(DENSE_ROW_DATA))
def test_dense_row_data_count(d, n):
    layout = build_dense_row(DenseRowSpec(d, n))
    assert len(layout.data_qubits) == DENSE_ROW_DATA[(d, n)]
    rects = [(r.top, r.left, r.height, r.width) for r in layout.footprints]
    assert painted_cells(rects)[1] == DENSE_ROW_DATA[(d, n)]


@pytest.mark.parametrize("d,n", [(3, 1), (3, 2), (3, 3), (5, 2), (5, 3), (5, 4), (7, 3)])
def test_dense_row_is_a_valid_code_of_distance_d(d, n):
    layout = build_dense_row(DenseRowSpec(d, n))
    assert check_layout(layout) == []
    assert len(layout.codewords) == n
    weights = [min_logical_weight(layout, i, b) for i in range(n) for b in "XZ"]
    assert min(weights) == d
    if n > 1:
        assert set(weights) == {d}
    else:
        assert weights == [d, (3 * d - 1) // 2]  # a lone codeword keeps the full row height


def test_dense_row_codeword_geometry():
    rects = dense_row_rects(5, 4)
    assert [r.rotated for r in rects] == [False, True, False, True]
    assert [r.left for r in rects] == [0, 3, 6, 9]
    assert [r.top for r in rects] == [0, 2, 0, 2]
    # (3d-1)/2 rows by (n-1)(d+1)/2 + d columns
    assert build_dense_row(DenseRowSpec(5, 4)).bounding_box == (7, 14)


def test_dense_row_boundaries_named_by_their_checks():
    layout = build_dense_row(DenseRowSpec(3, 2))
    upper, lower = layout.footprints
    assert upper.side_type("top") == "Z" and upper.side_type("left") == "X"
    assert lower.side_type("bottom") == "X" and lower.side_type("left") == "Z"


@given(d=odd_d, n=st.integers(1, 6))
def test_dense_row_invariants(d, n):
    layout = build_dense_row(DenseRowSpec(d, n))
    assert check_layout(layout) == []
    data = layout.data_qubits
    for p in layout.plaquettes:
        assert 2 <= p.weight <= 4
        assert all(abs(q.row - p.measure.row) == 1 and abs(q.col - p.measure.col) == 1 for q in p.support)
        assert set(p.support) <= data
    # the independent logical basis finds exactly n qubits
    assert len(logical_basis(layout)) == n


@given(d=odd_d, n=st.integers(1, 4), dr=st.integers(-3, 3), dc=st.integers(-3, 3))
def test_translation_moves_every_check(d, n, dr, dc):
    layout = build_dense_row(DenseRowSpec(d, n))
    moved = layout.translated(dr, dc)
    shift = lambda q: Coord(q.row + 2 * dr, q.col + 2 * dc)  # noqa: E731
    assert moved.data_qubits == frozenset(map(shift, layout.data_qubits))
    before = {(p.basis, shift(p.measure), tuple(map(shift, p.support))) for p in layout.plaquettes}
    after = {(p.basis, p.measure, p.support) for p in moved.plaquettes}
    assert before == after


@pytest.mark.parametrize("build", [
    lambda: build_standalone_patch(3),
    lambda: build_dense_row(DenseRowSpec(5, 3)),
    lambda: build_dense_grid(GridSpec(5, 2, 3)),
    lambda: build_standalone_grid(GridSpec(3, 2, 2)),
])
def test_json_round_trip(build):
    layout = build()
    again = layout_from_dict(json.loads(layout_to_json(layout)))
    assert again.data_qubits == layout.data_qubits
    assert again.plaquettes == layout.plaquettes
    assert [(c.logical_x, c.logical_z) for c in again.codewords] == \
        [(c.logical_x, c.logical_z) for c in layout.codewords]
    assert layout_to_dict(again) == layout_to_dict(layout)


def test_layout_json_matches_golden(golden):
    assert layout_to_json(build_standalone_patch(3)) + "\n" == (golden / "layout_d3_standalone.json").read_text()
    assert layout_to_json(build_dense_row(DenseRowSpec(3, 3))) + "\n" == \
        (golden / "layout_d3_n3_dense_row.json").read_text()


def test_json_version_checked():
    doc = layout_to_dict(build_standalone_patch(3))
    doc["version"] = 99
    with pytest.raises(ValueError, match="version"):
        layout_from_dict(doc)


@pytest.mark.parametrize("bad", [0, 1, 2, 4, -3])
def test_invalid_distance_rejected(bad):
    with pytest.raises(ValueError):
        PatchSpec(bad)
    with pytest.raises(ValueError):
        DenseRowSpec(bad, 2)


def test_invalid_counts_rejected():
    with pytest.raises(ValueError):
        DenseRowSpec(3, 0)
    with pytest.raises(ValueError):
        GridSpec(5, 0, 2)
    with pytest.raises(ValueError):
        Rect(0, 0, 2, 2, "diag")


def test_render_marks_every_qubit():
    layout = build_standalone_patch(3)
    pic = render(layout)
    assert pic.count("o") == 9
    assert pic.count("X") + pic.count("Z") == 8


# ---------------------------------------------------------------- dense grid

@pytest.mark.parametrize("n_h,n_w", [(2, 2), (2, 3), (3, 2), (1, 4)])
def test_dense_grid_codes(n_h, n_w):
    layout = build_dense_grid(GridSpec(5, n_h, n_w))
    assert check_layout(layout) == []
    assert len(layout.codewords) == n_h * n_w
    assert layout.reserved_rows == 1


def test_dense_grid_single_column():
    layout = build_dense_grid(GridSpec(5, 3, 1))
    assert check_layout(layout) == []
    assert len(layout.codewords) == 3


def test_stacked_distance_three_rows_lose_codewords():
    with pytest.raises(InfeasibleGeometry):
        build_dense_grid(GridSpec(3, 2, 3))
    layout = build_dense_grid(GridSpec(3, 2, 3), allow_degenerate=True)
    assert len(layout.codewords) < 6


# ---------------------------------------------------------------- areas

@pytest.mark.parametrize("d", [3, 5, 7, 9, 11])
@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_area_formulas_match_enumeration(d, n):
    assert area_dense_row(DenseRowSpec(d, n)).total_cells == enumerate_cells(build_dense_row(DenseRowSpec(d, n)))
    grid = GridSpec(d, n, 2)
    assert area_standalone(grid).total_cells == enumerate_cells(build_standalone_grid(grid))
    built = build_dense_grid(grid, allow_degenerate=True)
    assert area_dense_grid(grid).total_cells == enumerate_cells(built)
    h, w = area_dense_grid_factored(grid)
    assert h * w == area_dense_grid(grid).total_cells == built.bounding_box[0] * built.bounding_box[1]


def test_dense_row_per_logical_decreases_towards_limit():
    # [DERIVED] (3d-1)(d+1)/4 = 21 at d = 5
    per = [area_dense_row(DenseRowSpec(5, n)).per_logical for n in range(1, 6)]
    assert per == sorted(per, reverse=True)
    assert all(p > 21 for p in per)
    assert area_dense_row(DenseRowSpec(5, 10**6)).per_logical - 21 < Fraction(1, 10**4)


def test_dense_row_ratio_examples():
    # [DERIVED] (3d-1)/(4(d+1)) = 62/88 at d = 21
    rep = area_dense_row(DenseRowSpec(21, 10**4))
    assert float(rep.ratio_to_standalone) == pytest.approx(62 / 88, abs=1e-4)
    # finite-n surplus: the row's closing (3d-1)(d-1)/4 cells spread over n codewords
    assert rep.ratio_to_standalone - Fraction(62, 88) == Fraction(62 * 20, 4 * 10**4 * 22**2)
    # a one-codeword row costs more than one standalone patch of the same n
    tiny = area_dense_row(DenseRowSpec(3, 1)).per_logical / area_standalone(GridSpec(3, 1, 1)).per_logical
    assert tiny == Fraction(12, 9)


@given(d=st.integers(1, 40).map(lambda k: 2 * k + 1), n=st.integers(1, 50))
def test_area_report_consistency(d, n):
    rep = area_dense_row(DenseRowSpec(d, n))
    assert rep.per_logical * n == rep.total_cells
    assert rep.ratio_to_standalone == rep.per_logical / (d + 1) ** 2
