import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from statsmodels.stats.proportion import proportion_confint

from densepack.circuit import NoiseModel, memory_experiment
from densepack.decoder.dem import DetectorErrorModel, Fault, extract_dem, xor_prob
from densepack.decoder.graph import DecodingGraph, UnreachableDetector, edge_weight
from densepack.decoder.matching import BatchMatcher, UnionFindDecoder, brute_force_decode, mwpm_decode
from densepack.decoder.rates import (
    Decoder, RunRecord, logical_error_rate, per_round, records_to_csv, separation_sigma, wilson_interval,
)
from densepack.experiments import ExperimentSpec, build_experiment, layout_and_schedule
from densepack.layout import build_standalone_patch
from densepack.schedule import standalone_schedule


def _dem(d, schedule, basis, n=1, p=1e-3, rounds=None):
    layout, sched = layout_and_schedule(d, schedule, n)
    c = memory_experiment(layout, sched, basis, rounds or 3 * d, NoiseModel(p))
    return c, extract_dem(c)


DEM_CASES = [(3, "standalone", "Z", 1), (3, "standalone", "X", 1),
             (3, "dense_hook_avoiding", "Z", 3), (3, "dense_hook_avoiding", "X", 5), (5, "dense_hook_prone", "Z", 3)]


def _conflicting_symptoms(dem):
    masks = {}
    for f in dem.faults:
        masks.setdefault(f.detectors, set()).add(f.observables)
    return [k for k, v in masks.items() if len(v) > 1]


@pytest.mark.parametrize("d,schedule,basis,n", DEM_CASES)
def test_dem_is_graphlike_and_complete(d, schedule, basis, n):
    _, dem = _dem(d, schedule, basis, n)
    assert dem.is_graphlike
    assert dem.undecomposed == [] and dem.undetectable == []
    assert all(0 < f.probability < 0.5 for f in dem.faults)


def test_single_fault_symptoms():
    layout = build_standalone_patch(3)
    c = memory_experiment(layout, standalone_schedule(layout), "Z", 3, NoiseModel(1e-3))
    dem = extract_dem(c)
    sizes = {len(f.detectors) for f in dem.faults}
    assert sizes == {1, 2}
    # measurement errors give time edges: the same plaquette in consecutive rounds
    coords = c.detector_coords
    time_edges = [f for f in dem.faults if len(f.detectors) == 2
                  and coords[f.detectors[0]][:2] == coords[f.detectors[1]][:2]]
    assert time_edges
    assert all(abs(coords[a][2] - coords[b][2]) == 1 for a, b in (f.detectors for f in time_edges))


@pytest.mark.parametrize("d,schedule,basis,n", DEM_CASES[:4])
@pytest.mark.parametrize("method", ["mwpm", "pymatching", "union_find"])
def test_every_single_fault_decodes_cleanly(d, schedule, basis, n, method):
    _, dem = _dem(d, schedule, basis, n)
    graph = DecodingGraph.from_dem(dem)
    faults = [f for f in dem.faults if f.detectors]
    syndromes = np.zeros((len(faults), dem.num_detectors), dtype=bool)
    for i, f in enumerate(faults):
        syndromes[i, list(f.detectors)] = True
    expected = np.array([[f.observables >> k & 1 for k in range(dem.num_observables)] for f in faults], dtype=bool)
    if method == "pymatching":
        pred = BatchMatcher(graph).decode_batch(syndromes)
    elif method == "union_find":
        uf = UnionFindDecoder(graph)
        pred = np.array([[uf.decode(f.detectors) >> k & 1 for k in range(dem.num_observables)] for f in faults],
                        dtype=bool)
    else:
        pred = np.array([[mwpm_decode(graph, f.detectors).observables >> k & 1
                          for k in range(dem.num_observables)] for f in faults], dtype=bool)
    assert np.array_equal(pred, expected)


@pytest.mark.parametrize("basis", ["X", "Z"])
def test_hook_prone_rows_lose_single_fault_distance_at_d3(basis):
    # parallel hooks turn one fault into a weight-two data error along an upper codeword's logical,
    # so some single faults share a symptom with a logical flip; the avoiding schedule has none
    _, prone = _dem(3, "dense_hook_prone", basis, 5, rounds=3)
    _, avoid = _dem(3, "dense_hook_avoiding", basis, 5, rounds=3)
    assert _conflicting_symptoms(prone)
    assert _conflicting_symptoms(avoid) == []


@pytest.mark.parametrize("basis", ["X", "Z"])
def test_mwpm_equals_brute_force_on_small_dem(basis):
    # one round of a d=3 patch: 8 detectors, so every syndrome can be enumerated
    _, dem = _dem(3, "standalone", basis, rounds=1)
    assert dem.num_detectors <= 14
    graph = DecodingGraph.from_dem(dem)
    for k in range(dem.num_detectors + 1):
        for events in itertools.combinations(range(dem.num_detectors), k):
            assert mwpm_decode(graph, events).cost == pytest.approx(brute_force_decode(graph, events).cost)


def test_mwpm_equals_brute_force_on_sampled_syndromes():
    _, dem = _dem(3, "standalone", "Z")
    graph = DecodingGraph.from_dem(dem)
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 150:
        picks = rng.choice(len(dem.faults), size=rng.integers(1, 7), replace=False)
        events = set()
        for i in picks:
            events ^= set(dem.faults[i].detectors)
        if not 0 < len(events) <= 14:
            continue
        assert mwpm_decode(graph, events).cost == pytest.approx(brute_force_decode(graph, events).cost)
        checked += 1


def test_matching_additivity_for_distant_faults():
    _, dem = _dem(5, "standalone", "Z", rounds=5)
    graph = DecodingGraph.from_dem(dem)
    first, last = dem.faults[0], dem.faults[-1]
    assert not set(first.detectors) & set(last.detectors)
    a = mwpm_decode(graph, first.detectors).cost
    b = mwpm_decode(graph, last.detectors).cost
    both = mwpm_decode(graph, set(first.detectors) | set(last.detectors)).cost
    assert both == pytest.approx(a + b)
    assert a == pytest.approx(min(edge_weight(first.probability), a))


def test_empty_syndrome():
    _, dem = _dem(3, "standalone", "Z", rounds=2)
    graph = DecodingGraph.from_dem(dem)
    assert mwpm_decode(graph, []).observables == 0
    assert UnionFindDecoder(graph).decode([]) == 0


def test_unreachable_detector_reported():
    dem = DetectorErrorModel(3, 1, [Fault(0.1, (0, 1), 0)])
    graph = DecodingGraph.from_dem(dem)
    with pytest.raises(UnreachableDetector):
        mwpm_decode(graph, [2])


def test_parallel_edges_merge_by_xor_probability():
    dem = DetectorErrorModel(2, 1, [Fault(0.1, (0, 1), 0), Fault(0.2, (0, 1), 0), Fault(0.05, (1,), 1)])
    graph = DecodingGraph.from_dem(dem)
    assert graph.edges[(0, 1)] == (pytest.approx(0.1 * 0.8 + 0.2 * 0.9), 0)
    assert graph.edges[(1, 2)] == (0.05, 1)
    with pytest.raises(ValueError, match="graphlike"):
        DecodingGraph.from_dem(DetectorErrorModel(3, 0, [Fault(0.1, (0, 1, 2), 0)]))


@given(p1=st.floats(0, 1), p2=st.floats(0, 1))
def test_xor_prob_properties(p1, p2):
    assert xor_prob(p1, p2) == pytest.approx(xor_prob(p2, p1))
    assert xor_prob(p1, 0.0) == pytest.approx(p1)
    assert 0 <= xor_prob(p1, p2) <= 1


def test_dem_text_round_trip():
    _, dem = _dem(3, "dense_hook_avoiding", "Z", 2, rounds=2)
    again = DetectorErrorModel.from_text(dem.to_text())
    assert again.faults == dem.faults
    assert (again.num_detectors, again.num_observables) == (dem.num_detectors, dem.num_observables)
    with pytest.raises(ValueError):
        DetectorErrorModel.from_text("DETECTORS 2\nfoo\n")
    with pytest.raises(ValueError):
        Fault(0.0, (1,), 0)


def test_noiseless_circuit_has_no_dem():
    layout = build_standalone_patch(3)
    c = memory_experiment(layout, standalone_schedule(layout), "Z", 2)
    with pytest.raises(ValueError):
        extract_dem(c)
    rec = logical_error_rate(c, 10**8, seed=0)
    assert rec.P == 0.0 and rec.shots == 10**8


# ---------------------------------------------------------------- distance probe


def _min_failing_pairs(spec):
    c = build_experiment(spec)
    dem = extract_dem(c)
    graph = DecodingGraph.from_dem(dem)
    faults = [f for f in dem.faults if f.detectors]
    sym = np.zeros((len(faults), dem.num_detectors), dtype=bool)
    for i, f in enumerate(faults):
        sym[i, list(f.detectors)] = True
    obs = np.array([f.observables & 1 for f in faults], dtype=bool)
    matcher = BatchMatcher(graph)
    if (matcher.decode_batch(sym)[:, 0] != obs).any():
        return 1
    ii, jj = np.triu_indices(len(faults), 1)
    wrong = matcher.decode_batch(sym[ii] ^ sym[jj])[:, 0] != (obs[ii] ^ obs[jj])
    return 2 if wrong.any() else None


def test_circuit_level_distance_probe():
    rounds = dict(rounds_factor=1)
    assert _min_failing_pairs(ExperimentSpec(3, "standalone", "Z", 1e-3, n=1, **rounds)) == 2
    prone = _min_failing_pairs(ExperimentSpec(3, "dense_hook_prone", "Z", 1e-3, n=5, **rounds))
    avoid = _min_failing_pairs(ExperimentSpec(3, "dense_hook_avoiding", "Z", 1e-3, n=5, **rounds))
    print(f"min failing fault count: prone={prone} avoiding={avoid}")
    assert prone <= avoid


# ---------------------------------------------------------------- rates


@pytest.mark.parametrize("errors,shots", [(0, 10), (1, 10), (5, 100), (50, 100), (100, 100), (7, 123456)])
def test_wilson_matches_statsmodels(errors, shots):
    lo, hi = wilson_interval(errors, shots)
    rlo, rhi = proportion_confint(errors, shots, alpha=0.05, method="wilson")
    assert lo == pytest.approx(rlo, abs=1e-4 * max(rhi, 1e-3))
    assert hi == pytest.approx(rhi, rel=1e-3)


@given(errors=st.integers(0, 1000), extra=st.integers(0, 10**6))
def test_wilson_brackets_the_estimate(errors, extra):
    shots = errors + extra
    if shots == 0:
        return
    lo, hi = wilson_interval(errors, shots)
    assert 0 <= lo <= errors / shots <= hi <= 1


@given(P=st.floats(0, 1), rounds=st.integers(1, 50))
def test_per_round_properties(P, rounds):
    r = per_round(P, rounds)
    assert 0 <= r <= P + 1e-12
    assert 1 - (1 - r) ** rounds == pytest.approx(P, abs=1e-9)


def test_per_round_rejects_zero_rounds():
    with pytest.raises(ValueError):
        per_round(0.1, 0)


@given(st.lists(st.tuples(st.integers(1, 1000), st.integers(0, 1000)), min_size=1, max_size=6))
def test_run_record_merge_is_order_independent(parts):
    recs = [RunRecord(5, 5, "standalone", "Z", 1e-3, 15, shots + err, err) for shots, err in parts]
    fwd = recs[0]
    for r in recs[1:]:
        fwd = fwd.merge(r)
    back = recs[-1]
    for r in reversed(recs[:-1]):
        back = r.merge(back)
    assert (fwd.shots, fwd.errors) == (back.shots, back.errors) == (sum(r.shots for r in recs),
                                                                    sum(r.errors for r in recs))


def test_run_record_validation_and_serialisation():
    rec = RunRecord(5, 5, "dense_hook_avoiding", "X", 3e-3, 15, 1000, 12, seed=9)
    again = RunRecord.from_json(rec.to_json())
    assert again == rec
    assert json.loads(rec.to_json())["p_round"] == pytest.approx(per_round(0.012, 15))
    header, row = records_to_csv([rec]).splitlines()
    assert header.split(",")[:8] == ["d", "n", "schedule", "basis", "p", "rounds", "shots", "errors"]
    assert row.startswith("5,5,dense_hook_avoiding,X,0.003,15,1000,12,")
    with pytest.raises(ValueError):
        RunRecord(5, 5, "standalone", "X", 0.1, 15, 10, 11)
    with pytest.raises(ValueError):
        rec.merge(RunRecord(3, 5, "dense_hook_avoiding", "X", 3e-3, 15, 10, 1))


def test_separation_sigma():
    a = RunRecord(5, 1, "s", "Z", 0.01, 15, 10000, 200)
    b = RunRecord(5, 1, "s", "Z", 0.01, 15, 10000, 100)
    expected = 0.01 / math.hypot(math.sqrt(0.02 * 0.98 / 1e4), math.sqrt(0.01 * 0.99 / 1e4))
    assert separation_sigma(a, b) == pytest.approx(expected)
    assert separation_sigma(b, a) == pytest.approx(-expected)


def test_stopping_rule_and_seed_determinism():
    c = build_experiment(ExperimentSpec(3, "standalone", "Z", 2e-2, n=1, rounds_factor=1))
    dec = Decoder(c)
    a = logical_error_rate(c, 10**6, seed=3, max_errors=50, decoder=dec)
    b = logical_error_rate(c, 10**6, seed=3, max_errors=50, decoder=dec)
    assert a.errors >= 50 and a.shots < 10**6
    assert (a.shots, a.errors) == (b.shots, b.errors)
    capped = logical_error_rate(c, 1000, seed=3, decoder=dec)
    assert capped.shots == 1000


def test_unknown_decoder_rejected():
    c = build_experiment(ExperimentSpec(3, "standalone", "Z", 1e-3, n=1, rounds_factor=1))
    with pytest.raises(ValueError):
        Decoder(c, "guess")


def test_union_find_close_to_matching():
    # documented accuracy delta: within a factor of two of exact matching
    c = build_experiment(ExperimentSpec(3, "standalone", "Z", 3e-3, n=1))
    mw = logical_error_rate(c, 16384, seed=1, decoder="pymatching")
    uf = logical_error_rate(c, 16384, seed=1, decoder="union_find")
    print(f"d=3 p=3e-3: matching P={mw.P:.4g} union-find P={uf.P:.4g}")
    assert mw.errors > 50
    assert mw.P / 2 <= uf.P <= 2 * mw.P
