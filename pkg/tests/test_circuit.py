import pytest
from hypothesis import given, strategies as st

from densepack.circuit import (
    Circuit, Instruction, NoiseModel, apply_noise, channel_semantics, circuit_to_text, cx_layers_per_round,
    memory_experiment, parse_circuit,
)
from densepack.experiments import ExperimentSpec, build_experiment, layout_and_schedule
from densepack.layout import DenseRowSpec, build_dense_row, build_standalone_patch
from densepack.schedule import build_schedule, standalone_schedule
from densepack.stabilizer.frame import sample
from densepack.stabilizer.tableau import run_noiseless

MEMORY_CASES = [
    (3, "standalone", 1), (5, "standalone", 1),
    (3, "dense_hook_avoiding", 2), (3, "dense_hook_avoiding", 3), (5, "dense_hook_avoiding", 5),
    (3, "dense_hook_prone", 3), (5, "dense_hook_prone", 5),
]


@pytest.mark.parametrize("d,name,n", MEMORY_CASES)
@pytest.mark.parametrize("basis", ["X", "Z"])
def test_memory_circuits_noiseless_deterministic(d, name, n, basis):
    layout, sched = layout_and_schedule(d, name, n)
    circuit = memory_experiment(layout, sched, basis, 2)
    _, report = run_noiseless(circuit)
    assert report.ok
    assert set(report.detector_values) <= {0} and set(report.observable_values) <= {0}
    # second route: gauge-randomised frame sampling at p = 0
    batch = sample(circuit, 1000, seed=7)
    assert not batch.detectors.any() and not batch.observables.any()


def test_hadamard_style_is_equivalent():
    layout = build_standalone_patch(3)
    sched = standalone_schedule(layout)
    plain = memory_experiment(layout, sched, "X", 3)
    had = memory_experiment(layout, sched, "X", 3, style="hadamard")
    assert len(had.detectors) == len(plain.detectors)
    assert run_noiseless(had)[1].ok
    noisy = apply_noise(had, NoiseModel(0.01))
    assert any(i.kind == "Depolarize1" and i.p == pytest.approx(0.001) and set(i.targets) <= set(range(9, 17))
               for i in noisy.instructions)


def test_detector_and_measurement_counts():
    layout = build_standalone_patch(3)
    c = memory_experiment(layout, standalone_schedule(layout), "Z", 4)
    # 8 checks per round, 9 data readouts
    assert c.num_measurements == 4 * 8 + 9
    # first round: 4 Z checks; later rounds: all 8; closing: 4 Z checks
    assert len(c.detectors) == 4 + 3 * 8 + 4
    assert [label for _, label in c.observables] == ["Z0"]
    assert c.rounds == 4


def test_round_blocks_repeat():
    layout = build_standalone_patch(3)
    c = memory_experiment(layout, standalone_schedule(layout), "Z", 4)
    slots = c.slots()
    per_round = 6  # init, four CX layers, measure
    blocks = [[(i.kind, i.targets) for s in slots[r * per_round + 1:(r + 1) * per_round] for i in s]
              for r in range(4)]
    assert blocks[1] == blocks[2] == blocks[3]


@pytest.mark.parametrize("d,name,n,layers", [(3, "standalone", 1, 4), (5, "standalone", 1, 4),
                                             (5, "dense_hook_avoiding", 5, 5), (5, "dense_hook_prone", 5, 4)])
def test_cx_layers_per_round(d, name, n, layers):
    layout, sched = layout_and_schedule(d, name, n)
    assert cx_layers_per_round(memory_experiment(layout, sched, "Z", 1)) == layers


def test_rounds_follow_three_d():
    c = build_experiment(ExperimentSpec(5, "standalone", "Z", 0.0))
    assert c.rounds == 15


@pytest.mark.parametrize("d,name,n", MEMORY_CASES[:4])
def test_slot_discipline_and_idle_accounting(d, name, n):
    layout, sched = layout_and_schedule(d, name, n)
    noisy = memory_experiment(layout, sched, "Z", 2, NoiseModel(1e-3))
    for slot in noisy.slots():
        gates = [i for i in slot if not i.is_noise]
        if not gates:
            continue
        busy = [q for i in gates for q in i.targets]
        assert len(busy) == len(set(busy))
        idle = [q for i in slot if i.kind == "Depolarize1" and i.p == pytest.approx(1e-4) for q in i.targets]
        assert len(busy) + len(idle) == noisy.num_qubits


def test_noise_follows_each_operation():
    p = 0.02
    c = Circuit((Instruction("InitZ", (0, 1, 2)), Instruction("Tick"), Instruction("CX", (0, 1)),
                 Instruction("Tick"), Instruction("MeasureZ", (0,))), 3)
    noisy = apply_noise(c, NoiseModel(p))
    kinds = [(i.kind, i.targets, i.p) for i in noisy.instructions]
    assert ("XError", (0, 1, 2), p) in kinds
    cx = kinds.index(("CX", (0, 1), 0.0))
    assert kinds[cx + 1] == ("Depolarize2", (0, 1), p)
    assert kinds[cx + 2] == ("Depolarize1", (2,), pytest.approx(p / 10))
    m = kinds.index(("MeasureZ", (0,), 0.0))
    assert kinds[m + 1] == ("FlipResult", (0,), p)
    assert kinds[m + 2] == ("Depolarize1", (0,), p)
    assert kinds[m + 3] == ("Depolarize1", (1, 2), pytest.approx(p / 10))


def test_noise_rules():
    c = memory_experiment(build_standalone_patch(3), standalone_schedule(build_standalone_patch(3)), "Z", 1)
    assert apply_noise(c, NoiseModel(0.0)) == c
    with pytest.raises(ValueError, match="already"):
        apply_noise(apply_noise(c, NoiseModel(0.01)), NoiseModel(0.01))
    for bad in (-0.1, 0.8):
        with pytest.raises(ValueError):
            NoiseModel(bad)


@given(p=st.floats(0, 0.75))
def test_noise_model_ratios(p):
    m = NoiseModel(p)
    assert m.two_qubit_depol == m.meas_flip == m.meas_depol == m.init_flip == p
    assert m.single_gate_depol == m.idle_depol == pytest.approx(p / 10)


@given(p=st.floats(0, 1), kind=st.sampled_from(["Depolarize1", "Depolarize2", "FlipResult", "XError"]))
def test_channel_semantics_is_a_distribution(p, kind):
    dist = channel_semantics(kind, p)
    assert sum(dist.values()) == pytest.approx(1.0)
    assert all(v >= 0 for v in dist.values())


def test_channel_semantics_examples():
    d1 = channel_semantics("Depolarize1", 0.3)
    assert d1["X"] == d1["Y"] == d1["Z"] == pytest.approx(0.1)
    d2 = channel_semantics("Depolarize2", 0.15)
    assert len(d2) == 16 and all(v == pytest.approx(0.01) for k, v in d2.items() if k != "II")
    assert channel_semantics("Depolarize1", 0.0)["I"] == 1.0
    with pytest.raises(ValueError):
        channel_semantics("CX", 0.1)


def test_instruction_validation():
    with pytest.raises(ValueError):
        Instruction("CX", (1, 1))
    with pytest.raises(ValueError):
        Instruction("CX", (1,))
    with pytest.raises(ValueError):
        Instruction("Teleport", (0,))
    with pytest.raises(ValueError):
        Instruction("Depolarize1", (0,), 1.5)


def test_memory_experiment_argument_checks():
    layout = build_standalone_patch(3)
    sched = standalone_schedule(layout)
    with pytest.raises(ValueError):
        memory_experiment(layout, sched, "Y", 1)
    with pytest.raises(ValueError):
        memory_experiment(layout, sched, "Z", 0)
    with pytest.raises(ValueError):
        memory_experiment(build_dense_row(DenseRowSpec(3, 2)), sched, "Z", 1)


@pytest.mark.parametrize("fname,spec", [
    ("circuit_d3_standalone_Z.txt", ExperimentSpec(3, "standalone", "Z", 1e-3, n=1)),
    ("circuit_d3_n2_dense_Z.txt", ExperimentSpec(3, "dense_hook_avoiding", "Z", 1e-3, n=2)),
])
def test_golden_circuits_bit_exact(golden, fname, spec):
    text = circuit_to_text(build_experiment(spec))
    assert text == (golden / fname).read_text()


@pytest.mark.parametrize("d,name,n", MEMORY_CASES[:3])
def test_text_round_trip(d, name, n):
    layout, sched = layout_and_schedule(d, name, n)
    c = memory_experiment(layout, sched, "X", 3, NoiseModel(2e-3))
    again = parse_circuit(circuit_to_text(c))
    assert circuit_to_text(again) == circuit_to_text(c)
    assert again.detectors == c.detectors and again.observables == c.observables
    assert all(a.same_op(b) for a, b in zip(again.instructions, c.instructions))


@pytest.mark.parametrize("text", ["QUBITS 1\nFOO 0\n", "INIT_Z 0\n", "QUBITS 1\nMEASURE_Z 0\nDETECTOR rec[0]\n"])
def test_parse_errors(text):
    with pytest.raises(ValueError):
        parse_circuit(text)


def test_dense_schedule_name_lookup():
    layout = build_dense_row(DenseRowSpec(3, 3))
    assert build_schedule(layout, "dense_hook_avoiding").T == 5
