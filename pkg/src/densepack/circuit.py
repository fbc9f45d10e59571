"""Timed stabilizer circuits for memory experiments, with the circuit-level noise model.

A :class:`Circuit` is a flat list of :class:`Instruction` values grouped into
time slots separated by ``Tick``. Measurement results are numbered in program
order; detectors and observables are sets of those absolute indices.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .layout import Layout

GATE_KINDS = ("InitZ", "InitX", "CX", "H", "MeasureZ", "MeasureX")
NOISE_KINDS = ("Depolarize1", "Depolarize2", "FlipResult", "XError", "ZError")
KINDS = GATE_KINDS + NOISE_KINDS + ("Tick",)
MEASURE_KINDS = ("MeasureZ", "MeasureX")
INIT_KINDS = ("InitZ", "InitX")

CIRCUIT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Instruction:
    kind: str
    targets: tuple[int, ...] = ()
    p: float = 0.0
    time: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown instruction kind {self.kind!r}")
        if self.kind in ("CX", "Depolarize2") and len(self.targets) % 2:
            raise ValueError(f"{self.kind} needs an even number of targets")
        if self.kind == "CX":
            for a, b in zip(self.targets[::2], self.targets[1::2]):
                if a == b:
                    raise ValueError("CX control and target must differ")
        if self.kind in NOISE_KINDS and not 0.0 <= self.p <= 1.0:
            raise ValueError(f"probability out of range: {self.p}")

    @property
    def is_noise(self) -> bool:
        return self.kind in NOISE_KINDS

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.targets[::2], self.targets[1::2]))

    def same_op(self, other: "Instruction") -> bool:
        """Equal up to the time stamp."""
        return (self.kind, self.targets, self.p) == (other.kind, other.targets, other.p)


@dataclass(frozen=True)
class Circuit:
    instructions: tuple[Instruction, ...]
    num_qubits: int
    detectors: tuple[tuple[int, ...], ...] = ()
    observables: tuple[tuple[tuple[int, ...], str], ...] = ()
    qubit_coords: tuple[tuple[int, int], ...] = ()
    detector_coords: tuple[tuple[int, int, int], ...] = ()  # (row, col, round) per detector
    rounds: int = 0

    @property
    def num_measurements(self) -> int:
        return sum(len(i.targets) for i in self.instructions if i.kind in MEASURE_KINDS)

    @property
    def is_noisy(self) -> bool:
        return any(i.is_noise for i in self.instructions)

    @property
    def num_slots(self) -> int:
        return 1 + sum(1 for i in self.instructions if i.kind == "Tick")

    def slots(self) -> list[list[Instruction]]:
        out: list[list[Instruction]] = [[]]
        for inst in self.instructions:
            if inst.kind == "Tick":
                out.append([])
            else:
                out[-1].append(inst)
        return out

    def without_noise(self) -> "Circuit":
        return replace(self, instructions=tuple(i for i in self.instructions if not i.is_noise))


@dataclass(frozen=True)
class NoiseModel:
    """Uniform circuit-level noise parameterised by a single physical error rate."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 0.75:
            raise ValueError(f"p must lie in [0, 3/4] for a valid depolarizing channel, got {self.p}")

    @property
    def two_qubit_depol(self) -> float:
        return self.p

    @property
    def meas_flip(self) -> float:
        return self.p

    @property
    def meas_depol(self) -> float:
        return self.p

    @property
    def init_flip(self) -> float:
        return self.p

    @property
    def single_gate_depol(self) -> float:
        return self.p / 10

    @property
    def idle_depol(self) -> float:
        return self.p / 10


_PAULI1 = ("X", "Y", "Z")
_PAULI2 = tuple(a + b for a in "IXYZ" for b in "IXYZ" if a + b != "II")


def channel_semantics(kind: str, p: float) -> dict[str, float]:
    """Distribution over the Pauli errors a noise channel applies (identity keyed as "I")."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if kind == "Depolarize1":
        dist = {s: p / 3 for s in _PAULI1}
        dist["I"] = 1 - p
    elif kind == "Depolarize2":
        dist = {s: p / 15 for s in _PAULI2}
        dist["II"] = 1 - p
    elif kind in ("FlipResult", "XError", "ZError"):
        flip = {"FlipResult": "flip", "XError": "X", "ZError": "Z"}[kind]
        dist = {flip: p, "I": 1 - p}
    else:
        raise ValueError(f"{kind} is not a noise channel")
    return dist


# ---------------------------------------------------------------- noise insertion

def apply_noise(circuit: Circuit, noise: NoiseModel) -> Circuit:
    """Insert the noise channels of ``noise`` after every operation of a noiseless circuit.

    Within each slot: two-qubit depolarizing after CX, result flip plus
    depolarizing after measurements, a bit/phase flip after initialisation,
    weak depolarizing after single-qubit gates, and weak depolarizing on every
    qubit the slot leaves idle.
    """
    if circuit.is_noisy:
        raise ValueError("circuit already carries noise channels")
    if noise.p == 0:
        return circuit
    out: list[Instruction] = []
    time = 0
    for slot_index, slot in enumerate(circuit.slots()):
        if slot_index:
            out.append(Instruction("Tick", time=time))
        busy: set[int] = set()
        for inst in slot:
            out.append(inst)
            busy.update(inst.targets)
            t = inst.time
            if inst.kind == "CX":
                out.append(Instruction("Depolarize2", inst.targets, noise.two_qubit_depol, t))
            elif inst.kind in MEASURE_KINDS:
                out.append(Instruction("FlipResult", inst.targets, noise.meas_flip, t))
                out.append(Instruction("Depolarize1", inst.targets, noise.meas_depol, t))
            elif inst.kind == "InitZ":
                out.append(Instruction("XError", inst.targets, noise.init_flip, t))
            elif inst.kind == "InitX":
                out.append(Instruction("ZError", inst.targets, noise.init_flip, t))
            elif inst.kind == "H":
                out.append(Instruction("Depolarize1", inst.targets, noise.single_gate_depol, t))
            time = t
        if slot:
            idle = tuple(q for q in range(circuit.num_qubits) if q not in busy)
            if idle:
                out.append(Instruction("Depolarize1", idle, noise.idle_depol, time))
    return replace(circuit, instructions=tuple(out))


# ---------------------------------------------------------------- memory experiment

class SlotBuilder:
    def __init__(self, num_qubits: int):
        self.num_qubits = num_qubits
        self.instructions: list[Instruction] = []
        self.time = 0
        self.num_meas = 0
        self._started = False

    def slot(self, ops: Sequence[tuple[str, Sequence[int]]]) -> list[int]:
        """Emit one time slot; returns the measurement indices produced, in target order."""
        if self._started:
            self.instructions.append(Instruction("Tick", time=self.time))
            self.time += 1
        self._started = True
        measured = []
        for kind, targets in ops:
            if not targets:
                continue
            self.instructions.append(Instruction(kind, tuple(targets), time=self.time))
            if kind in MEASURE_KINDS:
                measured.extend(range(self.num_meas, self.num_meas + len(targets)))
                self.num_meas += len(targets)
        return measured


def cx_layers(layout: Layout, schedule, index: dict) -> list[list[int]]:
    """CX target lists per schedule slot (control, target interleaved)."""
    layers: list[list[int]] = [[] for _ in range(schedule.T)]
    for plaq in layout.plaquettes:
        anc = index[plaq.measure]
        for q in plaq.support:
            slot = schedule.slot_of(plaq.measure, q)
            pair = (anc, index[q]) if plaq.basis == "X" else (index[q], anc)
            layers[slot - 1].extend(pair)
    return layers


def memory_experiment(
    layout: Layout,
    schedule,
    basis: str,
    rounds: int,
    noise: NoiseModel | None = None,
    *,
    style: str = "basis",
    observables: Iterable[int] | None = None,
) -> Circuit:
    """Memory experiment: transversal init, ``rounds`` rounds of extraction, transversal readout.

    ``style="basis"`` prepares and measures X-check ancillas directly in the X
    basis; ``style="hadamard"`` uses Z-basis ancillas wrapped in Hadamard layers.
    ``observables`` selects which codewords get an observable (all by default).
    """
    if basis not in ("X", "Z"):
        raise ValueError(f"basis must be X or Z, got {basis!r}")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if style not in ("basis", "hadamard"):
        raise ValueError(f"unknown extraction style {style!r}")
    schedule.require_complete(layout)
    index = layout.qubit_index
    data = sorted(layout.data_qubits)
    plaqs = layout.plaquettes
    x_anc = [index[p.measure] for p in plaqs if p.basis == "X"]
    z_anc = [index[p.measure] for p in plaqs if p.basis == "Z"]
    anc_order = [index[p.measure] for p in plaqs]
    data_ids = [index[q] for q in data]
    init_data = "InitZ" if basis == "Z" else "InitX"
    layers = cx_layers(layout, schedule, index)

    b = SlotBuilder(len(index))
    meas_of: list[dict[int, int]] = []
    for r in range(rounds):
        first = [(init_data, data_ids)] if r == 0 else []
        if style == "basis":
            b.slot(first + [("InitX", x_anc), ("InitZ", z_anc)])
        else:
            b.slot(first + [("InitZ", x_anc + z_anc)])
            b.slot([("H", x_anc)])
        for layer in layers:
            b.slot([("CX", layer)])
        if style == "basis":
            got = b.slot([("MeasureX", x_anc), ("MeasureZ", z_anc)])
            order = x_anc + z_anc
        else:
            b.slot([("H", x_anc)])
            got = b.slot([("MeasureZ", x_anc + z_anc)])
            order = x_anc + z_anc
        meas_of.append(dict(zip(order, got)))
    final = b.slot([("MeasureZ" if basis == "Z" else "MeasureX", data_ids)])
    final_of = dict(zip(data_ids, final))

    detectors: list[tuple[int, ...]] = []
    det_coords: list[tuple[int, int, int]] = []
    for r in range(rounds):
        for plaq, anc in zip(plaqs, anc_order):
            if r == 0:
                if plaq.basis != basis:
                    continue
                det = (meas_of[0][anc],)
            else:
                det = (meas_of[r - 1][anc], meas_of[r][anc])
            detectors.append(det)
            det_coords.append((plaq.measure.row, plaq.measure.col, r))
    for plaq, anc in zip(plaqs, anc_order):
        if plaq.basis != basis:
            continue
        det = tuple(sorted([meas_of[-1][anc]] + [final_of[index[q]] for q in plaq.support]))
        detectors.append(det)
        det_coords.append((plaq.measure.row, plaq.measure.col, rounds))

    chosen = range(len(layout.codewords)) if observables is None else list(observables)
    obs = []
    for i in chosen:
        support = layout.logical(i, basis)
        obs.append((tuple(sorted(final_of[index[q]] for q in support)), f"{basis}{i}"))

    coords = [None] * len(index)
    for q, i in index.items():
        coords[i] = (q.row, q.col)
    circuit = Circuit(
        tuple(b.instructions), len(index), tuple(detectors), tuple(obs),
        tuple(coords), tuple(det_coords), rounds,
    )
    if noise is not None and noise.p > 0:
        circuit = apply_noise(circuit, noise)
    return circuit


# ---------------------------------------------------------------- text format

_TEXT_NAMES = {
    "InitZ": "INIT_Z", "InitX": "INIT_X", "CX": "CX", "H": "H", "MeasureZ": "MEASURE_Z",
    "MeasureX": "MEASURE_X", "Depolarize1": "DEPOLARIZE1", "Depolarize2": "DEPOLARIZE2",
    "FlipResult": "FLIP_RESULT", "XError": "X_ERROR", "ZError": "Z_ERROR", "Tick": "TICK",
}
_FROM_TEXT = {v: k for k, v in _TEXT_NAMES.items()}


def _fmt_p(p: float) -> str:
    return repr(float(p))


def circuit_to_text(circuit: Circuit) -> str:
    """Line-oriented text form; detectors and observables use measurement offsets from the end."""
    lines = [f"# densepack circuit v{CIRCUIT_FORMAT_VERSION}", f"QUBITS {circuit.num_qubits}"]
    for q, (r, c) in enumerate(circuit.qubit_coords):
        lines.append(f"QUBIT_COORDS {q} {r} {c}")
    if circuit.rounds:
        lines.append(f"ROUNDS {circuit.rounds}")
    for inst in circuit.instructions:
        name = _TEXT_NAMES[inst.kind]
        if inst.kind == "Tick":
            lines.append(name)
            continue
        text = name + " " + " ".join(str(t) for t in inst.targets)
        if inst.is_noise:
            text += f" p={_fmt_p(inst.p)}"
        lines.append(text)
    total = circuit.num_measurements
    for k, det in enumerate(circuit.detectors):
        coord = ""
        if circuit.detector_coords:
            coord = " @ " + " ".join(str(v) for v in circuit.detector_coords[k])
        lines.append("DETECTOR " + " ".join(f"rec[{m - total}]" for m in det) + coord)
    for k, (members, label) in enumerate(circuit.observables):
        lines.append(f"OBSERVABLE_INCLUDE {k} {label} " + " ".join(f"rec[{m - total}]" for m in members))
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> Circuit:
    num_qubits = None
    coords: dict[int, tuple[int, int]] = {}
    instructions: list[Instruction] = []
    dets_rel: list[list[int]] = []
    det_coords: list[tuple[int, int, int]] = []
    obs_rel: list[tuple[list[int], str]] = []
    rounds = 0
    time = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "QUBITS":
            num_qubits = int(rest[0])
        elif head == "QUBIT_COORDS":
            coords[int(rest[0])] = (int(rest[1]), int(rest[2]))
        elif head == "ROUNDS":
            rounds = int(rest[0])
        elif head == "TICK":
            instructions.append(Instruction("Tick", time=time))
            time += 1
        elif head == "DETECTOR":
            if "@" in rest:
                at = rest.index("@")
                det_coords.append(tuple(int(v) for v in rest[at + 1:]))
                rest = rest[:at]
            dets_rel.append([_rec(tok, lineno) for tok in rest])
        elif head == "OBSERVABLE_INCLUDE":
            obs_rel.append(([_rec(tok, lineno) for tok in rest[2:]], rest[1]))
        elif head in _FROM_TEXT:
            p = 0.0
            targets = []
            for tok in rest:
                if tok.startswith("p="):
                    p = float(tok[2:])
                else:
                    targets.append(int(tok))
            instructions.append(Instruction(_FROM_TEXT[head], tuple(targets), p, time))
        else:
            raise ValueError(f"line {lineno}: unknown instruction {head!r}")
    if num_qubits is None:
        raise ValueError("missing QUBITS header")
    total = sum(len(i.targets) for i in instructions if i.kind in MEASURE_KINDS)
    qcoords = tuple(coords[q] for q in range(num_qubits)) if coords else ()
    return Circuit(
        tuple(instructions), num_qubits,
        tuple(tuple(total + m for m in det) for det in dets_rel),
        tuple((tuple(total + m for m in members), label) for members, label in obs_rel),
        qcoords, tuple(det_coords), rounds,
    )


def _rec(tok: str, lineno: int) -> int:
    if not (tok.startswith("rec[") and tok.endswith("]")):
        raise ValueError(f"line {lineno}: expected rec[-k], got {tok!r}")
    value = int(tok[4:-1])
    if value >= 0:
        raise ValueError(f"line {lineno}: measurement offsets must be negative")
    return value


def cx_layers_per_round(circuit: Circuit) -> int:
    """Number of slots per round that contain CX gates (first round)."""
    count = 0
    for slot in circuit.slots():
        if any(i.kind in MEASURE_KINDS for i in slot):
            break
        if any(i.kind == "CX" for i in slot):
            count += 1
    return count
