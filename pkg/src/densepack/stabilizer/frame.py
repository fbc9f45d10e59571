"""Pauli-frame propagation: a single frame for analysis and a bit-packed batch sampler.

The batch sampler keeps one X and one Z bit per (qubit, shot), packed 64 shots
per uint64 word, and tracks how each shot's measurement record differs from a
noiseless reference. Randomness comes from Philox streams derived from
``SeedSequence(seed, spawn_key=(block,))`` for fixed-size shot blocks, so the
result does not depend on how blocks are distributed over workers.
"""

from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..circuit import MEASURE_KINDS, Circuit, Instruction

BLOCK_SHOTS = 8192
_DENSE_P = 0.02  # above this rate noise is sampled densely rather than by geometric gaps

SHOTBATCH_MAGIC = b"DPSB"
SHOTBATCH_VERSION = 1


class SingleFrame:
    """Pauli error on a handful of qubits, as X and Z bit arrays."""

    def __init__(self, num_qubits: int):
        self.x = np.zeros(num_qubits, dtype=np.uint8)
        self.z = np.zeros(num_qubits, dtype=np.uint8)
        self.flips: list[int] = []

    def pauli(self, q: int) -> str:
        return "IXZY"[int(self.x[q]) + 2 * int(self.z[q])]


def frame_propagate(frame, inst: Instruction):
    """Conjugate a frame through one instruction (noise channels are ignored).

    Works on :class:`SingleFrame` and on :class:`BatchFrame` alike. CX maps
    X on the control to X on both qubits and Z on the target to Z on both.
    Measurements append the flip of their outcome to the frame's record;
    initialisations clear the frame on their targets.
    """
    kind = inst.kind
    x, z = frame.x, frame.z
    if kind == "CX":
        for a, b in inst.pairs():
            x[b] ^= x[a]
            z[a] ^= z[b]
    elif kind == "H":
        for a in inst.targets:
            tmp = x[a].copy()
            x[a] = z[a]
            z[a] = tmp
    elif kind == "InitZ" or kind == "InitX":
        for a in inst.targets:
            x[a] = 0
            z[a] = 0
    elif kind == "MeasureZ":
        for a in inst.targets:
            frame.flips.append(x[a].copy())
    elif kind == "MeasureX":
        for a in inst.targets:
            frame.flips.append(z[a].copy())
    return frame


@dataclass
class BatchFrame:
    x: np.ndarray
    z: np.ndarray
    flips: list


@dataclass
class ShotBatch:
    detectors: np.ndarray  # bool, shots x detectors
    observables: np.ndarray  # bool, shots x observables
    seed: int

    @property
    def shots(self) -> int:
        return self.detectors.shape[0]

    def to_bytes(self) -> bytes:
        """Raw export: magic, version, shots, detectors, observables, then per-shot packed bits."""
        header = SHOTBATCH_MAGIC + struct.pack(
            "<IQIIQ", SHOTBATCH_VERSION, self.shots, self.detectors.shape[1], self.observables.shape[1],
            self.seed & (2**64 - 1),
        )
        body = np.packbits(np.concatenate([self.detectors, self.observables], axis=1), axis=1, bitorder="little")
        return header + body.tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ShotBatch":
        if blob[:4] != SHOTBATCH_MAGIC:
            raise ValueError("not a shot batch file")
        version, shots, nd, no, seed = struct.unpack("<IQIIQ", blob[4:32])
        if version != SHOTBATCH_VERSION:
            raise ValueError(f"unsupported shot batch version {version}")
        width = (nd + no + 7) // 8
        body = np.frombuffer(blob[32:], dtype=np.uint8).reshape(shots, width)
        bits = np.unpackbits(body, axis=1, bitorder="little", count=nd + no).astype(bool)
        return cls(bits[:, :nd], bits[:, nd:], seed)

    def to_events_text(self) -> str:
        """Sparse form: one line per shot listing fired detectors (D) and flipped observables (L)."""
        lines = []
        for det, obs in zip(self.detectors, self.observables):
            items = [f"D{i}" for i in np.nonzero(det)[0]] + [f"L{i}" for i in np.nonzero(obs)[0]]
            lines.append(" ".join(items))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_events_text(cls, text: str, num_detectors: int, num_observables: int, seed: int = 0) -> "ShotBatch":
        rows = text.split("\n")
        if rows and rows[-1] == "":
            rows.pop()
        det = np.zeros((len(rows), num_detectors), dtype=bool)
        obs = np.zeros((len(rows), num_observables), dtype=bool)
        for s, line in enumerate(rows):
            for tok in line.split():
                (det if tok[0] == "D" else obs)[s, int(tok[1:])] = True
        return cls(det, obs, seed)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _bernoulli_cells(rng: np.random.Generator, p: float, cells: int) -> np.ndarray:
    """Indices in [0, cells) that fire independently with probability p."""
    if p <= 0 or cells == 0:
        return np.empty(0, dtype=np.int64)
    if p >= _DENSE_P:
        return np.flatnonzero(rng.random(cells) < p)
    out = []
    pos = -1
    expected = int(cells * p + 6 * np.sqrt(cells * p) + 16)
    while True:
        gaps = rng.geometric(p, size=expected)
        hits = pos + np.cumsum(gaps)
        out.append(hits[hits < cells])
        if hits[-1] >= cells:
            break
        pos = int(hits[-1])
    return np.concatenate(out)


class _BlockSampler:
    """Simulates one block of shots through a circuit."""

    def __init__(self, circuit: Circuit, shots: int, rng: np.random.Generator, gauge: bool = True):
        self.c = circuit
        self.shots = shots
        self.words = (shots + 63) // 64
        self.rng = rng
        self.gauge = gauge
        n = circuit.num_qubits
        self.x = np.zeros((n, self.words), dtype=np.uint64)
        self.z = np.zeros((n, self.words), dtype=np.uint64)
        self.record = np.zeros((max(circuit.num_measurements, 1), self.words), dtype=np.uint64)
        self.m = 0
        self.last_meas: dict[int, int] = {}
        tail = shots % 64
        self.tail_mask = np.uint64((1 << tail) - 1) if tail else np.uint64(2**64 - 1)

    def _random_words(self, count: int) -> np.ndarray:
        out = self.rng.integers(0, 2**64, size=(count, self.words), dtype=np.uint64, endpoint=False)
        out[:, -1] &= self.tail_mask
        return out

    def _scatter(self, cells: np.ndarray, k: int):
        """Split flat cell indices over a (k, shots) grid into (row, word, bit mask)."""
        rows = cells // self.shots
        shot = cells % self.shots
        return rows, shot >> 6, np.left_shift(np.uint64(1), (shot & 63).astype(np.uint64))

    def _flip(self, arr: np.ndarray, rows: np.ndarray, words: np.ndarray, bits: np.ndarray) -> None:
        np.bitwise_xor.at(arr, (rows, words), bits)

    def run(self) -> np.ndarray:
        for inst in self.c.instructions:
            self.step(inst)
        return self.record[: self.c.num_measurements]

    def step(self, inst: Instruction) -> None:
        kind = inst.kind
        t = np.asarray(inst.targets, dtype=np.int64)
        if kind == "Tick":
            return
        if kind == "CX":
            a, b = t[0::2], t[1::2]
            self.x[b] ^= self.x[a]
            self.z[a] ^= self.z[b]
        elif kind == "H":
            tmp = self.x[t].copy()
            self.x[t] = self.z[t]
            self.z[t] = tmp
        elif kind == "InitZ":
            self.x[t] = 0
            self.z[t] = self._random_words(len(t)) if self.gauge else 0
        elif kind == "InitX":
            self.z[t] = 0
            self.x[t] = self._random_words(len(t)) if self.gauge else 0
        elif kind in MEASURE_KINDS:
            k = len(t)
            src = self.x if kind == "MeasureZ" else self.z
            self.record[self.m:self.m + k] = src[t]
            for i, q in enumerate(inst.targets):
                self.last_meas[q] = self.m + i
            self.m += k
            if self.gauge:
                other = self.z if kind == "MeasureZ" else self.x
                other[t] ^= self._random_words(k)
        elif kind == "FlipResult":
            rows, words, bits = self._scatter(_bernoulli_cells(self.rng, inst.p, len(t) * self.shots), len(t))
            meas_rows = np.array([self.last_meas[q] for q in inst.targets], dtype=np.int64)
            if len(rows):
                self._flip(self.record, meas_rows[rows], words, bits)
        elif kind in ("XError", "ZError"):
            rows, words, bits = self._scatter(_bernoulli_cells(self.rng, inst.p, len(t) * self.shots), len(t))
            if len(rows):
                self._flip(self.x if kind == "XError" else self.z, t[rows], words, bits)
        elif kind == "Depolarize1":
            rows, words, bits = self._scatter(_bernoulli_cells(self.rng, inst.p, len(t) * self.shots), len(t))
            if len(rows):
                comp = self.rng.integers(1, 4, size=len(rows))  # 1=X, 2=Z, 3=Y
                q = t[rows]
                hx, hz = (comp & 1) == 1, (comp & 2) == 2
                self._flip(self.x, q[hx], words[hx], bits[hx])
                self._flip(self.z, q[hz], words[hz], bits[hz])
        elif kind == "Depolarize2":
            pairs = len(t) // 2
            rows, words, bits = self._scatter(_bernoulli_cells(self.rng, inst.p, pairs * self.shots), pairs)
            if len(rows):
                comp = self.rng.integers(1, 16, size=len(rows))  # 4 bits: xa, za, xb, zb
                qa, qb = t[0::2][rows], t[1::2][rows]
                for bit, arr, q in ((1, self.x, qa), (2, self.z, qa), (4, self.x, qb), (8, self.z, qb)):
                    sel = (comp & bit) != 0
                    self._flip(arr, q[sel], words[sel], bits[sel])
        else:  # pragma: no cover
            raise ValueError(f"unsupported instruction {kind}")


def _xor_rows(record: np.ndarray, groups) -> np.ndarray:
    """XOR-reduce measurement rows for each index tuple in ``groups``."""
    out = np.zeros((len(groups), record.shape[1]), dtype=np.uint64)
    by_size: dict[int, list[int]] = {}
    for i, g in enumerate(groups):
        by_size.setdefault(len(g), []).append(i)
    for size, idx in by_size.items():
        if size == 0:
            continue
        members = np.array([groups[i] for i in idx], dtype=np.int64)
        out[idx] = np.bitwise_xor.reduce(record[members], axis=1)
    return out


def _unpack(packed: np.ndarray, shots: int) -> np.ndarray:
    """(rows, words) uint64 -> (shots, rows) bool."""
    if packed.shape[0] == 0:
        return np.zeros((shots, 0), dtype=bool)
    bits = np.unpackbits(packed.view(np.uint8), axis=1, bitorder="little", count=shots)
    return bits.T.astype(bool)


@dataclass(frozen=True)
class Reference:
    detector_parity: np.ndarray
    observable_parity: np.ndarray


def reference_for(circuit: Circuit) -> Reference:
    """Noiseless detector/observable values, taken from the symbolic tableau."""
    from .tableau import run_noiseless

    _, report = run_noiseless(circuit.without_noise())
    if not report.ok:
        raise ValueError(
            f"circuit has random detectors {report.random_detectors[:5]} or observables {report.random_observables[:5]}"
        )
    return Reference(np.array(report.detector_values, dtype=bool), np.array(report.observable_values, dtype=bool))


def _sample_block(args) -> tuple[np.ndarray, np.ndarray]:
    circuit, shots, seed, block, ref = args
    sim = _BlockSampler(circuit, shots, _block_rng(seed, block))
    record = sim.run()
    det = _unpack(_xor_rows(record, circuit.detectors), shots)
    obs = _unpack(_xor_rows(record, [m for m, _ in circuit.observables]), shots)
    if ref is not None:
        det ^= ref.detector_parity[None, :]
        obs ^= ref.observable_parity[None, :]
    return det, obs


def sample(circuit: Circuit, shots: int, seed: int, *, reference: Reference | None = None,
           workers: int = 1, first_block: int = 0) -> ShotBatch:
    """Sample detector and observable outcomes.

    Shots are split into blocks of ``BLOCK_SHOTS``; block ``b`` draws from the
    stream ``(seed, first_block + b)``. ``reference`` supplies the noiseless
    parities; when omitted they are assumed to be zero (true for every memory
    experiment built by this package).
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if shots * max(circuit.num_qubits, 1) > 2**40:
        raise MemoryError("requested sample is too large")
    sizes = []
    left = shots
    while left > 0:
        sizes.append(min(BLOCK_SHOTS, left))
        left -= sizes[-1]
    jobs = [(circuit, size, seed, first_block + b, reference) for b, size in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sample_block, jobs))
    else:
        parts = [_sample_block(job) for job in jobs]
    det = np.concatenate([p[0] for p in parts], axis=0)
    obs = np.concatenate([p[1] for p in parts], axis=0)
    return ShotBatch(det, obs, seed)


def propagate_faults(circuit: Circuit, faults: list[tuple[int, str, tuple[int, ...]]]):
    """Propagate many single faults at once, one fault per shot, without gauge randomisation.

    ``faults`` lists (instruction index, Pauli string, qubits) where the Pauli
    string has one letter per qubit; the special string "M" flips the latest
    measurement of the given qubit instead. Returns packed (detectors, observables)
    flip matrices with one bit column per fault.
    """
    shots = len(faults)
    sim = _BlockSampler(circuit, shots, _block_rng(0, 0), gauge=False)
    by_inst: dict[int, list[int]] = {}
    for f, (pos, _, _) in enumerate(faults):
        by_inst.setdefault(pos, []).append(f)
    for pos, inst in enumerate(circuit.instructions):
        if not inst.is_noise:
            sim.step(inst)
        for f in by_inst.get(pos, ()):
            _, pauli, qubits = faults[f]
            word, bit = f >> 6, np.uint64(1) << np.uint64(f & 63)
            if pauli == "M":
                sim.record[sim.last_meas[qubits[0]], word] ^= bit
                continue
            for letter, q in zip(pauli, qubits):
                if letter in "XY":
                    sim.x[q, word] ^= bit
                if letter in "ZY":
                    sim.z[q, word] ^= bit
    record = sim.record[: circuit.num_measurements]
    det = _xor_rows(record, circuit.detectors)
    obs = _xor_rows(record, [m for m, _ in circuit.observables])
    return det, obs
