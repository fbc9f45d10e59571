"""Detector error models extracted by single-fault propagation.

Every Pauli component of every noise channel is injected on its own and pushed
through the rest of the circuit with the bit-packed frame engine (one fault per
shot column). Faults with identical symptoms are merged by XOR-probability and
faults touching more than two detectors are split into pieces that already
occur as graphlike faults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..circuit import Circuit
from ..stabilizer.frame import propagate_faults

DEM_FORMAT_VERSION = 1

_PAULI1 = ("X", "Y", "Z")
_PAULI2 = tuple(a + b for a in "IXYZ" for b in "IXYZ" if a + b != "II")


def xor_prob(p1: float, p2: float) -> float:
    """Probability that exactly one of two independent events happens."""
    return p1 * (1 - p2) + p2 * (1 - p1)


@dataclass(frozen=True)
class Fault:
    probability: float
    detectors: tuple[int, ...]
    observables: int  # bitmask over circuit observables

    def __post_init__(self):
        if not 0.0 < self.probability < 1.0:
            raise ValueError(f"fault probability must lie in (0, 1), got {self.probability}")

    @property
    def is_graphlike(self) -> bool:
        return len(self.detectors) <= 2


@dataclass
class DetectorErrorModel:
    num_detectors: int
    num_observables: int
    faults: list[Fault]
    # symptoms that could not be split into graphlike pieces: (detectors, observables, probability)
    undecomposed: list[tuple[tuple[int, ...], int, float]] = field(default_factory=list)
    # faults flipping an observable without tripping any detector
    undetectable: list[tuple[int, float]] = field(default_factory=list)

    @property
    def is_graphlike(self) -> bool:
        return all(f.is_graphlike for f in self.faults)

    def to_text(self) -> str:
        lines = [f"# densepack detector error model v{DEM_FORMAT_VERSION}",
                 f"DETECTORS {self.num_detectors}", f"OBSERVABLES {self.num_observables}"]
        for f in self.faults:
            dets = " ".join(f"D{d}" for d in f.detectors)
            obs = " ".join(f"L{i}" for i in range(self.num_observables) if f.observables >> i & 1)
            lines.append(f"error({f.probability!r}) {dets} {obs}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DetectorErrorModel":
        nd = no = None
        faults = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, *rest = line.split()
            if head == "DETECTORS":
                nd = int(rest[0])
            elif head == "OBSERVABLES":
                no = int(rest[0])
            elif head.startswith("error(") and head.endswith(")"):
                p = float(head[6:-1])
                dets = tuple(sorted(int(t[1:]) for t in rest if t[0] == "D"))
                mask = 0
                for t in rest:
                    if t[0] == "L":
                        mask |= 1 << int(t[1:])
                faults.append(Fault(p, dets, mask))
            else:
                raise ValueError(f"line {lineno}: cannot parse {raw!r}")
        if nd is None or no is None:
            raise ValueError("missing DETECTORS or OBSERVABLES header")
        return cls(nd, no, faults)


def fault_locations(circuit: Circuit) -> list[tuple[int, str, tuple[int, ...], float]]:
    """Every elementary fault of the noise model as (instruction index, Pauli, qubits, probability).

    The Pauli "M" stands for a flipped measurement result.
    """
    out = []
    for pos, inst in enumerate(circuit.instructions):
        kind, p = inst.kind, inst.p
        if not inst.is_noise or p <= 0:
            continue
        if kind == "Depolarize1":
            for q in inst.targets:
                out.extend((pos, P, (q,), p / 3) for P in _PAULI1)
        elif kind == "Depolarize2":
            for a, b in inst.pairs():
                out.extend((pos, P, (a, b), p / 15) for P in _PAULI2)
        elif kind == "XError":
            out.extend((pos, "X", (q,), p) for q in inst.targets)
        elif kind == "ZError":
            out.extend((pos, "Z", (q,), p) for q in inst.targets)
        elif kind == "FlipResult":
            out.extend((pos, "M", (q,), p) for q in inst.targets)
    return out


def fault_symptoms(circuit: Circuit, locations, chunk: int = 1 << 16):
    """(detector tuple, observable mask) for each fault location."""
    symptoms = []
    for start in range(0, len(locations), chunk):
        part = locations[start:start + chunk]
        det, obs = propagate_faults(circuit, [(pos, P, qs) for pos, P, qs, _ in part])
        k = len(part)
        det_bits = _unpack_cols(det, k)
        obs_bits = _unpack_cols(obs, k)
        weights = 1 << np.arange(obs_bits.shape[0], dtype=np.int64)
        masks = (obs_bits.T.astype(np.int64) * weights).sum(axis=1) if obs_bits.shape[0] else np.zeros(k, np.int64)
        cols = det_bits.T
        for j in range(k):
            symptoms.append((tuple(np.flatnonzero(cols[j]).tolist()), int(masks[j])))
    return symptoms


def _unpack_cols(packed: np.ndarray, count: int) -> np.ndarray:
    if packed.shape[0] == 0:
        return np.zeros((0, count), dtype=bool)
    return np.unpackbits(packed.view(np.uint8), axis=1, bitorder="little", count=count).astype(bool)


def _decompose(dets: tuple[int, ...], obs: int, known: dict[tuple[int, ...], dict[int, float]]):
    """Split a symptom into known graphlike pieces whose observables XOR to ``obs``.

    Prefers the fewest pieces, then the most likely pieces. Returns a list of
    (detectors, observables) or None.
    """
    best = None

    def rec(rest: tuple[int, ...], acc: list, acc_obs: int, score: float):
        nonlocal best
        if not rest:
            if acc_obs == obs:
                key = (len(acc), -score)
                if best is None or key < best[0]:
                    best = (key, list(acc))
            return
        if best is not None and len(acc) >= best[0][0]:
            return
        first, others = rest[0], rest[1:]
        options = [((first,), others)]
        options += [((first, o), tuple(x for x in others if x != o)) for o in others]
        for piece, remaining in options:
            for piece_obs, p in known.get(piece, {}).items():
                acc.append((piece, piece_obs))
                rec(remaining, acc, acc_obs ^ piece_obs, score + np.log(p))
                acc.pop()

    rec(tuple(sorted(dets)), [], 0, 0.0)
    return None if best is None else best[1]


def extract_dem(circuit: Circuit, *, decompose: bool = True) -> DetectorErrorModel:
    """Detector error model of a noisy circuit.

    Faults with more than two detectors are split into graphlike pieces, each
    piece carrying the full probability of the original fault (the usual
    graphlike approximation). Pieces must already exist as graphlike faults.
    """
    if not circuit.is_noisy:
        raise ValueError("circuit has no noise channels")
    locations = fault_locations(circuit)
    symptoms = fault_symptoms(circuit, locations)
    merged: dict[tuple[tuple[int, ...], int], float] = {}
    undetectable: dict[int, float] = {}
    for (_, _, _, p), (dets, obs) in zip(locations, symptoms):
        if not dets:
            if obs:
                undetectable[obs] = xor_prob(undetectable.get(obs, 0.0), p)
            continue
        key = (dets, obs)
        merged[key] = xor_prob(merged.get(key, 0.0), p)
    known: dict[tuple[int, ...], dict[int, float]] = {}
    for (dets, obs), p in merged.items():
        if len(dets) <= 2:
            known.setdefault(dets, {})[obs] = p
    faults: dict[tuple[tuple[int, ...], int], float] = {}
    undecomposed = []
    for (dets, obs), p in merged.items():
        if len(dets) <= 2 or not decompose:
            faults[(dets, obs)] = xor_prob(faults.get((dets, obs), 0.0), p)
            continue
        pieces = _decompose(dets, obs, known)
        if pieces is None:
            undecomposed.append((dets, obs, p))
            continue
        for piece in pieces:
            faults[piece] = xor_prob(faults.get(piece, 0.0), p)
    fault_list = [Fault(p, dets, obs) for (dets, obs), p in sorted(faults.items()) if p > 0]
    return DetectorErrorModel(
        len(circuit.detectors), len(circuit.observables), fault_list, undecomposed, sorted(undetectable.items())
    )
