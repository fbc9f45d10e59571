"""Monte Carlo logical error rates with stopping rules and confidence intervals."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..circuit import Circuit
from ..stabilizer.frame import BLOCK_SHOTS, sample
from .dem import extract_dem
from .graph import DecodingGraph
from .matching import BatchMatcher, UnionFindDecoder, mwpm_decode

CHUNK_BLOCKS = 8  # shot blocks sampled and decoded together

RECORD_COLUMNS = ("d", "n", "schedule", "basis", "p", "rounds", "shots", "errors", "P", "p_round", "ci_low", "ci_high")


def wilson_interval(errors: int, shots: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if shots <= 0:
        return 0.0, 1.0
    phat = errors / shots
    denom = 1 + z * z / shots
    centre = (phat + z * z / (2 * shots)) / denom
    half = z * math.sqrt(phat * (1 - phat) / shots + z * z / (4 * shots * shots)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == shots else min(1.0, centre + half)
    return lo, hi


def per_round(P: float, rounds: int) -> float:
    """Per-round failure rate assuming independent rounds: 1 - (1 - P)^(1/R)."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    return 1.0 - (1.0 - P) ** (1.0 / rounds)


@dataclass(frozen=True)
class RunRecord:
    d: int
    n: int
    schedule: str
    basis: str
    p: float
    rounds: int
    shots: int
    errors: int
    seed: int = 0
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0 <= self.errors <= self.shots:
            raise ValueError("errors must lie in [0, shots]")

    @property
    def P(self) -> float:
        return self.errors / self.shots if self.shots else 0.0

    @property
    def p_round(self) -> float:
        return per_round(self.P, self.rounds)

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.errors, self.shots)

    @property
    def stderr(self) -> float:
        P = self.P
        return math.sqrt(max(P * (1 - P), 1.0 / self.shots) / self.shots) if self.shots else 1.0

    def merge(self, other: "RunRecord") -> "RunRecord":
        """Pool two runs of the same experiment (associative and commutative in shots/errors)."""
        keys = ("d", "n", "schedule", "basis", "p", "rounds")
        if any(getattr(self, k) != getattr(other, k) for k in keys):
            raise ValueError("can only merge runs of the same experiment")
        return replace(self, shots=self.shots + other.shots, errors=self.errors + other.errors,
                       wall_time=self.wall_time + other.wall_time)

    def row(self) -> dict:
        lo, hi = self.ci
        return {
            "d": self.d, "n": self.n, "schedule": self.schedule, "basis": self.basis, "p": self.p,
            "rounds": self.rounds, "shots": self.shots, "errors": self.errors, "P": self.P,
            "p_round": self.p_round, "ci_low": lo, "ci_high": hi,
        }

    def to_json(self) -> str:
        doc = self.row()
        doc.update(seed=self.seed, wall_time=round(self.wall_time, 3), **self.extra)
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        doc = json.loads(text)
        names = {f.name for f in fields(cls)} - {"extra"}
        return cls(**{k: doc[k] for k in names if k in doc})


def records_to_csv(records, columns=RECORD_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in records:
        w.writerow(r.row() if isinstance(r, RunRecord) else r)
    return buf.getvalue()


def separation_sigma(a: RunRecord, b: RunRecord) -> float:
    """(P_a - P_b) in units of the combined binomial standard error."""
    return (a.P - b.P) / math.hypot(a.stderr, b.stderr)


class Decoder:
    """Predicts observable flips for batches of detector samples."""

    def __init__(self, circuit: Circuit, method: str = "pymatching"):
        self.dem = extract_dem(circuit)
        self.graph = DecodingGraph.from_dem(self.dem)
        self.method = method
        if method == "pymatching":
            self._batch = BatchMatcher(self.graph)
        elif method == "union_find":
            self._uf = UnionFindDecoder(self.graph)
        elif method != "mwpm":
            raise ValueError(f"unknown decoder {method!r}")

    def predict(self, detectors: np.ndarray) -> np.ndarray:
        if self.method == "pymatching":
            return self._batch.decode_batch(detectors)
        no = self.graph.num_observables
        out = np.zeros((detectors.shape[0], no), dtype=bool)
        for s, row in enumerate(detectors):
            events = np.flatnonzero(row)
            mask = self._uf.decode(events) if self.method == "union_find" else mwpm_decode(self.graph, events).observables
            out[s] = [(mask >> i) & 1 for i in range(no)]
        return out


def count_failures(circuit: Circuit, decoder: Decoder, shots: int, seed: int, *,
                   observables=None, max_errors: int | None = None, workers: int = 1) -> tuple[int, int]:
    """(shots used, failures) sampling in chunks until ``shots`` or ``max_errors`` is reached.

    A shot fails when any selected observable is predicted wrongly. Chunks are
    whole shot blocks taken from consecutive positions of one seed stream, so
    the result does not depend on the chunk size.
    """
    chunk = CHUNK_BLOCKS * BLOCK_SHOTS
    used = failures = 0
    block = 0
    sel = slice(None) if observables is None else list(observables)
    while used < shots and (max_errors is None or failures < max_errors):
        take = min(chunk, shots - used)
        batch = sample(circuit, take, seed, first_block=block, workers=workers)
        pred = decoder.predict(batch.detectors)
        wrong = (pred[:, sel] != batch.observables[:, sel]).any(axis=1)
        failures += int(wrong.sum())
        used += take
        block += (take + BLOCK_SHOTS - 1) // BLOCK_SHOTS
    return used, failures


def logical_error_rate(circuit: Circuit, shots: int, seed: int, max_errors: int | None = None, *,
                       observables=None, decoder: Decoder | str = "pymatching", meta: dict | None = None,
                       workers: int = 1) -> RunRecord:
    """Sample, decode and count logical failures; see :func:`count_failures` for the stopping rule."""
    start = time.perf_counter()
    meta = dict(meta or {})
    if not circuit.is_noisy:
        used, failures = shots, 0
    else:
        dec = decoder if isinstance(decoder, Decoder) else Decoder(circuit, decoder)
        used, failures = count_failures(circuit, dec, shots, seed, observables=observables,
                                        max_errors=max_errors, workers=workers)
    return RunRecord(
        d=meta.pop("d", 0), n=meta.pop("n", 1), schedule=meta.pop("schedule", ""), basis=meta.pop("basis", ""),
        p=meta.pop("p", 0.0), rounds=circuit.rounds, shots=used, errors=failures, seed=seed,
        wall_time=time.perf_counter() - start, extra=meta,
    )


__all__ = [
    "RunRecord", "Decoder", "logical_error_rate", "count_failures", "wilson_interval", "per_round",
    "records_to_csv", "separation_sigma",
]
