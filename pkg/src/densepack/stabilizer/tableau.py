"""Stabilizer tableau simulation with symbolic measurement outcomes.

Every random measurement outcome becomes a fresh binary variable, and every
sign in the tableau is tracked as an affine function of those variables (a
bit-vector whose entry 0 is the constant term). Deterministic measurements then
come out as affine expressions, which makes it possible to tell deterministic
parities from random ones and to express a random parity as the set of
earlier outcomes that fixes it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..circuit import MEASURE_KINDS, Circuit, Instruction


def _phase_exponent(x1, z1, x2, z2) -> int:
    """Power of i picked up by multiplying Pauli (x1, z1) by (x2, z2), summed over qubits."""
    x1 = x1.astype(np.int8)
    z1 = z1.astype(np.int8)
    x2 = x2.astype(np.int8)
    z2 = z2.astype(np.int8)
    g = np.where(
        (x1 == 1) & (z1 == 1), z2 - x2,
        np.where((x1 == 1), z2 * (2 * x2 - 1), np.where(z1 == 1, x2 * (1 - 2 * z2), 0)),
    )
    return int(g.sum())


class SymbolicTableau:
    """Aaronson-Gottesman tableau (destabilizers then stabilizers) with affine sign tracking."""

    def __init__(self, num_qubits: int, max_vars: int):
        n = num_qubits
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.r = np.zeros((2 * n, max_vars + 1), dtype=np.uint8)
        for i in range(n):
            self.x[i, i] = 1
            self.z[n + i, i] = 1
        self.num_vars = 0

    # -- gates

    def h(self, a: int) -> None:
        self.r[:, 0] ^= self.x[:, a] & self.z[:, a]
        self.x[:, a], self.z[:, a] = self.z[:, a].copy(), self.x[:, a].copy()

    def cx(self, a: int, b: int) -> None:
        xa, zb = self.x[:, a], self.z[:, b]
        self.r[:, 0] ^= xa & zb & (self.x[:, b] ^ self.z[:, a] ^ 1)
        self.x[:, b] ^= xa
        self.z[:, a] ^= zb

    def x_gate(self, a: int) -> None:
        self.r[:, 0] ^= self.z[:, a]

    def z_gate(self, a: int) -> None:
        self.r[:, 0] ^= self.x[:, a]

    # -- row products

    def _rowsum(self, h: int, i: int) -> None:
        e = _phase_exponent(self.x[i], self.z[i], self.x[h], self.z[h])
        e += 2 * int(self.r[h, 0]) + 2 * int(self.r[i, 0])
        self.r[h] ^= self.r[i]
        self.r[h, 0] = (e % 4) // 2
        # the variable part of the sign adds linearly; the constant was recomputed above
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]

    def _rowsum_into(self, sx, sz, sr, i: int):
        e = _phase_exponent(self.x[i], self.z[i], sx, sz) + 2 * int(sr[0]) + 2 * int(self.r[i, 0])
        sr = sr ^ self.r[i]
        sr[0] = (e % 4) // 2
        return sx ^ self.x[i], sz ^ self.z[i], sr

    # -- measurement

    def measure_z(self, a: int) -> tuple[np.ndarray, bool]:
        """Measure Z on qubit a; returns (affine outcome vector, is_random)."""
        n = self.n
        stab_hits = np.nonzero(self.x[n:, a])[0]
        if len(stab_hits):
            p = n + int(stab_hits[0])
            for row in np.nonzero(self.x[:, a])[0]:
                row = int(row)
                if row != p:
                    self._rowsum(row, p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            self.x[p] = 0
            self.z[p] = 0
            self.z[p, a] = 1
            self.r[p] = 0
            self.num_vars += 1
            if self.num_vars >= self.r.shape[1]:
                raise RuntimeError("symbolic variable budget exhausted")
            self.r[p, self.num_vars] = 1
            return self.r[p].copy(), True
        sx = np.zeros(n, dtype=np.uint8)
        sz = np.zeros(n, dtype=np.uint8)
        sr = np.zeros(self.r.shape[1], dtype=np.uint8)
        for i in np.nonzero(self.x[:n, a])[0]:
            sx, sz, sr = self._rowsum_into(sx, sz, sr, n + int(i))
        return sr, False

    def reset_z(self, a: int) -> None:
        """Measure, then apply X conditioned (symbolically) on the outcome."""
        vec, _ = self.measure_z(a)
        n = self.n
        rows = n + np.nonzero(self.z[n:, a])[0]
        self.r[rows] ^= vec[None, :]


@dataclass
class NoiselessRun:
    """Outcome of simulating a circuit without noise.

    ``expressions[m]`` is the affine vector of measurement m (entry 0 constant,
    entry k the k-th random outcome). ``random_of[k-1]`` is the measurement index
    that introduced variable k.
    """

    expressions: np.ndarray
    is_random: np.ndarray
    random_of: list[int]

    def parity(self, members) -> np.ndarray:
        out = np.zeros(self.expressions.shape[1], dtype=np.uint8)
        for m in members:
            out ^= self.expressions[m]
        return out

    def is_deterministic(self, members) -> bool:
        return not self.parity(members)[1:].any()

    def value(self, members) -> int:
        return int(self.parity(members)[0])

    def reference_sample(self) -> np.ndarray:
        """Measurement record with every random outcome set to 0."""
        return self.expressions[:, 0].copy()

    def dependencies(self, members) -> list[int]:
        """Measurements whose random outcomes the parity depends on."""
        return self.dependencies_of(self.parity(members))

    def dependencies_of(self, vec: np.ndarray) -> list[int]:
        return [self.random_of[k - 1] for k in np.nonzero(vec[1:])[0] + 1]


@dataclass
class DeterminismReport:
    random_detectors: list[int]
    random_observables: list[int]
    detector_values: list[int]
    observable_values: list[int]

    @property
    def ok(self) -> bool:
        return not self.random_detectors and not self.random_observables


def simulate(circuit: Circuit) -> NoiselessRun:
    """Run the noiseless part of a circuit through the symbolic tableau."""
    m_total = circuit.num_measurements
    inits = sum(len(i.targets) for i in circuit.instructions if i.kind in ("InitZ", "InitX"))
    tab = SymbolicTableau(circuit.num_qubits, m_total + inits + 1)
    exprs = np.zeros((m_total, m_total + inits + 2), dtype=np.uint8)
    is_random = np.zeros(m_total, dtype=bool)
    random_of: list[int] = []
    m = 0
    for inst in circuit.instructions:
        kind = inst.kind
        if inst.is_noise or kind == "Tick":
            continue
        if kind == "CX":
            for a, b in inst.pairs():
                tab.cx(a, b)
        elif kind == "H":
            for a in inst.targets:
                tab.h(a)
        elif kind in ("InitZ", "InitX"):
            for a in inst.targets:
                before = tab.num_vars
                tab.reset_z(a)
                # a reset's internal measurement is not a circuit measurement
                random_of.extend([-1] * (tab.num_vars - before))
                if kind == "InitX":
                    tab.h(a)
        elif kind in MEASURE_KINDS:
            for a in inst.targets:
                if kind == "MeasureX":
                    tab.h(a)
                before = tab.num_vars
                vec, rnd = tab.measure_z(a)
                if kind == "MeasureX":
                    tab.h(a)
                if tab.num_vars > before:
                    random_of.append(m)
                exprs[m, : vec.shape[0]] = vec
                is_random[m] = rnd
                m += 1
        else:  # pragma: no cover
            raise ValueError(f"unsupported instruction {kind}")
    return NoiselessRun(exprs[:, : tab.num_vars + 1], is_random, random_of)


def run_noiseless(circuit: Circuit) -> tuple[NoiselessRun, DeterminismReport]:
    """Simulate without noise and report which detectors/observables are deterministic."""
    run = simulate(circuit)
    rd = [k for k, det in enumerate(circuit.detectors) if not run.is_deterministic(det)]
    ro = [k for k, (members, _) in enumerate(circuit.observables) if not run.is_deterministic(members)]
    report = DeterminismReport(
        rd, ro,
        [run.value(det) for det in circuit.detectors],
        [run.value(members) for members, _ in circuit.observables],
    )
    return run, report


def conjugate_pauli(circuit_ops: list[Instruction], n: int, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Heisenberg-propagate a Pauli (up to sign) through Clifford gates by tableau conjugation.

    Builds a tableau whose single stabilizer row is the Pauli and applies the gates.
    Used as an oracle for frame propagation.
    """
    tab = SymbolicTableau(n, 1)
    tab.x[:] = 0
    tab.z[:] = 0
    tab.x[0] = x
    tab.z[0] = z
    for inst in circuit_ops:
        if inst.kind == "CX":
            for a, b in inst.pairs():
                tab.cx(a, b)
        elif inst.kind == "H":
            for a in inst.targets:
                tab.h(a)
        else:
            raise ValueError("only Clifford gates are supported")
    return tab.x[0].copy(), tab.z[0].copy()
