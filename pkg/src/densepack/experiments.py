"""Memory experiments named by (d, n, schedule, basis, p), as run by sweeps and tests."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .circuit import Circuit, NoiseModel, memory_experiment
from .layout import DenseRowSpec, Layout, PatchSpec, build_dense_row, build_standalone_patch
from .schedule import Schedule, build_schedule

SCHEDULES = ("standalone", "dense_hook_avoiding", "dense_hook_prone")
DEFAULT_DENSE_N = 5


@dataclass(frozen=True)
class ExperimentSpec:
    d: int
    schedule: str
    basis: str
    p: float
    n: int = DEFAULT_DENSE_N
    rounds_factor: int = 3

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}; expected one of {SCHEDULES}")
        if self.basis not in ("X", "Z"):
            raise ValueError(f"basis must be X or Z, got {self.basis!r}")
        if self.rounds_factor < 1:
            raise ValueError("rounds_factor must be >= 1")
        if self.schedule != "standalone" and self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def codewords(self) -> int:
        return 1 if self.schedule == "standalone" else self.n

    @property
    def rounds(self) -> int:
        return self.rounds_factor * self.d

    @property
    def observed(self) -> int:
        """Index of the codeword whose observable is scored (the central one in a dense row)."""
        return (self.codewords - 1) // 2

    def meta(self) -> dict:
        return {"d": self.d, "n": self.codewords, "schedule": self.schedule, "basis": self.basis, "p": self.p}


@lru_cache(maxsize=64)
def layout_and_schedule(d: int, schedule: str, n: int) -> tuple[Layout, Schedule]:
    if schedule == "standalone":
        layout = build_standalone_patch(PatchSpec(d))
    else:
        layout = build_dense_row(DenseRowSpec(d, n))
    return layout, build_schedule(layout, schedule)


def build_experiment(spec: ExperimentSpec) -> Circuit:
    """Noisy memory circuit with one observable: the scored codeword's logical operator in ``basis``."""
    layout, sched = layout_and_schedule(spec.d, spec.schedule, spec.codewords)
    noise = NoiseModel(spec.p) if spec.p > 0 else None
    return memory_experiment(layout, sched, spec.basis, spec.rounds, noise, observables=[spec.observed])
