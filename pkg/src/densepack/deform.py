"""Code deformation plans: fusing three patches into a dense row, splitting one
back out, and shifting a whole dense row into the hallway below it.

A plan is an ordered list of steps, each of which leaves a complete
:class:`~densepack.layout.Layout` behind:

* :class:`InitQubits` prepares fresh data qubits in ``|0>`` or ``|+>``,
* :class:`StabilizerRounds` measures every check of a layout ``count`` times,
* :class:`MeasureQubits` reads data qubits out, shrinking the code. A step
  flagged ``parallel`` shares its time slot with the previous measurement.

Plans compile to ordinary circuits. Detectors are derived with the symbolic
tableau: a check compares with its previous outcome when its support did not
change, otherwise it forms a detector only if the tableau finds its value
fixed by the preceding round (for instance a boundary check extended onto
``|0>`` qubits); random first outcomes are recorded instead. Logical
observables on the final layout pick up the classical frame corrections (the
earlier outcomes their parity depends on) found the same way.

Orientation note: in these layouts the dense row's rotated codewords carry X
checks on their top and bottom sides, so the bottom of the row is extended
with ``|+>`` and the upper codewords with ``|0>``. Swapping every X and Z
label gives the equivalent dual convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import gf2
from .circuit import Circuit, NoiseModel, SlotBuilder, apply_noise, cx_layers
from .layout import (
    CodewordView, Coord, DenseRowSpec, InfeasibleGeometry, Layout, Rect, _assemble, _check_distance, _masks,
    build_dense_row, layout_to_dict, logical_basis,
)
from .schedule import Schedule, transitional_schedule
from .stabilizer.tableau import NoiselessRun, simulate

PLAN_FORMAT_VERSION = 1


# ---------------------------------------------------------------- steps

@dataclass(frozen=True)
class InitQubits:
    basis: str
    coords: tuple[Coord, ...]


@dataclass(frozen=True)
class StabilizerRounds:
    layout: Layout
    schedule: Schedule
    count: int


@dataclass(frozen=True)
class MeasureQubits:
    basis: str
    coords: tuple[Coord, ...]
    parallel: bool = False  # shares the time slot of the preceding measurement step


StepKind = Union[InitQubits, StabilizerRounds, MeasureQubits]


@dataclass(frozen=True)
class DeformationStep:
    kind: StepKind
    resulting_layout: Layout

    @property
    def name(self) -> str:
        return {InitQubits: "init", StabilizerRounds: "rounds", MeasureQubits: "measure"}[type(self.kind)]

    def to_dict(self) -> dict:
        k = self.kind
        doc: dict = {"kind": self.name}
        if isinstance(k, StabilizerRounds):
            doc["count"] = k.count
            doc["schedule"] = k.schedule.name
        else:
            doc["basis"] = k.basis
            doc["coords"] = [[q.row, q.col] for q in k.coords]
            if isinstance(k, MeasureQubits):
                doc["parallel"] = k.parallel
        doc["layout"] = layout_to_dict(self.resulting_layout)
        return doc


@dataclass(frozen=True)
class DeformationPlan:
    name: str
    d: int
    initial: Layout
    steps: tuple[DeformationStep, ...] = ()
    references: tuple[Layout, ...] = field(default=(), compare=False)  # dense layouts the schedules follow

    @property
    def total_rounds(self) -> int:
        return sum(s.kind.count for s in self.steps if isinstance(s.kind, StabilizerRounds))

    @property
    def measurement_layers(self) -> int:
        return sum(1 for s in self.steps if isinstance(s.kind, MeasureQubits) and not s.kind.parallel)

    @property
    def final(self) -> Layout:
        return self.steps[-1].resulting_layout if self.steps else self.initial

    def layouts(self) -> list[Layout]:
        return [self.initial] + [s.resulting_layout for s in self.steps]

    def to_dict(self) -> dict:
        return {
            "version": PLAN_FORMAT_VERSION,
            "name": self.name,
            "d": self.d,
            "total_rounds": self.total_rounds,
            "measurement_layers": self.measurement_layers,
            "initial": layout_to_dict(self.initial),
            "steps": [s.to_dict() for s in self.steps],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


class _PlanBuilder:
    """Accumulates steps while tracking the current footprints."""

    def __init__(self, name: str, d: int, initial: Layout, references: Sequence[Layout]):
        self.name, self.d = name, d
        self.initial = initial
        self.current = initial
        self.references = tuple(references)
        self.steps: list[DeformationStep] = []

    def _layout(self, rects: Sequence[Rect], like: Layout | None) -> Layout:
        if like is not None:
            if set(like.data_qubits) != _data_of(rects):
                raise AssertionError("target layout does not match the deformed footprints")
            return like
        return _assemble("deformation", self.d, list(rects), "basis")

    def init(self, basis: str, rects: Sequence[Rect], like: Layout | None = None) -> None:
        new = self._layout(rects, like)
        coords = tuple(sorted(new.data_qubits - self.current.data_qubits))
        if not coords:
            raise AssertionError("initialisation step adds no qubits")
        self.steps.append(DeformationStep(InitQubits(basis, coords), new))
        self.current = new

    def rounds(self, count: int) -> None:
        layout = self.current
        schedule = transitional_schedule(layout, self.references)
        self.steps.append(DeformationStep(StabilizerRounds(layout, schedule, count), layout))

    def measure(self, basis: str, coords, rects: Sequence[Rect], like: Layout | None = None,
                parallel: bool = False) -> None:
        new = self._layout(rects, like)
        coords = tuple(sorted(coords))
        if set(coords) | set(new.data_qubits) != set(self.current.data_qubits) or set(coords) & new.data_qubits:
            raise AssertionError("measured qubits must be exactly the ones the layout loses")
        self.steps.append(DeformationStep(MeasureQubits(basis, coords, parallel), new))
        self.current = new

    def plan(self) -> DeformationPlan:
        return DeformationPlan(self.name, self.d, self.initial, tuple(self.steps), self.references)


def _data_of(rects: Sequence[Rect]) -> set:
    out = set()
    for r in rects:
        out.update(r.data())
    return out


def _with_height(rect: Rect, top: int, height: int) -> Rect:
    """Same columns, orientation and global checkerboard; new vertical extent."""
    return Rect(top, rect.left, height, rect.width, rect.x_sides, rect.z_parity)


def _standalone_set(d: int, rects: Sequence[Rect]) -> Layout:
    return _assemble("standalone_grid", d, list(rects), "standalone", meta=(("n", len(rects)),))


# ---------------------------------------------------------------- fuse / split geometry

def _lower_drop(d: int) -> int:
    """Rows a rotated codeword sits below its dense position while standalone.

    Two free rows separate it from the upper patches (one for their ``|0>``
    extension, one gap), rounded up so that the standalone patch has the
    standard checkerboard.
    """
    h = (d - 1) // 2
    r0 = d + 2
    if (r0 - h) % 2:
        r0 += 1
    return r0 - h


@dataclass(frozen=True)
class _FuseGeometry:
    dense: tuple[Rect, ...]         # footprints of the dense row
    separated: tuple[Rect, ...]     # the same codewords with rotated one i standalone below
    extended: tuple[Rect, ...]      # neighbours of i grown by one row (after the |0> phase)
    fused: tuple[Rect, ...]         # rotated codeword i stretched from its dense top to its standalone bottom


def _fuse_geometry(dense_rects: Sequence[Rect], i: int, d: int) -> _FuseGeometry:
    drop = _lower_drop(d)
    lower = dense_rects[i]
    separated, extended, fused = list(dense_rects), list(dense_rects), list(dense_rects)
    separated[i] = extended[i] = _with_height(lower, lower.top + drop, d)
    fused[i] = _with_height(lower, lower.top, d + drop)
    for j in (i - 1, i + 1):
        if 0 <= j < len(dense_rects):
            grown = _with_height(dense_rects[j], dense_rects[j].top, d + 1)
            extended[j] = fused[j] = grown
    return _FuseGeometry(tuple(dense_rects), tuple(separated), tuple(extended), tuple(fused))


def plan_fuse_three(d: int) -> DeformationPlan:
    """Fuse two standard patches and a rotated patch below them into a dense row of three.

    1. ``|0>`` on the row under both upper patches, then ``d`` rounds: the
       upper patches grow across their Z boundaries (the extended Z checks are
       fixed by the ``|0>`` qubits).
    2. ``|+>`` on the column between the upper patches and the gap row above
       the lower patch, then ``d`` rounds: the new X checks on ``|+>`` qubits
       are fixed, the three patches fuse.
    3. One measurement layer removes the lower long portion (X basis, across
       the rotated patch's X boundary) and the leftover extension row (Z basis).
    """
    _check_distance(d)
    target = build_dense_row(DenseRowSpec(d, 3))
    g = _fuse_geometry(target.footprints, 1, d)
    b = _PlanBuilder("fuse_three", d, _standalone_set(d, g.separated), [target])
    b.init("Z", g.extended)
    b.rounds(d)
    b.init("X", g.fused)
    b.rounds(d)
    removed = set(b.current.data_qubits - target.data_qubits)
    lower_cols = range(2 * g.dense[1].left, 2 * (g.dense[1].right + 1))
    x_part = {q for q in removed if q.col in lower_cols}
    b.measure("Z", removed - x_part, (g.dense[0], g.fused[1], g.dense[2]))
    b.measure("X", x_part, g.dense, like=target, parallel=True)
    return b.plan()


def _dense_parts(dense_layout: Layout) -> tuple[int, int]:
    if dense_layout.kind != "dense_row":
        raise ValueError(f"expected a dense-row layout, got {dense_layout.kind!r}")
    n = dense_layout.meta_value("n", 1)
    if n < 2:
        raise ValueError("a dense row needs at least two codewords")
    return dense_layout.d, n


def extractable_codewords(n: int) -> tuple[int, ...]:
    """Rotated codewords at either end of a dense row of ``n`` codewords.

    A rotated codeword leaves the row downward through the hallway; only the
    first and the last rotated codeword qualify (interior ones are rejected).
    """
    lower = [i for i in range(n) if i % 2 == 1]
    return tuple(sorted({lower[0], lower[-1]})) if lower else ()


def plan_split(dense_layout: Layout, which: int) -> DeformationPlan:
    """Extract rotated codeword ``which`` from a dense row (the fuse run backwards).

    The measurement layer of the fuse becomes an initialisation (``|+>`` under
    the rotated codeword, ``|0>`` under its neighbours), followed by ``d``
    rounds; the two initialisation phases of the fuse become one parallel layer
    of X and Z measurements that cuts the codeword loose.
    """
    d, n = _dense_parts(dense_layout)
    if not 0 <= which < n:
        raise IndexError(f"codeword {which} out of range for a row of {n}")
    allowed = extractable_codewords(n)
    if which not in allowed:
        raise ValueError(
            f"codeword {which} cannot be extracted: only the rotated codewords {list(allowed)} at the ends "
            "of the row leave through the hallway; upper and interior codewords stay in place"
        )
    g = _fuse_geometry(dense_layout.footprints, which, d)
    b = _PlanBuilder("split", d, dense_layout, [dense_layout])
    b.init("Z", [r if k == which else g.fused[k] for k, r in enumerate(dense_layout.footprints)])
    b.init("X", g.fused)
    b.rounds(d)
    after_x = _assemble("deformation", d, list(g.extended), "basis")
    x_part = set(b.current.data_qubits - after_x.data_qubits)
    final = _assemble("split", d, list(g.separated), "basis", meta=(("n", n), ("extracted", which)))
    z_part = set(after_x.data_qubits - final.data_qubits)
    b.measure("X", x_part, g.extended, like=after_x)
    b.measure("Z", z_part, g.separated, like=final, parallel=True)
    plan = b.plan()
    # at d=3 the neighbour's extension row can reach into the next rotated codeword's corner
    if any(k != n for k in rank_bookkeeping(plan)):
        raise InfeasibleGeometry(
            f"extracting codeword {which} from a d={d} row of {n} merges codewords in an intermediate layout"
        )
    return plan


# ---------------------------------------------------------------- row shift

def row_pitch(d: int) -> int:
    """Vertical period of stacked dense rows, in data cells."""
    _check_distance(d)
    return (3 * d - 3) // 2


def alternative_route_rounds(d: int) -> int:
    """Rounds to move a row by splitting the rotated codewords off and fusing again."""
    return d + 2 * d


def plan_row_shift(dense_layout: Layout, shift: int | None = None, hallway_rows: int | None = None) -> DeformationPlan:
    """Move a whole dense row down by ``shift`` cells (the row pitch by default).

    1. ``|+>`` below the rotated codewords' bottom X boundaries, ``d`` rounds.
    2. ``|0>`` below the upper codewords' bottom Z boundaries, ``d`` rounds.
    3. X measurements deepen the notches (shortening the rotated codewords'
       vertical logical from the top).
    4. Z measurements remove the protruding top rows of the upper codewords.

    ``hallway_rows`` is the number of free cell rows below the row; ``None``
    means unbounded.
    """
    d, n = _dense_parts(dense_layout)
    s = row_pitch(d) if shift is None else shift
    if s < 1:
        raise ValueError("shift must be positive")
    if hallway_rows is not None and hallway_rows < s:
        raise InfeasibleGeometry(f"row shift by {s} needs {s} free hallway rows below the row, got {hallway_rows}")
    rects = dense_layout.footprints
    moved = tuple(_with_height(r, r.top + s, r.height) for r in rects)
    target = Layout(
        dense_layout.kind, d, moved, dense_layout.bounding_box,
        (dense_layout.origin[0] + s, dense_layout.origin[1]), dense_layout.reserved_rows, dense_layout.meta,
        dense_layout.logical_rule,
    )
    lower_grown = tuple(_with_height(r, r.top, r.height + s) if r.rotated else r for r in rects)
    all_grown = tuple(_with_height(r, r.top, r.height + s) for r in rects)
    b = _PlanBuilder("row_shift", d, dense_layout, [dense_layout, target])
    b.init("X", lower_grown)
    b.rounds(d)
    b.init("Z", all_grown)
    b.rounds(d)
    notched = tuple(m if r.rotated else g for r, m, g in zip(rects, moved, all_grown))
    after_x = _assemble("deformation", d, list(notched), "basis")
    x_part = set(b.current.data_qubits - after_x.data_qubits)
    z_part = set(after_x.data_qubits - target.data_qubits)
    b.measure("X", x_part, notched, like=after_x)
    b.measure("Z", z_part, moved, like=target)
    return b.plan()


# ---------------------------------------------------------------- compilation

@dataclass
class CompiledPlan:
    circuit: Circuit
    random_checks: list[tuple[int, Coord]]           # (step index, measure site) of random first outcomes
    corrections: list[tuple[int, ...]]               # per observable: earlier outcomes folded in
    readout: tuple[int, ...]                         # measurement indices of the final data readout
    step_of_measurement: list[int] = field(default_factory=list)


def _qubit_universe(plan: DeformationPlan) -> dict:
    coords = set()
    for lay in plan.layouts():
        coords |= set(lay.data_qubits)
    for s in plan.steps:
        if isinstance(s.kind, StabilizerRounds):
            coords |= set(s.kind.layout.measure_qubits)
    coords |= set(plan.initial.measure_qubits)
    return {q: i for i, q in enumerate(sorted(coords))}


def _prep_schedule(plan: DeformationPlan) -> Schedule:
    if plan.references:
        return transitional_schedule(plan.initial, plan.references)
    from .schedule import build_schedule
    kind = plan.initial.kind
    return build_schedule(plan.initial, "standalone" if kind.startswith("standalone") else "dense_hook_avoiding")


def compile_plan(plan: DeformationPlan, basis: str, noise: NoiseModel | None = None, *,
                 prep_rounds: int = 1) -> CompiledPlan:
    """Circuit that prepares every initial codeword in the ``basis`` +1 eigenstate,
    runs the plan and reads the final layout out transversally."""
    if basis not in ("X", "Z"):
        raise ValueError(f"basis must be X or Z, got {basis!r}")
    if prep_rounds < 1:
        raise ValueError("prep_rounds must be >= 1")
    index = _qubit_universe(plan)
    b = SlotBuilder(len(index))
    meta: list[tuple] = []  # per measurement: (tag, step, plaquette or coord, round id or None)
    round_id = 0
    pending: list[tuple[str, list[int]]] = [("InitZ" if basis == "Z" else "InitX",
                                            [index[q] for q in sorted(plan.initial.data_qubits)])]

    def emit_rounds(layout: Layout, schedule: Schedule, count: int, step: int) -> None:
        nonlocal pending, round_id
        layers = cx_layers(layout, schedule, index)
        plaqs = layout.plaquettes
        xs = [p for p in plaqs if p.basis == "X"]
        zs = [p for p in plaqs if p.basis == "Z"]
        for r in range(count):
            b.slot(pending + [("InitX", [index[p.measure] for p in xs]), ("InitZ", [index[p.measure] for p in zs])])
            pending = []
            for layer in layers:
                b.slot([("CX", layer)])
            b.slot([("MeasureX", [index[p.measure] for p in xs]), ("MeasureZ", [index[p.measure] for p in zs])])
            meta.extend(("check", step, p, round_id) for p in xs + zs)
            round_id += 1

    emit_rounds(plan.initial, _prep_schedule(plan), prep_rounds, -1)
    k = 0
    steps = plan.steps
    while k < len(steps):
        kind = steps[k].kind
        if isinstance(kind, InitQubits):
            pending.append(("InitZ" if kind.basis == "Z" else "InitX", [index[q] for q in kind.coords]))
            k += 1
        elif isinstance(kind, StabilizerRounds):
            emit_rounds(kind.layout, kind.schedule, kind.count, k)
            k += 1
        else:
            ops = []
            group = [k]
            while k + 1 < len(steps) and isinstance(steps[k + 1].kind, MeasureQubits) and steps[k + 1].kind.parallel:
                k += 1
                group.append(k)
            for j in group:
                mk = steps[j].kind
                ops.append(("MeasureZ" if mk.basis == "Z" else "MeasureX", [index[q] for q in mk.coords]))
                meta.extend(("qubit", j, q, None) for q in mk.coords)
            if pending:
                b.slot(pending)
                pending = []
            b.slot(ops)
            k += 1
    final = plan.final
    data = sorted(final.data_qubits)
    readout = b.slot(pending + [("MeasureZ" if basis == "Z" else "MeasureX", [index[q] for q in data])])
    meta.extend(("qubit", len(steps), q, None) for q in data)
    readout_of = dict(zip(data, readout))

    bare = Circuit(tuple(b.instructions), len(index))
    run = simulate(bare)
    detectors, det_coords, random_checks = _derive_detectors(run, meta, final, basis, readout_of)

    observables, corrections = [], []
    first_readout = readout[0] if readout else len(meta)
    for i, cw in enumerate(final.codewords):
        members = [readout_of[q] for q in (cw.logical_z if basis == "Z" else cw.logical_x)]
        deps = run.dependencies(members)
        fix = tuple(m for m in deps if 0 <= m < first_readout)
        corrections.append(fix)
        observables.append((tuple(sorted(set(members) ^ set(fix))), f"{basis}{i}"))

    coords = [None] * len(index)
    for q, i in index.items():
        coords[i] = (q.row, q.col)
    circuit = Circuit(tuple(b.instructions), len(index), tuple(detectors), tuple(observables), tuple(coords),
                      tuple(det_coords), prep_rounds + plan.total_rounds)
    if noise is not None and noise.p > 0:
        circuit = apply_noise(circuit, noise)
    return CompiledPlan(circuit, random_checks, corrections, tuple(readout), [m[1] for m in meta])


def _vars_mask(vec: np.ndarray) -> int:
    return int.from_bytes(np.packbits(vec[1:], bitorder="little").tobytes(), "little")


def _derive_detectors(run: NoiselessRun, meta, final: Layout, basis: str, readout_of: dict):
    """Detectors of a compiled plan, following the comparison rules in the module docstring."""
    detectors, coords, random_checks = [], [], []
    previous: dict[Coord, tuple[int, str, tuple]] = {}  # site -> (measurement, basis, support) in the last round
    recent: list[int] = []  # outcomes of the last round and of qubit measurements since

    def explain(target: np.ndarray) -> list[int]:
        elim = gf2.Eliminator()
        for m in recent:
            elim.add(_vars_mask(run.expressions[m]))
        combo = elim.solve(_vars_mask(target))
        if combo is None:
            return run.dependencies_of(target)
        return [recent[j] for j in range(len(recent)) if combo >> j & 1]

    rounds: dict[int, list[int]] = {}
    order: list[tuple[str, int]] = []
    for m, (tag, _, _, rnd) in enumerate(meta):
        if tag == "check":
            if rnd not in rounds:
                rounds[rnd] = []
                order.append(("round", rnd))
            rounds[rnd].append(m)
        else:
            order.append(("qubit", m))
    for tag, key in order:
        if tag == "qubit":
            recent.append(key)
            continue
        current = rounds[key]
        for j in current:
            _, step, plaq, _ = meta[j]
            prev = previous.get(plaq.measure)
            if prev is not None and prev[1:] == (plaq.basis, plaq.support):
                det = [prev[0], j]
            elif run.is_random[j]:
                random_checks.append((step, plaq.measure))
                continue
            else:
                det = [j] + explain(run.expressions[j])
            detectors.append(tuple(sorted(det)))
            coords.append((plaq.measure.row, plaq.measure.col, key))
        previous = {meta[j][2].measure: (j, meta[j][2].basis, meta[j][2].support) for j in current}
        recent = list(current)
    closing = len(rounds)
    for plaq in final.stabilizers(basis):
        members = [readout_of[q] for q in plaq.support]
        if not run.is_deterministic(members):
            continue
        prev = previous.get(plaq.measure)
        if prev is not None and prev[1:] == (plaq.basis, plaq.support):
            det = members + [prev[0]]
        else:
            det = members + explain(run.parity(members))
        detectors.append(tuple(sorted(det)))
        coords.append((plaq.measure.row, plaq.measure.col, closing))
    return detectors, coords, random_checks


# ---------------------------------------------------------------- verification

@dataclass
class PreservationReport:
    plan: str
    basis: str
    values: list[int]                 # final observable values after corrections
    deterministic: list[bool]
    corrections: list[int]            # number of earlier outcomes folded into each observable
    random_detectors: list[int]
    first_failing_step: int | None = None

    @property
    def ok(self) -> bool:
        return all(self.deterministic) and not any(self.values) and not self.random_detectors

    def text(self) -> str:
        lines = [f"{self.plan} basis={self.basis}: {'preserved' if self.ok else 'NOT preserved'}"]
        for i, (det, val, corr) in enumerate(zip(self.deterministic, self.values, self.corrections)):
            state = "deterministic" if det else "random"
            lines.append(f"  codeword {i}: {state}, value {val}, {corr} frame corrections")
        if self.random_detectors:
            lines.append(f"  {len(self.random_detectors)} random detectors")
        if self.first_failing_step is not None:
            lines.append(f"  first failing step: {self.first_failing_step}")
        return "\n".join(lines) + "\n"


def _check(plan: DeformationPlan, basis: str) -> tuple[CompiledPlan, NoiselessRun, list[bool], list[int]]:
    compiled = compile_plan(plan, basis)
    run = simulate(compiled.circuit)
    det = [run.is_deterministic(members) for members, _ in compiled.circuit.observables]
    vals = [run.value(members) for members, _ in compiled.circuit.observables]
    return compiled, run, det, vals


def _prefix_ok(plan: DeformationPlan, upto: int, basis: str) -> bool:
    """Whether every ``basis``-type logical of the layout after step ``upto`` is still fixed."""
    prefix = DeformationPlan(plan.name, plan.d, plan.initial, plan.steps[: upto + 1], plan.references)
    lay = prefix.final
    basis_ops = [x if basis == "X" else z for x, z in logical_basis(lay)]
    probe = Layout(lay.kind, lay.d, lay.footprints, lay.bounding_box, lay.origin, lay.reserved_rows, lay.meta,
                   "explicit", tuple(_views(basis_ops, basis)))
    prefix = DeformationPlan(plan.name, plan.d, plan.initial, plan.steps[:upto] + (
        _replace_layout(plan.steps[upto], probe),), plan.references)
    compiled = compile_plan(prefix, basis)
    run = simulate(compiled.circuit)
    return all(run.is_deterministic(members) for members, _ in compiled.circuit.observables)


def _views(ops, basis):
    for i, op in enumerate(ops):
        yield CodewordView(i, op if basis == "X" else frozenset(), op if basis == "Z" else frozenset())


def _replace_layout(step: DeformationStep, layout: Layout) -> DeformationStep:
    kind = step.kind
    if isinstance(kind, StabilizerRounds):
        kind = StabilizerRounds(layout, kind.schedule, kind.count)
    return DeformationStep(kind, layout)


def verify_preservation(plan: DeformationPlan, basis: str) -> PreservationReport:
    """Noiseless tableau check that every codeword's ``basis`` logical survives the plan."""
    compiled, run, det, vals = _check(plan, basis)
    random_dets = [k for k, members in enumerate(compiled.circuit.detectors) if not run.is_deterministic(members)]
    report = PreservationReport(plan.name, basis, vals, det, [len(c) for c in compiled.corrections], random_dets)
    if not report.ok:
        for k, step in enumerate(plan.steps):
            if isinstance(step.kind, InitQubits):
                continue
            if not _prefix_ok(plan, k, basis):
                report.first_failing_step = k
                break
    return report


def rank_bookkeeping(plan: DeformationPlan) -> list[int]:
    """Logical qubit count (data qubits minus independent checks) of every stabilised layout.

    A layout left by an initialisation that is immediately followed by another
    one is never measured, so it is skipped.
    """
    out = []
    steps = plan.steps
    skip = {k + 1 for k in range(len(steps) - 1)
            if isinstance(steps[k].kind, InitQubits) and isinstance(steps[k + 1].kind, InitQubits)}
    for k, lay in enumerate(plan.layouts()):
        if k in skip:
            continue
        xs = [_masks(lay, p.support) for p in lay.stabilizers("X")]
        zs = [_masks(lay, p.support) for p in lay.stabilizers("Z")]
        out.append(len(lay.data_qubits) - gf2.rank(xs) - gf2.rank(zs))
    return out


def identity_plan(layout: Layout) -> DeformationPlan:
    return DeformationPlan("identity", layout.d, layout, (), (layout,) if layout.kind == "dense_row" else ())


__all__ = [
    "InitQubits", "StabilizerRounds", "MeasureQubits", "DeformationStep", "DeformationPlan",
    "plan_fuse_three", "plan_split", "plan_row_shift", "verify_preservation", "compile_plan",
    "CompiledPlan", "PreservationReport", "rank_bookkeeping", "row_pitch", "alternative_route_rounds",
    "extractable_codewords", "identity_plan",
]
