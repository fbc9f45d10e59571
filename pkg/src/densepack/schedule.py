"""CNOT time-slot assignment for syndrome extraction and its validation.

A plaquette's four CNOTs follow one of four corner orders (patterns A-D). In a
4-slot schedule patterns A and B use slots 1-4; in the 5-slot dense schedule
A and B use slots (1, 3, 4, 5), C uses (1, 2, 3, 5) and D uses (1, 2, 4, 5).
Plaquettes with fewer than four qubits keep the slots of the corners they have.

The last two CNOTs of a weight-4 plaquette decide its hook: A and C end on the
western column (a vertical pair), B and D on the southern row (a horizontal pair).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .circuit import Instruction
from .layout import Coord, Layout, LogicalGraph, Plaquette
from .regions import default_region_map, codeword_anchors

CORNER_ORDERS = {
    "A": ("NE", "SE", "NW", "SW"),
    "B": ("NE", "NW", "SE", "SW"),
    "C": ("NE", "SE", "NW", "SW"),
    "D": ("NE", "NW", "SE", "SW"),
}
SLOTS_4 = {"A": (1, 2, 3, 4), "B": (1, 2, 3, 4)}
SLOTS_5 = {"A": (1, 3, 4, 5), "B": (1, 3, 4, 5), "C": (1, 2, 3, 5), "D": (1, 2, 4, 5)}

SCHEDULE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Pattern:
    id: str
    order: tuple[str, ...]
    slots: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.order) != sorted(("NW", "NE", "SW", "SE")):
            raise ValueError(f"pattern order must be a permutation of the four corners: {self.order}")
        if len(self.slots) != 4 or list(self.slots) != sorted(set(self.slots)):
            raise ValueError("pattern slots must be strictly increasing")

    def slot_of(self, corner: str) -> int:
        return self.slots[self.order.index(corner)]


def pattern(pid: str, steps: int) -> Pattern:
    table = SLOTS_4 if steps == 4 else SLOTS_5
    if pid not in table:
        raise ValueError(f"pattern {pid} is not defined for a {steps}-step schedule")
    return Pattern(pid, CORNER_ORDERS[pid], table[pid])


class IncompleteSchedule(ValueError):
    """The schedule does not assign a slot to every (plaquette, data qubit) pair."""


@dataclass(frozen=True)
class Schedule:
    name: str
    T: int
    slots: dict  # (measure Coord, data Coord) -> slot in 1..T
    patterns: dict = field(default_factory=dict)  # measure Coord -> pattern id

    def slot_of(self, measure: Coord, q: Coord) -> int:
        return self.slots[(measure, q)]

    def order_of(self, plaq: Plaquette) -> list[Coord]:
        return sorted(plaq.support, key=lambda q: self.slots[(plaq.measure, q)])

    def require_complete(self, layout: Layout) -> None:
        missing = [
            (p.measure, q) for p in layout.plaquettes for q in p.support if (p.measure, q) not in self.slots
        ]
        if missing:
            m, q = missing[0]
            raise IncompleteSchedule(f"{len(missing)} CNOTs unscheduled, e.g. plaquette {tuple(m)} qubit {tuple(q)}")
        extra = set(self.slots) - {(p.measure, q) for p in layout.plaquettes for q in p.support}
        if extra:
            raise IncompleteSchedule(f"{len(extra)} slots refer to CNOTs the layout does not have")
        bad = [s for s in self.slots.values() if not 1 <= s <= self.T]
        if bad:
            raise IncompleteSchedule(f"slot {bad[0]} outside 1..{self.T}")

    def to_dict(self, layout: Layout) -> dict:
        entries = []
        for p in layout.plaquettes:
            entries.append({
                "measure": [p.measure.row, p.measure.col],
                "basis": p.basis,
                "pattern": self.patterns.get(p.measure),
                "cnots": [[self.slots[(p.measure, q)], [q.row, q.col]] for q in self.order_of(p)],
            })
        return {"version": SCHEDULE_FORMAT_VERSION, "name": self.name, "T": self.T, "plaquettes": entries}

    def to_json(self, layout: Layout) -> str:
        return json.dumps(self.to_dict(layout), indent=1, sort_keys=True)


def schedule_from_dict(doc: dict) -> Schedule:
    if doc.get("version") != SCHEDULE_FORMAT_VERSION:
        raise ValueError(f"unsupported schedule version {doc.get('version')!r}")
    slots, patterns = {}, {}
    for entry in doc["plaquettes"]:
        m = Coord(*entry["measure"])
        patterns[m] = entry["pattern"]
        for slot, q in entry["cnots"]:
            slots[(m, Coord(*q))] = slot
    return Schedule(doc["name"], doc["T"], slots, patterns)


def assign(layout: Layout, choose, steps: int, name: str) -> Schedule:
    """Schedule in which ``choose(plaquette)`` names the pattern of every plaquette."""
    slots, patterns = {}, {}
    for plaq in layout.plaquettes:
        pid = choose(plaq)
        pat = pattern(pid, steps)
        patterns[plaq.measure] = pid
        for q in plaq.support:
            slots[(plaq.measure, q)] = pat.slot_of(plaq.corner_of(q))
    return Schedule(name, steps, slots, patterns)


def standalone_schedule(layout: Layout) -> Schedule:
    """Four-step schedule: X checks follow A, Z checks follow B."""
    if layout.kind not in ("standalone", "standalone_grid"):
        raise ValueError(f"standalone schedule needs a standalone layout, got {layout.kind!r}")
    return assign(layout, lambda p: "A" if p.basis == "X" else "B", 4, "standalone")


def _require_dense_row(layout: Layout) -> None:
    if layout.kind != "dense_row":
        raise ValueError(f"dense schedules need a dense-row layout, got {layout.kind!r}")


def dense_hook_prone_schedule(layout: Layout) -> Schedule:
    """Four-step schedule with X checks on B and Z checks on A everywhere."""
    _require_dense_row(layout)
    return assign(layout, lambda p: "B" if p.basis == "X" else "A", 4, "dense_hook_prone")


def zone_function(layout: Layout, region_map=None):
    rmap = region_map or default_region_map()
    anchors = codeword_anchors(layout.footprints)
    return lambda plaq: rmap.zone_of(plaq.measure, anchors, layout.d)


def dense_hook_avoiding_schedule(layout: Layout, region_map=None) -> Schedule:
    """Five-step schedule whose pattern per plaquette comes from the zone map."""
    _require_dense_row(layout)
    zone = zone_function(layout, region_map)
    return assign(layout, lambda p: zone(p).patterns[p.basis], 5, "dense_hook_avoiding")


class UnschedulableLayout(ValueError):
    """No pattern assignment for the transitional plaquettes satisfies the constraints."""


def transitional_schedule(layout: Layout, references, region_map=None, max_passes: int = 20) -> Schedule:
    """Five-step schedule for an intermediate deformation layout.

    Plaquettes identical to one in the dense ``references`` (same site, type
    and support) keep that layout's hook-avoiding pattern. Every other
    plaquette starts from the zone map (anchored on the first reference) and is
    then re-assigned greedily, one site at a time, whenever that lowers the
    number of constraint violations. Pinned sites are only re-assigned when
    the free ones cannot clear every violation.
    """
    rmap = region_map or default_region_map()
    known: dict[tuple, str] = {}
    for ref in references:
        zone = zone_function(ref, rmap)
        for p in ref.plaquettes:
            known.setdefault((p.basis, frozenset(p.support), p.measure), zone(p).patterns[p.basis])
    anchors = codeword_anchors(references[0].footprints) if references else {}
    pats, free = {}, []
    for p in layout.plaquettes:
        hit = known.get((p.basis, frozenset(p.support), p.measure))
        if hit is None:
            free.append(p.measure)
            hit = rmap.zone_of(p.measure, anchors, layout.d).patterns[p.basis]
        pats[p.measure] = hit

    def build() -> Schedule:
        return assign(layout, lambda p: pats[p.measure], 5, "transitional")

    def repair(sites, count):
        for _ in range(max_passes):
            if not count:
                break
            before = count
            for m in sites:
                keep = pats[m]
                for pid in "ABCD":
                    if pid == keep:
                        continue
                    pats[m] = pid
                    n = len(check_constraints(layout, build()))
                    if n < count:
                        count, keep = n, pid
                pats[m] = keep
            if count == before:
                break
        return count

    count = repair(free, len(check_constraints(layout, build())))
    if count:
        # two references can pin neighbouring sites to incompatible patterns
        count = repair([p.measure for p in layout.plaquettes], count)
    if count:
        raise UnschedulableLayout(f"{count} constraint violations remain in the transitional schedule")
    return build()


def build_schedule(layout: Layout, name: str) -> Schedule:
    builders = {
        "standalone": standalone_schedule,
        "dense_hook_avoiding": dense_hook_avoiding_schedule,
        "dense_hook_prone": dense_hook_prone_schedule,
    }
    if name not in builders:
        raise ValueError(f"unknown schedule {name!r}")
    return builders[name](layout)


# ---------------------------------------------------------------- constraints

@dataclass(frozen=True)
class Violation:
    constraint: int
    message: str

    def __str__(self) -> str:
        return f"constraint {self.constraint}: {self.message}"


def pair_ok(x1: int, x2: int, z1: int, z2: int) -> bool:
    """Ordering rule for an X/Z plaquette pair sharing two qubits."""
    return (x1 < z1 and x2 < z2) or (x1 > z1 and x2 > z2)


def check_constraints(layout: Layout, schedule: Schedule) -> list[Violation]:
    """All violations of the single-use rule (1) and the X/Z ordering rule (2)."""
    schedule.require_complete(layout)
    out: list[Violation] = []
    busy: dict[tuple[Coord, int], Coord] = {}
    for p in layout.plaquettes:
        for q in p.support:
            slot = schedule.slots[(p.measure, q)]
            for qubit in (q, p.measure):
                key = (qubit, slot)
                if key in busy and busy[key] != p.measure:
                    out.append(Violation(
                        1, f"qubit {tuple(qubit)} used twice in slot {slot} "
                           f"(plaquettes {tuple(busy[key])} and {tuple(p.measure)})"))
                elif key in busy and qubit == p.measure:
                    out.append(Violation(1, f"measure qubit {tuple(qubit)} has two CNOTs in slot {slot}"))
                busy[key] = p.measure
    z_by_qubit: dict[Coord, list[Plaquette]] = {}
    for p in layout.plaquettes:
        if p.basis == "Z":
            for q in p.support:
                z_by_qubit.setdefault(q, []).append(p)
    for px in layout.plaquettes:
        if px.basis != "X":
            continue
        seen = set()
        for q in px.support:
            for pz in z_by_qubit.get(q, ()):
                if pz.measure in seen:
                    continue
                seen.add(pz.measure)
                shared = sorted(set(px.support) & set(pz.support))
                if len(shared) != 2:
                    continue
                a, b = shared
                x1, x2 = schedule.slots[(px.measure, a)], schedule.slots[(px.measure, b)]
                z1, z2 = schedule.slots[(pz.measure, a)], schedule.slots[(pz.measure, b)]
                if not pair_ok(x1, x2, z1, z2):
                    out.append(Violation(
                        2, f"X plaquette {tuple(px.measure)} and Z plaquette {tuple(pz.measure)} "
                           f"(X1,X2,Z1,Z2)=({x1},{x2},{z1},{z2})"))
    return out


def violation_report(violations: list[Violation]) -> str:
    if not violations:
        return "ok: 0 violations\n"
    return "".join(f"{v}\n" for v in violations)


# ---------------------------------------------------------------- hook analysis

@dataclass(frozen=True)
class HookSite:
    measure: Coord
    basis: str
    pair: tuple[Coord, ...]  # data qubits hit by the worst measure-qubit fault (empty if none)
    orientation: str  # horizontal | vertical | diagonal | none
    direction: str  # parallel | perpendicular | none
    codewords: tuple[int, ...] = ()  # codewords whose same-basis distance the hook shortens


@dataclass(frozen=True)
class HookReport:
    sites: tuple[HookSite, ...]

    @property
    def parallel_sites(self) -> tuple[HookSite, ...]:
        return tuple(s for s in self.sites if s.direction == "parallel")

    @property
    def parallel_count(self) -> int:
        return len(self.parallel_sites)

    def per_codeword(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for s in self.parallel_sites:
            for i in s.codewords:
                out[i] = out.get(i, 0) + 1
        return out


def plaquette_tail_errors(plaq: Plaquette, schedule: Schedule) -> list[tuple[int, frozenset]]:
    """Data errors left by a plaquette-basis fault on the measure qubit after each CNOT.

    The plaquette circuit is propagated with the Pauli-frame engine; entry k is
    the data error caused by a fault right after the k-th CNOT.
    """
    from .stabilizer.frame import SingleFrame, frame_propagate

    order = schedule.order_of(plaq)
    qubits = list(order) + [plaq.measure]
    idx = {q: i for i, q in enumerate(qubits)}
    anc = idx[plaq.measure]
    cnots = [
        Instruction("CX", (anc, idx[q]) if plaq.basis == "X" else (idx[q], anc)) for q in order
    ]
    out = []
    for k in range(1, len(order)):
        frame = SingleFrame(len(qubits))
        if plaq.basis == "X":
            frame.x[anc] = 1
        else:
            frame.z[anc] = 1
        for inst in cnots[k:]:
            frame_propagate(frame, inst)
        hit = frame.x if plaq.basis == "X" else frame.z
        out.append((k, frozenset(q for q in order if hit[idx[q]])))
    return out


def _shortcut(graph: LogicalGraph, pair) -> tuple[int, int, int]:
    """Endpoints and logical label of the single edge a two-qubit fault adds to the matching graph."""
    odd: set[int] = set()
    label = 0
    for q in pair:
        a, b, lab = graph.edges[q]
        label ^= lab
        for node in (a, b):
            if node != graph.boundary:
                odd ^= {node}
    ends = sorted(odd)
    if len(ends) > 2:
        raise ValueError(f"fault on {pair} flips {len(ends)} checks")
    ends += [graph.boundary] * (2 - len(ends))
    return ends[0], ends[1], label


def _orientation(pair) -> str:
    if len(pair) != 2:
        return "none"
    a, b = sorted(pair)
    if a.row == b.row:
        return "horizontal"
    if a.col == b.col:
        return "vertical"
    return "diagonal"


def hook_analysis(layout: Layout, schedule: Schedule) -> HookReport:
    """Classify the measure-qubit hook of every plaquette.

    A fault after the k-th CNOT leaves an error on the remaining data qubits;
    modulo the plaquette itself it has weight min(r, w - r). Faults reducible to
    weight <= 1 are harmless ("none"). A weight-2 hook is "parallel" when adding
    it as a single fault shortens the minimum-weight representative of some
    codeword's same-basis logical operator, and "perpendicular" otherwise.
    """
    schedule.require_complete(layout)
    graphs = {b: LogicalGraph(layout, b) for b in ("X", "Z")}
    sites = []
    for plaq in layout.plaquettes:
        worst: frozenset = frozenset()
        for _, err in plaquette_tail_errors(plaq, schedule):
            reduced = min(len(err), plaq.weight - len(err))
            if reduced >= 2 and len(err) == 2:
                worst = err
        if not worst:
            sites.append(HookSite(plaq.measure, plaq.basis, (), "none", "none"))
            continue
        graph = graphs[plaq.basis]
        u, v, label = _shortcut(graph, worst)
        hurt = []
        for i in range(graph.k):
            target = 1 << i
            if graph.weight_with_shortcut(u, v, label, target) < graph.weight(target):
                hurt.append(i)
        direction = "parallel" if hurt else "perpendicular"
        sites.append(HookSite(plaq.measure, plaq.basis, tuple(sorted(worst)), _orientation(worst), direction, tuple(hurt)))
    return HookReport(tuple(sites))
