"""Command-line front-end: area tables, layouts, schedule checks, deformation
verification, memory runs, sweeps and golden fixtures.

Exit codes: 0 on success, 2 when the input is invalid, 3 when a built object
violates an invariant (schedule conflicts, broken layout, lost logical state).
"""

from __future__ import annotations

import argparse
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterator

import numpy as np
import tomli

from .circuit import circuit_to_text
from .deform import plan_fuse_three, plan_row_shift, plan_split, verify_preservation
from .experiments import SCHEDULES, ExperimentSpec, build_experiment, layout_and_schedule
from .layout import (
    DenseRowSpec, GridSpec, PatchSpec, area_dense_grid, area_dense_row, area_standalone, build_dense_row,
    build_standalone_patch, check_layout, layout_to_json, render,
)
from .decoder.rates import RunRecord, logical_error_rate, per_round, records_to_csv
from .schedule import check_constraints, hook_analysis, violation_report

EXIT_OK, EXIT_INVALID, EXIT_INVARIANT = 0, 2, 3
FIXTURE_KINDS = ("layouts", "schedules", "circuits", "plans")
PLANS = ("fuse", "split", "shift")


class InvariantViolation(RuntimeError):
    """A generated object failed one of its own consistency checks."""


# ---------------------------------------------------------------- sweep config

@dataclass(frozen=True)
class SweepConfig:
    distances: tuple[int, ...] = (5,)
    codewords_n: int = 5
    schedules: tuple[str, ...] = SCHEDULES
    bases: tuple[str, ...] = ("X", "Z")
    error_rates: tuple[float, ...] = (1e-3,)
    rounds_factor: int = 3
    max_shots: int = 10**8
    max_errors: int = 10**4
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("distances", "schedules", "bases", "error_rates"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        for d in self.distances:
            if d < 3 or d % 2 == 0:
                raise ValueError(f"distances must be odd and >= 3, got {d}")
        for s in self.schedules:
            if s not in SCHEDULES:
                raise ValueError(f"unknown schedule {s!r}")
        for b in self.bases:
            if b not in ("X", "Z"):
                raise ValueError(f"unknown basis {b!r}")
        for p in self.error_rates:
            if not 0 <= p <= 0.5:
                raise ValueError(f"error rates must lie in [0, 1/2], got {p}")
        if self.codewords_n < 1 or self.rounds_factor < 1 or self.max_shots < 1 or self.max_errors < 1:
            raise ValueError("codewords_n, rounds_factor, max_shots and max_errors must be positive")

    def points(self) -> list[ExperimentSpec]:
        """Sweep coordinates in output order: d, schedule, basis, p."""
        return [
            ExperimentSpec(d, s, b, p, n=self.codewords_n, rounds_factor=self.rounds_factor)
            for d, s, b, p in itertools.product(self.distances, self.schedules, self.bases, self.error_rates)
        ]


_LIST_KEYS = {"distances", "schedules", "bases", "error_rates"}


def config_from_mapping(raw: dict) -> SweepConfig:
    known = {f.name for f in fields(SweepConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {k: tuple(v) if k in _LIST_KEYS else v for k, v in raw.items()}
    return SweepConfig(**kwargs)


def load_config(path: str | Path) -> SweepConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ValueError(f"{path}: {exc}") from exc
    return config_from_mapping(raw.get("sweep", raw))


@dataclass(frozen=True)
class RowFailure:
    spec: ExperimentSpec
    message: str


def row_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _run_point(job) -> RunRecord | RowFailure:
    spec, seed, max_shots, max_errors = job
    try:
        circuit = build_experiment(spec)
        return logical_error_rate(circuit, max_shots, seed, max_errors, meta=spec.meta())
    except Exception as exc:  # reported per row; the sweep goes on
        return RowFailure(spec, f"{type(exc).__name__}: {exc}")


def run_sweep(config: SweepConfig) -> Iterator[RunRecord | RowFailure]:
    """One result per sweep coordinate, in coordinate order, deterministic given the seed."""
    jobs = [(spec, row_seed(config.seed, i), config.max_shots, config.max_errors)
            for i, spec in enumerate(config.points())]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            yield from pool.map(_run_point, jobs)
    else:
        for job in jobs:
            yield _run_point(job)


def plotdata_line(rec: RunRecord) -> str:
    lo, hi = rec.ci
    curve = f"{rec.schedule}/d={rec.d}/{rec.basis}"
    lo, hi = (per_round(min(x, 1.0 - 1e-15), rec.rounds) for x in (lo, hi))
    return f"{curve}\t{rec.p:g}\t{rec.p_round:.6e}\t{lo:.6e}\t{hi:.6e}"


class _Writer:
    """Streams records as CSV, JSON lines or plot triples."""

    def __init__(self, fmt: str, out):
        self.fmt, self.out = fmt, out
        self.header = False

    def write(self, rec: RunRecord) -> None:
        if self.fmt == "jsonl":
            self.out.write(rec.to_json() + "\n")
        elif self.fmt == "plotdata":
            if not self.header:
                self.out.write("curve\tp\tp_round\tci_low\tci_high\n")
            self.out.write(plotdata_line(rec) + "\n")
        else:
            text = records_to_csv([rec])
            self.out.write(text if not self.header else text.split("\n", 1)[1])
        self.header = True
        self.out.flush()


# ---------------------------------------------------------------- area table

def area_rows(d_list, n_list) -> list[dict]:
    rows = []
    for d in d_list:
        for n in n_list:
            reports = (
                ("standalone_grid", n, n, area_standalone(GridSpec(d, n, n))),
                ("dense_row", 1, n, area_dense_row(DenseRowSpec(d, n))),
                ("dense_grid", n, n, area_dense_grid(GridSpec(d, n, n))),
            )
            for family, nh, nw, rep in reports:
                rows.append({
                    "family": family, "d": d, "n_h": nh, "n_w": nw, "codewords": rep.codewords,
                    "total_cells": rep.total_cells, "per_logical": str(rep.per_logical),
                    "per_logical_float": float(rep.per_logical), "ratio": float(rep.ratio_to_standalone),
                })
    return rows


AREA_COLUMNS = ("family", "d", "n_h", "n_w", "codewords", "total_cells", "per_logical", "per_logical_float", "ratio")


def area_table(d_list, n_list) -> str:
    return records_to_csv(area_rows(d_list, n_list), AREA_COLUMNS)


# ---------------------------------------------------------------- fixtures

def _build_plan(name: str, d: int, n: int = 3):
    if name == "fuse":
        return plan_fuse_three(d)
    row = build_dense_row(DenseRowSpec(d, n))
    if name == "split":
        return plan_split(row, n - 1 if n % 2 == 0 else 1)
    return plan_row_shift(row)


def fixture_files(what: str) -> dict[str, str]:
    """File name -> content of one fixture family; contents are deterministic."""
    if what == "layouts":
        return {
            "layout_d3_standalone.json": layout_to_json(build_standalone_patch(PatchSpec(3))) + "\n",
            "layout_d3_n3_dense_row.json": layout_to_json(build_dense_row(DenseRowSpec(3, 3))) + "\n",
        }
    if what == "schedules":
        layout, sched = layout_and_schedule(5, "dense_hook_avoiding", 5)
        return {
            "schedule_d5_n5_dense_hook_avoiding.json": sched.to_json(layout) + "\n",
            "schedule_d5_n5_dense_hook_avoiding.report.txt": violation_report(check_constraints(layout, sched)),
        }
    if what == "circuits":
        out = {}
        for name, sched_name, n in (("d3_standalone", "standalone", 1), ("d3_n2_dense", "dense_hook_avoiding", 2)):
            spec = ExperimentSpec(3, sched_name, "Z", 1e-3, n=n)
            out[f"circuit_{name}_Z.txt"] = circuit_to_text(build_experiment(spec))
        return out
    if what == "plans":
        return {"plan_row_shift_d3.json": _build_plan("shift", 3).to_json() + "\n"}
    raise ValueError(f"unknown fixture kind {what!r}; expected one of {FIXTURE_KINDS}")


def emit_fixtures(what, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in ([what] if isinstance(what, str) else what):
        for name, text in fixture_files(kind).items():
            path = out_dir / name
            path.write_text(text)
            written.append(path)
    return written


# ---------------------------------------------------------------- verbs

def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _one(values, name):
    if values is None:
        return None
    if len(values) != 1:
        raise ValueError(f"--{name} takes a single value for this command")
    return values[0]


def cmd_area(args) -> int:
    _emit(area_table(args.d or [3, 5, 7], args.n or [1, 2, 3, 4, 5]), args.out)
    return EXIT_OK


def cmd_build(args) -> int:
    d = _one(args.d, "d") or 3
    n = _one(args.n, "n") or 1
    layout = build_standalone_patch(PatchSpec(d)) if args.kind == "standalone" else build_dense_row(DenseRowSpec(d, n))
    problems = check_layout(layout)
    if problems:
        raise InvariantViolation("; ".join(problems))
    _emit(render(layout) if args.render else layout_to_json(layout) + "\n", args.out)
    return EXIT_OK


def cmd_check_schedule(args) -> int:
    d = _one(args.d, "d") or 5
    n = _one(args.n, "n") or 5
    name = _one(args.schedule, "schedule") or "dense_hook_avoiding"
    layout, sched = layout_and_schedule(d, name, 1 if name == "standalone" else n)
    violations = check_constraints(layout, sched)
    hooks = hook_analysis(layout, sched)
    text = violation_report(violations) + f"parallel hooks: {hooks.parallel_count}\n"
    _emit(text, args.out)
    return EXIT_INVARIANT if violations else EXIT_OK


def cmd_deform(args) -> int:
    d = _one(args.d, "d") or 3
    n = _one(args.n, "n") or 3
    plan = _build_plan(args.plan, d, n)
    if args.action == "plan":
        _emit(plan.to_json() + "\n", args.out)
        return EXIT_OK
    bases = args.basis or ["Z", "X"]
    reports = [verify_preservation(plan, b) for b in bases]
    head = f"{plan.name} d={d}: total_rounds={plan.total_rounds} measurement_layers={plan.measurement_layers}\n"
    _emit(head + "".join(r.text() for r in reports), args.out)
    return EXIT_OK if all(r.ok for r in reports) else EXIT_INVARIANT


def _config_from_args(args) -> SweepConfig:
    base = load_config(args.config) if getattr(args, "config", None) else SweepConfig()
    over = {}
    for flag, key in (("d", "distances"), ("schedule", "schedules"), ("basis", "bases"), ("p", "error_rates")):
        value = getattr(args, flag)
        if value is not None:
            over[key] = tuple(value)
    if args.n is not None:
        over["codewords_n"] = _one(args.n, "n")
    for key in ("rounds_factor", "max_shots", "max_errors", "seed", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            over[key] = value
    return replace(base, **over)


def _stream(config: SweepConfig, fmt: str, out: str | None) -> int:
    fh = open(out, "w") if out else sys.stdout
    writer = _Writer(fmt, fh)
    failed = 0
    try:
        for res in run_sweep(config):
            if isinstance(res, RowFailure):
                failed += 1
                print(f"row failed {res.spec}: {res.message}", file=sys.stderr)
            else:
                writer.write(res)
    finally:
        if out:
            fh.close()
    return EXIT_INVARIANT if failed else EXIT_OK


def cmd_memory(args) -> int:
    config = _config_from_args(args)
    if len(config.points()) != 1:
        raise ValueError("memory run takes exactly one (d, schedule, basis, p) point; use sweep for more")
    return _stream(config, args.format, args.out)


def cmd_sweep(args) -> int:
    return _stream(_config_from_args(args), args.format, args.out)


def cmd_emit_fixtures(args) -> int:
    what = FIXTURE_KINDS if args.what == "all" else [args.what]
    for path in emit_fixtures(what, args.out or "fixtures"):
        print(path)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_point_flags(p: argparse.ArgumentParser, multi: bool) -> None:
    nargs = "+" if multi else 1
    p.add_argument("--d", type=int, nargs=nargs)
    p.add_argument("--n", type=int, nargs=1)
    p.add_argument("--schedule", choices=SCHEDULES, nargs=nargs)
    p.add_argument("--basis", choices=("X", "Z"), nargs=nargs)
    p.add_argument("--p", type=float, nargs=nargs)
    p.add_argument("--rounds-factor", dest="rounds_factor", type=int)
    p.add_argument("--max-shots", dest="max_shots", type=int)
    p.add_argument("--max-errors", dest="max_errors", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("csv", "jsonl", "plotdata"), default="csv")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densepack", description="Dense packing of surface-code patches.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("area", help="area table for standalone, dense-row and dense-grid layouts")
    p.add_argument("--d", type=int, nargs="+")
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_area)

    p = sub.add_parser("build", help="build a layout and print it as JSON")
    p.add_argument("--kind", choices=("standalone", "dense_row"), default="dense_row")
    p.add_argument("--d", type=int, nargs=1)
    p.add_argument("--n", type=int, nargs=1)
    p.add_argument("--render", action="store_true", help="ASCII drawing instead of JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("check-schedule", help="constraint and hook report for a schedule")
    p.add_argument("--d", type=int, nargs=1)
    p.add_argument("--n", type=int, nargs=1)
    p.add_argument("--schedule", choices=SCHEDULES, nargs=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_schedule)

    p = sub.add_parser("deform", help="export or verify a deformation plan")
    p.add_argument("action", choices=("verify", "plan"))
    p.add_argument("--plan", choices=PLANS, default="fuse")
    p.add_argument("--d", type=int, nargs=1)
    p.add_argument("--n", type=int, nargs=1)
    p.add_argument("--basis", choices=("X", "Z"), nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_deform)

    p = sub.add_parser("memory", help="run one memory experiment")
    p.add_argument("action", choices=("run",))
    _add_point_flags(p, multi=False)
    p.set_defaults(func=cmd_memory)

    p = sub.add_parser("sweep", help="sweep memory experiments from a TOML config plus flag overrides")
    p.add_argument("--config")
    _add_point_flags(p, multi=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("emit-fixtures", help="write golden JSON/text fixtures")
    p.add_argument("--what", choices=FIXTURE_KINDS + ("all",), default="all")
    p.add_argument("--out")
    p.set_defaults(func=cmd_emit_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())


__all__ = [
    "SweepConfig", "RowFailure", "run_sweep", "load_config", "config_from_mapping", "area_table", "area_rows",
    "emit_fixtures", "fixture_files", "main", "build_parser", "InvariantViolation",
]
