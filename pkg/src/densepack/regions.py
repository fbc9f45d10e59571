"""Table-driven zoning of dense-row plaquettes for the hook-avoiding schedule.

The zone map ships as ``data/region_map.json``. Every zone is a list of
alternative clauses; a clause is a conjunction of linear conditions in the
half-step offsets ``(u, v)`` of a measure site relative to an anchor (the
top-left data qubit of a codeword footprint), with the code distance ``d``
available as a coefficient. A zone names which anchors it is measured from:
``lower`` (rotated codewords) or ``upper`` (unrotated codewords that sit to the
right of a rotated one). The first zone with a matching clause for any of its
anchors wins; sites matched by none fall back to ``default_zone``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

ANCHOR_KINDS = ("lower", "upper")

_OPS = {
    "==": lambda x: x == 0,
    "<": lambda x: x < 0,
    ">": lambda x: x > 0,
    "<=": lambda x: x <= 0,
    ">=": lambda x: x >= 0,
}


@dataclass(frozen=True)
class Condition:
    u: int
    v: int
    d: int
    const: int
    op: str

    def holds(self, u: int, v: int, d: int) -> bool:
        return _OPS[self.op](self.u * u + self.v * v + self.d * d + self.const)


@dataclass(frozen=True)
class Zone:
    name: str
    patterns: dict[str, str]  # basis -> pattern id
    clauses: tuple[tuple[Condition, ...], ...]
    anchor: str = "lower"

    def matches(self, u: int, v: int, d: int) -> bool:
        return any(all(c.holds(u, v, d) for c in clause) for clause in self.clauses)


@dataclass(frozen=True)
class RegionMap:
    version: int
    zones: tuple[Zone, ...]
    default_zone: Zone

    def zone_of(self, site: tuple[int, int], anchors: Mapping[str, Sequence[tuple[int, int]]], d: int) -> Zone:
        """Zone of a measure site given the anchor points of each kind."""
        for zone in self.zones:
            for ar, ac in anchors.get(zone.anchor, ()):
                if zone.matches(site[0] - ar, site[1] - ac, d):
                    return zone
        return self.default_zone


def _parse_zone(raw: dict) -> Zone:
    clauses = tuple(
        tuple(Condition(c.get("u", 0), c.get("v", 0), c.get("d", 0), c.get("const", 0), c["op"]) for c in clause)
        for clause in raw.get("clauses", [])
    )
    anchor = raw.get("anchor", "lower")
    if anchor not in ANCHOR_KINDS:
        raise ValueError(f"unknown anchor kind {anchor!r}")
    return Zone(raw["name"], dict(raw["patterns"]), clauses, anchor)


def parse_region_map(raw: dict) -> RegionMap:
    if raw.get("version") != 1:
        raise ValueError(f"unsupported region map version {raw.get('version')!r}")
    zones = tuple(_parse_zone(z) for z in raw["zones"])
    return RegionMap(1, zones, _parse_zone(raw["default_zone"]))


@lru_cache(maxsize=None)
def default_region_map() -> RegionMap:
    text = resources.files("densepack.data").joinpath("region_map.json").read_text()
    return parse_region_map(json.loads(text))


def codeword_anchors(codeword_rects: Sequence) -> dict[str, list[tuple[int, int]]]:
    """Half-step top-left data qubit of every rotated footprint ("lower") and of
    every unrotated footprint directly preceded by a rotated one ("upper")."""
    out: dict[str, list[tuple[int, int]]] = {"lower": [], "upper": []}
    for i, r in enumerate(codeword_rects):
        anchor = (2 * r.top + 1, 2 * r.left + 1)
        if r.rotated:
            out["lower"].append(anchor)
        elif i > 0 and codeword_rects[i - 1].rotated:
            out["upper"].append(anchor)
    return out
