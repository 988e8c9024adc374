"""Data-level stream filters: small conjunctive predicate sets.

Grammar: `dim:op:v1|v2,...` — comma-separated predicates, each naming a
dimension (signal, source, geo_value, geo_region), an op (`in` / `not`),
and one or more pipe-separated values. At most 4 predicates, one per
dimension. Predicates AND together; values within a predicate OR.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import FilterParseError
from .store import GeoHierarchy, StreamKey

DIMENSIONS = ("signal", "source", "geo_value", "geo_region")

MODES = {"in": "include", "not": "exclude"}

MAX_PREDICATES = 4


@dataclass(frozen=True)
class Predicate:
    dimension: str
    mode: str
    values: frozenset[str]

    def __post_init__(self):
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension: {self.dimension!r}")
        if self.mode not in ("include", "exclude"):
            raise ValueError(f"unknown mode: {self.mode!r}")
        if not self.values:
            raise ValueError("predicate values must be non-empty")

    def matches(self, key: StreamKey, hierarchy: GeoHierarchy | None) -> bool:
        """True when the stream satisfies this predicate."""
        if self.dimension == "geo_region":
            if hierarchy is None:
                raise ValueError("geo_region predicates require a loaded hierarchy")
            hit = any(
                hierarchy.is_within(key.geo_type, key.geo_value, region)
                for region in self.values
            )
        else:
            hit = getattr(key, self.dimension) in self.values
        return hit if self.mode == "include" else not hit


@dataclass(frozen=True)
class FilterSpec:
    predicates: tuple[Predicate, ...] = ()

    def __post_init__(self):
        if len(self.predicates) > MAX_PREDICATES:
            raise ValueError(f"at most {MAX_PREDICATES} predicates")
        dims = [p.dimension for p in self.predicates]
        if len(dims) != len(set(dims)):
            raise ValueError("duplicate dimension in filter")

    def __str__(self) -> str:
        return ",".join(
            f"{p.dimension}:{'in' if p.mode == 'include' else 'not'}:{'|'.join(sorted(p.values))}"
            for p in self.predicates
        )


def parse_filter(text: str) -> FilterSpec:
    """Parse a filter expression; errors carry the offending position."""
    text = text.strip()
    if not text:
        return FilterSpec()
    predicates: list[Predicate] = []
    seen: dict[str, int] = {}
    position = 0
    for chunk in text.split(","):
        if len(predicates) == MAX_PREDICATES:
            raise FilterParseError(f"at most {MAX_PREDICATES} predicates", position)
        parts = chunk.split(":")
        if len(parts) != 3:
            raise FilterParseError(
                f"predicate must be dim:op:values, got {chunk!r}", position
            )
        dim, op, values_part = (p.strip() for p in parts)
        if dim not in DIMENSIONS:
            raise FilterParseError(f"unknown dimension {dim!r}", position)
        if dim in seen:
            raise FilterParseError(f"duplicate dimension {dim!r}", position)
        if op not in MODES:
            raise FilterParseError(f"unknown op {op!r}, expected in|not", position + len(dim) + 1)
        values = frozenset(v.strip() for v in values_part.split("|") if v.strip())
        if not values:
            raise FilterParseError(
                "predicate needs at least one value", position + len(dim) + len(op) + 2
            )
        seen[dim] = position
        predicates.append(Predicate(dimension=dim, mode=MODES[op], values=values))
        position += len(chunk) + 1
    return FilterSpec(predicates=tuple(predicates))


def apply_filter(
    spec: FilterSpec,
    streams: Iterable[StreamKey],
    hierarchy: GeoHierarchy | None = None,
) -> list[StreamKey]:
    """Streams satisfying every predicate, in input order."""
    if not spec.predicates:
        return list(streams)
    return [
        key
        for key in streams
        if all(p.matches(key, hierarchy) for p in spec.predicates)
    ]
