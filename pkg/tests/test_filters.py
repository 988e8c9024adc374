"""Filter grammar and conjunctive semantics against brute-force evaluation."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vigil.errors import FilterParseError
from vigil.filters import FilterSpec, Predicate, apply_filter, parse_filter
from vigil.store import StreamKey

SOURCES = ["prov1", "prov2", "prov3"]
SIGNALS = ["raw_cases", "deaths", "hosp"]


def universe(hierarchy) -> list[StreamKey]:
    keys = []
    counties = [c.geo_value for c in hierarchy.counties()][:12]
    regions = [("county", c) for c in counties] + [
        ("state", "PA"),
        ("state", "OH"),
        ("nation", "us"),
    ]
    for source in SOURCES:
        for signal in SIGNALS:
            for geo_type, geo_value in regions:
                keys.append(StreamKey(source, signal, geo_type, geo_value))
    return keys


def brute_force(spec: FilterSpec, keys, hierarchy):
    """Evaluate each predicate independently and intersect."""
    surviving = list(keys)
    for predicate in spec.predicates:
        passing = []
        for key in surviving:
            if predicate.dimension == "geo_region":
                hit = any(
                    hierarchy.is_within(key.geo_type, key.geo_value, v)
                    for v in predicate.values
                )
            else:
                hit = getattr(key, predicate.dimension) in predicate.values
            if (predicate.mode == "include") == hit:
                passing.append(key)
        surviving = passing
    return surviving


class TestParse:
    def test_single_include(self):
        spec = parse_filter("source:in:prov1")
        assert len(spec.predicates) == 1
        predicate = spec.predicates[0]
        assert (predicate.dimension, predicate.mode) == ("source", "include")
        assert predicate.values == frozenset({"prov1"})

    def test_two_predicates(self):
        spec = parse_filter("source:in:prov1,signal:not:raw_cases")
        assert [p.dimension for p in spec.predicates] == ["source", "signal"]
        assert spec.predicates[1].mode == "exclude"

    def test_multi_value_or(self):
        spec = parse_filter("signal:in:deaths|hosp")
        assert spec.predicates[0].values == frozenset({"deaths", "hosp"})

    def test_five_predicates_rejected(self):
        expr = ",".join(
            ["source:in:a", "signal:in:b", "geo_value:in:c", "geo_region:in:d", "source:in:e"]
        )
        with pytest.raises(FilterParseError, match="at most 4 predicates"):
            parse_filter(expr)

    def test_duplicate_dimension_rejected(self):
        with pytest.raises(FilterParseError, match="duplicate dimension"):
            parse_filter("source:in:a,source:in:b")

    def test_syntax_error_carries_position(self):
        with pytest.raises(FilterParseError) as excinfo:
            parse_filter("source:in:a,signal::")
        # Position points at the empty op token inside the second chunk.
        assert excinfo.value.position == len("source:in:a,signal:")

    def test_unknown_dimension(self):
        with pytest.raises(FilterParseError, match="unknown dimension"):
            parse_filter("flavor:in:x")

    def test_empty_text_is_empty_spec(self):
        assert parse_filter("") == FilterSpec()

    def test_spec_text_roundtrip(self):
        spec = parse_filter("source:in:prov1,signal:not:raw_cases")
        assert parse_filter(str(spec)) == spec


class TestApply:
    def test_empty_spec_is_identity(self, hierarchy):
        keys = universe(hierarchy)[:10]
        assert apply_filter(FilterSpec(), keys) == keys

    def test_exclude_source(self, hierarchy):
        keys = [
            StreamKey("prov1", "cases", "state", "PA"),
            StreamKey("prov2", "cases", "state", "PA"),
        ]
        spec = parse_filter("source:not:prov2")
        assert apply_filter(spec, keys, hierarchy) == keys[:1]

    def test_geo_region_matches_descendants(self, hierarchy):
        keys = [
            StreamKey("prov1", "cases", "state", "PA"),
            StreamKey("prov1", "cases", "county", "42003"),
            StreamKey("prov1", "cases", "state", "OH"),
            StreamKey("prov1", "cases", "county", "39001"),
        ]
        spec = parse_filter("geo_region:in:PA")
        expected = brute_force(spec, keys, hierarchy)
        got = apply_filter(spec, keys, hierarchy)
        assert got == expected
        assert {(k.geo_type, k.geo_value) for k in got} == {
            ("state", "PA"),
            ("county", "42003"),
        }

    def test_order_preserved(self, hierarchy):
        keys = universe(hierarchy)
        rng = random.Random(3)
        rng.shuffle(keys)
        spec = parse_filter("signal:in:deaths|hosp")
        got = apply_filter(spec, keys, hierarchy)
        assert got == [k for k in keys if k.signal in ("deaths", "hosp")]

    def test_random_specs_match_brute_force(self, hierarchy):
        rng = random.Random(97)
        keys = universe(hierarchy)
        values_by_dim = {
            "source": SOURCES + ["provX"],
            "signal": SIGNALS + ["ghost"],
            "geo_value": [k.geo_value for k in keys[:20]],
            "geo_region": ["PA", "OH", "us", "42003", "zzz"],
        }
        for _ in range(120):
            dims = rng.sample(list(values_by_dim), rng.randint(0, 4))
            predicates = tuple(
                Predicate(
                    dimension=dim,
                    mode=rng.choice(["include", "exclude"]),
                    values=frozenset(
                        rng.sample(values_by_dim[dim], rng.randint(1, 3))
                    ),
                )
                for dim in dims
            )
            spec = FilterSpec(predicates=predicates)
            assert apply_filter(spec, keys, hierarchy) == brute_force(spec, keys, hierarchy)

    def test_idempotence(self, hierarchy):
        keys = universe(hierarchy)
        spec = parse_filter("source:in:prov1,geo_region:in:PA")
        once = apply_filter(spec, keys, hierarchy)
        assert apply_filter(spec, once, hierarchy) == once

    def test_include_exclude_duality(self, hierarchy):
        keys = universe(hierarchy)
        include = parse_filter("source:in:prov1")
        complement = frozenset({"prov2", "prov3"})
        exclude = FilterSpec(
            predicates=(Predicate(dimension="source", mode="exclude", values=complement),)
        )
        assert apply_filter(include, keys, hierarchy) == apply_filter(exclude, keys, hierarchy)

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(
            st.sampled_from(["source", "signal", "geo_value"]), unique=True, max_size=3
        ),
        st.data(),
    )
    def test_conjunction_equals_intersection(self, dims, data):
        keys = [
            StreamKey(s, sig, "state", g)
            for s in SOURCES
            for sig in SIGNALS
            for g in ("PA", "OH", "PR")
        ]
        predicates = []
        for dim in dims:
            pool = {
                "source": SOURCES,
                "signal": SIGNALS,
                "geo_value": ["PA", "OH", "PR"],
            }[dim]
            values = data.draw(
                st.frozensets(st.sampled_from(pool), min_size=1, max_size=2)
            )
            mode = data.draw(st.sampled_from(["include", "exclude"]))
            predicates.append(Predicate(dimension=dim, mode=mode, values=values))
        spec = FilterSpec(predicates=tuple(predicates))
        full = set(apply_filter(spec, keys))
        by_parts = set(keys)
        for predicate in predicates:
            solo = FilterSpec(predicates=(predicate,))
            by_parts &= set(apply_filter(solo, keys))
        assert full == by_parts


class TestSpecInvariants:
    def test_spec_rejects_five(self):
        predicate = Predicate(dimension="source", mode="include", values=frozenset({"a"}))
        others = [
            Predicate(dimension=d, mode="include", values=frozenset({"x"}))
            for d in ("signal", "geo_value", "geo_region")
        ]
        with pytest.raises(ValueError):
            FilterSpec(predicates=(predicate, *others, predicate))

    def test_predicate_rejects_empty_values(self):
        with pytest.raises(ValueError):
            Predicate(dimension="source", mode="include", values=frozenset())
