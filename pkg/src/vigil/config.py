"""Configuration files: expectation policies per signal family, service setup.

Both files are YAML. The expectation file maps glob patterns over
"source:signal" to expectation settings; the service file wires store
paths, the geo crosswalk, panel policy, and serving defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from pathlib import Path
from typing import Any, Mapping

import yaml

from .aggregates import MapConfig
from .errors import VigilError
from .ranking import ExpectationConfig
from .store import StreamKey

ENV_OVERRIDES = {
    "streams": "VIGIL_STREAMS_DB",
    "results": "VIGIL_RESULTS_DB",
    "triage": "VIGIL_TRIAGE_DB",
    "geo": "VIGIL_GEO_FILE",
}


def expectation_from_dict(raw: Mapping[str, Any]) -> ExpectationConfig:
    known = {
        "model",
        "train_window",
        "dispersion_floor_abs",
        "dispersion_floor_rel",
        "interpolation",
        "bounds",
        "max_day_change",
    }
    unknown = set(raw) - known
    if unknown:
        raise VigilError(f"unknown expectation settings: {sorted(unknown)}")
    kwargs: dict[str, Any] = dict(raw)
    bounds = kwargs.pop("bounds", None)
    if bounds is not None:
        if not isinstance(bounds, Mapping):
            raise VigilError("bounds must be a mapping with min and/or max")
        lo = bounds.get("min")
        hi = bounds.get("max")
        kwargs["bounds"] = (
            float(lo) if lo is not None else None,
            float(hi) if hi is not None else None,
        )
    try:
        return ExpectationConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise VigilError(f"bad expectation config: {exc}") from None


@dataclass(frozen=True)
class ExpectationPolicy:
    """Per-family expectation settings with a default fallback.

    Family patterns match against "source:signal"; first match in file
    order wins.
    """

    default: ExpectationConfig = field(default_factory=ExpectationConfig)
    families: tuple[tuple[str, ExpectationConfig], ...] = ()

    def for_key(self, key: StreamKey) -> ExpectationConfig:
        name = f"{key.source}:{key.signal}"
        for pattern, cfg in self.families:
            if fnmatchcase(name, pattern):
                return cfg
        return self.default

    def __call__(self, key: StreamKey) -> ExpectationConfig:
        return self.for_key(key)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ExpectationPolicy":
        default = expectation_from_dict(raw.get("default", {}) or {})
        families = tuple(
            (pattern, expectation_from_dict(settings or {}))
            for pattern, settings in (raw.get("families", {}) or {}).items()
        )
        return cls(default=default, families=families)

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExpectationPolicy":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, Mapping):
            raise VigilError(f"expectation file {path} must be a mapping")
        return cls.from_dict(raw)


@dataclass
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8600
    streams_db: str = "streams.db"
    results_db: str = "results.db"
    triage_db: str = "triage.db"
    geo_file: str = "geo.csv"
    k_default: int = 50
    window_days: int = 200
    map: MapConfig = field(default_factory=MapConfig)
    expectations: ExpectationPolicy = field(default_factory=ExpectationPolicy)
    report_out: str = "reports"

    def __post_init__(self):
        if self.k_default < 1:
            raise ValueError("k_default must be >= 1")


def load_service_config(
    path: str | Path | None, env: Mapping[str, str] | None = None
) -> ServiceConfig:
    """Read the service file, then apply environment overrides for store paths."""
    env = os.environ if env is None else env
    raw: dict[str, Any] = {}
    base = Path(".")
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, Mapping):
            raise VigilError(f"service config {path} must be a mapping")
        base = Path(path).parent

    def resolve(value: str) -> str:
        p = Path(value)
        return str(p if p.is_absolute() else base / p)

    stores = raw.get("stores", {}) or {}
    listen = str(raw.get("listen", "127.0.0.1:8600"))
    host, _, port = listen.rpartition(":")
    map_raw = raw.get("map", {}) or {}
    map_cfg = MapConfig(
        trailing_days=int(map_raw.get("trailing_days", 7)),
        w=(float(map_raw["w"]) if map_raw.get("w") is not None else None),
        tiers=tuple(map_raw.get("tiers", ("county", "state", "nation"))),
    )
    expectations = raw.get("expectations")
    if isinstance(expectations, str):
        policy = ExpectationPolicy.from_yaml(resolve(expectations))
    elif isinstance(expectations, Mapping):
        policy = ExpectationPolicy.from_dict(expectations)
    else:
        policy = ExpectationPolicy()

    cfg = ServiceConfig(
        listen_host=host or "127.0.0.1",
        listen_port=int(port or 8600),
        streams_db=resolve(str(stores.get("streams", "streams.db"))),
        results_db=resolve(str(stores.get("results", "results.db"))),
        triage_db=resolve(str(stores.get("triage", "triage.db"))),
        geo_file=resolve(str(raw.get("geo_hierarchy", "geo.csv"))),
        k_default=int(raw.get("k_default", 50)),
        window_days=int(raw.get("window_days", 200)),
        map=map_cfg,
        expectations=policy,
        report_out=resolve(str(raw.get("report_out", "reports"))),
    )
    if env.get(ENV_OVERRIDES["streams"]):
        cfg.streams_db = env[ENV_OVERRIDES["streams"]]
    if env.get(ENV_OVERRIDES["results"]):
        cfg.results_db = env[ENV_OVERRIDES["results"]]
    if env.get(ENV_OVERRIDES["triage"]):
        cfg.triage_db = env[ENV_OVERRIDES["triage"]]
    if env.get(ENV_OVERRIDES["geo"]):
        cfg.geo_file = env[ENV_OVERRIDES["geo"]]
    return cfg
