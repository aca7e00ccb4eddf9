"""Experiment configuration loaded from a TOML file.

Example::

    seed = 0

    [chains]
    platforms = ["FB", "FL", "TW"]
    L = 3

    [features]
    subset = ["dct", "meta", "header"]

    [forest]
    n_estimators = 10

    [cascade]
    informed_stop = "TW"          # omit for the standard cascade

    [simulator]
    initial_qualities = [50, 70, 90]
    crop = [216, 384]             # width, height of the top-left crop
    split = [0.6, 0.2, 0.2]

    [simulator.profiles.FB]
    name = "fb-like"
    quality = 71
    max_dimension = 2048
    inject = ["APP2"]

Every section is optional; missing profiles fall back to the defaults
for FB, FL and TW.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cascade import CascadeConfig
from .chains import ChainError, ChainUniverse
from .features import FEATURE_NAMES, normalize_subset
from .simulator.dataset import DEFAULT_FRACTIONS
from .simulator.platforms import PlatformProfile, default_profiles

DEFAULT_QUALITIES = (50, 60, 70, 80, 90, 100)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    platforms: tuple[str, ...] = ("FB", "FL", "TW")
    max_len: int = 3
    features: tuple[str, ...] = FEATURE_NAMES
    n_estimators: int = 10
    seed: int = 0
    informed_stop: str | None = None
    profiles: dict[str, PlatformProfile] = field(default_factory=default_profiles)
    initial_qualities: tuple[int, ...] = DEFAULT_QUALITIES
    crop: tuple[int, int] | None = None
    split: tuple[float, float, float] = DEFAULT_FRACTIONS
    paths: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        try:
            self.universe()
            self.features = normalize_subset(self.features)
        except (ChainError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.informed_stop is not None and self.informed_stop not in self.platforms:
            raise ConfigError(f"informed_stop {self.informed_stop!r} is not a configured platform")
        if not isinstance(self.n_estimators, int) or self.n_estimators < 1:
            raise ConfigError("forest.n_estimators must be a positive integer")
        missing = [p for p in self.platforms if p not in self.profiles]
        if missing:
            raise ConfigError(f"no simulator profile for platform(s) {missing}")
        if not self.initial_qualities or any(not 1 <= int(q) <= 100 for q in self.initial_qualities):
            raise ConfigError("simulator.initial_qualities must be non-empty and within 1..100")
        if self.crop is not None and (len(self.crop) != 2 or min(self.crop) < 8):
            raise ConfigError("simulator.crop must be [width, height] with both >= 8")
        if len(self.split) != 3 or any(f < 0 for f in self.split) or abs(sum(self.split) - 1) > 1e-9:
            raise ConfigError("simulator.split must be three non-negative fractions summing to 1")

    def universe(self) -> ChainUniverse:
        return ChainUniverse(self.platforms, self.max_len)

    def cascade_config(self, informed_stop: str | None = None) -> CascadeConfig:
        return CascadeConfig(tuple(self.platforms), self.max_len, tuple(self.features), self.n_estimators,
                             self.seed, informed_stop if informed_stop is not None else self.informed_stop)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {"seed", "chains", "features", "forest", "cascade", "simulator", "paths"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config section(s) {sorted(unknown)}")
        chains = doc.get("chains", {})
        forest = doc.get("forest", {})
        sim = doc.get("simulator", {})
        kw: dict = {}
        try:
            if "seed" in doc:
                kw["seed"] = int(doc["seed"])
            if "platforms" in chains:
                kw["platforms"] = tuple(str(p) for p in chains["platforms"])
            if "L" in chains:
                kw["max_len"] = chains["L"]
            if "subset" in doc.get("features", {}):
                kw["features"] = tuple(doc["features"]["subset"])
            if "n_estimators" in forest:
                kw["n_estimators"] = forest["n_estimators"]
            if "seed" in forest:
                kw["seed"] = int(forest["seed"])
            kw["informed_stop"] = doc.get("cascade", {}).get("informed_stop")
            profiles = default_profiles()
            for key, spec in sim.get("profiles", {}).items():
                profiles[key] = PlatformProfile.from_dict(key, spec)
            kw["profiles"] = profiles
            if "initial_qualities" in sim:
                kw["initial_qualities"] = tuple(int(q) for q in sim["initial_qualities"])
            if "crop" in sim:
                kw["crop"] = tuple(int(v) for v in sim["crop"])
            if "split" in sim:
                kw["split"] = tuple(float(f) for f in sim["split"])
            kw["paths"] = {str(k): str(v) for k, v in doc.get("paths", {}).items()}
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid config value: {exc}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(doc)
