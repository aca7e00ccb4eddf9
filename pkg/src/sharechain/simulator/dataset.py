"""Chain dataset builder and its manifest."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..chains import ChainUniverse, SharingChain, format_chain_label, parse_chain_label
from .platforms import PlatformProfile, apply_platform
from .sources import crop_top_left, initial_encode, list_sources, load_rgb

MANIFEST_VERSION = 1
SPLITS = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.6, 0.2, 0.2)


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    source: str
    quality: int
    split: str


@dataclass
class DatasetManifest:
    """Files of a generated dataset with their chain labels and split.

    Paths are relative to the manifest's directory.
    """

    entries: list[ManifestEntry]
    platforms: tuple[str, ...] = ()
    max_len: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def sources(self, split: str | None = None) -> list[str]:
        return sorted({e.source for e in self.entries if split is None or e.split == split})

    def to_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "platforms": list(self.platforms),
            "L": self.max_len,
            "seed": self.seed,
            **self.meta,
            "entries": [asdict(e) for e in self.entries],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if obj.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {obj.get('version')!r}")
        entries = [ManifestEntry(**e) for e in obj["entries"]]
        meta = {k: v for k, v in obj.items() if k not in ("version", "platforms", "L", "seed", "entries")}
        return cls(entries, tuple(obj.get("platforms", ())), int(obj.get("L", 0)), int(obj.get("seed", 0)), meta)


def split_sources(source_ids: Sequence[str], seed: int = 0,
                  fractions: Sequence[float] = DEFAULT_FRACTIONS) -> dict[str, str]:
    """Seeded source-level assignment to train/val/test.

    Split sizes are ``round(f * n)`` for val and test; train takes the rest.
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions) or not np.isclose(sum(fractions), 1.0):
        raise ValueError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    ids = sorted(set(source_ids))
    order = np.random.default_rng(np.random.SeedSequence([seed, 0x5B117])).permutation(len(ids))
    n = len(ids)
    n_val = int(np.floor(fractions[1] * n + 0.5))
    n_test = int(np.floor(fractions[2] * n + 0.5))
    n_train = n - n_val - n_test
    out = {}
    for rank, i in enumerate(order):
        out[ids[i]] = "train" if rank < n_train else "val" if rank < n_train + n_val else "test"
    return out


def label_dirname(chain: SharingChain) -> str:
    return format_chain_label(chain).replace(">", "_")


def _chain_files(data: bytes, chains: Sequence[SharingChain], profiles: Mapping[str, PlatformProfile],
                 seed: int) -> dict[SharingChain, bytes]:
    # chains arrive shortest first, so every oldest-first prefix is already cached
    cache: dict[tuple[str, ...], bytes] = {(): data}
    out = {}
    for chain in chains:
        prev = cache[chain.steps[:-1]]
        cache[chain.steps] = apply_platform(prev, profiles[chain.steps[-1]], seed)
        out[chain] = cache[chain.steps]
    return out


def build_dataset(sources: str | Path, profiles: Mapping[str, PlatformProfile], universe: ChainUniverse,
                  initial_qualities: Sequence[int], out_dir: str | Path, seed: int = 0, *,
                  crop: tuple[int, int] | None = None, fractions: Sequence[float] = DEFAULT_FRACTIONS,
                  threads: int = 1) -> DatasetManifest:
    """Share every source through every chain of ``universe`` and write the files.

    Parameters
    ----------
    sources : path
        Directory of source images; file stems become source ids.
    profiles : mapping
        Platform name to :class:`PlatformProfile`; must cover every platform.
    crop : (width, height), optional
        Top-left crop applied to each source before the first encode.
    threads : int
        Worker threads over (source, quality) pairs. Output does not depend on it.
    """
    missing = [p for p in universe.platforms.names if p not in profiles]
    if missing:
        raise KeyError(f"no profile for platform(s) {missing}")
    for q in initial_qualities:
        if not 1 <= int(q) <= 100:
            raise ValueError(f"initial quality {q} outside 1..100")
    files = list_sources(sources)
    ids = [p.stem for p in files]
    if len(set(ids)) != len(ids):
        raise ValueError("source ids (file stems) must be unique")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    assignment = split_sources(ids, seed, fractions)
    chains = universe.omega()

    def job(item):
        path, q = item
        rgb = load_rgb(path)
        if crop is not None:
            rgb = crop_top_left(rgb, *crop)
        shared = _chain_files(initial_encode(rgb, int(q)), chains, profiles, seed)
        entries = []
        for chain in chains:
            rel = Path(assignment[path.stem]) / label_dirname(chain) / f"{path.stem}_{int(q)}.jpg"
            target = out_dir / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(shared[chain])
            entries.append(ManifestEntry(rel.as_posix(), format_chain_label(chain), path.stem, int(q),
                                         assignment[path.stem]))
        return entries

    work = [(p, q) for p in files for q in initial_qualities]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(job, work))
    else:
        results = [job(w) for w in work]
    rank = {c: i for i, c in enumerate(chains)}
    entries = sorted((e for r in results for e in r),
                     key=lambda e: (e.source, e.quality, rank[parse_chain_label(e.label)]))
    manifest = DatasetManifest(
        entries, tuple(universe.platforms.names), universe.max_len, seed,
        meta={
            "initial_qualities": [int(q) for q in initial_qualities],
            "crop": list(crop) if crop else None,
            "fractions": [float(f) for f in fractions],
            "profiles": {k: profiles[k].to_dict() | {"name": profiles[k].name} for k in sorted(profiles)},
        },
    )
    manifest.save(out_dir / "manifest.json")
    return manifest
