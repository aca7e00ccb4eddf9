"""Sharing-chain algebra.

A sharing chain is the ordered list of platforms an image went through.
Chains are stored oldest-first but indexed in reverse, so ``chain[0]`` is the
most recent platform and ``chain[-1]`` the one before it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

SEPARATOR = ">"


class ChainError(ValueError):
    """Invalid chain, platform set or label."""


@dataclass(frozen=True)
class Platform:
    id: int
    name: str


class PlatformSet:
    """Ordered, immutable set of platforms with dense ids ``0..n-1``."""

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        if not names:
            raise ChainError("platform set is empty")
        for name in names:
            if not isinstance(name, str) or not name or SEPARATOR in name or any(c.isspace() for c in name):
                raise ChainError(f"invalid platform name {name!r}")
        if len(set(names)) != len(names):
            raise ChainError(f"duplicate platform names in {names}")
        self._platforms = tuple(Platform(i, n) for i, n in enumerate(names))
        self._by_name = {p.name: p for p in self._platforms}

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self._platforms)

    def __len__(self) -> int:
        return len(self._platforms)

    def __iter__(self) -> Iterator[Platform]:
        return iter(self._platforms)

    def __contains__(self, name: object) -> bool:
        return name in self._by_name

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PlatformSet) and self.names == other.names

    def __hash__(self) -> int:
        return hash(self.names)

    def __repr__(self) -> str:
        return f"PlatformSet({list(self.names)!r})"

    def id_of(self, name: str) -> int:
        try:
            return self._by_name[name].id
        except KeyError:
            raise ChainError(f"unknown platform {name!r}") from None

    def name_of(self, pid: int) -> str:
        return self._platforms[pid].name


def as_platform_set(platforms: PlatformSet | Iterable[str]) -> PlatformSet:
    return platforms if isinstance(platforms, PlatformSet) else PlatformSet(platforms)


@dataclass(frozen=True)
class SharingChain:
    """Linear sharing history, ``steps`` stored oldest-first.

    Indexing follows the reverse convention: ``c[0]`` is the newest step,
    ``c[-k]`` the step ``k`` uploads before it.
    """

    steps: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    @classmethod
    def of(cls, *steps: str) -> "SharingChain":
        return cls(tuple(steps))

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, k: int) -> str:
        if not isinstance(k, int) or k > 0 or -k >= len(self.steps):
            raise IndexError(f"reverse index {k!r} out of range for chain of length {len(self)}")
        return self.steps[len(self.steps) - 1 + k]

    @property
    def newest(self) -> str:
        return self.steps[-1]

    @property
    def oldest(self) -> str:
        return self.steps[0]

    def prepend(self, platform: str) -> "SharingChain":
        """Chain with one additional, earlier sharing step."""
        return SharingChain((platform,) + self.steps)

    def suffix(self, n: int) -> "SharingChain":
        """The newest ``n`` steps (the whole chain when shorter)."""
        if n < 1:
            raise ChainError("suffix length must be >= 1")
        return SharingChain(self.steps[-n:])

    def __str__(self) -> str:
        return SEPARATOR.join(self.steps)


def format_chain_label(chain: SharingChain) -> str:
    return SEPARATOR.join(chain.steps)


def parse_chain_label(text: str, platforms: PlatformSet | Iterable[str] | None = None,
                      max_len: int | None = None) -> SharingChain:
    """Parse ``"TW>FB"`` (oldest first) into a chain.

    When ``platforms`` is given, every token must name one of them; when
    ``max_len`` is given, longer chains are rejected.
    """
    if not isinstance(text, str) or not text.strip():
        raise ChainError("empty chain label")
    tokens = [t.strip() for t in text.strip().split(SEPARATOR)]
    if any(not t for t in tokens):
        raise ChainError(f"malformed chain label {text!r}")
    if platforms is not None:
        pset = as_platform_set(platforms)
        for t in tokens:
            if t not in pset:
                raise ChainError(f"unknown platform {t!r} in label {text!r}")
    if max_len is not None and len(tokens) > max_len:
        raise ChainError(f"label {text!r} longer than L={max_len}")
    return SharingChain(tuple(tokens))


def remap_label(chain: SharingChain, target_len: int) -> SharingChain:
    """Truncate ``chain`` to its newest ``target_len`` steps."""
    return chain.suffix(target_len)


class ChainUniverse:
    """All chains of length ``1..max_len`` over a platform set (Omega_L).

    Chains are ordered canonically: shorter first, then lexicographically by
    platform id, oldest step first.
    """

    def __init__(self, platforms: PlatformSet | Iterable[str], max_len: int):
        self.platforms = as_platform_set(platforms)
        if not isinstance(max_len, int) or max_len < 1:
            raise ChainError(f"max_len must be a positive integer, got {max_len!r}")
        self.max_len = max_len
        names = self.platforms.names
        self.chains_by_len = {
            n: tuple(SharingChain(steps) for steps in itertools.product(names, repeat=n))
            for n in range(1, max_len + 1)
        }

    def __repr__(self) -> str:
        return f"ChainUniverse({list(self.platforms.names)!r}, max_len={self.max_len})"

    def omega(self, n: int | None = None) -> tuple[SharingChain, ...]:
        """Omega_n in canonical order (defaults to Omega_L)."""
        n = self.max_len if n is None else n
        if not 0 <= n <= self.max_len:
            raise ChainError(f"length {n} outside 0..{self.max_len}")
        return tuple(c for k in range(1, n + 1) for c in self.chains_by_len[k])

    def exact(self, n: int) -> tuple[SharingChain, ...]:
        """Chains of length exactly ``n`` (Omega_n minus Omega_{n-1})."""
        if n == 0:
            return ()
        return self.chains_by_len[n]

    def __len__(self) -> int:
        return sum(len(v) for v in self.chains_by_len.values())

    def __contains__(self, chain: object) -> bool:
        return (isinstance(chain, SharingChain) and 1 <= len(chain) <= self.max_len
                and all(s in self.platforms for s in chain.steps))

    def sort_key(self, chain: SharingChain) -> tuple:
        return (len(chain), tuple(self.platforms.id_of(s) for s in chain.steps))

    def validate(self, chain: SharingChain) -> SharingChain:
        if chain not in self:
            raise ChainError(f"chain {chain} is not in Omega_{self.max_len} over {self.platforms.names}")
        return chain

    def parse(self, text: str) -> SharingChain:
        return parse_chain_label(text, self.platforms, self.max_len)

    def backtrack_candidates(self, chain: SharingChain) -> tuple[SharingChain, ...]:
        return backtrack_candidates(chain, self.platforms, self.max_len)

    def class_index(self, n: int | None = None) -> "ChainClassIndex":
        return ChainClassIndex(self.omega(n))


def enumerate_universe(platforms: PlatformSet | Iterable[str], max_len: int) -> ChainUniverse:
    return ChainUniverse(platforms, max_len)


def backtrack_candidates(chain: SharingChain, platforms: PlatformSet | Iterable[str],
                         max_len: int | None = None) -> tuple[SharingChain, ...]:
    """``{chain}`` followed by B(chain), the one-step-earlier extensions.

    The order (chain itself first, then extensions by platform id) is the
    local class order used by the backtracking detectors.
    """
    pset = as_platform_set(platforms)
    if len(chain) == 0:
        raise ChainError("cannot backtrack an empty chain")
    if max_len is not None and len(chain) >= max_len:
        raise ChainError(f"chain {chain} already has the maximum length {max_len}")
    return (chain,) + tuple(chain.prepend(p.name) for p in pset)


class ChainClassIndex:
    """Bijection between a list of chains and dense class indices."""

    def __init__(self, chains: Sequence[SharingChain]):
        self.chains = tuple(chains)
        self._index = {c: i for i, c in enumerate(self.chains)}
        if len(self._index) != len(self.chains):
            raise ChainError("duplicate chains in class index")

    def __len__(self) -> int:
        return len(self.chains)

    def __iter__(self) -> Iterator[SharingChain]:
        return iter(self.chains)

    def __contains__(self, chain: object) -> bool:
        return chain in self._index

    def index(self, chain: SharingChain) -> int:
        try:
            return self._index[chain]
        except KeyError:
            raise ChainError(f"chain {chain} is not in this label space") from None

    def chain(self, i: int) -> SharingChain:
        return self.chains[i]

    def labels(self) -> list[str]:
        return [format_chain_label(c) for c in self.chains]


def collapse_chain(chain: SharingChain, stop_platform: str) -> SharingChain:
    """Truncate at the newest occurrence of ``stop_platform``.

    The stop platform is kept as the oldest retained step, so
    ``FB>TW>FL`` collapses to ``TW>FL`` and ``FB>FL>TW`` to ``TW``.
    """
    steps = chain.steps
    for k in range(len(steps) - 1, -1, -1):
        if steps[k] == stop_platform:
            return SharingChain(steps[k:])
    return chain


def collapse_informed(universe: ChainUniverse, stop_platform: str,
                      max_len: int | None = None) -> ChainClassIndex:
    """Label space of the informed cascade over ``Omega_max_len``."""
    if stop_platform not in universe.platforms:
        raise ChainError(f"stop platform {stop_platform!r} not in {universe.platforms.names}")
    seen: dict[SharingChain, None] = {}
    for c in universe.omega(max_len):
        seen.setdefault(collapse_chain(c, stop_platform))
    return ChainClassIndex(sorted(seen, key=universe.sort_key))
