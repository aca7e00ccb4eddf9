"""Cascade of backtracking blocks.

Block 0 decides the newest platform. Block ``l >= 1`` receives the chain
reconstructed so far; if that chain is shorter than ``l`` an earlier block
decided to stop and the chain passes through unchanged. Otherwise the
detectors specialized for that exact chain vote between keeping it and
prepending one earlier platform, and their decisions are fused with the
context's BKS table. A BKS rejection halts the reconstruction.

Every detector and every BKS table shares the local class space
``0 = keep, 1 + platform_id = prepend platform``. At block 0 the context
is the empty chain and class 0 never occurs in training.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .bks import REJECT, BKSCombiner
from .chains import (
    ChainError, ChainUniverse, SharingChain, format_chain_label, parse_chain_label,
)
from .features import FEATURE_NAMES, FeatureRecord, feature_matrix, normalize_subset
from .forest import RandomForest

log = logging.getLogger(__name__)

MODEL_VERSION = 1
EMPTY = SharingChain(())


class TrainingError(ValueError):
    pass


class InferenceError(ValueError):
    pass


@dataclass(frozen=True)
class DetectorKey:
    block: int
    context: SharingChain
    feature: str


def plan_detectors(universe: ChainUniverse, features: Sequence[str] | int) -> list[DetectorKey]:
    """One detector per (block, context, feature) in canonical order.

    ``features`` may be a list of names or just their count ``K``.
    """
    if isinstance(features, int):
        features = [f"e{k}" for k in range(features)]
    keys = [DetectorKey(0, EMPTY, f) for f in features]
    for block in range(1, universe.max_len):
        for ctx in universe.exact(block):
            keys.extend(DetectorKey(block, ctx, f) for f in features)
    return keys


def block_contexts(universe: ChainUniverse, block: int) -> tuple[SharingChain, ...]:
    return (EMPTY,) if block == 0 else universe.exact(block)


@dataclass(frozen=True)
class BlockStep:
    """What one block did for one input."""

    block: int
    context: SharingChain
    action: str  # "detect" | "pass" | "informed-stop"
    decisions: tuple[int, ...] | None = None
    fused: int | None = None
    reason: str | None = None
    output: SharingChain | None = None


@dataclass(frozen=True)
class CascadeOutput:
    chain: SharingChain
    rejected: bool
    rejection_block: int | None
    trace: tuple[BlockStep, ...]

    def state_after(self, block: int) -> SharingChain | None:
        """Chain after ``block``, or None when rejected at or before it."""
        if self.rejected and self.rejection_block <= block:
            return None
        return self.trace[block].output


@dataclass
class ContextModel:
    """Detectors and fusion table of one (block, partial chain) context."""

    chain: SharingChain
    detectors: dict[str, Any]
    bks: BKSCombiner
    n_train: int = 0
    n_val: int = 0
    classes: tuple[SharingChain, ...] = field(default=())


def _local_target(label: SharingChain, block: int, pids: Mapping[str, int]) -> int:
    if block == 0:
        return 1 + pids[label[0]]
    if len(label) == block:
        return 0
    return 1 + pids[label[-block]]


def _derive_seed(root: int, *path: int) -> int:
    return int(np.random.SeedSequence([int(root), *map(int, path)]).generate_state(1)[0])


def _as_matrices(X, features: Sequence[str]) -> tuple[dict[str, np.ndarray], int]:
    if isinstance(X, Mapping):
        mats = {f: np.asarray(X[f], dtype=np.float64) for f in features}
        sizes = {m.shape[0] for m in mats.values()}
        if len(sizes) != 1:
            raise ValueError("feature matrices have different row counts")
        return mats, sizes.pop()
    records = list(X)
    missing = [f for f in features if any(getattr(r, f) is None for r in records)]
    if missing:
        raise ValueError(f"records lack descriptor(s) {missing} required by the model")
    return {f: feature_matrix(records, f) for f in features}, len(records)


def _labels_from(X, y) -> list[SharingChain]:
    if y is None:
        if isinstance(X, Mapping):
            raise ValueError("labels are required when X is a matrix mapping")
        y = [r.label for r in X]
    out = []
    for c in y:
        if c is None:
            raise ValueError("every training/validation sample needs a label")
        out.append(parse_chain_label(c) if isinstance(c, str) else c)
    return out


class ChainCascade(BaseEstimator):
    """Multi-step sharing-chain reconstructor.

    Parameters
    ----------
    platforms : tuple of str
        Platform names; their order fixes platform ids.
    max_len : int
        Longest reconstructable chain ``L``; the cascade has ``L`` blocks.
    features : tuple of str
        Descriptors, one detector per descriptor and context.
    n_estimators : int
        Trees per random forest detector.
    random_state : int
        Root seed for all detectors.
    informed_stop : str, optional
        Platform after which backtracking stops.

    Attributes
    ----------
    universe_ : ChainUniverse
    blocks_ : list of dict
        ``blocks_[l][context]`` is the :class:`ContextModel` of that context.
    warnings_ : list of str
    """

    def __init__(self, platforms=("FB", "FL", "TW"), max_len=3, features=FEATURE_NAMES,
                 n_estimators=10, random_state=0, informed_stop=None):
        self.platforms = platforms
        self.max_len = max_len
        self.features = features
        self.n_estimators = n_estimators
        self.random_state = random_state
        self.informed_stop = informed_stop

    # -- configuration -------------------------------------------------
    def _setup(self) -> None:
        self.universe_ = ChainUniverse(self.platforms, self.max_len)
        self.features_ = normalize_subset(self.features)
        if self.informed_stop is not None and self.informed_stop not in self.universe_.platforms:
            raise ChainError(f"informed stop platform {self.informed_stop!r} is not a configured platform")
        self.n_local_ = len(self.universe_.platforms) + 1
        self._pids = {p.name: p.id for p in self.universe_.platforms}

    def local_classes(self, context: SharingChain) -> tuple[SharingChain, ...]:
        """Output chain of each local class for ``context``."""
        return (context,) + tuple(context.prepend(p.name) for p in self.universe_.platforms)

    # -- training ------------------------------------------------------
    def fit(self, X, y=None, X_val=None, y_val=None):
        """Train detectors on ``(X, y)`` and BKS tables on ``(X_val, y_val)``.

        ``X`` is a list of :class:`FeatureRecord` (labels may then come from
        the records) or a mapping from feature name to matrix.
        """
        self._setup()
        if X_val is None:
            raise TrainingError("a validation split is required to fit the fusion tables")
        mats, n = _as_matrices(X, self.features_)
        vmats, nv = _as_matrices(X_val, self.features_)
        labels = [self.universe_.validate(c) for c in _labels_from(X, y)]
        vlabels = [self.universe_.validate(c) for c in _labels_from(X_val, y_val)]
        if n == 0 or len(labels) != n:
            raise TrainingError("training split is empty or misaligned with its labels")
        if nv == 0 or len(vlabels) != nv:
            raise TrainingError("validation split is empty or misaligned with its labels")

        self.warnings_ = []
        self.blocks_ = []
        for block in range(self.max_len):
            tr_groups = self._group(labels, block)
            va_groups = self._group(vlabels, block)
            contexts = {}
            for ci, ctx in enumerate(block_contexts(self.universe_, block)):
                tr_idx = tr_groups.get(ctx, [])
                if not tr_idx:
                    raise TrainingError(
                        f"no training samples for block {block} context '{format_chain_label(ctx) or '<root>'}'")
                ytr = np.array([_local_target(labels[i], block, self._pids) for i in tr_idx])
                detectors = {}
                for fi, feat in enumerate(self.features_):
                    forest = RandomForest(n_estimators=self.n_estimators, n_classes=self.n_local_,
                                          random_state=_derive_seed(self.random_state, block, ci, fi))
                    detectors[feat] = forest.fit(mats[feat][tr_idx], ytr)
                va_idx = va_groups.get(ctx, [])
                if va_idx:
                    yva = np.array([_local_target(vlabels[i], block, self._pids) for i in va_idx])
                    dec = np.column_stack([detectors[f].predict(vmats[f][va_idx]) for f in self.features_])
                else:
                    msg = (f"no validation samples for block {block} context "
                           f"'{format_chain_label(ctx) or '<root>'}'; its fusion table is empty")
                    log.warning(msg)
                    self.warnings_.append(msg)
                    yva = np.zeros(0, dtype=np.int64)
                    dec = np.zeros((0, len(self.features_)), dtype=np.int64)
                bks = BKSCombiner(n_classes=self.n_local_, expert_order=self.features_)
                bks.fit(dec, yva, n_experts=len(self.features_))
                contexts[ctx] = ContextModel(ctx, detectors, bks, len(tr_idx), len(va_idx), self.local_classes(ctx))
            self.blocks_.append(contexts)
        return self

    def _group(self, labels: Sequence[SharingChain], block: int) -> dict[SharingChain, list[int]]:
        groups: dict[SharingChain, list[int]] = defaultdict(list)
        for i, c in enumerate(labels):
            if block == 0:
                groups[EMPTY].append(i)
            elif len(c) >= block:
                groups[c.suffix(block)].append(i)
        return groups

    @classmethod
    def assemble(cls, detectors: Mapping[tuple[int, SharingChain], Mapping[str, Any]],
                 tables: Mapping[tuple[int, SharingChain], BKSCombiner], **params) -> "ChainCascade":
        """Build a fitted cascade from existing parts.

        ``detectors[(block, context)]`` maps feature names to any object with
        ``predict(X)`` returning local class indices; ``tables`` holds the
        matching fusion tables. Every context of every block must be present.
        """
        model = cls(**params)
        model._setup()
        model.warnings_ = []
        model.blocks_ = []
        for block in range(model.max_len):
            contexts = {}
            for ctx in block_contexts(model.universe_, block):
                if (block, ctx) not in detectors or (block, ctx) not in tables:
                    raise ValueError(f"missing parts for block {block} context '{format_chain_label(ctx)}'")
                dets = dict(detectors[(block, ctx)])
                if set(dets) != set(model.features_):
                    raise ValueError(f"block {block} context '{format_chain_label(ctx)}' needs detectors "
                                     f"for {model.features_}")
                contexts[ctx] = ContextModel(ctx, dets, tables[(block, ctx)], classes=model.local_classes(ctx))
            model.blocks_.append(contexts)
        return model

    # -- inference -----------------------------------------------------
    def decode(self, X, single_feature: str | None = None) -> list[CascadeOutput]:
        """Run the cascade on every sample and return full outputs with traces."""
        check_is_fitted(self, "blocks_")
        if single_feature is not None and single_feature not in self.features_:
            raise InferenceError(f"feature {single_feature!r} is not part of this model ({self.features_})")
        mats, n = _as_matrices(X, self.features_ if single_feature is None else (single_feature,))
        state = [EMPTY] * n
        rejected_at: list[int | None] = [None] * n
        traces: list[list[BlockStep]] = [[] for _ in range(n)]
        stop = self.informed_stop
        for block in range(self.max_len):
            groups: dict[SharingChain, list[int]] = defaultdict(list)
            for i in range(n):
                if rejected_at[i] is not None:
                    continue
                c = state[i]
                if block > 0 and len(c) < block:
                    traces[i].append(BlockStep(block, c, "pass", output=c))
                elif block > 0 and stop is not None and c.oldest == stop:
                    traces[i].append(BlockStep(block, c, "informed-stop", output=c))
                else:
                    groups[c].append(i)
            for ctx in sorted(groups, key=lambda c: (len(c), [self._pids[s] for s in c.steps])):
                idx = groups[ctx]
                model = self.blocks_[block].get(ctx)
                if model is None:
                    raise InferenceError(f"no detectors for block {block} context '{format_chain_label(ctx)}'")
                feats = self.features_ if single_feature is None else (single_feature,)
                dec = np.column_stack([np.asarray(model.detectors[f].predict(mats[f][idx]), dtype=np.int64)
                                       for f in feats])
                fused = dec[:, 0] if single_feature is not None else model.bks.predict(dec)
                for row, i in enumerate(idx):
                    d = tuple(int(v) for v in dec[row])
                    cls = int(fused[row])
                    if cls == REJECT:
                        reason = model.bks.fuse(d).reason
                        traces[i].append(BlockStep(block, ctx, "detect", d, None, reason, ctx))
                        rejected_at[i] = block
                        continue
                    if cls == 0 and block == 0:
                        raise InferenceError("block 0 decided to keep the empty chain")
                    out = ctx if cls == 0 else ctx.prepend(self.universe_.platforms.name_of(cls - 1))
                    traces[i].append(BlockStep(block, ctx, "detect", d, cls, None, out))
                    state[i] = out
        return [CascadeOutput(state[i], rejected_at[i] is not None, rejected_at[i], tuple(traces[i]))
                for i in range(n)]

    def predict(self, X) -> list[SharingChain]:
        return [o.chain for o in self.decode(X)]

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        check_is_fitted(self, "blocks_")
        blocks = []
        for block, contexts in enumerate(self.blocks_):
            entries = []
            for ctx in block_contexts(self.universe_, block):
                m = contexts[ctx]
                entries.append({
                    "chain": format_chain_label(ctx),
                    "n_train": int(m.n_train),
                    "n_val": int(m.n_val),
                    "forests": {f: m.detectors[f].to_dict() for f in self.features_},
                    "bks": m.bks.to_dict(),
                })
            blocks.append({"block": block, "contexts": entries})
        return {
            "version": MODEL_VERSION,
            "platforms": list(self.universe_.platforms.names),
            "L": int(self.max_len),
            "features": list(self.features_),
            "informed_stop": self.informed_stop,
            "n_estimators": int(self.n_estimators),
            "random_state": int(self.random_state),
            "warnings": list(self.warnings_),
            "blocks": blocks,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ChainCascade":
        if obj.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {obj.get('version')!r}")
        model = cls(platforms=tuple(obj["platforms"]), max_len=int(obj["L"]), features=tuple(obj["features"]),
                    n_estimators=int(obj["n_estimators"]), random_state=int(obj["random_state"]),
                    informed_stop=obj.get("informed_stop"))
        model._setup()
        model.warnings_ = list(obj.get("warnings", []))
        if len(obj["blocks"]) != model.max_len:
            raise ValueError(f"model has {len(obj['blocks'])} blocks, expected L={model.max_len}")
        model.blocks_ = []
        for block, entry in enumerate(obj["blocks"]):
            contexts = {}
            for c in entry["contexts"]:
                ctx = EMPTY if c["chain"] == "" else model.universe_.parse(c["chain"])
                detectors = {f: RandomForest.from_dict(c["forests"][f]) for f in model.features_}
                for f, det in detectors.items():
                    if det.n_classes_ != model.n_local_:
                        raise ValueError(f"detector {f} of context '{c['chain']}' has {det.n_classes_} classes")
                bks = BKSCombiner.from_dict(c["bks"])
                contexts[ctx] = ContextModel(ctx, detectors, bks, c.get("n_train", 0), c.get("n_val", 0),
                                             model.local_classes(ctx))
            expected = set(block_contexts(model.universe_, block))
            if set(contexts) != expected:
                raise ValueError(f"block {block} does not cover exactly the contexts of length {block}")
            model.blocks_.append(contexts)
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(dumps_model(self), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ChainCascade":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def dumps_model(model: ChainCascade) -> str:
    return json.dumps(model.to_dict(), separators=(",", ":")) + "\n"


@dataclass(frozen=True)
class CascadeConfig:
    platforms: tuple[str, ...] = ("FB", "FL", "TW")
    max_len: int = 3
    features: tuple[str, ...] = FEATURE_NAMES
    n_estimators: int = 10
    seed: int = 0
    informed_stop: str | None = None


def train_cascade(train: Sequence[FeatureRecord], validation: Sequence[FeatureRecord],
                  config: CascadeConfig = CascadeConfig()) -> ChainCascade:
    model = ChainCascade(platforms=tuple(config.platforms), max_len=config.max_len, features=tuple(config.features),
                         n_estimators=config.n_estimators, random_state=config.seed,
                         informed_stop=config.informed_stop)
    return model.fit(train, None, validation, None)


def infer(model: ChainCascade, record: FeatureRecord) -> CascadeOutput:
    return model.decode([record])[0]


def infer_single_feature(model: ChainCascade, record: FeatureRecord, feature: str) -> CascadeOutput:
    return model.decode([record], single_feature=feature)[0]


def with_informed_stop(model: ChainCascade, stop: str | None) -> ChainCascade:
    """Copy of a fitted cascade sharing its detectors, with another stop rule."""
    check_is_fitted(model, "blocks_")
    other = ChainCascade(**{**model.get_params(), "informed_stop": stop})
    other._setup()
    other.blocks_ = model.blocks_
    other.warnings_ = list(model.warnings_)
    return other
