"""Behavior-Knowledge-Space fusion of crisp classifier decisions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

REJECT = -1


@dataclass(frozen=True)
class FusedDecision:
    """Fused class with its posterior, or a rejection with its reason."""

    label: int | None
    posterior: tuple[float, ...] | None = None
    reason: str | None = None  # "empty-unit" | "tie"

    @property
    def rejected(self) -> bool:
        return self.label is None


def unit_index(decisions: Sequence[int], n_classes: int) -> int:
    """Mixed-radix unit id ``sum_k decisions[k] * n_classes**k``."""
    unit = 0
    for k, d in enumerate(decisions):
        d = int(d)
        if not 0 <= d < n_classes:
            raise ValueError(f"decision {d} of expert {k} outside 0..{n_classes - 1}")
        unit += d * n_classes ** k
    return unit


def unit_decisions(unit: int, n_experts: int, n_classes: int) -> tuple[int, ...]:
    out = []
    for _ in range(n_experts):
        unit, d = divmod(unit, n_classes)
        out.append(d)
    return tuple(out)


class BKSCombiner(BaseEstimator):
    """Lookup table from joint expert decisions to per-class sample counts.

    Parameters
    ----------
    n_classes : int
        Shared size of the expert and fused decision spaces.
    expert_order : tuple of str, optional
        Names of the experts, fixing the unit coordinate order.

    Attributes
    ----------
    counts_ : ndarray of shape (n_classes ** n_experts, n_classes)
        ``counts_[u, y]`` is the number of fitting samples of class ``y``
        whose decisions fell into unit ``u``.
    """

    def __init__(self, n_classes=4, expert_order=None):
        self.n_classes = n_classes
        self.expert_order = expert_order

    @property
    def n_units(self) -> int:
        return self.n_classes ** self.n_experts_

    def _unit_ids(self, decisions: np.ndarray) -> np.ndarray:
        if decisions.ndim != 2 or decisions.shape[1] != self.n_experts_:
            raise ValueError(f"expected decisions of shape (n, {self.n_experts_}), got {decisions.shape}")
        if decisions.size and (decisions.min() < 0 or decisions.max() >= self.n_classes):
            raise ValueError(f"decisions must lie in 0..{self.n_classes - 1}")
        radix = self.n_classes ** np.arange(self.n_experts_, dtype=np.int64)
        return decisions @ radix

    def fit(self, decisions, y, n_experts: int | None = None):
        decisions = np.asarray(decisions, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64).ravel()
        if decisions.ndim == 1:
            decisions = decisions.reshape(-1, 1) if n_experts in (None, 1) else decisions.reshape(0, n_experts)
        if decisions.shape[0] != len(y):
            raise ValueError(f"{decisions.shape[0]} decision rows but {len(y)} labels")
        if n_experts is None:
            n_experts = len(self.expert_order) if self.expert_order else decisions.shape[1]
        if decisions.shape[1] != n_experts:
            raise ValueError(f"expected {n_experts} experts, got {decisions.shape[1]}")
        if self.expert_order is not None and len(self.expert_order) != n_experts:
            raise ValueError("expert_order length does not match the number of experts")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise ValueError(f"labels must lie in 0..{self.n_classes - 1}")
        self.n_experts_ = n_experts
        units = self._unit_ids(decisions)
        counts = np.zeros((self.n_units, self.n_classes), dtype=np.int64)
        np.add.at(counts, (units, y), 1)
        self.counts_ = counts
        return self

    def unit_counts(self, decisions: Sequence[int]) -> np.ndarray:
        check_is_fitted(self, "counts_")
        if len(decisions) != self.n_experts_:
            raise ValueError(f"expected {self.n_experts_} decisions, got {len(decisions)}")
        return self.counts_[unit_index(decisions, self.n_classes)]

    def fuse(self, decisions: Sequence[int]) -> FusedDecision:
        counts = self.unit_counts(decisions)
        total = int(counts.sum())
        if total == 0:
            return FusedDecision(None, reason="empty-unit")
        top = counts.max()
        winners = np.flatnonzero(counts == top)
        if len(winners) > 1:
            return FusedDecision(None, reason="tie")
        return FusedDecision(int(winners[0]), tuple(float(c) / total for c in counts))

    def predict(self, decisions) -> np.ndarray:
        """Fused class per row, ``REJECT`` (-1) where the table rejects."""
        check_is_fitted(self, "counts_")
        decisions = np.asarray(decisions, dtype=np.int64)
        rows = self.counts_[self._unit_ids(decisions)]
        top = rows.max(axis=1, keepdims=True)
        unique = (rows == top).sum(axis=1) == 1
        ok = unique & (top[:, 0] > 0)
        return np.where(ok, rows.argmax(axis=1), REJECT)

    def to_dict(self) -> dict:
        check_is_fitted(self, "counts_")
        nz = np.flatnonzero(self.counts_.sum(axis=1))
        return {
            "n_classes": int(self.n_classes),
            "n_experts": int(self.n_experts_),
            "expert_order": list(self.expert_order) if self.expert_order else None,
            "units": {str(int(u)): self.counts_[u].tolist() for u in nz},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "BKSCombiner":
        order = obj.get("expert_order")
        table = cls(n_classes=int(obj["n_classes"]), expert_order=tuple(order) if order else None)
        table.n_experts_ = int(obj["n_experts"])
        counts = np.zeros((table.n_units, table.n_classes), dtype=np.int64)
        for u, row in obj["units"].items():
            u = int(u)
            if not 0 <= u < table.n_units or len(row) != table.n_classes or min(row) < 0:
                raise ValueError(f"invalid BKS unit {u}")
            counts[u] = row
        table.counts_ = counts
        return table


def fit_bks(predictions, labels, n_experts: int, n_classes: int, expert_order=None) -> BKSCombiner:
    return BKSCombiner(n_classes=n_classes, expert_order=expert_order).fit(predictions, labels, n_experts=n_experts)


def fuse(table: BKSCombiner, decisions: Sequence[int]) -> FusedDecision:
    return table.fuse(decisions)
