"""Nearest-neighbour separability measures: IER and Local Set Radius."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .chains import SharingChain, format_chain_label

ROW_BLOCK = 512


class SeparabilityError(ValueError):
    pass


def _nearest(features: np.ndarray, labels: np.ndarray, same_class: bool) -> np.ndarray:
    """Per-sample distance to the nearest same-class (self excluded) or other-class sample."""
    n = features.shape[0]
    out = np.empty(n)
    for start in range(0, n, ROW_BLOCK):
        stop = min(start + ROW_BLOCK, n)
        d = cdist(features[start:stop], features)
        mask = labels[start:stop, None] == labels[None, :]
        if same_class:
            mask = ~mask
            mask[np.arange(stop - start), np.arange(start, stop)] = True
        d[mask] = np.inf
        out[start:stop] = d.min(axis=1)
    return out


def _prepare(features, labels):
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise SeparabilityError("features must be a 2-D matrix")
    y = np.asarray([format_chain_label(c) if isinstance(c, SharingChain) else c for c in labels])
    if len(y) != X.shape[0]:
        raise SeparabilityError("features and labels are not aligned")
    return X, y


def lsr(features, labels) -> np.ndarray:
    """Local Set Radius: distance from each sample to its nearest enemy."""
    X, y = _prepare(features, labels)
    if len(np.unique(y)) < 2:
        raise SeparabilityError("LSR needs at least two classes (no enemies exist)")
    return _nearest(X, y, same_class=False)


def ier(features, labels) -> float:
    """Sum of intra-class NN distances over sum of extra-class NN distances.

    Returns ``inf`` when every sample coincides with an enemy.
    """
    X, y = _prepare(features, labels)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise SeparabilityError("IER needs at least two classes")
    if counts.min() < 2:
        raise SeparabilityError(f"class {classes[counts.argmin()]!r} has a single sample (no intra-class neighbour)")
    intra = _nearest(X, y, same_class=True).sum()
    extra = _nearest(X, y, same_class=False).sum()
    if extra == 0:
        return float("inf")
    return float(intra / extra)


def standardize(features) -> np.ndarray:
    """Column-wise z-scores; constant columns become zero."""
    X = np.asarray(features, dtype=np.float64)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - X.mean(axis=0)) / sd


def group_stats(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"n": int(v.size), "min": float(v.min()), "q1": float(q1), "median": float(med),
            "mean": float(v.mean()), "q3": float(q3), "max": float(v.max())}


def per_class_mean(values, labels) -> dict[str, float]:
    y = [format_chain_label(c) if isinstance(c, SharingChain) else str(c) for c in labels]
    v = np.asarray(values, dtype=np.float64)
    out: dict[str, list[float]] = {}
    for lab, val in zip(y, v):
        out.setdefault(lab, []).append(val)
    return {k: float(np.mean(vs)) for k, vs in out.items()}


@dataclass
class GroupedStats:
    position: int
    groups: dict[str, dict]
    notes: list[str] = field(default_factory=list)


def aggregate_by_platform(values, labels: Sequence[SharingChain], position: int,
                          platforms: Sequence[str] | None = None) -> GroupedStats:
    """Statistics of ``values`` grouped by the platform at ``chain[position]``.

    Groups are ``"<P>@<position>"`` for each platform ``P`` plus ``"omega*"``,
    the samples whose chain has no step at that position. Empty groups are
    omitted and listed in ``notes``.
    """
    if position not in (0, -1):
        raise ValueError("position must be 0 or -1")
    v = np.asarray(values, dtype=np.float64)
    if platforms is None:
        platforms = sorted({s for c in labels for s in c.steps})
    members: dict[str, list[int]] = {f"{p}@{position}": [] for p in platforms}
    members["omega*"] = []
    for i, c in enumerate(labels):
        if len(c) > -position and f"{c[position]}@{position}" in members:
            members[f"{c[position]}@{position}"].append(i)
        else:
            members["omega*"].append(i)
    out = GroupedStats(position, {})
    for name, idx in members.items():
        if idx:
            out.groups[name] = group_stats(v[idx])
        else:
            out.notes.append(f"group {name} is empty")
    return out


def platform_view(values, labels: Sequence[SharingChain], platform: str) -> GroupedStats:
    """Groups for one platform: newest step, previous step, and neither (Omega*)."""
    v = np.asarray(values, dtype=np.float64)
    members = {f"{platform}@0": [], f"{platform}@-1": [], "omega*": []}
    for i, c in enumerate(labels):
        at0 = c[0] == platform
        at1 = len(c) > 1 and c[-1] == platform
        if at0:
            members[f"{platform}@0"].append(i)
        if at1:
            members[f"{platform}@-1"].append(i)
        if not at0 and not at1:
            members["omega*"].append(i)
    out = GroupedStats(0, {})
    for name, idx in members.items():
        if idx:
            out.groups[name] = group_stats(v[idx])
        else:
            out.notes.append(f"group {name} is empty")
    return out


def separability_report(features, labels: Sequence[SharingChain], metric: str = "lsr",
                        platforms: Sequence[str] | None = None, standardized: bool = False) -> dict:
    X = standardize(features) if standardized else np.asarray(features, dtype=np.float64)
    labels = list(labels)
    doc: dict = {"version": 1, "metric": metric, "standardized": standardized, "n": len(labels)}
    if metric == "ier":
        value = ier(X, labels)
        doc["ier"] = None if np.isinf(value) else value
        doc["ier_infinite"] = bool(np.isinf(value))
        return doc
    if metric != "lsr":
        raise ValueError(f"unknown metric {metric!r}")
    radii = lsr(X, labels)
    if platforms is None:
        platforms = sorted({s for c in labels for s in c.steps})
    doc["per_class_mean_lsr"] = per_class_mean(radii, labels)
    doc["aggregations"] = {}
    for pos in (0, -1):
        g = aggregate_by_platform(radii, labels, pos, platforms)
        doc["aggregations"][f"position{pos}"] = {"groups": g.groups, "notes": g.notes}
    doc["platform_views"] = {}
    for p in platforms:
        g = platform_view(radii, labels, p)
        doc["platform_views"][p] = {"groups": g.groups, "notes": g.notes}
    doc["per_sample_lsr"] = [float(r) for r in radii]
    return doc
