"""Per-step accuracy, rejection and confusion reports for a cascade."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .cascade import ChainCascade, CascadeOutput
from .chains import ChainClassIndex, SharingChain, collapse_chain, collapse_informed
from .features import FeatureRecord

REPORT_VERSION = 1


@dataclass
class StepReport:
    block: int
    classes: ChainClassIndex
    confusion: np.ndarray  # rows = true, cols = predicted
    rejections: np.ndarray  # per true class

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def total(self) -> int:
        return int(self.confusion.sum() + self.rejections.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.confusion))

    @property
    def rejected(self) -> int:
        return int(self.rejections.sum())

    @property
    def acc_strict(self) -> float:
        return self.correct / self.total if self.total else 0.0

    @property
    def acc_conditional(self) -> float:
        kept = self.total - self.rejected
        return self.correct / kept if kept else 0.0

    @property
    def rejection_rate(self) -> float:
        return self.rejected / self.total if self.total else 0.0

    @property
    def random_guess(self) -> float:
        return 1.0 / self.n_classes

    def to_dict(self) -> dict:
        return {
            "block": self.block,
            "n_classes": self.n_classes,
            "labels": self.classes.labels(),
            "total": self.total,
            "acc_strict": self.acc_strict,
            "acc_conditional": self.acc_conditional,
            "rejection_rate": self.rejection_rate,
            "random_guess": self.random_guess,
            "confusion": self.confusion.tolist(),
            "rejections": self.rejections.tolist(),
        }

    def write_csv(self, path: str | Path) -> None:
        labels = self.classes.labels()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["true\\pred", *labels, "rejected"])
            for i, lab in enumerate(labels):
                w.writerow([lab, *self.confusion[i].tolist(), int(self.rejections[i])])


def step_label_space(model: ChainCascade, block: int) -> ChainClassIndex:
    """Omega_{block+1}, collapsed at the stop platform for informed models."""
    if model.informed_stop is None:
        return model.universe_.class_index(block + 1)
    return collapse_informed(model.universe_, model.informed_stop, block + 1)


def step_truth(model: ChainCascade, label: SharingChain, block: int) -> SharingChain:
    truth = label.suffix(block + 1)
    if model.informed_stop is not None:
        truth = collapse_chain(truth, model.informed_stop)
    return truth


def reports_from_outputs(model: ChainCascade, outputs: Sequence[CascadeOutput],
                         labels: Sequence[SharingChain]) -> list[StepReport]:
    reports = []
    for block in range(model.max_len):
        space = step_label_space(model, block)
        conf = np.zeros((len(space), len(space)), dtype=np.int64)
        rej = np.zeros(len(space), dtype=np.int64)
        for out, label in zip(outputs, labels):
            t = space.index(step_truth(model, label, block))
            pred = out.state_after(block)
            if pred is None:
                rej[t] += 1
            else:
                conf[t, space.index(pred)] += 1
        reports.append(StepReport(block, space, conf, rej))
    return reports


def evaluate_cascade(model: ChainCascade, records: Sequence[FeatureRecord],
                     single_feature: str | None = None) -> list[StepReport]:
    labels = []
    for r in records:
        if r.label is None:
            raise ValueError(f"test record {r.id!r} has no label")
        labels.append(model.universe_.validate(r.label))
    outputs = model.decode(records, single_feature=single_feature)
    return reports_from_outputs(model, outputs, labels)


def confusion_block_structure(report: StepReport, position: int = 0) -> float:
    """Share of confusion mass whose true and predicted chains agree at ``position``."""
    total = report.confusion.sum()
    if total == 0:
        return 1.0
    chains = report.classes.chains

    def key(c):
        return c[position] if len(c) > -position else None

    keys = [key(c) for c in chains]
    same = np.array([[a is not None and a == b for b in keys] for a in keys])
    return float(report.confusion[same].sum() / total)


def report_document(reports: Sequence[StepReport], model: ChainCascade, single_feature: str | None = None) -> dict:
    return {
        "version": REPORT_VERSION,
        "platforms": list(model.universe_.platforms.names),
        "L": model.max_len,
        "features": [single_feature] if single_feature else list(model.features_),
        "fusion": single_feature is None,
        "informed_stop": model.informed_stop,
        "steps": [r.to_dict() for r in reports],
    }


def write_report(reports: Sequence[StepReport], model: ChainCascade, path: str | Path,
                 single_feature: str | None = None, csv_dir: str | Path | None = None) -> None:
    path = Path(path)
    path.write_text(json.dumps(report_document(reports, model, single_feature), indent=1) + "\n", encoding="utf-8")
    if csv_dir is not None:
        csv_dir = Path(csv_dir)
        csv_dir.mkdir(parents=True, exist_ok=True)
        for r in reports:
            r.write_csv(csv_dir / f"confusion_block{r.block}.csv")


def summary_line(reports: Sequence[StepReport]) -> str:
    return "  ".join(
        f"F{-r.block if r.block else 0}[{r.n_classes}]: acc={r.acc_strict:.4f} rej={r.rejection_rate:.4f}"
        for r in reports)

