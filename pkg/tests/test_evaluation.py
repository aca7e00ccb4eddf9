import csv
import json

import numpy as np
import pytest

from conftest import StubDetector, identity_table
from sharechain.cascade import ChainCascade, block_contexts
from sharechain.chains import ChainClassIndex, ChainUniverse, SharingChain
from sharechain.evaluation import (
    StepReport, confusion_block_structure, evaluate_cascade, report_document, step_label_space,
    summary_line, write_report,
)
from sharechain.features import FeatureRecord

S3 = ("FB", "FL", "TW")


def coded_records(labels, L, noise_rng=None, noise=0.0):
    """Records whose dct row spells out the local target of every block."""
    pid = {p: i for i, p in enumerate(S3)}
    out = []
    for n, c in enumerate(labels):
        row = np.zeros(L)
        for b in range(L):
            row[b] = 1 + pid[c[-b]] if b < len(c) else 0
            if b and noise_rng is not None and noise_rng.random() < noise:
                row[b] = noise_rng.integers(0, 4)
        out.append(FeatureRecord(id=f"r{n}", label=c, dct=row))
    return out


def reader_cascade(L, informed_stop=None, reject_block=None):
    universe = ChainUniverse(S3, L)
    dets, tables = {}, {}
    for b in range(L):
        for ctx in block_contexts(universe, b):
            dets[(b, ctx)] = {"dct": StubDetector(lambda row, b=b: int(row[b]))}
            table = identity_table(4, 1)
            if b == reject_block:
                table.counts_[:] = 0
            tables[(b, ctx)] = table
    return ChainCascade.assemble(dets, tables, platforms=S3, max_len=L, features=("dct",),
                                 informed_stop=informed_stop)


def test_label_spaces_and_random_guess():
    model = reader_cascade(3)
    sizes = [len(step_label_space(model, b)) for b in range(3)]
    assert sizes == [3, 12, 39]
    labels = list(model.universe_.omega())
    reports = evaluate_cascade(model, coded_records(labels, 3))
    assert [r.n_classes for r in reports] == [3, 12, 39]
    assert round(reports[-1].random_guess, 4) == 0.0256
    assert all(r.acc_strict == 1.0 for r in reports)

    informed = reader_cascade(3, informed_stop="TW")
    reports = evaluate_cascade(informed, coded_records(labels, 3))
    assert reports[-1].n_classes == 21 and round(reports[-1].random_guess, 4) == 0.0476
    assert reports[-1].acc_strict == 1.0


def test_exact_first_step_gives_block_diagonal_confusion():
    rng = np.random.default_rng(0)
    model = reader_cascade(3)
    labels = [c for c in model.universe_.omega() for _ in range(5)]
    reports = evaluate_cascade(model, coded_records(labels, 3, rng, noise=0.5))
    assert reports[0].acc_strict == 1.0
    assert reports[2].acc_strict < 1.0
    for r in reports[1:]:
        assert confusion_block_structure(r) == 1.0


def test_confusion_block_structure_examples():
    space = ChainUniverse(S3, 2).class_index(2)
    diag = StepReport(1, space, np.eye(12, dtype=np.int64) * 4, np.zeros(12, dtype=np.int64))
    assert confusion_block_structure(diag) == 1.0
    uniform = StepReport(1, space, np.ones((12, 12), dtype=np.int64), np.zeros(12, dtype=np.int64))
    assert confusion_block_structure(uniform) == pytest.approx(1 / 3)


def test_rejections_are_counted_both_ways():
    model = reader_cascade(2, reject_block=1)
    labels = [c for c in model.universe_.omega() for _ in range(2)]
    reports = evaluate_cascade(model, coded_records(labels, 2))
    r = reports[1]
    assert r.rejection_rate == 1.0 and r.acc_strict == 0.0 and r.acc_conditional == 0.0
    assert r.confusion.sum() + r.rejections.sum() == len(labels)
    assert reports[0].rejection_rate == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_report_invariants(seed):
    rng = np.random.default_rng(seed)
    space = ChainClassIndex([SharingChain.of(p) for p in S3])
    conf = rng.integers(0, 5, (3, 3))
    rej = rng.integers(0, 3, 3) * int(rng.integers(0, 2))
    r = StepReport(0, space, conf, rej)
    assert r.acc_strict <= r.acc_conditional or r.total == r.rejected
    if r.rejected == 0 and r.total:
        assert r.acc_strict == r.acc_conditional
    assert 0 <= r.rejection_rate <= 1
    assert np.array_equal(conf.sum(axis=1) + rej, r.confusion.sum(axis=1) + r.rejections)


def test_report_files(tmp_path):
    model = reader_cascade(2)
    records = coded_records(list(model.universe_.omega()), 2)
    reports = evaluate_cascade(model, records)
    write_report(reports, model, tmp_path / "report.json", csv_dir=tmp_path / "csv")
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc == json.loads(json.dumps(report_document(reports, model)))
    assert [s["n_classes"] for s in doc["steps"]] == [3, 12]
    rows = list(csv.reader(open(tmp_path / "csv" / "confusion_block1.csv")))
    assert rows[0][1:4] == ["FB", "FL", "TW"] and rows[0][-1] == "rejected" and len(rows) == 13
    assert "acc=1.0000" in summary_line(reports)


def test_unlabelled_record_is_an_error():
    with pytest.raises(ValueError):
        evaluate_cascade(reader_cascade(1), [FeatureRecord(id="x", dct=np.zeros(1))])
