import numpy as np
import pytest

from sharechain.bks import BKSCombiner
from sharechain.cascade import ChainCascade, block_contexts
from sharechain.chains import ChainUniverse
from sharechain.simulator import encode_jpeg, initial_encode
from sharechain.simulator.sources import synthetic_image
from sharechain.jpeg.tables import quality_tables


class StubDetector:
    """Detector whose decision is a fixed function of one input column."""

    def __init__(self, fn):
        self.fn = fn

    def predict(self, X):
        return np.array([self.fn(row) for row in np.asarray(X)], dtype=np.int64)


def constant(cls):
    return StubDetector(lambda row: cls)


def identity_table(n_classes, n_experts):
    """BKS table that returns the unanimous decision and rejects otherwise."""
    d = np.array([[c] * n_experts for c in range(n_classes)])
    return BKSCombiner(n_classes=n_classes).fit(d, np.arange(n_classes), n_experts=n_experts)


def stub_cascade(platforms, L, choose, features=("dct",), informed_stop=None):
    """Cascade whose every expert at (block, context) outputs ``choose(block, context)``."""
    universe = ChainUniverse(platforms, L)
    n = len(platforms) + 1
    dets, tables = {}, {}
    for block in range(L):
        for ctx in block_contexts(universe, block):
            dets[(block, ctx)] = {f: constant(choose(block, ctx)) for f in features}
            tables[(block, ctx)] = identity_table(n, len(features))
    return ChainCascade.assemble(dets, tables, platforms=tuple(platforms), max_len=L, features=features,
                                 informed_stop=informed_stop)


def random_stub_cascade(rng, platforms, L, features, informed_stop=None):
    """Cascade of random lookup-table detectors over integer inputs, with random BKS tables.

    Returns the model, the lookup tables keyed by (block, context, feature)
    and the (decisions, labels) each BKS table was fitted on.
    """
    universe = ChainUniverse(platforms, L)
    n = len(platforms) + 1
    lookup, dets, tables, train = {}, {}, {}, {}
    for block in range(L):
        for ctx in block_contexts(universe, block):
            lo = 1 if block == 0 else 0
            dets[(block, ctx)] = {}
            for k, f in enumerate(features):
                table = lookup[(block, ctx, f)] = rng.integers(lo, n, size=8)
                dets[(block, ctx)][f] = StubDetector(lambda row, t=table, k=k: t[int(row[k])])
            d = rng.integers(lo, n, size=(int(rng.integers(0, 12)), len(features)))
            y = rng.integers(lo, n, size=len(d))
            tables[(block, ctx)] = BKSCombiner(n_classes=n).fit(d, y, n_experts=len(features))
            train[(block, ctx)] = (d, y)
    model = ChainCascade.assemble(dets, tables, platforms=tuple(platforms), max_len=L, features=tuple(features),
                                  informed_stop=informed_stop)
    return model, lookup, train


def check_against_composition(model, lookup, train, x):
    """Compare one decode against the literal nested composition; returns the output."""
    from oracles import nested_composition, tally_fuse
    from sharechain.chains import SharingChain, remap_label

    features = model.features_
    platforms = model.universe_.platforms.names
    out = model.decode({f: np.asarray(x, dtype=float)[None, :] for f in features})[0]

    def detectors(level, steps, x):
        return [int(lookup[(level, SharingChain(steps), f)][x[k]]) for k, f in enumerate(features)]

    def fuse(level, steps, decisions):
        d, y = train[(level, SharingChain(steps))]
        kind, val = tally_fuse(d, y, decisions, len(platforms) + 1)
        return val if kind == "class" else None

    expected = nested_composition(x, platforms, model.max_len, detectors, fuse, model.informed_stop)
    assert (out.chain.steps, out.rejected, out.rejection_block) == expected
    for j in range(1, len(out.chain) + 1):
        assert remap_label(out.chain, j) == out.trace[j - 1].output
    if model.informed_stop is not None:
        assert model.informed_stop not in out.chain.steps[1:]
    assert len(out.chain) <= model.max_len
    return out


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rgb_image():
    return synthetic_image(np.random.default_rng(3), 48, 40)


@pytest.fixture
def baseline_jpeg(rgb_image):
    return initial_encode(rgb_image, 80)


@pytest.fixture
def gray_jpeg():
    plane = np.random.default_rng(5).integers(0, 256, (24, 32), dtype=np.uint8)
    return encode_jpeg(plane, quality_tables(90)[:1])
