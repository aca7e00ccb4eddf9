import itertools
import json

import numpy as np
import pytest

from conftest import (
    StubDetector, check_against_composition, constant, identity_table, random_stub_cascade, stub_cascade,
)
from sharechain.cascade import (
    ChainCascade, InferenceError, TrainingError, block_contexts, dumps_model, plan_detectors,
    with_informed_stop,
)
from sharechain.chains import ChainUniverse, SharingChain, collapse_informed

S3 = ("FB", "FL", "TW")
C = SharingChain.of
FB, FL, TW = 1, 2, 3  # local class ids of a prepend


def counts_per_block(keys, L):
    return [sum(1 for k in keys if k.block == b) for b in range(L)]


@pytest.mark.parametrize("platforms,L,K,expected", [
    (S3, 3, 3, [3, 9, 27]),
    (("P",), 2, 1, [1, 1]),
    (("A", "B"), 2, 2, [2, 4]),
])
def test_plan_detectors(platforms, L, K, expected):
    assert counts_per_block(plan_detectors(ChainUniverse(platforms, L), K), L) == expected


def one_row():
    return {"dct": np.zeros((1, 1))}


def test_worked_example_tw_fb():
    def choose(block, ctx):
        return {0: FB, 1: TW}.get(block, 0)

    out = stub_cascade(S3, 3, choose).decode(one_row())[0]
    assert out.chain == C("TW", "FB") and not out.rejected
    assert [s.output for s in out.trace] == [C("FB"), C("TW", "FB"), C("TW", "FB")]


def test_informed_stop_skips_later_blocks():
    calls = []

    def choose(block, ctx):
        def fn(row):
            calls.append(block)
            return TW if block == 0 else FB
        return fn

    universe = ChainUniverse(S3, 3)
    dets, tables = {}, {}
    for block in range(3):
        for ctx in block_contexts(universe, block):
            dets[(block, ctx)] = {"dct": StubDetector(choose(block, ctx))}
            tables[(block, ctx)] = identity_table(4, 1)
    model = ChainCascade.assemble(dets, tables, platforms=S3, max_len=3, features=("dct",), informed_stop="TW")
    out = model.decode(one_row())[0]
    assert out.chain == C("TW") and calls == [0]
    assert [s.action for s in out.trace] == ["detect", "informed-stop", "pass"]


def test_rejection_at_block_one():
    model = stub_cascade(S3, 3, lambda b, c: FL, features=("dct", "meta"))
    # block-1 experts disagree, which the identity table has never seen
    for ctx in block_contexts(model.universe_, 1):
        model.blocks_[1][ctx].detectors["meta"] = constant(TW)
    X = {"dct": np.zeros((2, 1)), "meta": np.zeros((2, 1))}
    out = model.decode(X)[0]
    assert out.chain == C("FL") and out.rejected and out.rejection_block == 1
    assert out.state_after(0) == C("FL") and out.state_after(1) is None
    assert out.trace[1].reason == "empty-unit"

    single = model.decode(X, single_feature="meta")[0]
    assert not single.rejected and single.chain == C("FL", "TW", "FL")
    with pytest.raises(InferenceError):
        model.decode(X, single_feature="header")


def test_single_feature_agrees_when_experts_agree():
    model = stub_cascade(S3, 3, lambda b, c: (b + len(c)) % 3 + 1 if b < 2 else 0, features=("dct", "meta"))
    X = {"dct": np.zeros((1, 1)), "meta": np.zeros((1, 1))}
    assert model.predict(X) == [o.chain for o in model.decode(X, single_feature="dct")]


def test_keep_at_block_zero_is_an_error():
    with pytest.raises(InferenceError):
        stub_cascade(S3, 2, lambda b, c: 0).decode(one_row())


def test_matches_nested_composition_oracle():
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        platforms = S3[: int(rng.integers(1, 4))]
        L = int(rng.integers(1, 4))
        stop = rng.choice([None, *platforms]) if trial % 3 == 0 else None
        model, lookup, train = random_stub_cascade(rng, platforms, L, ("dct", "meta"), stop)
        check_against_composition(model, lookup, train, rng.integers(0, 8, size=2))


def reachable(L, stop=None):
    found = set()
    for path in itertools.product(range(0, 4), repeat=L):
        if path[0] == 0:
            continue
        out = stub_cascade(S3, L, lambda b, c, p=path: p[b], informed_stop=stop).decode(one_row())[0]
        found.add(out.chain)
    return found


def test_reachable_label_sets():
    assert reachable(3) == set(ChainUniverse(S3, 3).omega())
    informed = reachable(3, "TW")
    assert len(informed) == 21
    assert informed == set(collapse_informed(ChainUniverse(S3, 3), "TW").chains)
    assert all("TW" not in c.steps[1:] for c in informed)


# --- training ----------------------------------------------------------------

def balanced_set(universe, per_class, rng, informative=True):
    labels = [c for c in universe.omega() for _ in range(per_class)]
    pid = {p: i for i, p in enumerate(universe.platforms.names)}
    X = np.zeros((len(labels), 4))
    for i, c in enumerate(labels):
        for k in range(min(len(c), 3)):
            X[i, k] = 1 + pid[c[-k]] if informative else 0
        X[i, 3] = len(c)
    X += rng.normal(0, 0.01, X.shape)
    return X, labels


def test_training_context_subsets():
    rng = np.random.default_rng(0)
    u = ChainUniverse(S3, 3)
    X, y = balanced_set(u, 6, rng)
    Xv, yv = balanced_set(u, 2, rng)
    model = ChainCascade(platforms=S3, max_len=3, features=("dct",), n_estimators=3)
    model.fit({"dct": X}, y, {"dct": Xv}, yv)
    n = len(y)
    assert model.blocks_[0][SharingChain(())].n_train == n
    assert all(m.n_train * 3 == n for m in model.blocks_[1].values())
    assert all(m.n_train * 9 == n - 6 * 3 for m in model.blocks_[2].values())
    assert len(model.blocks_[1]) == 3 and len(model.blocks_[2]) == 9
    assert model.predict({"dct": X[:5]})[0] == y[0]


def test_length_one_only_gives_constant_keep_detectors():
    rng = np.random.default_rng(1)
    u = ChainUniverse(S3, 2)
    y = [c for c in u.exact(1) for _ in range(5)]
    X = rng.normal(size=(len(y), 3))
    model = ChainCascade(platforms=S3, max_len=2, features=("dct",), n_estimators=3)
    model.fit({"dct": X}, y, {"dct": X}, y)
    for m in model.blocks_[1].values():
        assert set(m.detectors["dct"].predict(rng.normal(size=(20, 3)))) == {0}
    with pytest.raises(TrainingError, match="no training samples"):
        ChainCascade(platforms=S3, max_len=3, features=("dct",)).fit({"dct": X}, y, {"dct": X}, y)


def test_missing_validation_context_warns():
    rng = np.random.default_rng(2)
    u = ChainUniverse(S3, 2)
    X, y = balanced_set(u, 4, rng)
    keep = [i for i, c in enumerate(y) if c[0] != "TW"]
    model = ChainCascade(platforms=S3, max_len=2, features=("dct",), n_estimators=2)
    model.fit({"dct": X}, y, {"dct": X[keep]}, [y[i] for i in keep])
    assert any("TW" in w for w in model.warnings_)
    assert model.blocks_[1][C("TW")].bks.counts_.sum() == 0


def test_model_round_trip_and_determinism(tmp_path):
    rng = np.random.default_rng(3)
    u = ChainUniverse(S3, 2)
    X, y = balanced_set(u, 4, rng)
    fit = lambda: ChainCascade(platforms=S3, max_len=2, features=("dct", "meta"), n_estimators=3,
                               random_state=9).fit({"dct": X, "meta": X[:, ::-1]}, y,
                                                   {"dct": X, "meta": X[:, ::-1]}, y)
    a, b = fit(), fit()
    assert dumps_model(a) == dumps_model(b)
    a.save(tmp_path / "m.json")
    back = ChainCascade.load(tmp_path / "m.json")
    assert dumps_model(back) == dumps_model(a)
    Xq = {"dct": X, "meta": X[:, ::-1]}
    assert back.predict(Xq) == a.predict(Xq)
    informed = with_informed_stop(a, "FB")
    assert informed.informed_stop == "FB" and a.informed_stop is None
    doc = json.loads(dumps_model(a))
    doc["blocks"][1]["contexts"].pop()
    with pytest.raises(ValueError):
        ChainCascade.from_dict(doc)


def test_assemble_requires_every_context():
    universe = ChainUniverse(S3, 2)
    dets = {(0, SharingChain(())): {"dct": constant(1)}}
    tables = {(0, SharingChain(())): identity_table(4, 1)}
    with pytest.raises(ValueError):
        ChainCascade.assemble(dets, tables, platforms=S3, max_len=2, features=("dct",))
    assert len(block_contexts(universe, 1)) == 3
