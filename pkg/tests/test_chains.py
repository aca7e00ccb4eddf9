import itertools

import pytest

from sharechain.chains import (
    ChainError, ChainUniverse, PlatformSet, SharingChain, backtrack_candidates, collapse_chain,
    collapse_informed, enumerate_universe, format_chain_label, parse_chain_label, remap_label,
)

S3 = ("FB", "FL", "TW")
C = SharingChain.of


def test_universe_sizes():
    assert len(enumerate_universe(S3, 3)) == 39
    u2 = enumerate_universe(S3, 2)
    assert len(u2) == 12
    assert len(u2.exact(2)) == 9
    assert list(enumerate_universe(["FB"], 2).omega()) == [C("FB"), C("FB", "FB")]


@pytest.mark.parametrize("n,L", [(n, L) for n in range(1, 5) for L in range(1, 5)])
def test_universe_size_formula(n, L):
    names = [f"P{i}" for i in range(n)]
    assert len(ChainUniverse(names, L)) == sum(n ** i for i in range(1, L + 1))


def test_canonical_order():
    u = ChainUniverse(S3, 2)
    omega = u.omega()
    assert omega[:3] == (C("FB"), C("FL"), C("TW"))
    assert omega[3:6] == (C("FB", "FB"), C("FB", "FL"), C("FB", "TW"))
    assert sorted(omega, key=u.sort_key) == list(omega)


@pytest.mark.parametrize("platforms,L", [((), 2), (S3, 0), (("FB", "FB"), 2), (("F>B",), 1), (("F B",), 1)])
def test_universe_errors(platforms, L):
    with pytest.raises(ChainError):
        ChainUniverse(platforms, L)


def test_reverse_indexing():
    c = parse_chain_label("TW>FB")
    assert c[0] == "FB" and c[-1] == "TW"
    assert c.newest == "FB" and c.oldest == "TW"
    with pytest.raises(IndexError):
        c[-2]
    with pytest.raises(IndexError):
        c[1]


def test_backtrack_candidates():
    assert backtrack_candidates(C("FB"), S3) == (C("FB"), C("FB", "FB"), C("FL", "FB"), C("TW", "FB"))
    cands = backtrack_candidates(C("TW", "FB"), S3)
    assert cands[0] == C("TW", "FB")
    assert set(cands[1:]) == {C(p, "TW", "FB") for p in S3}
    assert backtrack_candidates(C("FB"), ["FB"]) == (C("FB"), C("FB", "FB"))
    with pytest.raises(ChainError):
        backtrack_candidates(C("FB", "FB", "FB"), S3, max_len=3)
    with pytest.raises(ChainError):
        backtrack_candidates(SharingChain(()), S3)


def test_backtrack_candidates_property():
    u = ChainUniverse(S3, 3)
    for c in u.omega(2):
        cands = u.backtrack_candidates(c)
        assert len(cands) == len(S3) + 1
        assert all(remap_label(m, len(c)) == c and len(m) == len(c) + 1 for m in cands[1:])


def test_remap_label():
    c = C("TW", "FB", "FL")
    assert remap_label(c, 1) == C("FL")
    assert remap_label(c, 2) == C("FB", "FL")
    assert remap_label(C("FB"), 2) == C("FB")


def test_label_round_trip():
    u = ChainUniverse(S3, 3)
    for c in u.omega():
        assert parse_chain_label(format_chain_label(c), S3, 3) == c
    assert parse_chain_label("FB") == C("FB")


@pytest.mark.parametrize("text", ["XX>FB", "", "FB>>FL", "FB>FB>FB>FB"])
def test_parse_errors(text):
    with pytest.raises(ChainError):
        parse_chain_label(text, S3, 3)


def test_collapse_informed():
    u = ChainUniverse(S3, 3)
    space = collapse_informed(u, "TW")
    assert len(space) == 21
    assert collapse_chain(C("FB", "TW", "FL"), "TW") == C("TW", "FL")
    assert collapse_chain(C("FB", "FL", "FB"), "TW") == C("FB", "FL", "FB")
    assert collapse_chain(C("FB", "FL", "TW"), "TW") == C("TW")
    for c in u.omega():
        if "TW" not in c.steps[1:]:
            assert collapse_chain(c, "TW") == c
    for c in space:
        assert "TW" not in c.steps[1:]


def test_platform_set():
    ps = PlatformSet(S3)
    assert ps.id_of("TW") == 2 and ps.name_of(1) == "FL"
    assert "FB" in ps and "XX" not in ps
    with pytest.raises(ChainError):
        ps.id_of("XX")


def test_exhaustive_small_universes_are_products():
    for n, L in itertools.product(range(1, 4), range(1, 4)):
        names = [f"P{i}" for i in range(n)]
        u = ChainUniverse(names, L)
        for ell in range(1, L + 1):
            assert set(u.exact(ell)) == {SharingChain(t) for t in itertools.product(names, repeat=ell)}
