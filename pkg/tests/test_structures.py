import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from fraisselab.structures import (
    Embedding,
    FinStructure,
    Signature,
    SignatureMismatch,
    SizeCapExceeded,
    StructureParseError,
    all_embeddings,
    automorphisms,
    exists_embedding,
    generated_substructure,
    isomorphic,
    parse_structure,
    relabel,
    serialize_structure,
    validate,
    validate_embedding,
)

BIPARTITE_SIG = Signature((("L", 1), ("R", 1), ("adj", 2)), ())
ORDER_SIG = Signature((("lt", 2),), ())
WHEEL_SIG = Signature((("lt", 2), ("adj", 2)), ("succ",))
EMPTY_SIG = Signature((), ())


def chain(n):
    return FinStructure(ORDER_SIG, n, {"lt": {(i, j) for i in range(n) for j in range(n) if i < j}})


def wheel(n):
    return FinStructure(WHEEL_SIG, n, {}, {"succ": tuple((i + 1) % n for i in range(n))})


def pure_set(n):
    return FinStructure(EMPTY_SIG, n)


def test_signature_validation():
    with pytest.raises(ValueError):
        Signature((("r", 2), ("r", 1)), ())
    with pytest.raises(ValueError):
        Signature((("r", 0),), ())
    with pytest.raises(ValueError):
        Signature((("r", 2),), ("r",))


def test_validate_empty_structure_ok():
    assert validate(FinStructure(BIPARTITE_SIG, 0)) == []


def test_validate_out_of_range_tuple():
    m = FinStructure(BIPARTITE_SIG, 2, {"adj": {(0, 3)}})
    msgs = validate(m)
    assert any("out of range" in v for v in msgs)


def test_validate_wheel_ok():
    assert validate(wheel(4)) == []


def test_validate_partial_function():
    m = FinStructure(WHEEL_SIG, 3, {}, {"succ": (0, 1)})
    assert any("total map" in v for v in validate(m))


def test_generated_substructure_relational_is_subset():
    m = FinStructure(BIPARTITE_SIG, 4, {"L": {(0,), (1,)}, "R": {(2,), (3,)}, "adj": {(0, 2), (2, 0)}})
    sub, inc = generated_substructure(m, {0, 2})
    assert sub.size == 2
    assert inc.map == (0, 2)
    assert sub.relations["adj"] == frozenset({(0, 1), (1, 0)})
    assert validate_embedding(inc) == []


def test_generated_substructure_closes_under_successor():
    sub, _ = generated_substructure(wheel(4), {1})
    assert sub.size == 4


def test_generated_substructure_two_wheels():
    # wheels of sizes 2 (elements 0,1) and 3 (elements 2,3,4)
    m = FinStructure(WHEEL_SIG, 5, {}, {"succ": (1, 0, 3, 4, 2)})
    sub, inc = generated_substructure(m, {0})
    assert sub.size == 2
    assert inc.map == (0, 1)


def test_all_embeddings_point_into_set():
    assert len(all_embeddings(pure_set(1), pure_set(3))) == 3


def test_all_embeddings_chain_counts():
    embs = all_embeddings(chain(2), chain(3))
    assert [e.map for e in embs] == [(0, 1), (0, 2), (1, 2)]


def test_all_embeddings_wheel_mismatch():
    assert all_embeddings(wheel(3), wheel(4)) == []


def test_all_embeddings_signature_mismatch():
    with pytest.raises(SignatureMismatch):
        all_embeddings(chain(2), pure_set(2))


def test_all_embeddings_are_valid_and_lex_sorted():
    a = FinStructure(BIPARTITE_SIG, 2, {"L": {(0,)}, "R": {(1,)}, "adj": {(0, 1), (1, 0)}})
    b = FinStructure(BIPARTITE_SIG, 4, {"L": {(0,), (1,)}, "R": {(2,), (3,)},
                                        "adj": {(0, 2), (2, 0), (1, 2), (2, 1)}})
    embs = all_embeddings(a, b)
    assert embs, "expected at least one embedding"
    maps = [e.map for e in embs]
    assert maps == sorted(maps)
    for e in embs:
        assert validate_embedding(e) == []


def test_automorphisms_pure_set():
    assert automorphisms(pure_set(4)).order == 24


def test_automorphisms_chain_rigid():
    assert automorphisms(chain(5)).order == 1


def test_automorphisms_wheel_cyclic():
    gp = automorphisms(wheel(6))
    assert gp.order == 6
    succ = tuple((i + 1) % 6 for i in range(6))
    assert succ in gp.elements
    assert gp.closure_violations() == []


def test_automorphisms_cap():
    with pytest.raises(SizeCapExceeded):
        automorphisms(pure_set(11))
    assert automorphisms(pure_set(4), cap=4).order == 24


def test_isomorphic_wheels():
    assert isomorphic(wheel(3), wheel(3)) is not None
    assert isomorphic(wheel(3), wheel(4)) is None


def test_isomorphic_respects_sides():
    a = FinStructure(BIPARTITE_SIG, 3, {"L": {(0,)}, "R": {(1,), (2,)}})
    b = FinStructure(BIPARTITE_SIG, 3, {"L": {(0,), (1,)}, "R": {(2,)}})
    assert isomorphic(a, b) is None


def test_isomorphic_is_equivalence_on_samples():
    rng = random.Random(7)
    pool = []
    for _ in range(12):
        n = rng.randrange(1, 4)
        edges = set()
        ls = {(i,) for i in range(n) if rng.random() < 0.5}
        rs = {(i,) for i in range(n) if (i,) not in ls}
        for (l,), (r,) in itertools.product(ls, rs):
            if rng.random() < 0.5:
                edges |= {(l, r), (r, l)}
        pool.append(FinStructure(BIPARTITE_SIG, n, {"L": ls, "R": rs, "adj": edges}))
    for m in pool:
        assert isomorphic(m, m) is not None
    for a, b in itertools.combinations(pool, 2):
        ab = isomorphic(a, b)
        ba = isomorphic(b, a)
        assert (ab is None) == (ba is None)
    for a, b, c in itertools.combinations(pool, 3):
        if isomorphic(a, b) and isomorphic(b, c):
            assert isomorphic(a, c) is not None


def _random_structure(rng, sig, n):
    rels = {}
    for name, arity in sig.relations:
        universe = list(itertools.product(range(n), repeat=arity))
        rels[name] = {t for t in universe if rng.random() < 0.3}
    funs = {name: tuple(rng.randrange(n) for _ in range(n)) for name in sig.functions}
    return FinStructure(sig, n, rels, funs)


@pytest.mark.parametrize("sig", [BIPARTITE_SIG, ORDER_SIG, WHEEL_SIG])
def test_automorphisms_match_permutation_filter(sig):
    rng = random.Random(42)
    for _ in range(15):
        n = rng.randrange(1, 5)
        m = _random_structure(rng, sig, n)
        brute = []
        for p in itertools.permutations(range(n)):
            q = relabel(m, p)
            if q == m:
                brute.append(p)
        assert sorted(brute) == list(automorphisms(m).elements)


def test_relabel_is_isomorphic():
    m = wheel(5)
    p = (2, 0, 4, 1, 3)
    assert isomorphic(m, relabel(m, p)) is not None


# --- text format -------------------------------------------------------------

def test_roundtrip():
    for m in [wheel(4), chain(3), pure_set(0),
              FinStructure(BIPARTITE_SIG, 2, {"L": {(0,)}, "R": {(1,)}, "adj": {(0, 1), (1, 0)}})]:
        assert parse_structure(serialize_structure(m)) == m


def test_parse_strictness():
    with pytest.raises(StructureParseError):
        parse_structure("bogus 1\n")
    with pytest.raises(StructureParseError):
        parse_structure("sig rel r 2\nsize 2\nrel r 0\n")  # arity mismatch
    with pytest.raises(StructureParseError):
        parse_structure("sig fun f\nsize 2\nfun f 0 1\n")  # partial graph
    with pytest.raises(StructureParseError):
        parse_structure("sig fun f\nsize 1\nfun f 0 0\nfun f 0 0\n")  # duplicate entry
    with pytest.raises(StructureParseError):
        parse_structure("sig rel r 2\nrel r 0 1\nsize 2\n")  # data before size


def test_parse_comments_and_blanks():
    text = "# wheel\nsig fun succ\n\nsize 2  # two points\nfun succ 0 1\nfun succ 1 0\n"
    m = parse_structure(text)
    assert m.functions["succ"] == (1, 0)


@given(st.integers(min_value=0, max_value=6))
@settings(max_examples=20, deadline=None)
def test_empty_and_identity_embeddings(n):
    m = pure_set(n)
    e = exists_embedding(m, m)
    assert e is not None and e.map == tuple(range(n))
