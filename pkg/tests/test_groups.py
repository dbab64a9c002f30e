import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from fraisselab.groups import (
    GAction,
    GroupTable,
    IntPermutation,
    PermGroup,
    acts_by_automorphisms,
    cayley_action,
    cyclic_table,
    element_orders,
    group_from_name,
    h_embed,
    has_element_of_order,
    identify,
    invariant_factors,
    is_free_action,
    mulclose,
    parse_group_table,
    perm_inv,
    perm_mul,
    perm_order,
    product_table,
    serialize_group_table,
    symmetric_table,
    symdiff,
    trivial_table,
)
from fraisselab.structures import FinStructure, Signature, automorphisms


def sym_group(n):
    return PermGroup(n, tuple(itertools.permutations(range(n))))


def cyclic_group(n):
    gen = tuple((i + 1) % n for i in range(n))
    return PermGroup(n, tuple(sorted(mulclose([gen]))))


def test_perm_basics():
    p = (1, 2, 0)
    assert perm_mul(p, perm_inv(p)) == (0, 1, 2)
    assert perm_order(p) == 3


def test_element_orders_examples():
    assert element_orders(PermGroup(1, ((0,),))) == (1,)
    assert element_orders(sym_group(3)) == (1, 2, 2, 2, 3, 3)
    assert element_orders(cyclic_group(4)) == (1, 2, 4, 4)


def test_element_orders_cyclic_law():
    import math
    for m in range(1, 9):
        expected = tuple(sorted(m // math.gcd(k, m) for k in range(m)))
        assert element_orders(cyclic_group(m)) == expected


def test_identify_cyclic6():
    gp = cyclic_group(6)
    rec = identify(gp)
    assert rec.is_cyclic and rec.is_abelian
    assert rec.invariant_factors == (6,)


def test_identify_sym3():
    rec = identify(sym_group(3))
    assert rec.order == 6 and not rec.is_abelian
    assert rec.invariant_factors is None


def test_identify_is_relabeling_invariant():
    rng = random.Random(5)
    for gp in [sym_group(3), cyclic_group(6), cyclic_group(4)]:
        n = gp.degree
        sigma = list(range(n))
        rng.shuffle(sigma)
        sigma = tuple(sigma)
        conj = tuple(perm_mul(perm_mul(sigma, p), perm_inv(sigma)) for p in gp.elements)
        assert identify(PermGroup(n, conj)) == identify(gp)


def test_invariant_factors_known_groups():
    assert invariant_factors([1]) == ()
    assert invariant_factors([1, 2]) == (2,)
    assert invariant_factors([1, 2, 2, 2]) == (2, 2)
    assert invariant_factors([1, 2, 3, 3, 6, 6]) == (6,)
    assert invariant_factors([1, 2, 2, 2, 4, 4, 4, 4]) == (2, 4)
    assert invariant_factors(element_orders(cyclic_group(8))) == (8,)


def _abelian_group_from_factors(factors):
    g = cyclic_table(factors[0])
    for d in factors[1:]:
        g = product_table(g, cyclic_table(d))
    return g


@pytest.mark.parametrize("factors", [(2,), (3,), (4,), (6,), (2, 2), (2, 4), (3, 3), (2, 6), (2, 2, 2), (12,)])
def test_invariant_factors_roundtrip(factors):
    g = _abelian_group_from_factors(factors)
    orders = sorted(g.element_order(i) for i in range(g.order))
    assert invariant_factors(orders) == tuple(sorted(factors))


def test_group_table_builtins():
    assert cyclic_table(5).violations() == []
    assert symmetric_table(3).violations() == []
    assert product_table(cyclic_table(2), cyclic_table(3)).violations() == []
    assert trivial_table().violations() == []
    bad = GroupTable("bad", ((0, 1), (1, 1)))
    assert bad.violations() != []


def test_group_from_name():
    assert group_from_name("cyclic:4").order == 4
    assert group_from_name("sym:3").order == 6
    assert group_from_name("prod:cyclic:2,cyclic:3").order == 6
    assert group_from_name("Z2").order == 2
    assert group_from_name("S3").order == 6
    assert group_from_name("Z2xZ2").order == 4
    with pytest.raises(ValueError):
        group_from_name("what:3")
    with pytest.raises(ValueError):
        group_from_name("Z2trailing")


def test_group_table_text_roundtrip():
    g = symmetric_table(3)
    assert parse_group_table(serialize_group_table(g)).table == g.table
    with pytest.raises(ValueError):
        parse_group_table("order 2\nmul 0 0 0\n")  # missing entries


def test_cayley_action_free_and_valid():
    for g in [cyclic_table(4), symmetric_table(3)]:
        act = cayley_action(g)
        assert act.violations() == []
        free, witness = is_free_action(act)
        assert free and witness is None


def test_trivial_action_not_free():
    g = cyclic_table(2)
    act = GAction(1, g, ((0,), (0,)))
    assert act.violations() == []
    free, witness = is_free_action(act)
    assert not free and witness == (0, 1)


def test_acts_by_automorphisms():
    order_sig = Signature((("lt", 2),), ())
    two_chain = FinStructure(order_sig, 2, {"lt": {(0, 1)}})
    z2 = cyclic_table(2)
    swap = GAction(2, z2, ((0, 1), (1, 0)))
    ok, witness = acts_by_automorphisms(swap, two_chain)
    assert not ok and witness == (1, "lt", (0, 1))

    wheel_sig = Signature((("lt", 2), ("adj", 2)), ("succ",))
    w = FinStructure(wheel_sig, 3, {}, {"succ": (1, 2, 0)})
    z3 = cyclic_table(3)
    rotate = GAction(3, z3, ((0, 1, 2), (1, 2, 0), (2, 0, 1)))
    ok, _ = acts_by_automorphisms(rotate, w)
    assert ok

    ident = GAction(2, trivial_table(), ((0, 1),))
    ok, _ = acts_by_automorphisms(ident, two_chain)
    assert ok


def test_symdiff():
    assert symdiff({1, 2}, {2, 3}) == {1, 3}
    assert symdiff({1, 2}, {1, 2}) == frozenset()
    assert symdiff(frozenset(), {4, 5}) == {4, 5}


def test_h_embed_basics():
    assert h_embed([]).is_identity()
    h1 = h_embed({1})
    assert h1(1) == -1 and h1(-1) == 1 and h1(7) == 7
    assert h1.order() == 2
    with pytest.raises(ValueError):
        h_embed({0, 1})


def test_h_embed_composition_example():
    a, b = {1, 2}, {2, 3}
    assert h_embed(a).compose(h_embed(b)) == h_embed(symdiff(a, b))


@given(st.frozensets(st.integers(min_value=1, max_value=10)),
       st.frozensets(st.integers(min_value=1, max_value=10)))
@settings(max_examples=150, deadline=None)
def test_h_embed_homomorphism_and_kernel(a, b):
    assert h_embed(a).compose(h_embed(b)) == h_embed(a ^ b)
    assert h_embed(a).is_identity() == (not a)


def test_has_element_of_order_in_swap_group():
    gp = automorphisms(FinStructure(Signature((), ()), 2))
    assert has_element_of_order(gp, 2) == (1, 0)
    assert has_element_of_order(gp, 3) is None


def test_identify_describe():
    assert "cyclic" in identify(cyclic_group(6)).describe()
    assert "non-abelian" in identify(sym_group(3)).describe()
