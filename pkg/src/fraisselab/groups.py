"""Finite permutation groups, abstract group tables, and group actions.

Everything is desk scale: groups are full element lists or full multiplication
tables, never generator-based machinery.  Permutations are plain image tuples.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

Perm = tuple  # images tuple: p[x] is the image of x


def identity_perm(n: int) -> Perm:
    return tuple(range(n))


def perm_mul(p: Perm, q: Perm) -> Perm:
    """Composition p after q: (p*q)(x) = p(q(x))."""
    return tuple(p[q[x]] for x in range(len(p)))


def perm_inv(p: Perm) -> Perm:
    inv = [0] * len(p)
    for x, y in enumerate(p):
        inv[y] = x
    return tuple(inv)


def perm_order(p: Perm) -> int:
    n = 1
    q = p
    e = identity_perm(len(p))
    while q != e:
        q = perm_mul(q, p)
        n += 1
    return n


def mulclose(gens: Iterable[Perm]) -> set[Perm]:
    """Closure of a generator set under composition."""
    gens = list(gens)
    els = set(gens)
    boundary = list(els)
    while boundary:
        new = []
        for a in gens:
            for b in boundary:
                c = perm_mul(a, b)
                if c not in els:
                    els.add(c)
                    new.append(c)
        boundary = new
    return els


@dataclass(frozen=True)
class PermGroup:
    """A permutation group of fixed degree, given by its full element list."""

    degree: int
    elements: tuple[Perm, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(sorted(set(self.elements))))

    @property
    def order(self) -> int:
        return len(self.elements)

    def closure_violations(self) -> list[str]:
        out = []
        els = set(self.elements)
        if identity_perm(self.degree) not in els:
            out.append("missing identity")
        for p in self.elements:
            if perm_inv(p) not in els:
                out.append(f"missing inverse of {p}")
        for p in self.elements:
            for q in self.elements:
                if perm_mul(p, q) not in els:
                    out.append(f"not closed: {p} * {q}")
                    return out
        return out

    def is_abelian(self) -> bool:
        els = self.elements
        return all(perm_mul(p, q) == perm_mul(q, p)
                   for i, p in enumerate(els) for q in els[i + 1:])


def element_orders(gp: PermGroup) -> tuple[int, ...]:
    """Sorted multiset of element orders; the identity contributes 1."""
    return tuple(sorted(perm_order(p) for p in gp.elements))


def has_element_of_order(gp: PermGroup, k: int) -> Optional[Perm]:
    for p in sorted(gp.elements):
        if perm_order(p) == k:
            return p
    return None


def invariant_factors(orders: Iterable[int]) -> tuple[int, ...]:
    """Invariant factor list d1 | d2 | ... | dt of a finite abelian group.

    Recovered from the element-order multiset: for each prime p, the counts of
    elements of order dividing p^j determine the partition of the p-primary
    component, and aligned prime powers multiply into the factors.
    """
    orders = sorted(orders)
    total = len(orders)
    if total == 1:
        return ()
    primes = set()
    for m in orders:
        d = 2
        while d * d <= m:
            if m % d == 0:
                primes.add(d)
                while m % d == 0:
                    m //= d
            d += 1
        if m > 1:
            primes.add(m)
    partitions: dict[int, list[int]] = {}
    for p in sorted(primes):
        # s_j = log_p #{g : order(g) divides p^j}; s_j - s_{j-1} counts parts >= j
        at_least = []
        prev = 0
        j = 1
        while True:
            pj = p ** j
            count = sum(1 for m in orders if pj % m == 0)
            s_j = round(math.log(count, p))
            if s_j == prev:
                break
            at_least.append(s_j - prev)
            prev = s_j
            j += 1
        k = len(at_least)
        partition = []
        for j in range(k, 0, -1):
            exact = at_least[j - 1] - (at_least[j] if j < k else 0)
            partition.extend([j] * exact)
        partition.sort(reverse=True)
        partitions[p] = partition
    depth = max((len(v) for v in partitions.values()), default=0)
    factors = []
    for i in range(depth):
        d = 1
        for p, partition in partitions.items():
            if i < len(partition):
                d *= p ** partition[i]
        factors.append(d)
    factors.sort()
    return tuple(factors)


@dataclass(frozen=True)
class GroupIdentification:
    order: int
    is_abelian: bool
    is_cyclic: bool
    element_orders: tuple[int, ...]
    invariant_factors: Optional[tuple[int, ...]]

    def describe(self) -> str:
        bits = [f"order {self.order}"]
        if self.is_cyclic:
            bits.append("cyclic")
        elif self.is_abelian:
            bits.append("abelian")
        else:
            bits.append("non-abelian")
        if self.invariant_factors is not None and self.invariant_factors:
            bits.append("factors " + "x".join(str(d) for d in self.invariant_factors))
        return " ".join(bits)


def identify(gp: PermGroup) -> GroupIdentification:
    """Isomorphism-invariant record: abelian groups get their invariant factors."""
    orders = element_orders(gp)
    abelian = gp.is_abelian()
    cyclic = gp.order in orders
    factors = invariant_factors(orders) if abelian else None
    return GroupIdentification(gp.order, abelian, cyclic, orders, factors)


# --- abstract finite groups as full multiplication tables --------------------

@dataclass(frozen=True)
class GroupTable:
    """Finite group on {0..m-1} with identity at index 0 and a full table."""

    name: str
    table: tuple[tuple[int, ...], ...]

    @property
    def order(self) -> int:
        return len(self.table)

    def mul(self, i: int, j: int) -> int:
        return self.table[i][j]

    def inv(self, i: int) -> int:
        for j in range(self.order):
            if self.table[i][j] == 0:
                return j
        raise ValueError(f"element {i} has no inverse")

    def violations(self) -> list[str]:
        m = self.order
        out = []
        for i in range(m):
            if self.table[0][i] != i or self.table[i][0] != i:
                out.append(f"index 0 is not an identity at {i}")
        for i in range(m):
            if 0 not in self.table[i]:
                out.append(f"element {i} has no inverse")
        for i in range(m):
            for j in range(m):
                for k in range(m):
                    if self.mul(self.mul(i, j), k) != self.mul(i, self.mul(j, k)):
                        out.append(f"associativity fails at ({i},{j},{k})")
                        return out
        return out

    def is_abelian(self) -> bool:
        m = self.order
        return all(self.table[i][j] == self.table[j][i]
                   for i in range(m) for j in range(i + 1, m))

    def element_order(self, i: int) -> int:
        n, x = 1, i
        while x != 0:
            x = self.mul(x, i)
            n += 1
        return n


def cyclic_table(n: int) -> GroupTable:
    if n < 1:
        raise ValueError("cyclic group order must be >= 1")
    table = tuple(tuple((i + j) % n for j in range(n)) for i in range(n))
    return GroupTable(f"Z{n}", table)


def symmetric_table(n: int) -> GroupTable:
    """S_n with elements in lexicographic order; the identity comes first."""
    perms = sorted(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    table = tuple(tuple(index[perm_mul(p, q)] for q in perms) for p in perms)
    return GroupTable(f"S{n}", table)


def product_table(a: GroupTable, b: GroupTable) -> GroupTable:
    """Direct product with pairs ordered (a-index, b-index); identity stays at 0."""
    pairs = [(i, j) for i in range(a.order) for j in range(b.order)]
    index = {p: k for k, p in enumerate(pairs)}
    table = tuple(
        tuple(index[(a.mul(i1, i2), b.mul(j1, j2))] for (i2, j2) in pairs)
        for (i1, j1) in pairs
    )
    return GroupTable(f"{a.name}x{b.name}", table)


def trivial_table() -> GroupTable:
    return GroupTable("1", ((0,),))


def _parse_group_spec(s: str, pos: int) -> tuple[GroupTable, int]:
    def read_int(p: int) -> tuple[int, int]:
        q = p
        while q < len(s) and s[q].isdigit():
            q += 1
        if q == p:
            raise ValueError(f"expected integer at {p} in {s!r}")
        return int(s[p:q]), q

    if s.startswith("cyclic:", pos):
        n, q = read_int(pos + len("cyclic:"))
        return cyclic_table(n), q
    if s.startswith("sym:", pos):
        n, q = read_int(pos + len("sym:"))
        return symmetric_table(n), q
    if s.startswith("prod:", pos):
        left, q = _parse_group_spec(s, pos + len("prod:"))
        if q >= len(s) or s[q] != ",":
            raise ValueError(f"expected ',' at {q} in {s!r}")
        right, q = _parse_group_spec(s, q + 1)
        return product_table(left, right), q
    if s[pos:pos + 1] in ("Z", "S"):
        kind = s[pos]
        n, q = read_int(pos + 1)
        g = cyclic_table(n) if kind == "Z" else symmetric_table(n)
        if q < len(s) and s[q] == "x":
            right, q = _parse_group_spec(s, q + 1)
            return product_table(g, right), q
        return g, q
    raise ValueError(f"unknown group spec at {pos} in {s!r}")


def group_from_name(name: str) -> GroupTable:
    """Builtin groups: cyclic:<n>, sym:<n>, prod:<spec>,<spec>, Z<n>, S<n>, Z2xZ3."""
    g, pos = _parse_group_spec(name, 0)
    if pos != len(name):
        raise ValueError(f"trailing characters in group spec {name!r}")
    return g


def serialize_group_table(g: GroupTable) -> str:
    lines = [f"order {g.order}"]
    for i in range(g.order):
        for j in range(g.order):
            lines.append(f"mul {i} {j} {g.table[i][j]}")
    return "\n".join(lines) + "\n"


def parse_group_table(text: str, name: str = "group") -> GroupTable:
    order = None
    entries: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "order" and len(parts) == 2:
            order = int(parts[1])
        elif parts[0] == "mul" and len(parts) == 4:
            i, j, k = (int(x) for x in parts[1:])
            entries[(i, j)] = k
        else:
            raise ValueError(f"line {lineno}: malformed group table line {raw!r}")
    if order is None:
        raise ValueError("missing order line")
    table = []
    for i in range(order):
        row = []
        for j in range(order):
            if (i, j) not in entries:
                raise ValueError(f"missing mul entry for ({i},{j})")
            row.append(entries[(i, j)])
        table.append(tuple(row))
    g = GroupTable(name, tuple(table))
    bad = g.violations()
    if bad:
        raise ValueError("; ".join(bad))
    return g


# --- group actions -----------------------------------------------------------

@dataclass(frozen=True)
class GAction:
    """An action of a GroupTable on {0..carrier-1}: table[g][x] = x^g.

    The convention is a right action, (x^g)^h = x^(g*h).
    """

    carrier: int
    group: GroupTable
    table: tuple[tuple[int, ...], ...]

    def act(self, x: int, g: int) -> int:
        return self.table[g][x]

    def violations(self) -> list[str]:
        out = []
        m, n = self.group.order, self.carrier
        if len(self.table) != m or any(len(row) != n for row in self.table):
            return ["action table has wrong shape"]
        for x in range(n):
            if self.table[0][x] != x:
                out.append(f"identity moves {x}")
        for g in range(m):
            if sorted(self.table[g]) != list(range(n)):
                out.append(f"element {g} does not act bijectively")
        for g in range(m):
            for h in range(m):
                gh = self.group.mul(g, h)
                for x in range(n):
                    if self.table[h][self.table[g][x]] != self.table[gh][x]:
                        out.append(f"action incompatible at (x={x}, g={g}, h={h})")
                        return out
        return out


def cayley_action(g: GroupTable) -> GAction:
    """Right multiplication of a group on itself; always free and transitive."""
    table = tuple(tuple(g.mul(x, gg) for x in range(g.order)) for gg in range(g.order))
    return GAction(g.order, g, table)


def is_free_action(a: GAction) -> tuple[bool, Optional[tuple[int, int]]]:
    """True iff only the identity has fixed points; witness (x, g) otherwise."""
    for g in range(1, a.group.order):
        for x in range(a.carrier):
            if a.table[g][x] == x:
                return False, (x, g)
    return True, None


def acts_by_automorphisms(a: GAction, m) -> tuple[bool, Optional[tuple]]:
    """True iff every group element induces an automorphism of the structure m.

    On failure returns (g, symbol, tuple) for the first violated constraint.
    The carrier must match the structure's universe.
    """
    if a.carrier != m.size:
        raise ValueError(f"carrier {a.carrier} != structure size {m.size}")
    for g in range(a.group.order):
        row = a.table[g]
        for name, tuples in m.relations.items():
            for t in tuples:
                if tuple(row[x] for x in t) not in tuples:
                    return False, (g, name, t)
        for name, graph in m.functions.items():
            for x in range(m.size):
                if row[graph[x]] != graph[row[x]]:
                    return False, (g, name, (x,))
    return True, None


# --- finite-support integer permutations and the sign-flip embedding ---------

def symdiff(a: Iterable[int], b: Iterable[int]) -> frozenset[int]:
    return frozenset(a) ^ frozenset(b)


@dataclass(frozen=True)
class IntPermutation:
    """A bijection of the integers with finite support, stored as its support map."""

    mapping: tuple[tuple[int, int], ...]

    @staticmethod
    def from_dict(d: dict[int, int]) -> "IntPermutation":
        cleaned = {x: y for x, y in d.items() if x != y}
        if sorted(cleaned.values()) != sorted(cleaned.keys()):
            raise ValueError(f"not a finite-support bijection: {d}")
        return IntPermutation(tuple(sorted(cleaned.items())))

    @staticmethod
    def identity() -> "IntPermutation":
        return IntPermutation(())

    def __call__(self, x: int) -> int:
        return dict(self.mapping).get(x, x)

    def is_identity(self) -> bool:
        return not self.mapping

    def compose(self, other: "IntPermutation") -> "IntPermutation":
        """self after other."""
        d_self = dict(self.mapping)
        d_other = dict(other.mapping)
        support = set(d_self) | set(d_other)
        return IntPermutation.from_dict(
            {x: d_self.get(d_other.get(x, x), d_other.get(x, x)) for x in support})

    def order(self) -> int:
        n, p = 1, self
        while not p.is_identity():
            p = p.compose(self)
            n += 1
        return n


def h_embed(a: Iterable[int]) -> IntPermutation:
    """The sign flip x <-> -x on a finite set of positive integers.

    Composition turns symmetric difference into a group embedding:
    h_embed(A).compose(h_embed(B)) == h_embed(A ^ B), with trivial kernel.
    """
    a = frozenset(a)
    if 0 in a:
        raise ValueError("0 cannot be flipped to itself; support must avoid 0")
    if any(x < 0 for x in a):
        raise ValueError("support must consist of positive integers")
    d = {}
    for x in a:
        d[x] = -x
        d[-x] = x
    return IntPermutation.from_dict(d)
