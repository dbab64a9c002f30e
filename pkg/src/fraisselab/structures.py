"""Finite relational/functional models, embeddings, and exhaustive isomorphism search.

Universes are always {0..n-1}.  Embeddings both preserve and reflect every
relation and commute with every unary function ("strong" embeddings), so an
injective self-map that passes the embedding test is an automorphism.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

from .groups import PermGroup


class SignatureMismatch(ValueError):
    pass


class SizeCapExceeded(ValueError):
    pass


class StructureParseError(ValueError):
    pass


DEFAULT_AUT_CAP = 10


@dataclass(frozen=True)
class Signature:
    """Relation symbols (name, arity) plus unary function symbols.  No constants."""

    relations: tuple[tuple[str, int], ...] = ()
    functions: tuple[str, ...] = ()

    def __post_init__(self):
        names = [r for r, _ in self.relations] + list(self.functions)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate symbol names in signature: {names}")
        for name, arity in self.relations:
            if arity < 1:
                raise ValueError(f"relation {name} has arity {arity} < 1")

    @property
    def is_relational(self) -> bool:
        return not self.functions

    def arity(self, name: str) -> int:
        for rel, k in self.relations:
            if rel == name:
                return k
        raise KeyError(name)


class FinStructure:
    """A finite model over a Signature.

    ``relations[name]`` is a frozenset of index tuples, ``functions[name]`` a
    length-``size`` tuple giving the (total) function graph.  Instances are
    immutable by convention; all operations return fresh structures.
    """

    __slots__ = ("signature", "size", "relations", "functions", "_key", "_degrees",
                 "_cycle_types")

    def __init__(self, signature: Signature, size: int,
                 relations: dict[str, Iterable[tuple[int, ...]]] | None = None,
                 functions: dict[str, Sequence[int]] | None = None):
        self.signature = signature
        self.size = size
        rels = {name: frozenset() for name, _ in signature.relations}
        if relations:
            for name, tuples in relations.items():
                rels[name] = frozenset(tuple(t) for t in tuples)
        self.relations: dict[str, frozenset] = rels
        funs = {}
        if functions:
            for name, graph in functions.items():
                funs[name] = tuple(graph)
        for name in signature.functions:
            funs.setdefault(name, tuple(range(size)))
        self.functions: dict[str, tuple[int, ...]] = funs
        self._key = None
        self._degrees = None
        self._cycle_types = None

    def key(self) -> tuple:
        """Canonical hashable form; also the deterministic sort key."""
        if self._key is None:
            self._key = (
                self.signature.relations,
                self.signature.functions,
                self.size,
                tuple((name, tuple(sorted(self.relations[name])))
                      for name, _ in self.signature.relations),
                tuple((name, self.functions[name]) for name in self.signature.functions),
            )
        return self._key

    def __eq__(self, other):
        return isinstance(other, FinStructure) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        rels = {k: sorted(v) for k, v in self.relations.items() if v}
        return f"FinStructure(n={self.size}, rels={rels}, funs={self.functions})"

    def cycle_types(self) -> dict[str, Optional[tuple[int, ...]]]:
        """Orbit-size multiset per bijective function graph (None when not bijective).

        Embeddings carry orbits of a bijection onto same-sized orbits, so the
        multiset must embed; used as a cheap search prefilter.
        """
        if self._cycle_types is None:
            out = {}
            for name in self.signature.functions:
                graph = self.functions[name]
                if sorted(graph) != list(range(self.size)):
                    out[name] = None
                    continue
                seen = [False] * self.size
                sizes = []
                for start in range(self.size):
                    if seen[start]:
                        continue
                    length = 0
                    v = start
                    while not seen[v]:
                        seen[v] = True
                        length += 1
                        v = graph[v]
                    sizes.append(length)
                out[name] = tuple(sorted(sizes))
            self._cycle_types = out
        return self._cycle_types

    def degree_profile(self, x: int) -> tuple:
        """Per-relation, per-position tuple counts through x, plus function data.

        Isomorphisms preserve profiles, so they prune the backtracking search.
        """
        if self._degrees is None:
            degs = [[] for _ in range(self.size)]
            for name, _arity in self.signature.relations:
                tuples = self.relations[name]
                arity = self.signature.arity(name)
                for pos in range(arity):
                    counts = [0] * self.size
                    for t in tuples:
                        if t[pos] < self.size:
                            counts[t[pos]] += 1
                    for i in range(self.size):
                        degs[i].append(counts[i])
            for name in self.signature.functions:
                graph = self.functions[name]
                preimg = [0] * self.size
                for v in graph:
                    if 0 <= v < self.size:
                        preimg[v] += 1
                for i in range(self.size):
                    degs[i].append(preimg[i])
                    degs[i].append(1 if graph[i] == i else 0)
            self._degrees = [tuple(d) for d in degs]
        return self._degrees[x]


@dataclass(frozen=True)
class Embedding:
    """An injective strong map dom -> cod, stored as the image tuple."""

    dom: FinStructure
    cod: FinStructure
    map: tuple[int, ...]

    def __call__(self, x: int) -> int:
        return self.map[x]

    def image(self) -> frozenset[int]:
        return frozenset(self.map)

    def is_bijective(self) -> bool:
        return self.dom.size == self.cod.size


def validate(m: FinStructure) -> list[str]:
    """All FinStructure invariant violations; empty list means the model is valid."""
    out = []
    sig = m.signature
    declared = {name for name, _ in sig.relations}
    for name, tuples in m.relations.items():
        if name not in declared:
            out.append(f"relation {name} not in signature")
            continue
        arity = sig.arity(name)
        for t in sorted(tuples):
            if len(t) != arity:
                out.append(f"relation {name}: tuple {t} has wrong arity (expected {arity})")
            elif any(not (0 <= x < m.size) for x in t):
                out.append(f"relation {name}: entry out of range in tuple {t}")
    for name in sig.functions:
        graph = m.functions.get(name)
        if graph is None or len(graph) != m.size:
            out.append(f"function {name}: graph is not a total map on {{0..{m.size - 1}}}")
            continue
        for i, v in enumerate(graph):
            if not (0 <= v < m.size):
                out.append(f"function {name}: value {v} at {i} out of range")
    for name in m.functions:
        if name not in sig.functions:
            out.append(f"function {name} not in signature")
    return out


def generated_substructure(m: FinStructure, subset: Iterable[int]) -> tuple[FinStructure, Embedding]:
    """Substructure induced on the closure of ``subset`` under all functions.

    The new universe is renumbered {0..k-1} in the order inherited from m.
    Returns the substructure together with its inclusion embedding.
    """
    closure = set(subset)
    frontier = list(closure)
    while frontier:
        x = frontier.pop()
        for name in m.signature.functions:
            y = m.functions[name][x]
            if y not in closure:
                closure.add(y)
                frontier.append(y)
    elems = sorted(closure)
    index = {x: i for i, x in enumerate(elems)}
    rels = {}
    for name, _ in m.signature.relations:
        rels[name] = {tuple(index[x] for x in t)
                      for t in m.relations[name] if all(x in closure for x in t)}
    funs = {name: tuple(index[m.functions[name][x]] for x in elems)
            for name in m.signature.functions}
    sub = FinStructure(m.signature, len(elems), rels, funs)
    return sub, Embedding(sub, m, tuple(elems))


def validate_embedding(e: Embedding) -> list[str]:
    """Check injectivity, preservation/reflection, and function compatibility."""
    out = []
    a, b, f = e.dom, e.cod, e.map
    if a.signature != b.signature:
        return ["signature mismatch"]
    if len(f) != a.size or len(set(f)) != len(f):
        out.append(f"map {f} is not an injection of the domain universe")
        return out
    if any(not (0 <= y < b.size) for y in f):
        out.append(f"map {f} leaves the codomain universe")
        return out
    inv = {y: x for x, y in enumerate(f)}
    for name, arity in a.signature.relations:
        ra, rb = a.relations[name], b.relations[name]
        for t in ra:
            if tuple(f[x] for x in t) not in rb:
                out.append(f"relation {name}: tuple {t} not preserved")
        for t in rb:
            if all(x in inv for x in t):
                pre = tuple(inv[x] for x in t)
                if pre not in ra:
                    out.append(f"relation {name}: tuple {t} not reflected")
    for name in a.signature.functions:
        fa, fb = a.functions[name], b.functions[name]
        for x in range(a.size):
            if f[fa[x]] != fb[f[x]]:
                out.append(f"function {name}: does not commute at {x}")
    return out


def _extend_ok(a: FinStructure, b: FinStructure, partial: list[int], x: int) -> bool:
    """Can the partial map (indices 0..x assigned) still be an embedding?

    Checks every constraint that became fully determined when ``x`` was
    mapped.  Tuples are enumerated over the (small) assigned part of the
    domain, never over the codomain's tables, so the codomain may be large.
    """
    assigned = x + 1
    for name, arity in a.signature.relations:
        ra, rb = a.relations[name], b.relations[name]
        if arity == 1:
            if ((x,) in ra) != ((partial[x],) in rb):
                return False
            continue
        for t in itertools.product(range(assigned), repeat=arity):
            if x in t:
                if (t in ra) != (tuple(partial[v] for v in t) in rb):
                    return False
    for name in a.signature.functions:
        fa, fb = a.functions[name], b.functions[name]
        for i in range(assigned):
            fx = fa[i]
            if fx < assigned and fb[partial[i]] != partial[fx]:
                return False
    return True


def iter_embeddings(a: FinStructure, b: FinStructure,
                    pinned: dict[int, int] | None = None) -> Iterator[Embedding]:
    """Backtracking enumeration in lexicographic order of the image tuple.

    ``pinned`` fixes images of selected domain elements up front.
    """
    if a.signature != b.signature:
        raise SignatureMismatch(f"{a.signature} vs {b.signature}")
    if a.size > b.size:
        return
    if a.signature.functions:
        from collections import Counter
        cta, ctb = a.cycle_types(), b.cycle_types()
        for name in a.signature.functions:
            if cta[name] is not None and ctb[name] is not None:
                if Counter(cta[name]) - Counter(ctb[name]):
                    return
    n = a.size
    if n == 0:
        yield Embedding(a, b, ())
        return
    partial: list[int] = []

    def rec() -> Iterator[Embedding]:
        x = len(partial)
        if x == n:
            yield Embedding(a, b, tuple(partial))
            return
        pa = a.degree_profile(x)
        used = set(partial)
        if pinned is not None and x in pinned:
            candidates = (pinned[x],)
        else:
            candidates = range(b.size)
        for y in candidates:
            if y in used or not (0 <= y < b.size):
                continue
            pb = b.degree_profile(y)
            if any(da > db for da, db in zip(pa, pb)):
                continue
            partial.append(y)
            if _extend_ok(a, b, partial, x):
                yield from rec()
            partial.pop()

    yield from rec()


def all_embeddings(a: FinStructure, b: FinStructure) -> list[Embedding]:
    """Exhaustive, duplicate-free, lexicographically ordered embedding list."""
    return list(iter_embeddings(a, b))


def exists_embedding(a: FinStructure, b: FinStructure) -> Optional[Embedding]:
    return next(iter_embeddings(a, b), None)


def extend_embedding(b: FinStructure, m: FinStructure,
                     pinned: dict[int, int]) -> Optional[Embedding]:
    """First embedding of b into m whose restriction matches ``pinned``."""
    return next(iter_embeddings(b, m, pinned=pinned), None)


def automorphisms(m: FinStructure, cap: int = DEFAULT_AUT_CAP) -> PermGroup:
    """Full automorphism group as an element list, in lexicographic order.

    Every embedding of a finite structure into itself is bijective and
    reflects relations, hence is an automorphism.
    """
    if m.size > cap:
        raise SizeCapExceeded(f"size {m.size} exceeds automorphism search cap {cap}")
    perms = tuple(e.map for e in iter_embeddings(m, m))
    return PermGroup(m.size, perms)


def isomorphic(a: FinStructure, b: FinStructure) -> Optional[Embedding]:
    """A bijective embedding a -> b if one exists, else None."""
    if a.signature != b.signature:
        raise SignatureMismatch(f"{a.signature} vs {b.signature}")
    if a.size != b.size:
        return None
    return exists_embedding(a, b)


# --- text format ------------------------------------------------------------
#
#   sig rel <name> <arity>
#   sig fun <name>
#   size <n>
#   rel <name> <i1> ... <ik>
#   fun <name> <i> <j>        # f(i) = j; every i in {0..n-1} exactly once
#
# '#' starts a comment.  Parsing is strict.

def serialize_structure(m: FinStructure) -> str:
    lines = []
    for name, arity in m.signature.relations:
        lines.append(f"sig rel {name} {arity}")
    for name in m.signature.functions:
        lines.append(f"sig fun {name}")
    lines.append(f"size {m.size}")
    for name, _ in m.signature.relations:
        for t in sorted(m.relations[name]):
            lines.append(f"rel {name} " + " ".join(str(x) for x in t))
    for name in m.signature.functions:
        for i, v in enumerate(m.functions[name]):
            lines.append(f"fun {name} {i} {v}")
    return "\n".join(lines) + "\n"


def parse_structure(text: str) -> FinStructure:
    rel_syms: list[tuple[str, int]] = []
    fun_syms: list[str] = []
    size = None
    rels: dict[str, set] = {}
    funs: dict[str, dict[int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        def err(msg):
            raise StructureParseError(f"line {lineno}: {msg}: {raw.strip()!r}")
        if parts[0] == "sig":
            if size is not None:
                err("signature line after size")
            if len(parts) == 4 and parts[1] == "rel":
                try:
                    rel_syms.append((parts[2], int(parts[3])))
                except ValueError:
                    err("bad arity")
            elif len(parts) == 3 and parts[1] == "fun":
                fun_syms.append(parts[2])
            else:
                err("malformed sig line")
        elif parts[0] == "size":
            if size is not None:
                err("duplicate size line")
            if len(parts) != 2:
                err("malformed size line")
            try:
                size = int(parts[1])
            except ValueError:
                err("bad size")
            if size < 0:
                err("negative size")
        elif parts[0] == "rel":
            if size is None:
                err("rel line before size")
            name = parts[1] if len(parts) >= 2 else err("missing relation name")
            arities = dict(rel_syms)
            if name not in arities:
                err(f"unknown relation {name}")
            try:
                t = tuple(int(x) for x in parts[2:])
            except ValueError:
                err("bad tuple entry")
            if len(t) != arities[name]:
                err(f"arity mismatch for {name}")
            rels.setdefault(name, set()).add(t)
        elif parts[0] == "fun":
            if size is None:
                err("fun line before size")
            if len(parts) != 4:
                err("malformed fun line")
            name = parts[1]
            if name not in fun_syms:
                err(f"unknown function {name}")
            try:
                i, j = int(parts[2]), int(parts[3])
            except ValueError:
                err("bad function entry")
            if not (0 <= i < size):
                err(f"function argument {i} out of range")
            graph = funs.setdefault(name, {})
            if i in graph:
                err(f"duplicate function entry for {name}({i})")
            graph[i] = j
        else:
            raise StructureParseError(f"line {lineno}: unknown directive {parts[0]!r}")
    if size is None:
        raise StructureParseError("missing size line")
    sig = Signature(tuple(rel_syms), tuple(fun_syms))
    for name in fun_syms:
        graph = funs.get(name, {})
        if len(graph) != size:
            raise StructureParseError(f"function {name}: partial graph ({len(graph)}/{size} entries)")
    functions = {name: tuple(funs.get(name, {})[i] for i in range(size)) for name in fun_syms}
    return FinStructure(sig, size, rels, functions)


def load_structure(path) -> FinStructure:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_structure(fh.read())


def save_structure(m: FinStructure, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_structure(m))


def relabel(m: FinStructure, perm: Sequence[int]) -> FinStructure:
    """The isomorphic copy of m with element x renamed to perm[x]."""
    rels = {name: {tuple(perm[x] for x in t) for t in tuples}
            for name, tuples in m.relations.items()}
    inv = [0] * m.size
    for x, y in enumerate(perm):
        inv[y] = x
    funs = {name: tuple(perm[m.functions[name][inv[i]]] for i in range(m.size))
            for name in m.signature.functions}
    return FinStructure(m.signature, m.size, rels, funs)


def pushout_layout(z: FinStructure, f: Embedding, g: Embedding) -> tuple[int, tuple[int, ...]]:
    """Universe bookkeeping for a disjoint amalgam of X and Y over Z.

    X keeps its labels; fresh labels |X|, |X|+1, ... go to Y's elements outside
    g(Z) in ascending order.  Returns (|W|, map Y -> W).
    """
    x_size = f.cod.size
    g_img = {g.map[zz]: f.map[zz] for zz in range(z.size)}
    y_to_w = []
    nxt = x_size
    for y in range(g.cod.size):
        if y in g_img:
            y_to_w.append(g_img[y])
        else:
            y_to_w.append(nxt)
            nxt += 1
    return nxt, tuple(y_to_w)
