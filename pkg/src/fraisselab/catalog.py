"""The bundled class catalog and its special constructions.

Classes: pure sets, linear orders, bipartite graphs, rotating machines,
diversifications of a relational base class (optionally with a distinguished
free group action, encoded through unary function symbols), and mixed sums of
two relational classes.  Registry names: ``sets``, ``lo``, ``bipartite``,
``rot``, ``div:<base>``, ``divg:<base>:<group>``, ``mix:<left>:<right>``.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Optional

from .fraisse import FraisseClassSpec
from .groups import (
    GAction,
    GroupTable,
    group_from_name,
    trivial_table,
)
from .structures import (
    Embedding,
    FinStructure,
    Signature,
    automorphisms,
    generated_substructure,
    pushout_layout,
    relabel,
    validate,
)

SETS_SIG = Signature((), ())
ORDER_SIG = Signature((("lt", 2),), ())
BIPARTITE_SIG = Signature((("L", 1), ("R", 1), ("adj", 2)), ())
MACHINE_SIG = Signature((("lt", 2), ("adj", 2)), ("succ",))


# --- small builders -----------------------------------------------------------

def chain_structure(n: int) -> FinStructure:
    return FinStructure(ORDER_SIG, n,
                        {"lt": {(i, j) for i in range(n) for j in range(n) if i < j}})


def wheel_structure(n: int) -> FinStructure:
    return FinStructure(MACHINE_SIG, n, {},
                        {"succ": tuple((i + 1) % n for i in range(n))})


def unary_set(m: FinStructure, name: str) -> list[int]:
    return sorted(x for (x,) in m.relations[name])


# --- pure sets ------------------------------------------------------------------

def class_pure_sets() -> FraisseClassSpec:
    sig = SETS_SIG

    def member(m: FinStructure) -> bool:
        return m.signature == sig and not validate(m)

    def amalg(z, f, g):
        x, y = f.cod, g.cod
        size, y_to_w = pushout_layout(z, f, g)
        w = FinStructure(sig, size)
        return w, Embedding(x, w, tuple(range(x.size))), Embedding(y, w, y_to_w)

    def extend(m, k):
        w = FinStructure(sig, m.size + k)
        return w, Embedding(m, w, tuple(range(m.size)))

    def candidates(n):
        yield FinStructure(sig, n)

    return FraisseClassSpec("sets", sig, member, amalg, extend, candidates,
                            claims_disjoint=True, enumerate_labeled=candidates)


# --- linear orders ----------------------------------------------------------------

def _order_rank(m: FinStructure) -> list[int]:
    """Elements sorted increasing with respect to the order relation."""
    lt = m.relations["lt"]
    return sorted(range(m.size), key=lambda x: sum(1 for y in range(m.size) if (y, x) in lt))


def class_linear_orders() -> FraisseClassSpec:
    sig = ORDER_SIG

    def member(m: FinStructure) -> bool:
        if m.signature != sig or validate(m):
            return False
        lt = m.relations["lt"]
        if len(lt) != m.size * (m.size - 1) // 2:
            return False
        rank = [0] * m.size
        for (_a, b) in lt:
            rank[b] += 1
        if sorted(rank) != list(range(m.size)):
            return False
        return all(rank[a] < rank[b] for (a, b) in lt)

    def amalg(z, f, g):
        x, y = f.cod, g.cod
        size, y_to_w = pushout_layout(z, f, g)
        order = [f2 for f2 in _order_rank(x)]  # W ids of X = X ids
        g_img = set(g.map)
        y_lt = y.relations["lt"]
        for ye in _order_rank(y):
            if ye in g_img:
                continue
            below = {y_to_w[yy] for yy in range(y.size)
                     if (yy, ye) in y_lt and (yy in g_img or y_to_w[yy] in order)}
            pos = max((order.index(v) for v in below if v in order), default=-1) + 1
            order.insert(pos, y_to_w[ye])
        lt = {(order[i], order[j]) for i in range(size) for j in range(i + 1, size)}
        w = FinStructure(sig, size, {"lt": lt})
        return w, Embedding(x, w, tuple(range(x.size))), Embedding(y, w, y_to_w)

    def extend(m, k):
        # fresh elements go above everything, in index order
        n = m.size
        lt = set(m.relations["lt"])
        for t in range(k):
            lt |= {(v, n + t) for v in range(n + t)}
        w = FinStructure(sig, n + k, {"lt": lt})
        return w, Embedding(m, w, tuple(range(n)))

    def candidates(n):
        yield chain_structure(n)

    def labeled(n):
        for perm in itertools.permutations(range(n)):
            lt = {(perm[i], perm[j]) for i in range(n) for j in range(i + 1, n)}
            yield FinStructure(sig, n, {"lt": lt})

    return FraisseClassSpec("lo", sig, member, amalg, extend, candidates,
                            claims_disjoint=True, enumerate_labeled=labeled)


# --- bipartite graphs ---------------------------------------------------------------

def class_bipartite() -> FraisseClassSpec:
    sig = BIPARTITE_SIG

    def member(m: FinStructure) -> bool:
        if m.signature != sig or validate(m):
            return False
        left = {x for (x,) in m.relations["L"]}
        right = {x for (x,) in m.relations["R"]}
        if left & right or left | right != set(range(m.size)):
            return False
        adj = m.relations["adj"]
        for (a, b) in adj:
            if (b, a) not in adj:
                return False
            if not ((a in left and b in right) or (a in right and b in left)):
                return False
        return True

    def amalg(z, f, g):
        x, y = f.cod, g.cod
        size, y_to_w = pushout_layout(z, f, g)
        rels = {"L": set(), "R": set(), "adj": set()}
        for name in ("L", "R"):
            rels[name] = {t for t in x.relations[name]} | {
                (y_to_w[v],) for (v,) in y.relations[name]}
        rels["adj"] = set(x.relations["adj"]) | {
            (y_to_w[a], y_to_w[b]) for (a, b) in y.relations["adj"]}
        w = FinStructure(sig, size, rels)
        return w, Embedding(x, w, tuple(range(x.size))), Embedding(y, w, y_to_w)

    def extend(m, k):
        n = m.size
        rels = {name: set(m.relations[name]) for name in ("L", "R", "adj")}
        rels["L"] |= {(n + t,) for t in range(k)}
        w = FinStructure(sig, n + k, rels)
        return w, Embedding(m, w, tuple(range(n)))

    def candidates(n):
        for lsize in range(n + 1):
            rsize = n - lsize
            seen = set()
            cross = [(l, lsize + r) for l in range(lsize) for r in range(rsize)]
            for bits in range(1 << len(cross)):
                edges = frozenset(cross[i] for i in range(len(cross)) if bits >> i & 1)
                key = min(
                    tuple(sorted((pl[l], lsize + pr[r - lsize]) for (l, r) in edges))
                    for pl in itertools.permutations(range(lsize))
                    for pr in itertools.permutations(range(rsize)))
                if key in seen:
                    continue
                seen.add(key)
                adj = {(a, b) for (a, b) in edges} | {(b, a) for (a, b) in edges}
                yield FinStructure(sig, n, {
                    "L": {(i,) for i in range(lsize)},
                    "R": {(i,) for i in range(lsize, n)},
                    "adj": adj})

    def labeled(n):
        for lbits in range(1 << n):
            left = [i for i in range(n) if lbits >> i & 1]
            right = [i for i in range(n) if not (lbits >> i & 1)]
            cross = [(l, r) for l in left for r in right]
            for bits in range(1 << len(cross)):
                edges = {cross[i] for i in range(len(cross)) if bits >> i & 1}
                adj = edges | {(b, a) for (a, b) in edges}
                yield FinStructure(sig, n, {
                    "L": {(i,) for i in left},
                    "R": {(i,) for i in right},
                    "adj": adj})

    return FraisseClassSpec("bipartite", sig, member, amalg, extend, candidates,
                            claims_disjoint=True, enumerate_labeled=labeled)


# --- rotating machines ----------------------------------------------------------------

def wheels(m: FinStructure) -> list[tuple[int, ...]]:
    """Successor orbits, each starting at its least element, sorted by that element."""
    succ = m.functions["succ"]
    seen = set()
    out = []
    for start in range(m.size):
        if start in seen:
            continue
        orbit = [start]
        seen.add(start)
        v = succ[start]
        while v != start:
            if v in seen:
                return []  # not a disjoint union of cycles
            orbit.append(v)
            seen.add(v)
            v = succ[v]
        out.append(tuple(orbit))
    return out


def class_rotating_machines() -> FraisseClassSpec:
    sig = MACHINE_SIG

    def member(m: FinStructure) -> bool:
        if m.signature != sig or validate(m):
            return False
        succ = m.functions["succ"]
        if sorted(succ) != list(range(m.size)):
            return False
        ws = wheels(m)
        if not ws and m.size > 0:
            return False
        wheel_of = {}
        for i, w in enumerate(ws):
            for v in w:
                wheel_of[v] = i
        lt, adj = m.relations["lt"], m.relations["adj"]
        for (a, b) in adj:
            if a == b or wheel_of[a] == wheel_of[b] or (b, a) not in adj:
                return False
            if (succ[a], succ[b]) not in adj:
                return False
        blocks: dict[tuple[int, int], int] = {}
        for (a, b) in lt:
            if a == b or wheel_of[a] == wheel_of[b]:
                return False
            key = (wheel_of[a], wheel_of[b])
            blocks[key] = blocks.get(key, 0) + 1
        indeg = [0] * len(ws)
        for i in range(len(ws)):
            for j in range(i + 1, len(ws)):
                full = len(ws[i]) * len(ws[j])
                got_ij = blocks.get((i, j), 0)
                got_ji = blocks.get((j, i), 0)
                if not ((got_ij == full and got_ji == 0) or (got_ij == 0 and got_ji == full)):
                    return False
                indeg[j if got_ij else i] += 1
        # a tournament is transitive exactly when its score sequence is 0..w-1
        return sorted(indeg) == list(range(len(ws)))

    def _block_order(m: FinStructure) -> list[int]:
        ws = wheels(m)
        lt = m.relations["lt"]
        def below_count(i):
            return sum(1 for j in range(len(ws)) if i != j and (ws[j][0], ws[i][0]) in lt)
        return sorted(range(len(ws)), key=below_count)

    def amalg(z, f, g):
        x, y = f.cod, g.cod
        size, y_to_w = pushout_layout(z, f, g)
        succ = list(x.functions["succ"]) + [0] * (size - x.size)
        for v in range(y.size):
            w_id = y_to_w[v]
            if w_id >= x.size:
                succ[w_id] = y_to_w[y.functions["succ"][v]]
        adj = set(x.relations["adj"]) | {
            (y_to_w[a], y_to_w[b]) for (a, b) in y.relations["adj"]}
        # assemble the wheel block order: X's blocks in place, Y's new wheels
        # dropped into the lowest slot their image of Z allows
        x_blocks = _block_order(x)
        xw = wheels(x)
        order = [tuple(v for v in xw[i]) for i in x_blocks]  # W ids of X wheels
        g_img = set(g.map)
        yw = wheels(y)
        y_lt = y.relations["lt"]
        y_blocks = sorted(range(len(yw)), key=lambda i: sum(
            1 for j in range(len(yw)) if i != j and (yw[j][0], yw[i][0]) in y_lt))
        for bi in y_blocks:
            wheel_elems = yw[bi]
            if wheel_elems[0] in g_img:
                continue
            below_wheels = set()
            for j in range(len(yw)):
                if (yw[j][0], wheel_elems[0]) in y_lt:
                    below_wheels.add(tuple(y_to_w[v] for v in yw[j]))
            pos = -1
            for idx, blk in enumerate(order):
                if any(set(blk) & set(bw) or blk == bw for bw in below_wheels):
                    pos = idx
            # also account for already-inserted Y wheels (same W-id tuples)
            order.insert(pos + 1, tuple(y_to_w[v] for v in wheel_elems))
        lt = set()
        for i in range(len(order)):
            for j in range(i + 1, len(order)):
                lt |= {(a, b) for a in order[i] for b in order[j]}
        w = FinStructure(sig, size, {"lt": lt, "adj": adj}, {"succ": tuple(succ)})
        return w, Embedding(x, w, tuple(range(x.size))), Embedding(y, w, y_to_w)

    def extend(m, k):
        # fresh fixed points, each its own wheel, stacked above everything
        n = m.size
        succ = tuple(m.functions["succ"]) + tuple(range(n, n + k))
        lt = set(m.relations["lt"])
        for t in range(k):
            lt |= {(v, n + t) for v in range(n + t)}
        w = FinStructure(sig, n + k, {"lt": lt, "adj": set(m.relations["adj"])},
                         {"succ": succ})
        return w, Embedding(m, w, tuple(range(n)))

    def compositions(n):
        if n == 0:
            yield ()
            return
        for first in range(1, n + 1):
            for rest in compositions(n - first):
                yield (first,) + rest

    def candidates(n):
        import math
        for comp in compositions(n):
            offsets = []
            off = 0
            for sz in comp:
                offsets.append(off)
                off += sz
            succ = []
            for w_idx, sz in enumerate(comp):
                base = offsets[w_idx]
                succ.extend(base + (t + 1) % sz for t in range(sz))
            lt = set()
            for i in range(len(comp)):
                for j in range(i + 1, len(comp)):
                    lt |= {(offsets[i] + a, offsets[j] + b)
                           for a in range(comp[i]) for b in range(comp[j])}
            pairs = [(i, j) for i in range(len(comp)) for j in range(i + 1, len(comp))]
            gcds = [math.gcd(comp[i], comp[j]) for (i, j) in pairs]
            seen = set()
            for choice in itertools.product(*[range(1 << d) for d in gcds]):
                # canonical under independent wheel rotations
                best = None
                for rots in itertools.product(*[range(sz) for sz in comp]):
                    rotated = []
                    for (pi, (i, j)) in enumerate(pairs):
                        d = gcds[pi]
                        classes = frozenset((c + rots[j] - rots[i]) % d
                                            for c in range(d) if choice[pi] >> c & 1)
                        rotated.append(classes)
                    key = tuple(rotated)
                    if best is None or key < best:
                        best = key
                if best in seen:
                    continue
                seen.add(best)
                adj = set()
                for (pi, (i, j)) in enumerate(pairs):
                    d = gcds[pi]
                    for c in range(d):
                        if not (choice[pi] >> c & 1):
                            continue
                        lcm = comp[i] * comp[j] // d
                        for t in range(lcm):
                            a = offsets[i] + t % comp[i]
                            b = offsets[j] + (t + c) % comp[j]
                            adj |= {(a, b), (b, a)}
                yield FinStructure(sig, n, {"lt": lt, "adj": adj}, {"succ": tuple(succ)})

    return FraisseClassSpec("rot", sig, member, amalg, extend, candidates,
                            claims_disjoint=True)


# --- diversification --------------------------------------------------------------

def _div_signature(base: Signature, group: GroupTable) -> Signature:
    rels = (("P", 1), ("C", 1))
    rels += tuple((f"{name}_c", arity + 1) for name, arity in base.relations)
    funs = tuple(f"act{i}" for i in range(1, group.order))
    return Signature(rels, funs)


def products_of(m: FinStructure) -> list[int]:
    return unary_set(m, "P")


def consumers_of(m: FinStructure) -> list[int]:
    return unary_set(m, "C")


def slice_of(m: FinStructure, base_sig: Signature, c: int) -> FinStructure:
    """The base structure a consumer induces on the (renumbered) product sort."""
    prods = products_of(m)
    index = {p: i for i, p in enumerate(prods)}
    rels = {}
    for name, arity in base_sig.relations:
        rels[name] = {tuple(index[v] for v in t[:-1])
                      for t in m.relations[f"{name}_c"] if t[-1] == c}
    return FinStructure(base_sig, len(prods), rels)


def _action_rows(m: FinStructure, group: GroupTable) -> list[tuple[int, ...]]:
    rows = [tuple(range(m.size))]
    for i in range(1, group.order):
        rows.append(m.functions[f"act{i}"])
    return rows


def extract_action(m: FinStructure, group: GroupTable) -> GAction:
    """Read the encoded action back off the function symbols."""
    return GAction(m.size, group, tuple(_action_rows(m, group)))


def forget_action(m: FinStructure, base: Signature) -> FinStructure:
    """Reduct dropping the action symbols; a plain diversified structure."""
    sig = _div_signature(base, trivial_table())
    return FinStructure(sig, m.size, {name: m.relations[name] for name, _ in sig.relations})


def _orbits(rows: list[tuple[int, ...]], elements: Iterable[int]) -> list[list[int]]:
    seen = set()
    out = []
    for v in sorted(elements):
        if v in seen:
            continue
        orbit = sorted({row[v] for row in rows})
        seen.update(orbit)
        out.append(orbit)
    return out


def diversify_with_action(base: FraisseClassSpec, group: GroupTable,
                          name: Optional[str] = None) -> FraisseClassSpec:
    """Two-sorted structures whose consumers each induce a base structure on the
    products, carrying a distinguished free action of ``group`` encoded as unary
    function symbols (one per non-identity element).

    The amalgamation operator resolves each consumer orbit through its least
    representative: base amalgamation where both sides constrain the slice,
    generic extension where only one does, and action transport for the rest.
    """
    if not base.signature.is_relational:
        raise ValueError("diversification needs a relational base class")
    if not base.claims_disjoint:
        raise ValueError("diversification needs a base class with disjoint amalgamation")
    sig = _div_signature(base.signature, group)
    spec_name = name or f"divg:{base.name}:{group.name}"
    ord_g = group.order

    def member(m: FinStructure) -> bool:
        if m.signature != sig or validate(m):
            return False
        prods = set(products_of(m))
        cons = set(consumers_of(m))
        if prods & cons or prods | cons != set(range(m.size)):
            return False
        for name_, arity in base.signature.relations:
            for t in m.relations[f"{name_}_c"]:
                if t[-1] not in cons or any(v not in prods for v in t[:-1]):
                    return False
        rows = _action_rows(m, group)
        for i in range(1, ord_g):
            row = rows[i]
            if sorted(row) != list(range(m.size)):
                return False
            for v in range(m.size):
                if row[v] == v:
                    return False       # free action: no fixed points off identity
                if (v in prods) != (row[v] in prods):
                    return False
        for i in range(ord_g):
            for j in range(ord_g):
                k = group.mul(i, j)
                if any(rows[j][rows[i][v]] != rows[k][v] for v in range(m.size)):
                    return False
        for c in sorted(cons):
            if not base.member(slice_of(m, base.signature, c)):
                return False
        for name_, arity in base.signature.relations:
            rel = m.relations[f"{name_}_c"]
            for t in rel:
                for i in range(1, ord_g):
                    if tuple(rows[i][v] for v in t) not in rel:
                        return False
        return True

    def _slice_on(region: list[int], struct: FinStructure) -> dict:
        """Pair a sorted global product-id region with a base structure on it."""
        return {"region": list(region), "struct": struct}

    def _relations_from_slices(size: int, prods: list[int],
                               slices: dict[int, FinStructure]) -> dict:
        rels = {"P": {(p,) for p in prods},
                "C": {(c,) for c in slices}}
        for name_, arity in base.signature.relations:
            rels[f"{name_}_c"] = set()
        for c, sl in slices.items():
            for name_, arity in base.signature.relations:
                for t in sl.relations[name_]:
                    rels[f"{name_}_c"].add(tuple(prods[v] for v in t) + (c,))
        return rels

    def amalg(z, f, g):
        x, y = f.cod, g.cod
        size, y_to_w = pushout_layout(z, f, g)
        x_rows = _action_rows(x, group)
        y_rows = _action_rows(y, group)
        rows = []
        for i in range(ord_g):
            row = list(x_rows[i]) + [0] * (size - x.size)
            for v in range(y.size):
                if y_to_w[v] >= x.size:
                    row[y_to_w[v]] = y_to_w[y_rows[i][v]]
            rows.append(tuple(row))
        prods_w = sorted(set(products_of(x)) | {y_to_w[p] for p in products_of(y)})
        cons_w = sorted(set(consumers_of(x)) | {y_to_w[c] for c in consumers_of(y)})
        prod_index = {p: i for i, p in enumerate(prods_w)}
        x_prods = products_of(x)
        y_prods = products_of(y)
        z_prods = products_of(z)
        f_cons_img = {f.map[c]: c for c in consumers_of(z)}
        y_new_prod_ids = sorted(y_to_w[p] for p in y_prods if y_to_w[p] >= x.size)
        x_extra_prod_ids = sorted(set(x_prods) - {f.map[p] for p in z_prods})

        def slice_emb(small_prods, big_prods, elem_map):
            big_sl_index = {p: i for i, p in enumerate(big_prods)}
            return tuple(big_sl_index[elem_map[p]] for p in small_prods)

        slices: dict[int, FinStructure] = {}
        for orbit in _orbits(rows, cons_w):
            s = orbit[0]
            local: dict[int, int] = {}   # W product id -> local index of the slice
            if s < x.size and s in f_cons_img:
                zc = f_cons_img[s]
                z_sl = slice_of(z, base.signature, zc)
                x_sl = slice_of(x, base.signature, s)
                y_sl = slice_of(y, base.signature, g.map[zc])
                fe = Embedding(z_sl, x_sl,
                               slice_emb(z_prods, x_prods,
                                         {p: f.map[p] for p in z_prods}))
                ge = Embedding(z_sl, y_sl,
                               slice_emb(z_prods, y_prods,
                                         {p: g.map[p] for p in z_prods}))
                w_sl, fx_sl, gy_sl = base.amalgamate(z_sl, fe, ge)
                for i, p in enumerate(x_prods):
                    local[p] = fx_sl.map[i]
                for j, p in enumerate(y_prods):
                    local[y_to_w[p]] = gy_sl.map[j]
                assert len(local) == w_sl.size == len(set(local.values()))
                ordered = sorted(local, key=lambda p: prod_index[p])
                perm = [0] * w_sl.size
                for rank, p in enumerate(ordered):
                    perm[local[p]] = rank
                slices[s] = relabel(w_sl, perm)
            elif s < x.size:
                x_sl = slice_of(x, base.signature, s)
                ext, _ = base.generic_extend(x_sl, len(y_new_prod_ids))
                combined = [(p, i) for i, p in enumerate(x_prods)]
                combined += [(p, len(x_prods) + t) for t, p in enumerate(y_new_prod_ids)]
                combined.sort()
                perm = [0] * ext.size
                for rank, (_p, old) in enumerate(combined):
                    perm[old] = rank
                slices[s] = relabel(ext, perm)
            else:
                sy = next(v for v in range(y.size) if y_to_w[v] == s)
                y_sl = slice_of(y, base.signature, sy)
                ext, _ = base.generic_extend(y_sl, len(x_extra_prod_ids))
                combined = [(y_to_w[p], i) for i, p in enumerate(y_prods)]
                combined += [(p, len(y_prods) + t) for t, p in enumerate(x_extra_prod_ids)]
                combined.sort()
                perm = [0] * ext.size
                for rank, (_p, old) in enumerate(combined):
                    perm[old] = rank
                slices[s] = relabel(ext, perm)
            # transport the selector's slice along the action to its orbit
            for c in orbit[1:]:
                h = next(i for i in range(ord_g) if rows[i][s] == c)
                prow = rows[h]
                moved = {}
                for name_, arity in base.signature.relations:
                    moved[name_] = {
                        tuple(prod_index[prow[prods_w[v]]] for v in t)
                        for t in slices[s].relations[name_]}
                slices[c] = FinStructure(base.signature, len(prods_w), moved)
        rels = _relations_from_slices(size, prods_w, slices)
        funs = {f"act{i}": rows[i] for i in range(1, ord_g)}
        w = FinStructure(sig, size, rels, funs)
        return w, Embedding(x, w, tuple(range(x.size))), Embedding(y, w, y_to_w)

    def extend(m, k):
        if k % ord_g:
            raise ValueError(f"extensions of {spec_name} come in orbits of size {ord_g}")
        n = m.size
        prods = products_of(m)
        rows = [list(r) + list(range(n, n + k)) for r in _action_rows(m, group)]
        new_cons = []
        for o in range(k // ord_g):
            orbit = [n + o * ord_g + j for j in range(ord_g)]
            new_cons.extend(orbit)
            for i in range(ord_g):
                for j in range(ord_g):
                    rows[i][orbit[j]] = orbit[group.mul(j, i)]
        rels = {name: set(m.relations[name]) for name in m.relations}
        rels["C"] |= {(c,) for c in new_cons}
        canon, _ = base.generic_extend(FinStructure(base.signature, 0), len(prods))
        prod_index = {p: i for i, p in enumerate(prods)}
        for o in range(k // ord_g):
            sel = n + o * ord_g
            for j in range(ord_g):
                c = n + o * ord_g + j
                prow = rows[j]
                for name_, arity in base.signature.relations:
                    for t in canon.relations[name_]:
                        rels[f"{name_}_c"].add(
                            tuple(prow[prods[v]] for v in t) + (c,))
        funs = {f"act{i}": tuple(rows[i]) for i in range(1, ord_g)}
        w = FinStructure(sig, n + k, rels, funs)
        return w, Embedding(m, w, tuple(range(n)))

    def candidates(n):
        """Orbit-major layout, selector slices ranging over all labeled base
        members; canonical de-duplication under the equivariant relabelings
        (orbit permutations with per-orbit shifts on each sort)."""
        if n % ord_g:
            return
        if base.enumerate_labeled is None:
            raise ValueError(f"base class {base.name} has no labeled enumeration hook")
        total_orbits = n // ord_g
        for a in range(total_orbits + 1):
            b = total_orbits - a
            n_prods = a * ord_g
            prods = list(range(n_prods))
            cons = list(range(n_prods, n))
            rows = []
            for i in range(ord_g):
                row = list(range(n))
                for o in range(a):
                    for j in range(ord_g):
                        row[o * ord_g + j] = o * ord_g + group.mul(j, i)
                for o in range(b):
                    basepos = n_prods + o * ord_g
                    for j in range(ord_g):
                        row[basepos + j] = basepos + group.mul(j, i)
                rows.append(tuple(row))
            funs = {f"act{i}": rows[i] for i in range(1, ord_g)}
            base_choices = list(base.enumerate_labeled(n_prods))
            prod_rows = [tuple(rows[i][:n_prods]) for i in range(ord_g)]
            prod_relabelings = []
            for sigma_p in itertools.permutations(range(a)):
                for shifts_p in itertools.product(range(ord_g), repeat=a):
                    perm = [0] * n_prods
                    for o in range(a):
                        for j in range(ord_g):
                            perm[o * ord_g + j] = (sigma_p[o] * ord_g
                                                   + group.mul(shifts_p[o], j))
                    prod_relabelings.append(tuple(perm))
            key_cache: dict[tuple, tuple] = {}

            def slice_key(choice_idx, bij):
                ck = (choice_idx, bij)
                if ck not in key_cache:
                    key_cache[ck] = relabel(base_choices[choice_idx], bij).key()
                return key_cache[ck]

            seen = set()
            for combo in itertools.product(range(len(base_choices)), repeat=b):
                best = None
                for pperm in prod_relabelings:
                    orbit_keys = sorted(
                        min(slice_key(combo[o],
                                      tuple(pperm[prod_rows[j][v]] for v in range(n_prods)))
                            for j in range(ord_g))
                        for o in range(b))
                    cand = tuple(orbit_keys)
                    if best is None or cand < best:
                        best = cand
                if (a, best) in seen:
                    continue
                seen.add((a, best))
                rels = {"P": {(p,) for p in prods}, "C": {(c,) for c in cons}}
                for name_, arity in base.signature.relations:
                    rels[f"{name_}_c"] = set()
                for o in range(b):
                    for j in range(ord_g):
                        c = n_prods + o * ord_g + j
                        prow = rows[j]
                        for name_, arity in base.signature.relations:
                            for t in base_choices[combo[o]].relations[name_]:
                                rels[f"{name_}_c"].add(
                                    tuple(prow[v] for v in t) + (c,))
                yield FinStructure(sig, n, rels, funs)

    return FraisseClassSpec(spec_name, sig, member, amalg, extend, candidates,
                            claims_disjoint=True)


def diversify(base: FraisseClassSpec) -> FraisseClassSpec:
    """Diversification without a group action (the one-element action)."""
    return diversify_with_action(base, trivial_table(), name=f"div:{base.name}")


# --- mixed sums --------------------------------------------------------------------

def _mix_signature(left: Signature, right: Signature) -> Signature:
    rels = (("L", 1), ("R", 1), ("adj", 2))
    rels += tuple((f"l_{name}", arity) for name, arity in left.relations)
    rels += tuple((f"r_{name}", arity) for name, arity in right.relations)
    return Signature(rels, ())


def left_part(m: FinStructure, left_sig: Signature) -> tuple[FinStructure, list[int]]:
    elems = unary_set(m, "L")
    index = {v: i for i, v in enumerate(elems)}
    rels = {name: {tuple(index[v] for v in t) for t in m.relations[f"l_{name}"]}
            for name, _ in left_sig.relations}
    return FinStructure(left_sig, len(elems), rels), elems


def right_part(m: FinStructure, right_sig: Signature) -> tuple[FinStructure, list[int]]:
    elems = unary_set(m, "R")
    index = {v: i for i, v in enumerate(elems)}
    rels = {name: {tuple(index[v] for v in t) for t in m.relations[f"r_{name}"]}
            for name, _ in right_sig.relations}
    return FinStructure(right_sig, len(elems), rels), elems


def mixed_sum(left: FraisseClassSpec, right: FraisseClassSpec) -> FraisseClassSpec:
    """Two side-by-side structures joined by an unconstrained cross-side graph."""
    for spec in (left, right):
        if not spec.signature.is_relational:
            raise ValueError("mixed sums need relational component classes")
        if not spec.claims_disjoint:
            raise ValueError("mixed sums need components with disjoint amalgamation")
    sig = _mix_signature(left.signature, right.signature)
    spec_name = f"mix:{left.name}:{right.name}"

    def member(m: FinStructure) -> bool:
        if m.signature != sig or validate(m):
            return False
        ls = set(unary_set(m, "L"))
        rs = set(unary_set(m, "R"))
        if ls & rs or ls | rs != set(range(m.size)):
            return False
        for (a, b) in m.relations["adj"]:
            if (b, a) not in m.relations["adj"]:
                return False
            if not ((a in ls and b in rs) or (a in rs and b in ls)):
                return False
        for name, _ in left.signature.relations:
            if any(v not in ls for t in m.relations[f"l_{name}"] for v in t):
                return False
        for name, _ in right.signature.relations:
            if any(v not in rs for t in m.relations[f"r_{name}"] for v in t):
                return False
        lp, _ = left_part(m, left.signature)
        rp, _ = right_part(m, right.signature)
        return left.member(lp) and right.member(rp)

    def _side_amalgam(side_spec, side_sig, prefix, z, x, y, f, g, y_to_w):
        """Amalgamate one side and return its relation tables in W ids."""
        z_part, z_ids = (left_part if prefix == "l" else right_part)(z, side_sig)
        x_part, x_ids = (left_part if prefix == "l" else right_part)(x, side_sig)
        y_part, y_ids = (left_part if prefix == "l" else right_part)(y, side_sig)
        x_index = {v: i for i, v in enumerate(x_ids)}
        y_index = {v: i for i, v in enumerate(y_ids)}
        fe = Embedding(z_part, x_part, tuple(x_index[f.map[v]] for v in z_ids))
        ge = Embedding(z_part, y_part, tuple(y_index[g.map[v]] for v in z_ids))
        w_part, fx, gy = side_spec.amalgamate(z_part, fe, ge)
        local_to_w = {}
        for i, v in enumerate(x_ids):
            local_to_w[fx.map[i]] = v
        for j, v in enumerate(y_ids):
            local_to_w[gy.map[j]] = y_to_w[v]
        assert len(local_to_w) == w_part.size
        rels = {}
        for name, _ in side_sig.relations:
            rels[f"{prefix}_{name}"] = {
                tuple(local_to_w[v] for v in t) for t in w_part.relations[name]}
        side_elems = sorted(local_to_w.values())
        return rels, side_elems

    def amalg(z, f, g):
        x, y = f.cod, g.cod
        size, y_to_w = pushout_layout(z, f, g)
        rels_l, l_elems = _side_amalgam(left, left.signature, "l", z, x, y, f, g, y_to_w)
        rels_r, r_elems = _side_amalgam(right, right.signature, "r", z, x, y, f, g, y_to_w)
        adj = set(x.relations["adj"]) | {
            (y_to_w[a], y_to_w[b]) for (a, b) in y.relations["adj"]}
        rels = {"L": {(v,) for v in l_elems}, "R": {(v,) for v in r_elems}, "adj": adj}
        rels.update(rels_l)
        rels.update(rels_r)
        w = FinStructure(sig, size, rels)
        return w, Embedding(x, w, tuple(range(x.size))), Embedding(y, w, y_to_w)

    def extend(m, k):
        # fresh left-side elements with no new edges
        n = m.size
        lp, l_ids = left_part(m, left.signature)
        ext, _ = left.generic_extend(lp, k)
        local_to_w = {i: v for i, v in enumerate(l_ids)}
        for t in range(k):
            local_to_w[lp.size + t] = n + t
        rels = {name: set(m.relations[name]) for name in m.relations}
        rels["L"] |= {(n + t,) for t in range(k)}
        for name, _ in left.signature.relations:
            rels[f"l_{name}"] = {
                tuple(local_to_w[v] for v in t) for t in ext.relations[name]}
        w = FinStructure(sig, n + k, rels)
        return w, Embedding(m, w, tuple(range(n)))

    def candidates(n):
        from .fraisse import enumerate_members
        from .structures import automorphisms as auts
        for lsize in range(n + 1):
            rsize = n - lsize
            for lrep in enumerate_members(left, lsize):
                for rrep in enumerate_members(right, rsize):
                    l_auts = [e for e in auts(lrep).elements] if lsize else [()]
                    r_auts = [e for e in auts(rrep).elements] if rsize else [()]
                    cross = [(a, lsize + b) for a in range(lsize) for b in range(rsize)]
                    seen = set()
                    for bits in range(1 << len(cross)):
                        edges = frozenset(cross[i] for i in range(len(cross)) if bits >> i & 1)
                        key = min(
                            tuple(sorted((pa[a], lsize + pb[b - lsize]) for (a, b) in edges))
                            for pa in l_auts for pb in r_auts)
                        if key in seen:
                            continue
                        seen.add(key)
                        rels = {"L": {(i,) for i in range(lsize)},
                                "R": {(i,) for i in range(lsize, n)},
                                "adj": {e for e in edges} | {(b, a) for (a, b) in edges}}
                        for name, _ in left.signature.relations:
                            rels[f"l_{name}"] = set(lrep.relations[name])
                        for name, _ in right.signature.relations:
                            rels[f"r_{name}"] = {
                                tuple(v + lsize for v in t) for t in rrep.relations[name]}
                        yield FinStructure(sig, n, rels)

    return FraisseClassSpec(spec_name, sig, member, amalg, extend, candidates,
                            claims_disjoint=True)


# --- orbit completion ----------------------------------------------------------------

def _transport_slice(struct: FinStructure, base_sig: Signature,
                     region: list[int], bij: dict[int, int]) -> tuple[list[int], FinStructure]:
    """Push a base structure on a sorted id region through a global bijection."""
    new_region = sorted(bij[v] for v in region)
    old_pos = {v: i for i, v in enumerate(region)}
    new_pos = {v: i for i, v in enumerate(new_region)}
    rels = {}
    for name, _ in base_sig.relations:
        rels[name] = {tuple(new_pos[bij[region[v]]] for v in t)
                      for t in struct.relations[name]}
    return new_region, FinStructure(base_sig, len(region), rels)


def orbit_completion(base: FraisseClassSpec, x: FinStructure, group: GroupTable,
                     fixed_part: Optional[FinStructure] = None,
                     ) -> tuple[FinStructure, Embedding, GAction]:
    """Close a diversified structure under a free action of ``group``.

    Every element outside the fixed part is replicated once per non-identity
    group element; consumer slices extend canonically and transport along the
    action.  Returns the completed structure (with the action encoded), the
    embedding of ``x`` into its action-free reduct, and the action itself.

    ``fixed_part``, when given, must be an action-carrying member whose reduct
    equals the induced substructure of ``x`` on an initial segment {0..k-1}.
    """
    if x.size == 0:
        raise ValueError("orbit completion needs a nonempty structure")
    div_spec = diversify(base)
    if not div_spec.member(x):
        raise ValueError("input is not a diversified member of the base class")
    divg_spec = diversify_with_action(base, group)
    sig = divg_spec.signature
    ord_g = group.order
    fp_size = 0
    if fixed_part is not None:
        if not divg_spec.member(fixed_part):
            raise ValueError("fixed part is not an action-carrying member")
        fp_size = fixed_part.size
        prefix, _ = generated_substructure(x, range(fp_size))
        if forget_action(fixed_part, base.signature) != prefix:
            raise ValueError("fixed part does not match an initial segment of the input")
        if fp_size == x.size:
            act = extract_action(fixed_part, group)
            return fixed_part, Embedding(x, forget_action(fixed_part, base.signature),
                                         tuple(range(x.size))), act

    n_orig = x.size
    movable = list(range(fp_size, n_orig))
    size = fp_size + len(movable) * ord_g

    def copy_id(v: int, j: int) -> int:
        if j == 0 or v < fp_size:
            return v
        return n_orig + (v - fp_size) * (ord_g - 1) + (j - 1)

    rows = []
    for i in range(ord_g):
        row = list(range(size))
        if fixed_part is not None:
            fp_rows = _action_rows(fixed_part, group)
            for v in range(fp_size):
                row[v] = fp_rows[i][v]
        for v in movable:
            for j in range(ord_g):
                row[copy_id(v, j)] = copy_id(v, group.mul(j, i))
        rows.append(tuple(row))

    x_prods = products_of(x)
    x_cons = consumers_of(x)
    prods_w = sorted({copy_id(p, j) for p in x_prods for j in range(ord_g)})
    cons_w = sorted({copy_id(c, j) for c in x_cons for j in range(ord_g)})
    prod_index = {p: i for i, p in enumerate(prods_w)}
    fp_prods = [p for p in x_prods if p < fp_size]
    orig_region = sorted(x_prods)

    def x_slice_on_region(c: int) -> tuple[list[int], FinStructure]:
        return list(orig_region), slice_of(x, base.signature, c)

    slices: dict[int, FinStructure] = {}

    def fold_amalgam(cur_region, cur_struct, new_region, new_struct):
        """Glue two regional base structures over the fixed-part products."""
        common = fp_prods
        cur_pos = {v: i for i, v in enumerate(cur_region)}
        new_pos = {v: i for i, v in enumerate(new_region)}
        common_struct, _ = generated_substructure(
            cur_struct, [cur_pos[v] for v in common])
        fe = Embedding(common_struct, cur_struct, tuple(cur_pos[v] for v in common))
        ge = Embedding(common_struct, new_struct, tuple(new_pos[v] for v in common))
        w_sl, fx, gy = base.amalgamate(common_struct, fe, ge)
        local_to_gid = {}
        for i, v in enumerate(cur_region):
            local_to_gid[fx.map[i]] = v
        for j, v in enumerate(new_region):
            local_to_gid[gy.map[j]] = v
        assert len(local_to_gid) == w_sl.size
        region = sorted(local_to_gid.values())
        rank = {gid: i for i, gid in enumerate(region)}
        perm = [0] * w_sl.size
        for old, gid in local_to_gid.items():
            perm[old] = rank[gid]
        return region, relabel(w_sl, perm)

    for orbit in _orbits(rows, cons_w):
        s = orbit[0]
        if s < fp_size:
            # every orbit mate carries a prescribed slice from x; glue all of
            # their transports over the fixed-part products, then extend is a
            # no-op because the transported regions already cover everything
            region, struct = x_slice_on_region(s)
            for h in range(1, ord_g):
                mate = rows[h][s]
                inv_h = next(i for i in range(ord_g) if group.mul(h, i) == 0)
                bij = {v: rows[inv_h][v] for v in range(size)}
                mate_region, mate_struct = x_slice_on_region(mate)
                t_region, t_struct = _transport_slice(mate_struct, base.signature,
                                                      mate_region, bij)
                region, struct = fold_amalgam(region, struct, t_region, t_struct)
            assert region == prods_w
            slices[s] = struct
        else:
            region, struct = x_slice_on_region(s)
            missing = [p for p in prods_w if p not in set(region)]
            ext, _ = base.generic_extend(struct, len(missing))
            combined = [(p, i) for i, p in enumerate(region)]
            combined += [(p, len(region) + t) for t, p in enumerate(missing)]
            combined.sort()
            perm = [0] * ext.size
            for rank, (_p, old) in enumerate(combined):
                perm[old] = rank
            slices[s] = relabel(ext, perm)
        for c in orbit:
            if c == s or c in slices:
                continue
            h = next(i for i in range(ord_g) if rows[i][s] == c)
            prow = rows[h]
            moved = {}
            for name_, _ in base.signature.relations:
                moved[name_] = {
                    tuple(prod_index[prow[prods_w[v]]] for v in t)
                    for t in slices[s].relations[name_]}
            slices[c] = FinStructure(base.signature, len(prods_w), moved)

    rels = {"P": {(p,) for p in prods_w}, "C": {(c,) for c in cons_w}}
    for name_, _ in base.signature.relations:
        rels[f"{name_}_c"] = set()
    for c, sl in slices.items():
        for name_, _ in base.signature.relations:
            for t in sl.relations[name_]:
                rels[f"{name_}_c"].add(tuple(prods_w[v] for v in t) + (c,))
    funs = {f"act{i}": rows[i] for i in range(1, ord_g)}
    xg = FinStructure(sig, size, rels, funs)
    emb = Embedding(x, forget_action(xg, base.signature), tuple(range(n_orig)))
    return xg, emb, extract_action(xg, group)


# --- rotating-machine gadget ----------------------------------------------------------

def gadget(n: int, k: int) -> FinStructure:
    """Two stacked wheels of sizes n and k*n, joined mod-n, lower wheel first.

    Every automorphism is a rotation pair (a, b) with b = a mod n, so the
    automorphism group is cyclic of order k*n and no element that moves the
    small wheel has order dividing k.
    """
    if n < 1 or k < 1:
        raise ValueError("wheel size and multiplier must be >= 1")
    m = k * n
    succ = tuple((i + 1) % n for i in range(n)) + tuple(
        n + (i + 1) % m for i in range(m))
    adj = set()
    for xx in range(n):
        for yy in range(m):
            if xx % n == yy % n:
                adj |= {(xx, n + yy), (n + yy, xx)}
    lt = {(xx, n + yy) for xx in range(n) for yy in range(m)}
    return FinStructure(MACHINE_SIG, n + m, {"lt": lt, "adj": adj}, {"succ": succ})


# --- mixed-sum distinguishing extension ------------------------------------------------

def distinguishing_witness(mix_spec: FraisseClassSpec, m: FinStructure,
                           h: tuple[int, ...], b0: int) -> tuple[FinStructure, int]:
    """Extend m by one left element tied to b0 but not to h(b0).

    Any automorphism of the extension that restricts to h must move the new
    element, because it is adjacent to b0 and not to h(b0).  Requires h to be
    an automorphism of m moving the right-side element b0.
    """
    if relabel(m, h) != m:
        raise ValueError("h is not an automorphism of the structure")
    if (b0,) not in m.relations["R"]:
        raise ValueError("b0 is not a right-side element")
    if h[b0] == b0:
        raise ValueError("h must move b0")
    m2, _ = mix_spec.generic_extend(m, 1)
    a0 = m.size
    rels = {name: set(m2.relations[name]) for name in m2.relations}
    rels["adj"] |= {(a0, b0), (b0, a0)}
    w = FinStructure(mix_spec.signature, m2.size, rels)
    return w, a0


# --- consumer-product helpers ----------------------------------------------------------

def cp_rankings(m: FinStructure) -> dict[int, tuple[int, ...]]:
    """Per-consumer product rankings, worst to best."""
    prods = products_of(m)
    out = {}
    for c in consumers_of(m):
        rel = {t[:2] for t in m.relations["lt_c"] if t[2] == c}
        out[c] = tuple(sorted(prods, key=lambda p: sum(1 for q in prods if (q, p) in rel)))
    return out


def cp_preference_distinct(m: FinStructure) -> tuple[bool, Optional[tuple[int, int]]]:
    """All consumer pairs must disagree on some product pair."""
    ranks = cp_rankings(m)
    cons = sorted(ranks)
    for i, c in enumerate(cons):
        for d in cons[i + 1:]:
            if ranks[c] == ranks[d]:
                return False, (c, d)
    return True, None


# --- registry ---------------------------------------------------------------------------

_SIMPLE_CLASSES = {
    "sets": class_pure_sets,
    "lo": class_linear_orders,
    "bipartite": class_bipartite,
    "rot": class_rotating_machines,
}


class UnknownClassError(ValueError):
    pass


def resolve_class(name: str) -> FraisseClassSpec:
    """Build a catalog class from its registry name (one shared spec per name).

    Grammar: sets | lo | bipartite | rot | div:<base> | divg:<base>:<group>
    | mix:<left>:<right>.  Nested names are resolved by trying each split of
    the remaining colon-separated text, leftmost first.
    """
    if name not in _RESOLVED:
        _RESOLVED[name] = _resolve_class_uncached(name)
    return _RESOLVED[name]


_RESOLVED: dict[str, FraisseClassSpec] = {}


def _resolve_class_uncached(name: str) -> FraisseClassSpec:
    if name in _SIMPLE_CLASSES:
        return _SIMPLE_CLASSES[name]()
    if name.startswith("div:"):
        return diversify(resolve_class(name[len("div:"):]))
    if name.startswith("divg:"):
        rest = name[len("divg:"):]
        for i in [j for j, ch in enumerate(rest) if ch == ":"]:
            try:
                base = resolve_class(rest[:i])
                grp = group_from_name(rest[i + 1:])
            except ValueError:
                continue
            return diversify_with_action(base, grp)
        raise UnknownClassError(f"cannot parse action-diversified class {name!r}")
    if name.startswith("mix:"):
        rest = name[len("mix:"):]
        for i in [j for j, ch in enumerate(rest) if ch == ":"]:
            try:
                lhs = resolve_class(rest[:i])
                rhs = resolve_class(rest[i + 1:])
            except ValueError:
                continue
            return mixed_sum(lhs, rhs)
        raise UnknownClassError(f"cannot parse mixed-sum class {name!r}")
    raise UnknownClassError(f"unknown class {name!r}")


def registry_names() -> list[str]:
    return sorted(_SIMPLE_CLASSES) + ["div:<base>", "divg:<base>:<group>", "mix:<left>:<right>"]


# --- parallel amalgamation sweep ---------------------------------------------------------

def _amalg_case_worker(args):
    from .fraisse import run_amalgamation_case
    from .structures import parse_structure
    class_name, z_t, x_t, y_t, f_map, g_map, slack = args
    spec = resolve_class(class_name)
    z, xx, yy = parse_structure(z_t), parse_structure(x_t), parse_structure(y_t)
    case = (z, xx, yy, Embedding(z, xx, f_map), Embedding(z, yy, g_map))
    return run_amalgamation_case(spec, case, oracle_slack=slack)


def check_amalgamation_by_name(class_name: str, max_n: int, jobs: int = 1,
                               oracle_slack: int = 0):
    """Amalgamation sweep with optional process parallelism, merged canonically."""
    from .fraisse import CheckReport, iter_amalgamation_cases, run_amalgamation_case
    from .structures import serialize_structure
    spec = resolve_class(class_name)
    report = CheckReport("amalgamation", {"class": class_name, "max_n": max_n})
    if jobs <= 1:
        for case in iter_amalgamation_cases(spec, max_n):
            report.checked += 1
            msg = run_amalgamation_case(spec, case, oracle_slack=oracle_slack)
            if msg is not None:
                report.failures.append(msg)
        return report
    from concurrent.futures import ProcessPoolExecutor
    payload = [(class_name, serialize_structure(z), serialize_structure(xx),
                serialize_structure(yy), f.map, g.map, oracle_slack)
               for (z, xx, yy, f, g) in iter_amalgamation_cases(spec, max_n)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(_amalg_case_worker, payload, chunksize=8))
    report.checked = len(payload)
    report.failures = [msg for msg in results if msg is not None]
    return report
