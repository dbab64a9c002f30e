"""Pluggable amalgamation-class framework.

A class spec bundles a membership predicate, an amalgamation operator, a
generic-extension hook and an enumeration hook.  On top of it this module
provides class-law checkers (hereditarity, joint embedding, amalgamation with
an independent search oracle) and a chain construction that grows finite
approximations of the generic limit, driven by a FIFO ledger of extension
tasks.
"""

from __future__ import annotations

import os
import random
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Optional

from .structures import (
    Embedding,
    FinStructure,
    Signature,
    all_embeddings,
    extend_embedding,
    generated_substructure,
    iter_embeddings,
    parse_structure,
    relabel,
    serialize_structure,
    validate,
    validate_embedding,
)

DEFAULT_ENUM_CAP = 8
_PAIRWISE_DEDUP_LIMIT = 400


class EnumerationCapExceeded(ValueError):
    pass


class AmalgamationError(RuntimeError):
    """Raised when a class operator fails to produce a valid amalgam."""


AmalgamResult = tuple[FinStructure, Embedding, Embedding]


@dataclass(frozen=True)
class FraisseClassSpec:
    """A finitely axiomatised class of finite models.

    amalgamate(z, f, g) must return (w, f2, g2) with f2*f == g2*g and w a
    member; generic_extend(m, k) returns a member extending m by k fresh
    elements together with the inclusion.  enumerate_candidates(n) yields
    members of size exactly n covering every isomorphism type (canonically
    de-duplicated where the class can afford it); enumerate_labeled(n), when
    present, yields *all* labeled members on {0..n-1}.
    """

    name: str
    signature: Signature
    member: Callable[[FinStructure], bool]
    amalgamate: Callable[[FinStructure, Embedding, Embedding], AmalgamResult]
    generic_extend: Callable[[FinStructure, int], tuple[FinStructure, Embedding]]
    enumerate_candidates: Callable[[int], Iterable[FinStructure]]
    claims_disjoint: bool = True
    enumerate_labeled: Optional[Callable[[int], Iterable[FinStructure]]] = None

    def empty(self) -> FinStructure:
        return FinStructure(self.signature, 0)


@lru_cache(maxsize=512)
def _members_cached(spec: FraisseClassSpec, n: int) -> tuple[FinStructure, ...]:
    reps: list[FinStructure] = []
    seen_keys = set()
    candidates = [m for m in spec.enumerate_candidates(n) if spec.member(m)]
    small = len(candidates) <= _PAIRWISE_DEDUP_LIMIT
    from .structures import isomorphic  # local import to keep module load light
    for cand in candidates:
        if cand.key() in seen_keys:
            continue
        seen_keys.add(cand.key())
        if small and any(isomorphic(cand, r) for r in reps):
            continue
        reps.append(cand)
    reps.sort(key=lambda m: m.key())
    return tuple(reps)


def enumerate_members(spec: FraisseClassSpec, n: int, cap: int = DEFAULT_ENUM_CAP) -> list[FinStructure]:
    """All members of size exactly n up to isomorphism, deterministically ordered.

    Candidates come from the class hook and are filtered through the
    membership predicate; isomorphism rejection is pairwise below a candidate
    budget and relies on the hook's canonical de-duplication above it.
    """
    if n > cap:
        raise EnumerationCapExceeded(f"size {n} exceeds enumeration cap {cap}")
    return list(_members_cached(spec, n))


def members_up_to(spec: FraisseClassSpec, max_n: int, cap: int = DEFAULT_ENUM_CAP) -> list[FinStructure]:
    out = []
    for n in range(max_n + 1):
        out.extend(enumerate_members(spec, n, cap=cap))
    return out


# --- class-law checkers -------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    bounds: dict
    checked: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def lines(self) -> list[str]:
        status = "pass" if self.passed else "fail"
        head = [f"report {self.name} {status} checked={self.checked} "
                + " ".join(f"{k}={v}" for k, v in sorted(self.bounds.items()))]
        return head + [f"  failure: {f}" for f in self.failures]


def _function_closed_subsets(m: FinStructure) -> list[tuple[int, ...]]:
    """All distinct closures of subsets of the universe, as sorted tuples."""
    out = set()
    import itertools
    for r in range(m.size + 1):
        for s in itertools.combinations(range(m.size), r):
            sub, inc = generated_substructure(m, s)
            out.add(inc.map)
    return sorted(out)


def check_hereditary(spec: FraisseClassSpec, max_n: int) -> CheckReport:
    """Every function-closed subset of every small member induces a member."""
    report = CheckReport("hereditary", {"class": spec.name, "max_n": max_n})
    for m in members_up_to(spec, max_n):
        for subset in _function_closed_subsets(m):
            sub, _ = generated_substructure(m, subset)
            report.checked += 1
            if not spec.member(sub):
                report.failures.append(
                    f"substructure on {subset} of member {m.key()} is not a member")
    return report


def check_jep(spec: FraisseClassSpec, max_n: int) -> CheckReport:
    """Joint embedding via amalgamation over the empty member."""
    report = CheckReport("jep", {"class": spec.name, "max_n": max_n})
    empty = spec.empty()
    if not spec.member(empty):
        report.bounds["empty-member"] = False
        for x in members_up_to(spec, max_n):
            for y in members_up_to(spec, max_n):
                report.checked += 1
                if _oracle_amalgam(spec, empty, _empty_embedding(empty, x),
                                   _empty_embedding(empty, y),
                                   x.size + y.size) is None:
                    report.failures.append(
                        f"no joint extension of {x.key()} and {y.key()}")
        return report
    for x in members_up_to(spec, max_n):
        for y in members_up_to(spec, max_n):
            report.checked += 1
            msg = _run_operator(spec, empty, _empty_embedding(empty, x),
                                _empty_embedding(empty, y))
            if msg is not None:
                report.failures.append(f"jep({x.key()}, {y.key()}): {msg}")
    return report


def _empty_embedding(empty: FinStructure, target: FinStructure) -> Embedding:
    return Embedding(empty, target, ())


def _run_operator(spec: FraisseClassSpec, z: FinStructure,
                  f: Embedding, g: Embedding) -> Optional[str]:
    """None when the operator produces a valid amalgam; an error message otherwise."""
    try:
        w, f2, g2 = spec.amalgamate(z, f, g)
    except Exception as exc:  # noqa: BLE001 - operator failures are data here
        return f"operator raised {type(exc).__name__}: {exc}"
    return _validate_amalgam(spec, z, f, g, w, f2, g2)


def _validate_amalgam(spec: FraisseClassSpec, z: FinStructure, f: Embedding,
                      g: Embedding, w: FinStructure, f2: Embedding,
                      g2: Embedding) -> Optional[str]:
    problems = validate(w)
    if problems:
        return f"amalgam invalid: {problems[0]}"
    if not spec.member(w):
        return "amalgam is not a member"
    if f2.dom is not f.cod and f2.dom != f.cod:
        return "left leg has wrong domain"
    if g2.dom is not g.cod and g2.dom != g.cod:
        return "right leg has wrong domain"
    for leg in (f2, g2):
        bad = validate_embedding(leg)
        if bad:
            return f"leg not an embedding: {bad[0]}"
    for zz in range(z.size):
        if f2.map[f.map[zz]] != g2.map[g.map[zz]]:
            return f"square does not commute at {zz}"
    if spec.claims_disjoint:
        shared = set(f2.map) & set(g2.map)
        through_z = {f2.map[f.map[zz]] for zz in range(z.size)}
        if shared != through_z:
            return f"amalgam identifies points outside the base: {sorted(shared - through_z)}"
    return None


def _oracle_amalgam(spec: FraisseClassSpec, z: FinStructure, f: Embedding,
                    g: Embedding, bound: int,
                    cap: int = DEFAULT_ENUM_CAP) -> Optional[tuple]:
    """Exhaustive search for any amalgam among members up to the size bound.

    Independent of the class operator: tries every member, every embedding of
    X, and a pinned search for a compatible embedding of Y.
    """
    x, y = f.cod, g.cod
    for m in range(max(x.size, y.size), bound + 1):
        for w in enumerate_members(spec, m, cap=max(cap, bound)):
            for fx in iter_embeddings(x, w):
                pinned = {g.map[i]: fx.map[f.map[i]] for i in range(z.size)}
                gy = extend_embedding(y, w, pinned)
                if gy is not None:
                    return w, fx, gy
    return None


def iter_amalgamation_cases(spec: FraisseClassSpec, max_n: int) -> Iterator[tuple]:
    """All (z, x, y, f, g) test cases with member sizes up to max_n."""
    pool = members_up_to(spec, max_n)
    for z in pool:
        for x in pool:
            if x.size < z.size:
                continue
            fs = all_embeddings(z, x)
            if not fs:
                continue
            for y in pool:
                if y.size < z.size:
                    continue
                gs = all_embeddings(z, y)
                for f in fs:
                    for g in gs:
                        yield z, x, y, f, g


def run_amalgamation_case(spec: FraisseClassSpec, case: tuple,
                          oracle_slack: int = 0,
                          oracle_cache: Optional[dict] = None) -> Optional[str]:
    """Operator layer and oracle layer must both succeed and agree."""
    z, x, y, f, g = case
    op_msg = _run_operator(spec, z, f, g)
    bound = x.size + y.size - z.size + oracle_slack
    if oracle_cache is not None:
        # amalgam existence is symmetric in the two legs of the diagram
        key = (z.key(), frozenset({(x.key(), f.map), (y.key(), g.map)}), bound)
        if key not in oracle_cache:
            oracle_cache[key] = _oracle_amalgam(spec, z, f, g, bound) is not None
        found = oracle_cache[key]
    else:
        found = _oracle_amalgam(spec, z, f, g, bound) is not None
    if op_msg is None and not found:
        return (f"layers disagree for z={z.key()} f={f.map} g={g.map}: "
                f"operator succeeded, oracle found no amalgam up to size {bound}")
    if op_msg is not None and found:
        return (f"layers disagree for z={z.key()} f={f.map} g={g.map}: "
                f"oracle found an amalgam but operator failed ({op_msg})")
    if op_msg is not None:
        return f"no amalgam for z={z.key()} x={x.key()} y={y.key()} f={f.map} g={g.map}: {op_msg}"
    return None


def check_amalgamation(spec: FraisseClassSpec, max_n: int,
                       oracle_slack: int = 0) -> CheckReport:
    """Two-layer amalgamation sweep: constructive operator vs. search oracle."""
    report = CheckReport("amalgamation", {"class": spec.name, "max_n": max_n})
    cache: dict = {}
    for case in iter_amalgamation_cases(spec, max_n):
        report.checked += 1
        msg = run_amalgamation_case(spec, case, oracle_slack=oracle_slack,
                                    oracle_cache=cache)
        if msg is not None:
            report.failures.append(msg)
    return report


# --- limit approximations ------------------------------------------------------

@dataclass(frozen=True)
class TaskShape:
    """An extension problem: a member b together with a proper closed subset.

    ``subset`` lists the b-elements forming the base substructure a; an
    instance anchors a at an embedding into the chain and demands an embedding
    of b extending it.
    """

    shape_id: int
    b: FinStructure
    subset: tuple[int, ...]
    a: FinStructure

    def pin_map(self, anchor: tuple[int, ...]) -> dict[int, int]:
        return {self.subset[i]: anchor[i] for i in range(len(self.subset))}


@dataclass
class TaskRecord:
    shape_id: int
    anchor: tuple[int, ...]
    discovered_step: int
    status: str = "pending"           # pending | fulfilled
    witness: Optional[tuple[int, ...]] = None
    fulfilled_step: Optional[int] = None


@dataclass
class LimitApproximation:
    class_name: str
    cap: int
    steps_requested: int
    steps_used: int
    seed: Optional[int]
    chain: list[FinStructure]
    shapes: list[TaskShape]
    records: dict[tuple[int, tuple[int, ...]], TaskRecord]
    certified_level: int = 0

    @property
    def top(self) -> FinStructure:
        return self.chain[-1]

    def inclusions(self) -> list[Embedding]:
        out = []
        for i in range(len(self.chain) - 1):
            small, big = self.chain[i], self.chain[i + 1]
            out.append(Embedding(small, big, tuple(range(small.size))))
        return out


def task_shapes(spec: FraisseClassSpec, cap: int) -> list[TaskShape]:
    """Every (member b, proper function-closed subset) pair with |b| <= cap."""
    shapes = []
    sid = 0
    for n in range(1, cap + 1):
        for b in enumerate_members(spec, n):
            for subset in _function_closed_subsets(b):
                if len(subset) == b.size:
                    continue
                a, _ = generated_substructure(b, subset)
                shapes.append(TaskShape(sid, b, subset, a))
                sid += 1
    return shapes


def _relabel_onto_top(top: FinStructure, w: FinStructure, f2: Embedding,
                      g2: Embedding) -> tuple[FinStructure, Embedding]:
    """Rename the amalgam so the chain top sits at {0..|top|-1} literally."""
    perm = [None] * w.size
    for i in range(top.size):
        perm[f2.map[i]] = i
    nxt = top.size
    for v in range(w.size):
        if perm[v] is None:
            perm[v] = nxt
            nxt += 1
    w2 = relabel(w, perm)
    g2b = Embedding(g2.dom, w2, tuple(perm[v] for v in g2.map))
    return w2, g2b


def build_limit(spec: FraisseClassSpec, steps: int, cap: int,
                seed: Optional[int] = None) -> LimitApproximation:
    """Grow a chain from the empty member, fulfilling extension tasks FIFO.

    Each step settles the oldest pending task: if the current top already
    realizes the extension the witness is recorded, otherwise the demanded
    member is amalgamated onto the top.  With a seed, tasks discovered within
    one step are enqueued in a reproducibly shuffled order.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    empty = spec.empty()
    if not spec.member(empty):
        raise ValueError(f"class {spec.name} has no empty member to start from")
    shapes = task_shapes(spec, cap)
    rng = random.Random(seed) if seed is not None else None
    chain = [empty]
    records: dict[tuple[int, tuple[int, ...]], TaskRecord] = {}
    queue: deque[tuple[int, tuple[int, ...]]] = deque()

    def discover(step: int) -> None:
        top = chain[-1]
        fresh = []
        for shape in shapes:
            for e in iter_embeddings(shape.a, top):
                key = (shape.shape_id, e.map)
                if key not in records:
                    records[key] = TaskRecord(shape.shape_id, e.map, step)
                    fresh.append(key)
        if rng is not None:
            rng.shuffle(fresh)
        queue.extend(fresh)

    def audit(step: int) -> None:
        top = chain[-1]
        still = deque()
        while queue:
            key = queue.popleft()
            rec = records[key]
            shape = shapes[rec.shape_id]
            witness = extend_embedding(shape.b, top, shape.pin_map(rec.anchor))
            if witness is not None:
                rec.status = "fulfilled"
                rec.witness = witness.map
                rec.fulfilled_step = step
            else:
                still.append(key)
        queue.extend(still)

    steps_used = 0
    for step in range(1, steps + 1):
        discover(step)
        audit(step)
        if not queue:
            break
        steps_used = step
        key = queue.popleft()
        rec = records[key]
        shape = shapes[rec.shape_id]
        top = chain[-1]
        f = Embedding(shape.a, top, rec.anchor)
        g = Embedding(shape.a, shape.b, shape.subset)
        try:
            w, f2, g2 = spec.amalgamate(shape.a, f, g)
        except Exception as exc:
            raise AmalgamationError(
                f"class {spec.name} failed to fulfil task shape={rec.shape_id} "
                f"anchor={rec.anchor}: {exc}") from exc
        msg = _validate_amalgam(spec, shape.a, f, g, w, f2, g2)
        if msg is not None:
            raise AmalgamationError(
                f"class {spec.name} produced an invalid amalgam for task "
                f"shape={rec.shape_id} anchor={rec.anchor}: {msg}")
        w2, g2b = _relabel_onto_top(top, w, f2, g2)
        chain.append(w2)
        rec.status = "fulfilled"
        rec.witness = g2b.map
        rec.fulfilled_step = step
    discover(steps + 1)
    audit(steps + 1)
    apx = LimitApproximation(spec.name, cap, steps, steps_used, seed,
                             chain, shapes, records)
    level = 0
    for k in range(cap, -1, -1):
        ok, _ = certify_extension_level(apx, k, spec)
        if ok:
            level = k
            break
    apx.certified_level = level
    return apx


def _first_chain_index_containing(apx: LimitApproximation, anchor: tuple[int, ...]) -> int:
    top_needed = max(anchor) + 1 if anchor else 0
    for i, e in enumerate(apx.chain):
        if e.size >= top_needed:
            return i
    return len(apx.chain)


def certify_extension_level(apx: LimitApproximation, k: int,
                            spec: FraisseClassSpec) -> tuple[bool, list[str]]:
    """Certificate that the approximation looks like the limit up to level k.

    Certified means: some chain prefix E_c embeds every member type of size
    <= k, and every recorded extension task anchored inside E_c is fulfilled
    somewhere in the chain.  A finite approximation of an unbounded structure
    always keeps unfulfilled tasks at its growth frontier, so the certificate
    quantifies over settled prefixes rather than over the whole chain.
    """
    if k > apx.cap:
        raise ValueError(f"level {k} exceeds construction cap {apx.cap}")
    if k == 0:
        return True, []
    types = [b for n in range(1, k + 1) for b in enumerate_members(spec, n)]
    final = apx.top
    unrealized = [b for b in types
                  if next(iter_embeddings(b, final), None) is None]
    if unrealized:
        return False, [f"type never realized: {b.key()}" for b in unrealized]
    t_age = 0
    for b in types:
        idx = None
        for i, e in enumerate(apx.chain):
            if next(iter_embeddings(b, e), None) is not None:
                idx = i
                break
        t_age = max(t_age, idx)
    t_settle = len(apx.chain) - 1
    blockers = []
    for rec in apx.records.values():
        shape = apx.shapes[rec.shape_id]
        if shape.b.size > k or rec.status == "fulfilled":
            continue
        first = _first_chain_index_containing(apx, rec.anchor)
        t_settle = min(t_settle, first - 1)
        if first - 1 < t_age:
            blockers.append(
                f"task shape={rec.shape_id} anchor={rec.anchor} unfulfilled "
                f"inside settled prefix")
    if t_age <= t_settle:
        return True, []
    return False, blockers or [f"no settled prefix realizes all {len(types)} types"]


# --- serialization --------------------------------------------------------------

def save_approximation(apx: LimitApproximation, outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    shapes_dir = os.path.join(outdir, "shapes")
    os.makedirs(shapes_dir, exist_ok=True)
    chain_files = []
    for i, e in enumerate(apx.chain):
        fname = f"E_{i:04d}.txt"
        chain_files.append(fname)
        with open(os.path.join(outdir, fname), "w", encoding="utf-8") as fh:
            fh.write(serialize_structure(e))
    for shape in apx.shapes:
        with open(os.path.join(shapes_dir, f"shape_{shape.shape_id:04d}.txt"),
                  "w", encoding="utf-8") as fh:
            subset = ",".join(str(x) for x in shape.subset) or "-"
            fh.write(f"# subset {subset}\n")
            fh.write(serialize_structure(shape.b))
    lines = [
        f"class {apx.class_name}",
        f"cap {apx.cap}",
        f"steps-requested {apx.steps_requested}",
        f"steps-used {apx.steps_used}",
        f"seed {apx.seed if apx.seed is not None else 'none'}",
        f"certified-level {apx.certified_level}",
        f"chain {len(apx.chain)}",
    ]
    lines += [f"structure {i} {fname}" for i, fname in enumerate(chain_files)]
    lines.append(f"shapes {len(apx.shapes)}")
    with open(os.path.join(outdir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    ledger_lines = []
    for (sid, anchor), rec in apx.records.items():
        anchor_s = ",".join(str(x) for x in anchor) or "-"
        witness_s = ",".join(str(x) for x in rec.witness) if rec.witness else "-"
        fulfilled_s = rec.fulfilled_step if rec.fulfilled_step is not None else "-"
        ledger_lines.append(
            f"task shape={sid} anchor={anchor_s} status={rec.status} "
            f"witness={witness_s} discovered={rec.discovered_step} fulfilled={fulfilled_s}")
    with open(os.path.join(outdir, "ledger.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(ledger_lines) + "\n")


def _parse_csv_ints(s: str) -> tuple[int, ...]:
    if s == "-":
        return ()
    return tuple(int(x) for x in s.split(","))


def load_approximation(outdir: str, spec: FraisseClassSpec) -> LimitApproximation:
    with open(os.path.join(outdir, "manifest.txt"), "r", encoding="utf-8") as fh:
        manifest = {}
        chain_files = {}
        for line in fh.read().splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "structure":
                chain_files[int(parts[1])] = parts[2]
            else:
                manifest[parts[0]] = parts[1]
    if manifest["class"] != spec.name:
        raise ValueError(f"manifest class {manifest['class']} != spec {spec.name}")
    chain = []
    for i in range(int(manifest["chain"])):
        with open(os.path.join(outdir, chain_files[i]), "r", encoding="utf-8") as fh:
            chain.append(parse_structure(fh.read()))
    shapes = task_shapes(spec, int(manifest["cap"]))
    records = {}
    with open(os.path.join(outdir, "ledger.txt"), "r", encoding="utf-8") as fh:
        for line in fh.read().splitlines():
            if not line.startswith("task "):
                continue
            fields = dict(part.split("=", 1) for part in line.split()[1:])
            sid = int(fields["shape"])
            anchor = _parse_csv_ints(fields["anchor"])
            rec = TaskRecord(
                sid, anchor, int(fields["discovered"]), fields["status"],
                _parse_csv_ints(fields["witness"]) if fields["witness"] != "-" else None,
                int(fields["fulfilled"]) if fields["fulfilled"] != "-" else None)
            records[(sid, anchor)] = rec
    seed = None if manifest["seed"] == "none" else int(manifest["seed"])
    return LimitApproximation(
        manifest["class"], int(manifest["cap"]), int(manifest["steps-requested"]),
        int(manifest["steps-used"]), seed, chain, shapes, records,
        int(manifest["certified-level"]))
