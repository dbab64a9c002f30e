"""Named verification suites over the class catalog.

Each suite runs a fixed list of checks and returns a report with one record
per check.  Reports are deterministic for a fixed seed and bound set; the
serialized form omits timings so that two runs are byte-identical.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field, asdict, replace
from typing import Callable, Optional

from . import catalog, fraisse, groups, structures
from .catalog import resolve_class
from .fraisse import build_limit, certify_extension_level, check_amalgamation, \
    check_hereditary, check_jep, enumerate_members, task_shapes
from .groups import (
    element_orders,
    group_from_name,
    h_embed,
    has_element_of_order,
    identify,
    invariant_factors,
    is_free_action,
    acts_by_automorphisms,
    perm_order,
    symdiff,
)
from .structures import (
    FinStructure,
    automorphisms,
    extend_embedding,
    iter_embeddings,
    relabel,
)


@dataclass
class CheckRecord:
    check_id: str
    status: str                  # pass | fail | skip
    witness: str = ""
    elapsed: float = 0.0


@dataclass
class SuiteReport:
    suite: str
    bounds: dict
    records: list[CheckRecord] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        out = {"pass": 0, "fail": 0, "skip": 0}
        for r in self.records:
            out[r.status] += 1
        return out

    @property
    def passed(self) -> bool:
        return self.counts["fail"] == 0

    def machine_lines(self) -> list[str]:
        lines = [f"suite {self.suite}"]
        lines += [f"bound {k}={v}" for k, v in sorted(self.bounds.items())]
        for r in self.records:
            witness = r.witness if r.witness else "-"
            lines.append(f"check {r.check_id} {r.status} {witness}")
        c = self.counts
        lines.append(f"summary pass={c['pass']} fail={c['fail']} skip={c['skip']}")
        return lines

    def render_text(self, with_timing: bool = False) -> str:
        lines = [f"suite {self.suite}  "
                 + " ".join(f"{k}={v}" for k, v in sorted(self.bounds.items()))]
        for r in self.records:
            tail = f"  [{r.elapsed:.2f}s]" if with_timing else ""
            note = f"  {r.witness}" if r.witness else ""
            lines.append(f"  {r.status:<5} {r.check_id}{note}{tail}")
        c = self.counts
        lines.append(f"  total: {c['pass']} pass, {c['fail']} fail, {c['skip']} skip")
        return "\n".join(lines)


Check = tuple[str, Callable[[], tuple[str, str]]]


def _run(suite: str, bounds: dict, checks: list[Check]) -> SuiteReport:
    report = SuiteReport(suite, bounds)
    for cid, fn in checks:
        t0 = time.perf_counter()
        try:
            status, witness = fn()
        except Exception as exc:  # checks must not abort the whole suite
            status, witness = "fail", f"exception {type(exc).__name__}: {exc}"
        report.records.append(CheckRecord(cid, status, witness,
                                          time.perf_counter() - t0))
    return report


def _law_checks(name: str, max_n: int) -> list[Check]:
    spec = resolve_class(name)

    def mk(fn):
        def run():
            rep = fn(spec, max_n)
            if rep.passed:
                return "pass", ""
            return "fail", rep.failures[0]
        return run

    return [
        (f"{name}-hereditary-{max_n}", mk(check_hereditary)),
        (f"{name}-jep-{max_n}", mk(check_jep)),
        (f"{name}-amalgamation-{max_n}", mk(check_amalgamation)),
    ]


def audit_extension_tasks(spec, m: FinStructure, k: int) -> tuple[bool, list[str]]:
    """Anchor-level extension audit of a single structure.

    Demands a witness for every task of size <= k at every anchor; suitable
    for classes whose approximations saturate at the given level.
    """
    missing = []
    for shape in task_shapes(spec, k):
        for e in iter_embeddings(shape.a, m):
            if extend_embedding(shape.b, m, shape.pin_map(e.map)) is None:
                missing.append(f"shape={shape.shape_id} anchor={e.map}")
    return not missing, missing


# --- diversification ---------------------------------------------------------------

@dataclass(frozen=True)
class DiversificationBounds:
    law_size: int = 3
    orbit_size: int = 4
    group_names: tuple[str, ...] = ("Z2", "Z3", "Z4", "S3")
    limit_steps: int = 80
    limit_cap: int = 2
    seed: int = 0


def suite_diversification(bounds: DiversificationBounds = DiversificationBounds()) -> SuiteReport:
    lo = resolve_class("lo")
    div_lo = resolve_class("div:lo")
    checks: list[Check] = []
    checks += _law_checks("div:lo", bounds.law_size)
    for gname in bounds.group_names:
        grp = group_from_name(gname)
        law_n = max(bounds.law_size, grp.order)
        checks += _law_checks(f"divg:lo:{gname}", law_n)

    def orbit_sweep(gname):
        def run():
            grp = group_from_name(gname)
            tried = 0
            for n in range(1, bounds.orbit_size + 1):
                for x in enumerate_members(div_lo, n):
                    xg, emb, act = catalog.orbit_completion(lo, x, grp)
                    tried += 1
                    if xg.size != grp.order * x.size:
                        return "fail", f"size {xg.size} != {grp.order}*{x.size} for {x.key()}"
                    free, wit = is_free_action(act)
                    if not free:
                        return "fail", f"action not free at {wit} for {x.key()}"
                    reduct = catalog.forget_action(xg, lo.signature)
                    ok, wit = acts_by_automorphisms(act, reduct)
                    if not ok:
                        return "fail", f"action breaks relation {wit} for {x.key()}"
                    if not div_lo.member(reduct):
                        return "fail", f"completion reduct not a member for {x.key()}"
                    if structures.validate_embedding(emb):
                        return "fail", f"embedding invalid for {x.key()}"
                return "pass", ""
            return "pass", f"{tried} completions"
        return run

    for gname in bounds.group_names:
        checks.append((f"orbit-completion-{gname}", orbit_sweep(gname)))

    def reduct_soundness():
        for gname in bounds.group_names:
            grp = group_from_name(gname)
            spec = resolve_class(f"divg:lo:{gname}")
            top = min(8, 2 * grp.order)
            for n in range(0, top + 1):
                for m in enumerate_members(spec, n):
                    if not div_lo.member(catalog.forget_action(m, lo.signature)):
                        return "fail", f"reduct of {m.key()} not a member"
        return "pass", ""

    checks.append(("reduct-soundness", reduct_soundness))

    def rejects_non_disjoint_base():
        broken = fraisse.FraisseClassSpec(
            "lo-no-disjoint", lo.signature, lo.member, lo.amalgamate,
            lo.generic_extend, lo.enumerate_candidates, claims_disjoint=False,
            enumerate_labeled=lo.enumerate_labeled)
        try:
            catalog.diversify(broken)
        except ValueError:
            return "pass", ""
        return "fail", "diversification accepted a base without disjoint amalgamation"

    checks.append(("rejects-non-disjoint-base", rejects_non_disjoint_base))

    def certificate_as_plain_diversification():
        spec = resolve_class("divg:lo:Z2")
        apx = build_limit(spec, bounds.limit_steps, bounds.limit_cap, seed=bounds.seed)
        ok, missing = certify_extension_level(apx, bounds.limit_cap, spec)
        if not ok:
            return "fail", f"action-carrying chain not certified: {missing[0]}"
        reduct = catalog.forget_action(apx.top, lo.signature)
        ok, missing = audit_extension_tasks(div_lo, reduct, bounds.limit_cap)
        if not ok:
            return "fail", f"reduct misses {len(missing)} tasks: {missing[0]}"
        return "pass", ""

    checks.append(("action-chain-serves-plain-class", certificate_as_plain_diversification))
    return _run("diversification", asdict(bounds), checks)


# --- consumer-product -----------------------------------------------------------------

@dataclass(frozen=True)
class ConsumerProductBounds:
    max_products: int = 4
    max_consumers: int = 3
    limit_steps: int = 200
    limit_cap: int = 2
    seed: int = 0


def _cp_models(max_products: int, max_consumers: int):
    div_lo = resolve_class("div:lo")
    for n in range(0, max_products + max_consumers + 1):
        for m in enumerate_members(div_lo, n):
            p = len(catalog.products_of(m))
            c = len(catalog.consumers_of(m))
            if p <= max_products and c <= max_consumers:
                yield m


def suite_consumer_product(bounds: ConsumerProductBounds = ConsumerProductBounds()) -> SuiteReport:
    checks: list[Check] = []
    skipped: list[str] = []

    def stabilizers_and_restriction():
        examined = 0
        for m in _cp_models(bounds.max_products, bounds.max_consumers):
            distinct, wit = catalog.cp_preference_distinct(m)
            if not distinct:
                skipped.append(f"{m.key()} consumers {wit} share preferences")
                continue
            examined += 1
            prods = catalog.products_of(m)
            cons = catalog.consumers_of(m)
            auts = automorphisms(m)
            seen_products = {}
            for h in auts.elements:
                restriction = tuple(h[p] for p in prods)
                if restriction in seen_products:
                    return "fail", (f"restriction to products not injective on "
                                    f"{m.key()}: {h} vs {seen_products[restriction]}")
                seen_products[restriction] = h
                for c in cons:
                    if h[c] == c and any(h[v] != v for v in range(m.size)):
                        return "fail", f"nontrivial stabilizer of consumer {c} on {m.key()}: {h}"
        return "pass", f"{examined} preference-distinct models"

    checks.append(("restriction-injective-stabilizers-trivial", stabilizers_and_restriction))

    def no_consumer_fixing_involution_extends():
        for m in _cp_models(bounds.max_products, bounds.max_consumers):
            distinct, _ = catalog.cp_preference_distinct(m)
            cons = catalog.consumers_of(m)
            if not distinct or len(cons) < 2:
                continue
            auts = automorphisms(m)
            for h in auts.elements:
                if perm_order(h) == 2 and any(h[c] == c for c in cons) \
                        and any(h[c] != c for c in cons):
                    return "fail", f"consumer-fixing involution {h} on {m.key()}"
        return "pass", ""

    checks.append(("no-consumer-fixing-involution", no_consumer_fixing_involution_extends))

    def skipped_models():
        if skipped:
            return "skip", f"{len(skipped)} models not preference-distinct"
        return "skip", "none"

    checks.append(("models-outside-hypothesis", skipped_models))

    def limit_is_preference_distinct():
        spec = resolve_class("div:lo")
        apx = build_limit(spec, bounds.limit_steps, bounds.limit_cap, seed=bounds.seed)
        ok, missing = certify_extension_level(apx, bounds.limit_cap, spec)
        if not ok:
            return "fail", f"not certified at level {bounds.limit_cap}: {missing[0]}"
        distinct, wit = catalog.cp_preference_distinct(apx.top)
        if not distinct:
            return "fail", f"consumers {wit} of the approximation share preferences"
        if len(catalog.consumers_of(apx.top)) < 2:
            return "fail", "approximation has fewer than two consumers"
        return "pass", ""

    checks.append(("approximation-preference-distinct", limit_is_preference_distinct))
    return _run("consumer-product", asdict(bounds), checks)


# --- mixed sums ------------------------------------------------------------------------

@dataclass(frozen=True)
class MixedSumBounds:
    law_size: int = 3
    witness_size: int = 5
    symmetric_max: int = 5
    rigidity_max: int = 6
    limit_steps: int = 200
    limit_cap: int = 2
    seed: int = 0


def suite_mixed_sum(bounds: MixedSumBounds = MixedSumBounds()) -> SuiteReport:
    mix = resolve_class("mix:sets:lo")
    checks: list[Check] = []
    checks += _law_checks("mix:sets:lo", bounds.law_size)

    def witness_sweep():
        qualifying = 0
        for n in range(1, bounds.witness_size + 1):
            for m in enumerate_members(mix, n):
                rs = catalog.unary_set(m, "R")
                auts = automorphisms(m)
                for h in auts.elements:
                    for b0 in rs:
                        if h[b0] == b0:
                            continue
                        qualifying += 1
                        m2, a0 = catalog.distinguishing_witness(mix, m, h, b0)
                        if not mix.member(m2):
                            return "fail", f"witness extension not a member for {m.key()}"
                        for g in automorphisms(m2).elements:
                            if tuple(g[:m.size]) == h and g[a0] == a0:
                                return "fail", (f"extension of {h} fixes the new point "
                                                f"on {m.key()} b0={b0}")
        return "pass", f"{qualifying} qualifying pairs"

    checks.append(("distinguishing-witness", witness_sweep))

    def bipartite_separation_on_limit():
        apx = build_limit(mix, bounds.limit_steps, bounds.limit_cap, seed=bounds.seed)
        ok, missing = certify_extension_level(apx, bounds.limit_cap, mix)
        if not ok:
            return "fail", f"not certified at level {bounds.limit_cap}: {missing[0]}"
        top = apx.top
        ls = catalog.unary_set(top, "L")
        rs = catalog.unary_set(top, "R")
        adj = top.relations["adj"]
        if not ls or not rs:
            return "fail", "approximation misses one side entirely"
        for x in range(top.size):
            side, other = (rs, ls) if x in set(rs) else (ls, rs)
            if not any((x, o) in adj for o in other):
                return "fail", f"element {x} has no neighbor across the sides"
            if not any((x, o) not in adj for o in other):
                return "fail", f"element {x} is adjacent to the whole other side"
        return "pass", ""

    checks.append(("one-point-separation-on-limit", bipartite_separation_on_limit))

    def finite_chains_rigid():
        for n in range(bounds.rigidity_max + 1):
            if automorphisms(catalog.chain_structure(n)).order != 1:
                return "fail", f"chain of size {n} has a nontrivial automorphism"
        return "pass", ""

    checks.append(("finite-chains-rigid", finite_chains_rigid))

    def symmetric_groups_appear():
        for n in range(1, bounds.symmetric_max + 1):
            m = FinStructure(mix.signature, n, {"L": {(i,) for i in range(n)}})
            if not mix.member(m):
                return "fail", f"edge-free left member of size {n} rejected"
            order = automorphisms(m).order
            expected = 1
            for i in range(2, n + 1):
                expected *= i
            if order != expected:
                return "fail", f"size {n}: automorphism order {order} != {expected}"
        return "pass", ""

    checks.append(("all-finite-symmetric-groups", symmetric_groups_appear))
    return _run("mixed-sum", asdict(bounds), checks)


# --- rotating machines -------------------------------------------------------------------

@dataclass(frozen=True)
class RotatingMachineBounds:
    law_size: int = 3
    wheel_max: int = 5
    multiplier_max: int = 4
    abelian_size: int = 6
    edge_free_sets: tuple[tuple[int, ...], ...] = ((5,), (2, 3), (2, 5), (3, 4), (2, 3, 4))
    seed: int = 0


def edge_free_machine(sizes: tuple[int, ...]) -> FinStructure:
    """Stacked wheels of the given sizes, no edges."""
    n = sum(sizes)
    succ = []
    offsets = []
    off = 0
    for sz in sizes:
        offsets.append(off)
        succ.extend(off + (t + 1) % sz for t in range(sz))
        off += sz
    lt = set()
    for i in range(len(sizes)):
        for j in range(i + 1, len(sizes)):
            lt |= {(offsets[i] + a, offsets[j] + b)
                   for a in range(sizes[i]) for b in range(sizes[j])}
    return FinStructure(catalog.MACHINE_SIG, n, {"lt": lt}, {"succ": tuple(succ)})


def suite_rotating_machines(bounds: RotatingMachineBounds = RotatingMachineBounds()) -> SuiteReport:
    rot = resolve_class("rot")
    checks: list[Check] = []
    checks += _law_checks("rot", bounds.law_size)

    def gadget_grid():
        for n in range(2, bounds.wheel_max + 1):
            for k in range(2, bounds.multiplier_max + 1):
                m = catalog.gadget(n, k)
                if not rot.member(m):
                    return "fail", f"gadget({n},{k}) is not a machine"
                gp = automorphisms(m, cap=m.size)
                rec = identify(gp)
                if not (rec.is_cyclic and rec.order == n * k):
                    return "fail", f"gadget({n},{k}): {rec.describe()}"
                for h in gp.elements:
                    if any(h[i] != i for i in range(n)) and k % perm_order(h) == 0:
                        return "fail", (f"gadget({n},{k}): element of order {perm_order(h)} "
                                        f"dividing {k} moves the small wheel: {h}")
        return "pass", ""

    checks.append(("gadget-cyclic-no-small-order", gadget_grid))

    def edge_free_products():
        for sizes in bounds.edge_free_sets:
            m = edge_free_machine(sizes)
            if not rot.member(m):
                return "fail", f"edge-free machine {sizes} rejected"
            rec = identify(automorphisms(m, cap=m.size))
            expected_orders = sorted(
                perm_order(p) for p in automorphisms(m, cap=m.size).elements)
            expected = invariant_factors(expected_orders)
            want = 1
            for sz in sizes:
                want *= sz
            if rec.order != want or not rec.is_abelian:
                return "fail", f"wheels {sizes}: {rec.describe()}"
            merged = _product_invariant_factors(sizes)
            if rec.invariant_factors != merged:
                return "fail", (f"wheels {sizes}: factors {rec.invariant_factors} "
                                f"!= expected {merged}")
        return "pass", ""

    checks.append(("edge-free-cyclic-products", edge_free_products))

    def abelian_sweep():
        count = 0
        for n in range(1, bounds.abelian_size + 1):
            for m in rot.enumerate_candidates(n):
                count += 1
                gp = automorphisms(m, cap=bounds.abelian_size)
                if not gp.is_abelian():
                    return "fail", f"non-abelian automorphism group on {m.key()}"
        return "pass", f"{count} machines"

    checks.append((f"all-automorphism-groups-abelian-{bounds.abelian_size}", abelian_sweep))
    return _run("rotating-machines", asdict(bounds), checks)


def _product_invariant_factors(sizes: tuple[int, ...]) -> tuple[int, ...]:
    """Invariant factors of a direct product of cyclic groups, independently of
    any automorphism computation: align prime-power exponents largest-first."""
    primes = set()
    for s in sizes:
        d, s2 = 2, s
        while d * d <= s2:
            if s2 % d == 0:
                primes.add(d)
                while s2 % d == 0:
                    s2 //= d
            d += 1
        if s2 > 1:
            primes.add(s2)
    columns: dict[int, list[int]] = {}
    for p in primes:
        exps = []
        for s in sizes:
            e = 0
            while s % p == 0:
                e += 1
                s //= p
            if e:
                exps.append(e)
        exps.sort(reverse=True)
        columns[p] = exps
    depth = max((len(v) for v in columns.values()), default=0)
    factors = []
    for i in range(depth):
        d = 1
        for p, exps in columns.items():
            if i < len(exps):
                d *= p ** exps[i]
        factors.append(d)
    return tuple(sorted(factors))


# --- group gadgets ------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupsBounds:
    support_max: int = 10
    law_samples: int = 100
    seed: int = 0


def suite_groups(bounds: GroupsBounds = GroupsBounds()) -> SuiteReport:
    checks: list[Check] = []

    def subsets(rng, k):
        universe = list(range(1, bounds.support_max + 1))
        return frozenset(x for x in universe if rng.random() < 0.5)

    def flip_homomorphism():
        rng = random.Random(bounds.seed)
        for _ in range(bounds.law_samples):
            a, b = subsets(rng, 0), subsets(rng, 0)
            if h_embed(a).compose(h_embed(b)) != h_embed(symdiff(a, b)):
                return "fail", f"composition law fails for {sorted(a)} and {sorted(b)}"
        return "pass", f"{bounds.law_samples} sampled pairs"

    checks.append(("sign-flip-composition-law", flip_homomorphism))

    def flip_kernel():
        limit = min(bounds.support_max, 10)
        universe = list(range(1, limit + 1))
        for r in range(len(universe) + 1):
            for combo in itertools.combinations(universe, r):
                if h_embed(combo).is_identity() != (not combo):
                    return "fail", f"kernel law fails for {combo}"
        return "pass", f"all subsets of 1..{limit}"

    checks.append(("sign-flip-trivial-kernel", flip_kernel))

    def symmetric_difference_laws():
        rng = random.Random(bounds.seed + 1)
        for _ in range(bounds.law_samples):
            a, b, c = (subsets(rng, 0) for _ in range(3))
            if symdiff(symdiff(a, b), c) != symdiff(a, symdiff(b, c)):
                return "fail", f"associativity fails for {a} {b} {c}"
            if symdiff(a, a):
                return "fail", f"self-inverse fails for {a}"
            if symdiff(a, frozenset()) != a:
                return "fail", f"unit fails for {a}"
        return "pass", ""

    checks.append(("symmetric-difference-group-laws", symmetric_difference_laws))

    def involutions_in_catalog_groups():
        two_points = automorphisms(FinStructure(catalog.SETS_SIG, 2))
        if has_element_of_order(two_points, 2) is None:
            return "fail", "no involution in the two-point symmetric group"
        wheel6 = automorphisms(catalog.wheel_structure(6))
        if has_element_of_order(wheel6, 2) is None:
            return "fail", "no involution in the six-wheel rotation group"
        chain3 = automorphisms(catalog.chain_structure(3))
        if has_element_of_order(chain3, 2) is not None:
            return "fail", "rigid chain reports an involution"
        return "pass", ""

    checks.append(("order-two-detection", involutions_in_catalog_groups))
    return _run("groups", asdict(bounds), checks)


# --- registry -----------------------------------------------------------------------------

SUITES: dict[str, tuple[Callable, Callable]] = {
    "diversification": (suite_diversification, DiversificationBounds),
    "consumer-product": (suite_consumer_product, ConsumerProductBounds),
    "mixed-sum": (suite_mixed_sum, MixedSumBounds),
    "rotating-machines": (suite_rotating_machines, RotatingMachineBounds),
    "groups": (suite_groups, GroupsBounds),
}


class UnknownSuiteError(ValueError):
    pass


def run_suite(name: str, **overrides) -> SuiteReport:
    if name not in SUITES:
        raise UnknownSuiteError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    fn, bounds_cls = SUITES[name]
    defaults = bounds_cls()
    valid = {f for f in defaults.__dataclass_fields__}
    bad = set(overrides) - valid
    if bad:
        raise ValueError(f"unknown bounds for {name}: {sorted(bad)}")
    return fn(replace(defaults, **overrides))
