"""Command-line frontend.

Commands: aut, iso, embed, amalg, enum, limit, certify, gadget,
orbit-complete, verify.  Exit codes: 0 success, 1 check failures, 2
usage/parse errors, 3 internal construction failures.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import catalog, fraisse, verify
from .catalog import UnknownClassError, resolve_class
from .fraisse import (
    AmalgamationError,
    build_limit,
    certify_extension_level,
    enumerate_members,
    load_approximation,
    save_approximation,
)
from .groups import group_from_name, identify
from .structures import (
    Embedding,
    StructureParseError,
    all_embeddings,
    automorphisms,
    isomorphic,
    load_structure,
    save_structure,
    serialize_structure,
    validate,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_CONSTRUCTION = 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _load(path):
    try:
        return load_structure(path)
    except FileNotFoundError:
        raise CliError(f"no such file: {path}", EXIT_USAGE)
    except StructureParseError as exc:
        raise CliError(f"parse error in {path}: {exc}", EXIT_USAGE)


def _resolve(name):
    try:
        return resolve_class(name)
    except UnknownClassError as exc:
        raise CliError(str(exc), EXIT_USAGE)


def _write_or_print(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_aut(args) -> int:
    m = _load(args.path)
    problems = validate(m)
    if problems:
        raise CliError(f"invalid structure: {problems[0]}", EXIT_USAGE)
    gp = automorphisms(m, cap=args.cap)
    rec = identify(gp)
    print(rec.describe())
    print(f"element-orders {' '.join(str(o) for o in rec.element_orders)}")
    if rec.invariant_factors is not None:
        print(f"invariant-factors {' '.join(str(d) for d in rec.invariant_factors) or '-'}")
    return EXIT_OK


def cmd_iso(args) -> int:
    a, b = _load(args.a), _load(args.b)
    e = isomorphic(a, b)
    if e is None:
        print("not isomorphic")
        return EXIT_CHECK_FAILED
    print("isomorphic " + " ".join(f"{i}->{v}" for i, v in enumerate(e.map)))
    return EXIT_OK


def cmd_embed(args) -> int:
    a, b = _load(args.a), _load(args.b)
    embs = all_embeddings(a, b)
    print(f"embeddings {len(embs)}")
    for e in embs:
        print(" ".join(f"{i}->{v}" for i, v in enumerate(e.map)))
    return EXIT_OK if embs else EXIT_CHECK_FAILED


def _parse_map(text, dom, cod):
    try:
        pairs = [tuple(int(v) for v in part.split(":")) for part in text.split(",") if part]
    except ValueError:
        raise CliError(f"bad embedding map {text!r} (expect i:j,i:j,...)", EXIT_USAGE)
    mapping = dict(pairs)
    if sorted(mapping) != list(range(dom.size)):
        raise CliError(f"map {text!r} does not cover the domain", EXIT_USAGE)
    return Embedding(dom, cod, tuple(mapping[i] for i in range(dom.size)))


def cmd_amalg(args) -> int:
    spec = _resolve(args.klass)
    z, x, y = _load(args.z), _load(args.x), _load(args.y)
    if args.fx:
        f = _parse_map(args.fx, z, x)
    else:
        embs = all_embeddings(z, x)
        if not embs:
            raise CliError("no embedding of the base into the left side", EXIT_USAGE)
        f = embs[0]
    if args.gy:
        g = _parse_map(args.gy, z, y)
    else:
        embs = all_embeddings(z, y)
        if not embs:
            raise CliError("no embedding of the base into the right side", EXIT_USAGE)
        g = embs[0]
    try:
        w, f2, g2 = spec.amalgamate(z, f, g)
    except Exception as exc:
        raise CliError(f"amalgamation failed: {exc}", EXIT_CONSTRUCTION)
    if not spec.member(w):
        raise CliError("amalgamation produced a non-member", EXIT_CONSTRUCTION)
    _write_or_print(serialize_structure(w), args.out)
    print(f"left {' '.join(str(v) for v in f2.map)}", file=sys.stderr)
    print(f"right {' '.join(str(v) for v in g2.map)}", file=sys.stderr)
    return EXIT_OK


def cmd_enum(args) -> int:
    spec = _resolve(args.klass)
    members = enumerate_members(spec, args.n, cap=max(args.n, 8))
    print(f"members {len(members)}")
    for i, m in enumerate(members):
        print(f"# member {i}")
        sys.stdout.write(serialize_structure(m))
    return EXIT_OK


def cmd_limit(args) -> int:
    spec = _resolve(args.klass)
    try:
        apx = build_limit(spec, args.steps, args.cap, seed=args.seed)
    except AmalgamationError as exc:
        raise CliError(str(exc), EXIT_CONSTRUCTION)
    if args.outdir:
        save_approximation(apx, args.outdir)
    print(f"chain-length {len(apx.chain)}")
    print(f"top-size {apx.top.size}")
    print(f"certified-level {apx.certified_level}")
    return EXIT_OK


def cmd_certify(args) -> int:
    spec_name = None
    manifest = os.path.join(args.outdir, "manifest.txt")
    try:
        with open(manifest, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("class "):
                    spec_name = line.split(None, 1)[1].strip()
                    break
    except FileNotFoundError:
        raise CliError(f"no manifest in {args.outdir}", EXIT_USAGE)
    if spec_name is None:
        raise CliError("manifest has no class line", EXIT_USAGE)
    spec = _resolve(spec_name)
    apx = load_approximation(args.outdir, spec)
    ok, missing = certify_extension_level(apx, args.level, spec)
    print(f"certified {'yes' if ok else 'no'}")
    for item in missing:
        print(f"missing {item}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_gadget(args) -> int:
    if args.n < 1 or args.k < 1:
        raise CliError("wheel size and multiplier must be >= 1", EXIT_USAGE)
    m = catalog.gadget(args.n, args.k)
    _write_or_print(serialize_structure(m), args.out)
    return EXIT_OK


def cmd_orbit_complete(args) -> int:
    base = _resolve(args.base)
    try:
        grp = group_from_name(args.group)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE)
    x = _load(args.path)
    try:
        xg, emb, act = catalog.orbit_completion(base, x, grp)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONSTRUCTION)
    _write_or_print(serialize_structure(xg), args.out)
    print(f"size {xg.size}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    overrides = {}
    for item in args.bound or []:
        if "=" not in item:
            raise CliError(f"bounds look like name=value, got {item!r}", EXIT_USAGE)
        key, value = item.split("=", 1)
        overrides[key.replace("-", "_")] = int(value)
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        report = verify.run_suite(args.suite, **overrides)
    except verify.UnknownSuiteError as exc:
        raise CliError(str(exc), EXIT_USAGE)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(report.machine_lines()) + "\n")
    print(report.render_text(with_timing=args.timing))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fraisselab",
        description="workbench for finite homogeneous structures")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aut", help="identify the automorphism group of a structure file")
    p.add_argument("path")
    p.add_argument("--cap", type=int, default=25, help="size cap for the search")
    p.set_defaults(fn=cmd_aut)

    p = sub.add_parser("iso", help="test two structure files for isomorphism")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(fn=cmd_iso)

    p = sub.add_parser("embed", help="list all embeddings of one structure into another")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("amalg", help="amalgamate two extensions of a common base")
    p.add_argument("klass")
    p.add_argument("z")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--fx", help="embedding of z into x, as i:j,i:j,...")
    p.add_argument("--gy", help="embedding of z into y")
    p.add_argument("-o", "--out")
    p.set_defaults(fn=cmd_amalg)

    p = sub.add_parser("enum", help="enumerate class members of a given size up to isomorphism")
    p.add_argument("klass")
    p.add_argument("n", type=int)
    p.set_defaults(fn=cmd_enum)

    p = sub.add_parser("limit", help="grow a limit approximation by fulfilling extension tasks")
    p.add_argument("klass")
    p.add_argument("steps", type=int)
    p.add_argument("cap", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--outdir")
    p.set_defaults(fn=cmd_limit)

    p = sub.add_parser("certify", help="re-audit a saved approximation at a level")
    p.add_argument("outdir")
    p.add_argument("level", type=int)
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("gadget", help="write the two-wheel machine with mod-n edges")
    p.add_argument("n", type=int)
    p.add_argument("k", type=int)
    p.add_argument("-o", "--out")
    p.set_defaults(fn=cmd_gadget)

    p = sub.add_parser("orbit-complete", help="close a diversified structure under a free action")
    p.add_argument("base", help="base class name, e.g. lo")
    p.add_argument("path")
    p.add_argument("group", help="group name, e.g. Z2, S3, cyclic:4")
    p.add_argument("-o", "--out")
    p.set_defaults(fn=cmd_orbit_complete)

    p = sub.add_parser("verify", help="run a named verification suite")
    p.add_argument("suite")
    p.add_argument("--bound", action="append", metavar="NAME=VALUE",
                   help="override a suite bound (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--timing", action="store_true", help="show per-check timings")
    p.add_argument("-o", "--out", help="write the machine-readable report here")
    p.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
