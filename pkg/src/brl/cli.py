"""``brl`` command line.

Exit codes: 0 property holds / found, 1 does not hold / not found / stage
failure, 2 usage or input error, 3 search budget exhausted.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from . import bounds, drc, family, graphs, search

EXIT_OK, EXIT_NO, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


def emit(report: dict) -> None:
    sys.stdout.write(json.dumps(report, sort_keys=True) + "\n")


def _eps(text: str) -> Fraction:
    try:
        eps = graphs.parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not 0 < eps < 1:
        raise argparse.ArgumentTypeError("eps must lie in (0, 1)")
    return eps


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _jobs(args) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    env = os.environ.get("BRL_JOBS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise UsageError(f"BRL_JOBS must be an integer, got {env!r}") from None


def _effective(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k == "func":
            continue
        out[k] = str(v) if isinstance(v, (Fraction, Path)) else v
    return out


def _load_host(path) -> graphs.ColoredCompleteGraph:
    try:
        return graphs.read_cgr(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


# -- gen --------------------------------------------------------------------

def _dump_graph(g, path: Path, fmt: str) -> None:
    if fmt == "cgr":
        graphs.write_cgr(g, path)
    else:
        rows = [[g.color(u, v) for v in range(u + 1, g.n)] for u in range(g.n)]
        path.write_text(json.dumps({"n": g.n, "r": g.r, "colors": rows}) + "\n", encoding="utf-8")


def cmd_gen(args) -> int:
    if args.kind == "paley":
        g = graphs.paley_graph(args.q)
    elif args.kind == "two-block":
        g = graphs.two_block_coloring(args.n)
    else:
        weights = [graphs.parse_rational(w) for w in args.weights.split(",")] if args.weights else None
        g = graphs.random_coloring(args.n, args.r, weights, args.seed)
    _dump_graph(g, args.out, args.format)
    emit({"command": "gen", "config": _effective(args), "report": graphs.balance_report(g).to_dict()})
    return EXIT_OK


# -- check ------------------------------------------------------------------

def cmd_check_balance(args) -> int:
    g = _load_host(args.host)
    rep = graphs.balance_report(g)
    ok = graphs.is_eps_balanced(g, args.eps)
    emit({"command": "check balance", "config": _effective(args), "report": rep.to_dict(), "balanced": ok})
    return EXIT_OK if ok else EXIT_NO


def cmd_check_pattern(args) -> int:
    g = _load_host(args.host)
    try:
        p = search.parse_pattern_spec(args.pattern)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"bad pattern {args.pattern!r}: {exc}") from None
    base = {"command": "check pattern", "config": _effective(args)}
    try:
        e = search.find_color_consistent(g, p, args.budget)
    except search.BudgetExhausted:
        emit({**base, "verdict": "budget exhausted, undecided"})
        return EXIT_BUDGET
    if e is None:
        emit({**base, "verdict": "exhausted search space, no embedding"})
        return EXIT_NO
    emit({**base, "verdict": "found", "embedding": json.loads(e.to_json())})
    return EXIT_OK


def cmd_check_family_blowup(args) -> int:
    g = _load_host(args.host)
    fam = family.enumerate_family(args.r or g.r)
    base = {"command": "check family-blowup", "config": _effective(args)}
    try:
        found = search.find_family_blowup(g, fam, args.t, args.budget)
    except search.BudgetExhausted:
        emit({**base, "verdict": "budget exhausted, undecided"})
        return EXIT_BUDGET
    if found is None:
        emit({**base, "verdict": "exhausted search space, no embedding"})
        return EXIT_NO
    idx, e = found
    emit({**base, "verdict": "found", "member": idx, "embedding": json.loads(e.to_json())})
    return EXIT_OK


def cmd_check_witness(args) -> int:
    g = _load_host(args.host)
    try:
        data = json.loads(Path(args.witness).read_text(encoding="utf-8"))
        w = drc.MultipartiteWitness.from_dict(data.get("witness", data))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad witness file: {exc}") from None
    ok = drc.verify_witness(g, w, args.r)
    emit({"command": "check witness", "config": _effective(args), "valid": ok})
    return EXIT_OK if ok else EXIT_NO


# -- extract ----------------------------------------------------------------

def cmd_extract(args) -> int:
    g = _load_host(args.host)
    r = args.r or g.r
    config = drc.DEFAULT_CONFIG
    knobs = {k: getattr(args, k) for k in ("w_scale", "beta_scale", "k0_scale", "k0_min", "part_size")
             if getattr(args, k) is not None}
    try:
        config = replace(config, **knobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    base = {"command": "extract", "config": _effective(args), "pipeline": config.to_dict()}
    try:
        w = drc.extract_all_colors_witness(g, r, config, args.seed, args.eps)
    except drc.StageError as exc:
        emit({**base, "verdict": "failed", "stage": exc.stage, "reason": exc.reason})
        return EXIT_NO
    report = {**base, "verdict": "found", "witness": w.to_dict()}
    k = args.k
    if r <= family.MAX_FAMILY_COLORS and min(len(p) for p in w.parts) >= k:
        idx, e, pattern = drc.witness_to_family_element(w, family.enumerate_family(r), k)
        if not search.verify_embedding(g, pattern, e):
            raise drc.IntegrityError("family embedding failed verification")
        report["family"] = {
            "index": idx,
            "member": family.enumerate_family(r).members[idx].to_dict(),
            "blow_up": k,
            "embedding": json.loads(e.to_json()),
        }
    if args.out:
        Path(args.out).write_text(json.dumps(report, sort_keys=True) + "\n", encoding="utf-8")
    emit(report)
    return EXIT_OK


# -- family -----------------------------------------------------------------

def cmd_family(args) -> int:
    if not 1 <= args.r <= family.MAX_FAMILY_COLORS:
        raise UsageError(f"r must be in 1..{family.MAX_FAMILY_COLORS}")
    fam = family.enumerate_family(args.r)
    emit({"command": "family", "r": args.r, "count": len(fam), "members": [F.to_dict() for F in fam.members]})
    return EXIT_OK


# -- hunt -------------------------------------------------------------------

def _n_range(text: str) -> list[int]:
    for sep in ("..", "-"):
        if sep in text:
            lo, hi = (int(x) for x in text.split(sep, 1))
            return list(range(lo, hi + 1))
    return [int(text)]


def _hunt_one(job):
    spec, eps, n, moves, seed = job
    p = search.parse_pattern_spec(spec)
    g = bounds.lower_bound_hunt(p, eps, n, moves=moves, seed=seed)
    return n, (graphs.dumps_cgr(g) if g is not None else None)


def cmd_hunt(args) -> int:
    try:
        p = search.parse_pattern_spec(args.pattern)
        ns = _n_range(args.n)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    ckpt_path = Path(args.checkpoint) if args.checkpoint else None
    done: dict[str, dict] = {}
    if ckpt_path and ckpt_path.exists():
        saved = json.loads(ckpt_path.read_text(encoding="utf-8"))
        if saved.get("key") != [args.pattern, str(args.eps), args.moves, args.seed]:
            raise UsageError("checkpoint belongs to a different run")
        done = saved["results"]
    todo = [n for n in ns if str(n) not in done]
    jobs = [(args.pattern, args.eps, n, args.moves, args.seed) for n in todo]

    def record(n, text):
        row = {"n": n, "found": text is not None}
        if text is not None:
            cert = bounds.write_certificate(graphs.loads_cgr(text), p, args.pattern, args.eps, args.seed,
                                            args.out_dir)
            row["certificate"] = str(cert)
        done[str(n)] = row
        if ckpt_path:
            blob = {"key": [args.pattern, str(args.eps), args.moves, args.seed], "results": done}
            ckpt_path.write_text(json.dumps(blob, sort_keys=True) + "\n", encoding="utf-8")

    workers = _jobs(args)
    if workers == 1 or len(jobs) <= 1:
        for job in jobs:
            record(*_hunt_one(job))
    else:
        with ProcessPoolExecutor(workers) as pool:
            for n, text in pool.map(_hunt_one, jobs):
                record(n, text)
    table = [done[str(n)] for n in ns]
    emit({"command": "hunt", "config": _effective(args), "results": table})
    return EXIT_OK if any(row["found"] for row in table) else EXIT_NO


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_nonneg, default=0)
    common.add_argument("--budget", type=_nonneg, default=search.DEFAULT_BUDGET)
    common.add_argument("--jobs", type=int, default=None, help="workers (default: $BRL_JOBS or 1)")

    parser = argparse.ArgumentParser(prog="brl", description="Balanced Ramsey experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="stage log on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="write a colored complete graph")
    gen.add_argument("kind", choices=["paley", "two-block", "random"])
    gen.add_argument("--q", type=int)
    gen.add_argument("--n", type=int)
    gen.add_argument("--r", type=int, default=2)
    gen.add_argument("--weights")
    gen.add_argument("--format", choices=["cgr", "json"], default="cgr")
    gen.add_argument("-o", "--out", type=Path, default=None)
    gen.set_defaults(func=cmd_gen)

    check = sub.add_parser("check", help="verify a property of a host graph")
    csub = check.add_subparsers(dest="what", required=True)
    bal = csub.add_parser("balance", parents=[common])
    bal.add_argument("--host", required=True)
    bal.add_argument("--eps", type=_eps, required=True)
    bal.set_defaults(func=cmd_check_balance)
    pat = csub.add_parser("pattern", parents=[common])
    pat.add_argument("--host", required=True)
    pat.add_argument("--pattern", required=True, help='"M:l,k" or a pattern JSON file')
    pat.set_defaults(func=cmd_check_pattern)
    fb = csub.add_parser("family-blowup", parents=[common])
    fb.add_argument("--host", required=True)
    fb.add_argument("--r", type=int, default=None)
    fb.add_argument("--t", type=int, default=1)
    fb.set_defaults(func=cmd_check_family_blowup)
    wit = csub.add_parser("witness", parents=[common])
    wit.add_argument("--host", required=True)
    wit.add_argument("--witness", required=True)
    wit.add_argument("--r", type=int, default=None)
    wit.set_defaults(func=cmd_check_witness)

    ext = sub.add_parser("extract", parents=[common], help="all-colors multipartite witness")
    ext.add_argument("--host", required=True)
    ext.add_argument("--r", type=int, default=None)
    ext.add_argument("--eps", type=_eps, default=None)
    ext.add_argument("--k", type=int, default=2, help="blow-up size for the family match")
    ext.add_argument("--w-scale", type=_eps_free, default=None)
    ext.add_argument("--beta-scale", type=_eps_free, default=None)
    ext.add_argument("--k0-scale", type=_eps_free, default=None)
    ext.add_argument("--k0-min", type=int, default=None)
    ext.add_argument("--part-size", type=int, default=None)
    ext.add_argument("-o", "--out", default=None)
    ext.set_defaults(func=cmd_extract)

    fam = sub.add_parser("family", help="list the minimal all-color family")
    fam.add_argument("--r", type=int, required=True)
    fam.set_defaults(func=cmd_family)

    hunt = sub.add_parser("hunt", parents=[common], help="search for pattern-free balanced colorings")
    hunt.add_argument("--pattern", required=True)
    hunt.add_argument("--eps", type=_eps, required=True)
    hunt.add_argument("--n", required=True, help="N or LO..HI")
    hunt.add_argument("--moves", type=int, default=20000)
    hunt.add_argument("--out-dir", default="certificates")
    hunt.add_argument("--checkpoint", default=None)
    hunt.set_defaults(func=cmd_hunt)
    return parser


def _eps_free(text: str) -> Fraction:
    try:
        v = graphs.parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _validate_gen(args):
    if args.kind == "paley" and args.q is None:
        raise UsageError("paley needs --q")
    if args.kind in ("two-block", "random") and (args.n is None or args.n < 1):
        raise UsageError(f"{args.kind} needs --n >= 1")
    if args.out is None:
        raise UsageError("gen needs -o/--out")


def _setup_logging(level: int) -> None:
    # rebind on every call so repeated in-process runs write to the current stderr
    logger = logging.getLogger("brl")
    for h in list(logger.handlers):
        logger.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(name)s %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    _setup_logging(logging.INFO if (args.verbose or args.command == "extract") else logging.WARNING)
    try:
        if args.command == "gen":
            _validate_gen(args)
        return args.func(args)
    except (UsageError, graphs.GraphError, ValueError) as exc:
        sys.stderr.write(f"brl: error: {exc}\n")
        return EXIT_USAGE
    except search.BudgetExhausted as exc:
        sys.stderr.write(f"brl: {exc}\n")
        return EXIT_BUDGET
    except Exception as exc:  # exit-code contract is total
        sys.stderr.write(f"brl: failed: {type(exc).__name__}: {exc}\n")
        return EXIT_NO


if __name__ == "__main__":
    sys.exit(main())
