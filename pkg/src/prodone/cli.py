"""Command-line surface: every claim the tool emits is a re-checkable certificate.

Exit codes: 0 = claim verified, 1 = claim falsified / counterexample found,
2 = usage or resource error.  Diagnostics go to stderr; stdout carries one
JSON document per invocation.  PRODONE_THREADS overrides the worker count.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import __version__
from .certificates import (
    check_certificate,
    certificate_to_json,
    make_certificate,
    read_certificate,
    write_certificate,
)
from .enumeration import (
    Stratum,
    StratumSpace,
    atom_search,
    default_workers,
    make_shards,
    run_sharded,
)
from .group import GroupParamError, make_group
from .invariants import (
    build_rho_witness,
    elasticity_calculator,
    large_davenport,
    small_davenport,
    uk_bounded,
    verify_inverse_theorem,
)
from .oracles import LEMMA_IDS, run_lemma
from .sequences import ResourceCapError, Sequence, classify, is_atom, pi_set, subproducts_set


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")


def _emit_certificate(cert, path: str | None) -> None:
    sys.stdout.write(certificate_to_json(cert))
    sys.stdout.write("\n")
    if path:
        write_certificate(cert, path)


def _add_group_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--group", required=True, help="group descriptor 'p,q,s'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prodone",
        description="exact product-one sequence combinatorics over C_q : C_p",
    )
    parser.add_argument("--version", action="version", version=f"prodone {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_group = sub.add_parser("group", help="validate a group and print its structure census")
    _add_group_arg(p_group)

    p_seq = sub.add_parser("seq", help="sequence-level queries")
    seq_sub = p_seq.add_subparsers(dest="seq_command", required=True)
    p_check = seq_sub.add_parser("check", help="classify a sequence and emit an atom certificate")
    _add_group_arg(p_check)
    p_check.add_argument("--seq", required=True, help="sequence literal, e.g. '(0,1)^12,(1,0),(2,5)'")
    p_check.add_argument("--emit-cert", metavar="FILE")
    p_pi = seq_sub.add_parser("pi", help="print product and subproduct sets")
    _add_group_arg(p_pi)
    p_pi.add_argument("--seq", required=True)

    p_search = sub.add_parser("search", help="exhaustive atom search over one stratum")
    _add_group_arg(p_search)
    p_search.add_argument("--length", type=int, required=True)
    p_search.add_argument("--k", type=int, default=None,
                          help="terms outside the commutator subgroup (omit for all)")
    p_search.add_argument("--mode", choices=("raw", "up_to_aut"), default="raw")
    p_search.add_argument("--shards", type=int, default=1)
    p_search.add_argument("--shard-index", type=int, default=None)
    p_search.add_argument("--checkpoint", metavar="FILE")
    p_search.add_argument("--seed", type=int, default=0)
    p_search.add_argument("--heuristic-tries", type=int, default=64)
    p_search.add_argument("--max-candidates", type=int, default=None)
    p_search.add_argument("--no-tau-filter", action="store_true",
                          help="disable the t-degree residue filter")
    p_search.add_argument("--workers", type=int, default=None)
    p_search.add_argument("--emit-cert", metavar="FILE")

    p_dav = sub.add_parser("davenport", help="small/large Davenport constant runs")
    _add_group_arg(p_dav)
    p_dav.add_argument("--which", choices=("small", "large"), required=True)
    p_dav.add_argument("--mode", choices=("lower_witness", "exhaustive_at_2q", "exhaustive_full"),
                       default="lower_witness")
    p_dav.add_argument("--seed", type=int, default=0)
    p_dav.add_argument("--workers", type=int, default=None)
    p_dav.add_argument("--emit-cert", metavar="FILE")

    p_inv = sub.add_parser("verify-inverse", help="match all maximal atoms against the extremal set")
    _add_group_arg(p_inv)
    p_inv.add_argument("--scope", choices=("k_le_2", "full"), default="k_le_2")
    p_inv.add_argument("--seed", type=int, default=0)
    p_inv.add_argument("--workers", type=int, default=None)
    p_inv.add_argument("--shards", type=int, default=None)
    p_inv.add_argument("--checkpoint-dir", metavar="DIR")
    p_inv.add_argument("--emit-cert", metavar="FILE")

    p_ela = sub.add_parser("elasticity", help="elasticity table and refactorization witnesses")
    _add_group_arg(p_ela)
    p_ela.add_argument("--k", type=int, required=True)
    p_ela.add_argument("--uk", action="store_true", help="also run the bounded union-of-lengths search")
    p_ela.add_argument("--uk-max-products", type=int, default=64)
    p_ela.add_argument("--seed", type=int, default=0)
    p_ela.add_argument("--emit-cert", metavar="FILE")

    p_lem = sub.add_parser("lemmas", help="randomized/exhaustive trial suites")
    _add_group_arg(p_lem)
    p_lem.add_argument("--lemma", required=True, choices=LEMMA_IDS)
    p_lem.add_argument("--trials", type=int, default=1000)
    p_lem.add_argument("--seed", type=int, default=0)
    p_lem.add_argument("--n", type=int, default=None, help="cyclic order for cyclic-extremal")
    p_lem.add_argument("--mode", choices=("multiplicity", "extremal"), default="extremal")
    p_lem.add_argument("--emit-cert", metavar="FILE")

    p_chk = sub.add_parser("check-cert", help="re-verify a certificate file")
    p_chk.add_argument("path")
    return parser


def _cmd_group(args) -> int:
    ctx = make_group(args.group)
    census: dict[str, int] = {}
    for i in range(ctx.n):
        key = str(ctx.order_table[i])
        census[key] = census.get(key, 0) + 1
    _emit(
        {
            "group": ctx.params.descriptor(),
            "order": ctx.n,
            "order_census": census,
            "commutator_subgroup_size": ctx.q,
            "center_size": sum(
                1
                for g in range(ctx.n)
                if all(ctx.mul_idx(g, h) == ctx.mul_idx(h, g) for h in range(ctx.n))
            ),
        }
    )
    return 0


def _cmd_seq_check(args) -> int:
    ctx = make_group(args.group)
    seq = Sequence.parse(ctx, args.seq)
    started = time.perf_counter()
    verdict = is_atom(ctx, seq)
    payload = {
        "sequence": seq.format(ctx),
        "length": len(seq),
        "verdict": {"product_one": verdict.product_one, "atom": verdict.atom},
        "witness": [part.format(ctx) for part in verdict.witness] if verdict.witness else None,
    }
    kind = "atom" if verdict.atom else "non_atom"
    cert = make_certificate(kind, ctx.params.descriptor(), payload,
                            wall_s=time.perf_counter() - started)
    _emit_certificate(cert, args.emit_cert)
    return 0


def _cmd_seq_pi(args) -> int:
    ctx = make_group(args.group)
    seq = Sequence.parse(ctx, args.seq)
    products = pi_set(ctx, seq)
    subproducts = subproducts_set(ctx, seq) if not seq.is_empty else products
    flags = classify(ctx, seq) if not seq.is_empty else None
    _emit(
        {
            "sequence": seq.format(ctx),
            "pi": [f"({a},{b})" for a, b in map(ctx.coords, products)],
            "subproducts": [f"({a},{b})" for a, b in map(ctx.coords, subproducts)],
            "product_one": flags.product_one if flags else True,
            "product_one_free": flags.product_one_free if flags else False,
        }
    )
    return 0


def _cmd_search(args) -> int:
    ctx = make_group(args.group)
    stratum = Stratum(
        length=args.length,
        k=args.k,
        tau_residue=None if args.no_tau_filter else 0,
    )
    started = time.perf_counter()
    if args.shard_index is not None:
        space = StratumSpace(ctx, stratum)
        shard = make_shards(space.total, args.shards)[args.shard_index]
        result = atom_search(
            ctx, stratum, shard=shard, mode=args.mode, seed=args.seed,
            heuristic_tries=args.heuristic_tries,
            checkpoint_path=args.checkpoint, max_candidates=args.max_candidates,
        )
    elif args.shards > 1:
        result = run_sharded(
            ctx, stratum, n_shards=args.shards,
            workers=args.workers or default_workers(), seed=args.seed,
            heuristic_tries=args.heuristic_tries, mode=args.mode,
        )
    else:
        result = atom_search(
            ctx, stratum, mode=args.mode, seed=args.seed,
            heuristic_tries=args.heuristic_tries,
            checkpoint_path=args.checkpoint, max_candidates=args.max_candidates,
        )
    from .enumeration import checkpoint_record

    payload = checkpoint_record(
        ctx, stratum, result.shard,
        args.seed, result.counters, result.digest,
        [seq.format(ctx) for seq in result.atoms],
        [seq.format(ctx) for seq in result.unverified],
        result.last_rank, result.complete,
    )
    cert = make_certificate("checkpoint", ctx.params.descriptor(), payload,
                            seed=args.seed, wall_s=time.perf_counter() - started)
    _emit_certificate(cert, args.emit_cert)
    return 0 if result.complete and not result.unverified else 1


def _cmd_davenport(args) -> int:
    ctx = make_group(args.group)
    started = time.perf_counter()
    if args.which == "small":
        result = small_davenport(ctx)
        flags = classify(ctx, result.extremal)
        cert = make_certificate(
            "davenport_small", ctx.params.descriptor(), result.to_payload(ctx),
            seed=args.seed, wall_s=time.perf_counter() - started,
        )
        _emit_certificate(cert, args.emit_cert)
        return 0 if flags.product_one_free else 1
    report = large_davenport(
        ctx, args.mode, seed=args.seed,
        workers=args.workers or default_workers(),
    )
    if args.mode == "lower_witness":
        seq = Sequence.parse(ctx, report.witness)
        verdict = is_atom(ctx, seq)
        payload = {
            "sequence": report.witness,
            "length": len(seq),
            "verdict": {"product_one": verdict.product_one, "atom": verdict.atom},
            "witness": None,
        }
        cert = make_certificate("atom", ctx.params.descriptor(), payload,
                                seed=args.seed, wall_s=time.perf_counter() - started)
        _emit_certificate(cert, args.emit_cert)
        return 0 if verdict.atom else 1
    doc = report.to_payload()
    _emit(doc)
    if args.emit_cert:
        sys.stderr.write("note: exhaustive runs are certified via verify-inverse\n")
    bad = any(rep["unverified"] for rep in doc["strata"] + doc["extra_length_strata"])
    return 1 if bad else 0


def _cmd_verify_inverse(args) -> int:
    ctx = make_group(args.group)
    started = time.perf_counter()
    report = verify_inverse_theorem(
        ctx, args.scope, seed=args.seed,
        workers=args.workers or default_workers(),
        n_shards=args.shards, checkpoint_dir=args.checkpoint_dir,
    )
    cert = make_certificate(
        "inverse_report", ctx.params.descriptor(), report.to_payload(),
        seed=args.seed, wall_s=time.perf_counter() - started,
    )
    _emit_certificate(cert, args.emit_cert)
    return 0 if report.verified else 1


def _cmd_elasticity(args) -> int:
    ctx = make_group(args.group)
    started = time.perf_counter()
    table = elasticity_calculator(2 * ctx.q, max(args.k // 2, 1))
    doc: dict = {"calculator": table.to_payload()}
    witness = None
    if args.k == 2:
        witness = build_rho_witness(ctx, "rho2")
    elif args.k == 3:
        witness = build_rho_witness(ctx, "rho3")
    if witness is not None:
        payload = witness.to_payload(ctx)
        cert = make_certificate(
            "elasticity_witness", ctx.params.descriptor(), payload,
            seed=args.seed, wall_s=time.perf_counter() - started,
        )
        doc["witness_certificate"] = json.loads(certificate_to_json(cert))
        if args.emit_cert:
            write_certificate(cert, args.emit_cert)
    if args.uk:
        result = uk_bounded(ctx, args.k, max_products=args.uk_max_products, seed=args.seed)
        doc["uk"] = {
            "k": result.k,
            "values": sorted(result.values),
            "complete": result.complete,
            "budget_exhausted": result.budget_exhausted,
        }
    _emit(doc)
    return 0


def _cmd_lemmas(args) -> int:
    ctx = make_group(args.group)
    started = time.perf_counter()
    report = run_lemma(ctx, args.lemma, args.trials, args.seed, n=args.n, mode=args.mode)
    cert = make_certificate(
        "lemma_report", ctx.params.descriptor(), report.to_payload(),
        seed=args.seed, wall_s=time.perf_counter() - started,
    )
    _emit_certificate(cert, args.emit_cert)
    return 0 if report.ok else 1


def _cmd_check_cert(args) -> int:
    cert = read_certificate(args.path)
    result = check_certificate(cert)
    _emit(
        {
            "path": args.path,
            "kind": result.kind,
            "ok": result.ok,
            "messages": result.messages,
            "caveats": result.caveats,
        }
    )
    return 0 if result.ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "group": _cmd_group,
        "search": _cmd_search,
        "davenport": _cmd_davenport,
        "verify-inverse": _cmd_verify_inverse,
        "elasticity": _cmd_elasticity,
        "lemmas": _cmd_lemmas,
        "check-cert": _cmd_check_cert,
    }
    try:
        if args.command == "seq":
            handler = _cmd_seq_check if args.seq_command == "check" else _cmd_seq_pi
            return handler(args)
        return handlers[args.command](args)
    except GroupParamError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except ResourceCapError as exc:
        sys.stderr.write(f"resource error: {exc}\n")
        return 2
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
