"""Self-contained certificates: serialized claims re-checkable without re-search.

Every certificate is UTF-8 JSON with sorted keys, a schema version, and a
digest over the canonical payload (timing excluded, so identical inputs and
seed reproduce identical digests).  ``check_certificate`` re-verifies claims
using only engine-level recomputation: atoms are re-checked, multiset
equalities re-summed, digests recomputed.  What cannot be re-checked without
re-running a search (exhaustiveness of a scan, absence of counterexamples)
is stated as a caveat in the verdict rather than silently assumed.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

from . import __version__
from .group import GroupParamError, make_group
from .sequences import Sequence, classify, is_atom

SCHEMA = "prodone-cert/1"

KINDS = (
    "atom",
    "non_atom",
    "davenport_small",
    "inverse_report",
    "elasticity_witness",
    "lemma_report",
    "checkpoint",
)


@dataclass
class Certificate:
    kind: str
    group: str | None
    payload: dict
    seed: int | None
    tool_version: str = __version__
    schema: str = SCHEMA
    timing: dict = field(default_factory=dict)
    digest: str = ""


def _canonical_bytes(cert: Certificate) -> bytes:
    body = {
        "schema": cert.schema,
        "kind": cert.kind,
        "group": cert.group,
        "payload": cert.payload,
        "seed": cert.seed,
        "tool_version": cert.tool_version,
    }
    return json.dumps(body, sort_keys=True, separators=(",", ":")).encode()


def compute_digest(cert: Certificate) -> str:
    return hashlib.sha256(_canonical_bytes(cert)).hexdigest()


def make_certificate(
    kind: str,
    group: str | None,
    payload: dict,
    *,
    seed: int | None = None,
    wall_s: float | None = None,
) -> Certificate:
    if kind not in KINDS:
        raise ValueError(f"unknown certificate kind {kind!r}")
    timing = {"created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    if wall_s is not None:
        timing["wall_s"] = round(wall_s, 3)
    cert = Certificate(kind=kind, group=group, payload=payload, seed=seed, timing=timing)
    cert.digest = compute_digest(cert)
    return cert


def certificate_to_json(cert: Certificate) -> str:
    body = {
        "schema": cert.schema,
        "kind": cert.kind,
        "group": cert.group,
        "payload": cert.payload,
        "seed": cert.seed,
        "tool_version": cert.tool_version,
        "timing": cert.timing,
        "digest": cert.digest,
    }
    return json.dumps(body, sort_keys=True, indent=2)


def parse_certificate(text: str) -> Certificate:
    data = json.loads(text)
    if data.get("schema") != SCHEMA:
        raise ValueError(f"unsupported certificate schema {data.get('schema')!r}")
    missing = {"kind", "payload", "digest"} - set(data)
    if missing:
        raise ValueError(f"certificate missing fields: {sorted(missing)}")
    return Certificate(
        kind=data["kind"],
        group=data.get("group"),
        payload=data["payload"],
        seed=data.get("seed"),
        tool_version=data.get("tool_version", "?"),
        schema=data["schema"],
        timing=data.get("timing", {}),
        digest=data["digest"],
    )


def write_certificate(cert: Certificate, path: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write(certificate_to_json(cert))
        handle.write("\n")
    os.replace(tmp, path)


def read_certificate(path: str) -> Certificate:
    with open(path, encoding="utf-8") as handle:
        return parse_certificate(handle.read())


@dataclass
class CheckResult:
    ok: bool
    kind: str
    messages: list[str] = field(default_factory=list)
    caveats: list[str] = field(default_factory=list)


def check_certificate(cert: Certificate) -> CheckResult:
    """Re-verify a certificate from its fields alone."""
    result = CheckResult(ok=True, kind=cert.kind)

    def fail(message: str) -> None:
        result.ok = False
        result.messages.append(message)

    if cert.kind not in KINDS:
        fail(f"unknown certificate kind {cert.kind!r}")
        return result
    if compute_digest(cert) != cert.digest:
        fail("digest mismatch: certificate contents were altered")
        return result
    ctx = None
    if cert.group is not None:
        try:
            ctx = make_group(cert.group)
        except GroupParamError as exc:
            fail(f"invalid group descriptor: {exc}")
            return result

    payload = cert.payload
    try:
        if cert.kind in ("atom", "non_atom"):
            seq = Sequence.parse(ctx, payload["sequence"])
            verdict = is_atom(ctx, seq)
            claimed = payload["verdict"]
            if verdict.product_one != claimed["product_one"]:
                fail("product-one flag does not re-verify")
            if verdict.atom != claimed["atom"]:
                fail("atom flag does not re-verify")
            if cert.kind == "atom" and not claimed["atom"]:
                fail("atom certificate claims a non-atom")
            if cert.kind == "non_atom" and claimed["atom"]:
                fail("non-atom certificate claims an atom")
            witness = payload.get("witness")
            if witness is not None:
                part1 = Sequence.parse(ctx, witness[0])
                part2 = Sequence.parse(ctx, witness[1])
                if part1.cat(part2) != seq:
                    fail("witness parts do not multiply to the sequence")
                for part in (part1, part2):
                    if not classify(ctx, part).product_one:
                        fail(f"witness part {part.format(ctx)} is not product-one")
        elif cert.kind == "davenport_small":
            seq = Sequence.parse(ctx, payload["extremal"])
            if len(seq) != payload["value"]:
                fail("extremal example length differs from the claimed value")
            flags = classify(ctx, seq)
            if not flags.product_one_free:
                fail("extremal example is not product-one free")
            if payload.get("refuted_length") != payload["value"] + 1:
                fail("refuted length is not value + 1")
            result.caveats.append(
                "exhaustive refutation of longer sequences requires re-running the DFS"
            )
        elif cert.kind == "inverse_report":
            from .enumeration import digest_add, digest_empty, digest_hex
            from .invariants import extremal_atoms_all

            forms = {f.sequence.format(ctx) for f in extremal_atoms_all(ctx)}
            if payload["n_f"] != len(forms):
                fail(f"recomputed extremal count {len(forms)} != recorded {payload['n_f']}")
            for stratum in payload["strata"]:
                counters = stratum["counters"]
                if counters["visited"] != stratum["total"]:
                    fail(f"stratum k={stratum['k']}: visited != stratum size")
                if counters["filtered_out"] + counters["checked"] != counters["visited"]:
                    fail(f"stratum k={stratum['k']}: filter accounting broken")
                parts = (
                    counters["atoms"] + counters["non_atoms"]
                    + counters["not_product_one"] + counters["unverified"]
                )
                if parts != counters["checked"]:
                    fail(f"stratum k={stratum['k']}: verdict accounting broken")
                if len(stratum["atoms"]) != counters["atoms"]:
                    fail(f"stratum k={stratum['k']}: atom list length != counter")
                digest = digest_empty()
                for text in stratum["atoms"]:
                    seq = Sequence.parse(ctx, text)
                    if not is_atom(ctx, seq).atom:
                        fail(f"exhibited atom fails re-check: {text}")
                    if stratum["k"] == 2 and text not in forms:
                        fail(f"length-2q atom outside the extremal set: {text}")
                    if stratum["k"] != 2:
                        fail(f"atom reported in stratum k={stratum['k']}: {text}")
                    digest = digest_add(digest, text)
                if digest_hex(digest) != stratum["digest"]:
                    fail(f"stratum k={stratum['k']}: digest does not recompute")
            if payload["exceptions"]:
                fail(f"report lists {len(payload['exceptions'])} exceptions")
            result.caveats.append(
                "exhaustiveness of the scan itself requires re-running the search"
            )
        elif cert.kind == "elasticity_witness":
            from .invariants import ElasticityWitness, verify_elasticity_witness

            witness = ElasticityWitness(
                product=Sequence.parse(ctx, payload["product"]),
                factors_short=tuple(Sequence.parse(ctx, t) for t in payload["factors_short"]),
                factors_long=tuple(Sequence.parse(ctx, t) for t in payload["factors_long"]),
            )
            if list(witness.lengths) != payload["lengths"]:
                fail("recorded factorization lengths are wrong")
            for problem in verify_elasticity_witness(ctx, witness):
                fail(problem)
        elif cert.kind == "lemma_report":
            from .oracles import recheck_counterexample

            record = payload.get("counterexample")
            if payload["failures"] and record is None:
                fail("failures reported without a counterexample")
            if record is not None:
                if not recheck_counterexample(ctx, payload["lemma"], record):
                    fail("counterexample does not re-verify")
            else:
                result.caveats.append(
                    "absence of counterexamples re-verifiable only by re-running the trials"
                )
        elif cert.kind == "checkpoint":
            from .enumeration import digest_add, digest_empty, digest_hex

            counters = payload["counters"]
            if counters["filtered_out"] + counters["checked"] != counters["visited"]:
                fail("filter accounting broken")
            parts = (
                counters["atoms"] + counters["non_atoms"]
                + counters["not_product_one"] + counters["unverified"]
            )
            if parts != counters["checked"]:
                fail("verdict accounting broken")
            digest = digest_empty()
            for text in payload["atoms"]:
                seq = Sequence.parse(ctx, text)
                if not is_atom(ctx, seq).atom:
                    fail(f"exhibited atom fails re-check: {text}")
                digest = digest_add(digest, text)
            if digest_hex(digest) != payload["digest"]:
                fail("findings digest does not recompute")
            if not payload.get("complete", False):
                result.caveats.append("checkpoint covers a partial scan")
            result.caveats.append(
                "coverage of the rank interval requires re-running the shard"
            )
    except (KeyError, ValueError, TypeError) as exc:
        fail(f"malformed payload: {exc}")
    return result
