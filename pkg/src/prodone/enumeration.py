"""Stratified exhaustive enumeration with sound filters, shards, and checkpoints.

A stratum is the family of multisets of a fixed length with a prescribed
number k of terms outside the commutator subgroup.  Candidates are visited in
lexicographic order of their sorted content via multiset ranking/unranking,
so a stratum splits into contiguous rank intervals (shards) that different
workers can process independently and deterministically.

Only provably sound hard filters are applied while hunting atoms:

* the identity term is excluded for lengths >= 2 (an identity term splits off
  as its own product-one factor), and
* the sum of t-degrees must vanish mod p (every ordered product of a sequence
  lies in the commutator coset fixed by that sum).

Per candidate the checker runs a three-stage pipeline, every stage exact:
an abelian shortcut when all terms commute, a randomized ordering search
whose split witnesses are self-certifying, and the engine DP as the decision
procedure for whatever survives.  Membership-style prunes that depend on
future extensions are deliberately not used; minimality is not antitone
under extension.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from math import comb
from random import Random
from typing import Callable, Iterator

from .group import GroupCtx, GroupParamError, GroupParams, make_group
from .sequences import (
    DEFAULT_STATE_CAP,
    AtomVerdict,
    ResourceCapError,
    Sequence,
    is_atom,
)

_DIGEST_MOD = 1 << 256


# -- multiset ranking ----------------------------------------------------


def multiset_count(n: int, k: int) -> int:
    """Number of size-k multisets over an n-element ground set."""
    if k == 0:
        return 1
    if n == 0:
        return 0
    return comb(n + k - 1, k)


def rank_multiset(t: tuple[int, ...], n: int) -> int:
    """Lexicographic rank of a nondecreasing position tuple over [0, n)."""
    k = len(t)
    r = 0
    lo = 0
    for i, v in enumerate(t):
        rem = k - i - 1
        r += comb(n - lo + rem, rem + 1) - comb(n - v + rem, rem + 1)
        lo = v
    return r


def unrank_multiset(rank: int, n: int, k: int) -> tuple[int, ...]:
    out = []
    lo = 0
    for i in range(k):
        rem = k - i - 1
        v = lo
        while True:
            cnt = comb(n - v + rem - 1, rem)
            if rank < cnt:
                break
            rank -= cnt
            v += 1
        out.append(v)
        lo = v
    return tuple(out)


def next_multiset(t: list[int], n: int) -> bool:
    """Advance a nondecreasing position list to its lex successor in place."""
    k = len(t)
    for i in range(k - 1, -1, -1):
        if t[i] < n - 1:
            v = t[i] + 1
            for j in range(i, k):
                t[j] = v
            return True
    return False


# -- strata ---------------------------------------------------------------


@dataclass(frozen=True)
class Stratum:
    """Multisets of ``length`` terms, ``k`` of them outside the commutator subgroup.

    ``k=None`` leaves the split unconstrained.  ``tau_residue`` is the required
    t-degree sum mod p (``None`` disables the filter); ``exclude_identity``
    removes the identity from the ground set.
    """

    length: int
    k: int | None = None
    exclude_identity: bool = True
    tau_residue: int | None = 0

    def describe(self) -> dict:
        return {
            "length": self.length,
            "k": self.k,
            "exclude_identity": self.exclude_identity,
            "tau_residue": self.tau_residue,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Stratum":
        return cls(
            length=data["length"],
            k=data.get("k"),
            exclude_identity=data.get("exclude_identity", True),
            tau_residue=data.get("tau_residue", 0),
        )


class StratumSpace:
    """A stratum resolved against a group: ground sets, size, rank access."""

    def __init__(self, ctx: GroupCtx, stratum: Stratum):
        self.ctx = ctx
        self.stratum = stratum
        q, n = ctx.q, ctx.n
        if stratum.k is None:
            ground = list(range(0 if not stratum.exclude_identity else 1, n))
            self.ground = ground
            self.total = multiset_count(len(ground), stratum.length)
        else:
            if not 0 <= stratum.k <= stratum.length:
                self.y_ground: list[int] = []
                self.x_ground: list[int] = []
                self.total = 0
                return
            start = 0 if not stratum.exclude_identity else 1
            self.y_ground = list(range(start, q))
            self.x_ground = list(range(q, n))
            self.y_size = stratum.length - stratum.k
            self.x_size = stratum.k
            self.y_count = multiset_count(len(self.y_ground), self.y_size)
            self.x_count = multiset_count(len(self.x_ground), self.x_size)
            self.total = self.y_count * self.x_count

    def candidate_at(self, rank: int) -> tuple[int, ...]:
        st = self.stratum
        if st.k is None:
            pos = unrank_multiset(rank, len(self.ground), st.length)
            return tuple(self.ground[i] for i in pos)
        y_rank, x_rank = divmod(rank, self.x_count)
        ypos = unrank_multiset(y_rank, len(self.y_ground), self.y_size)
        xpos = unrank_multiset(x_rank, len(self.x_ground), self.x_size)
        return tuple(self.y_ground[i] for i in ypos) + tuple(self.x_ground[i] for i in xpos)

    def iter_range(self, lo: int, hi: int) -> Iterator[tuple[int, tuple[int, ...]]]:
        """Yield (rank, content) for ranks in [lo, hi) in lex order."""
        st = self.stratum
        if lo >= hi:
            return
        if st.k is None:
            ground = self.ground
            pos = list(unrank_multiset(lo, len(ground), st.length))
            for rank in range(lo, hi):
                yield rank, tuple(ground[i] for i in pos)
                if not next_multiset(pos, len(ground)):
                    break
            return
        y_ground, x_ground = self.y_ground, self.x_ground
        y_rank, x_rank = divmod(lo, self.x_count)
        ypos = list(unrank_multiset(y_rank, len(y_ground), self.y_size))
        xpos = list(unrank_multiset(x_rank, len(x_ground), self.x_size))
        y_content = tuple(y_ground[i] for i in ypos)
        for rank in range(lo, hi):
            yield rank, y_content + tuple(x_ground[i] for i in xpos)
            if self.x_size and next_multiset(xpos, len(x_ground)):
                continue
            for j in range(self.x_size):
                xpos[j] = 0
            if not next_multiset(ypos, len(y_ground)):
                break
            y_content = tuple(y_ground[i] for i in ypos)

    def passes_filters(self, content: tuple[int, ...]) -> bool:
        residue = self.stratum.tau_residue
        if residue is None:
            return True
        q = self.ctx.q
        degree = 0
        for idx in content:
            degree += idx // q
        return degree % self.ctx.p == residue


def enumerate_stratum(
    ctx: GroupCtx,
    stratum: Stratum,
    visit: Callable[[tuple[int, ...], bool], None],
    *,
    start: int = 0,
    stop: int | None = None,
) -> int:
    """Visit every multiset of the stratum exactly once in lex order.

    Calls ``visit(content, passed_filters)``; returns the number visited.
    """
    space = StratumSpace(ctx, stratum)
    hi = space.total if stop is None else min(stop, space.total)
    count = 0
    for _, content in space.iter_range(start, hi):
        visit(content, space.passes_filters(content))
        count += 1
    return count


# -- shards ----------------------------------------------------------------


@dataclass(frozen=True)
class Shard:
    index: int
    n_shards: int
    start_rank: int
    end_rank: int

    def describe(self) -> dict:
        return {
            "index": self.index,
            "n_shards": self.n_shards,
            "start_rank": self.start_rank,
            "end_rank": self.end_rank,
        }


def make_shards(total: int, n: int) -> list[Shard]:
    """Disjoint covering rank intervals with sizes within one of each other."""
    if n < 1:
        raise ValueError("shard count must be >= 1")
    base, extra = divmod(total, n)
    shards = []
    start = 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        shards.append(Shard(index=i, n_shards=n, start_rank=start, end_rank=start + size))
        start += size
    return shards


# -- digests ----------------------------------------------------------------


def digest_empty() -> int:
    return 0


def digest_add(digest: int, text: str) -> int:
    h = int.from_bytes(hashlib.sha256(text.encode()).digest(), "big")
    return (digest + h) % _DIGEST_MOD


def digest_merge(a: int, b: int) -> int:
    return (a + b) % _DIGEST_MOD


def digest_hex(digest: int) -> str:
    return f"{digest:064x}"


# -- candidate classification ------------------------------------------------


@dataclass
class SearchCounters:
    visited: int = 0
    filtered_out: int = 0
    checked: int = 0
    atoms: int = 0
    non_atoms: int = 0
    not_product_one: int = 0
    unverified: int = 0
    by_method: dict[str, int] = field(default_factory=dict)

    def note_method(self, method: str) -> None:
        self.by_method[method] = self.by_method.get(method, 0) + 1

    def merge(self, other: "SearchCounters") -> None:
        self.visited += other.visited
        self.filtered_out += other.filtered_out
        self.checked += other.checked
        self.atoms += other.atoms
        self.non_atoms += other.non_atoms
        self.not_product_one += other.not_product_one
        self.unverified += other.unverified
        for key, val in other.by_method.items():
            self.by_method[key] = self.by_method.get(key, 0) + val

    def to_dict(self) -> dict:
        return {
            "visited": self.visited,
            "filtered_out": self.filtered_out,
            "checked": self.checked,
            "atoms": self.atoms,
            "non_atoms": self.non_atoms,
            "not_product_one": self.not_product_one,
            "unverified": self.unverified,
            "by_method": dict(sorted(self.by_method.items())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SearchCounters":
        out = cls(**{k: data[k] for k in (
            "visited", "filtered_out", "checked", "atoms",
            "non_atoms", "not_product_one", "unverified")})
        out.by_method = dict(data.get("by_method", {}))
        return out


def _candidate_rng(master_seed: int, group: str, content: tuple[int, ...]) -> Random:
    payload = f"{master_seed}:{group}:{','.join(map(str, content))}"
    digest = hashlib.sha256(payload.encode()).digest()
    return Random(int.from_bytes(digest[:8], "big"))


def _abelian_verdict(ctx: GroupCtx, content: tuple[int, ...]) -> str:
    """Exact verdict for candidates supported inside the commutator subgroup."""
    q = ctx.q
    total = sum(content) % q
    if total != 0:
        return "not_product_one"
    counts: dict[int, int] = {}
    for idx in content:
        counts[idx] = counts.get(idx, 0) + 1
    values = list(counts.items())
    width = len(values)

    def scan(pos: int, acc: int, taken: int) -> bool:
        if pos == width:
            return taken not in (0, len(content)) and acc % q == 0
        value, mult = values[pos]
        for d in range(mult + 1):
            if scan(pos + 1, acc + d * value, taken + d):
                return True
        return False

    return "non_atom" if scan(0, 0, 0) else "atom"


def _ordering_witness(ctx: GroupCtx, content: tuple[int, ...], rng: Random, tries: int) -> tuple[bool, bool]:
    """(found_split, saw_product_one) via random product-one orderings.

    A repeated prefix product inside a product-one ordering certifies a
    consecutive product-one block whose complement is also product-one, i.e.
    a non-atom witness; the arithmetic of the prefix list is the proof.
    """
    try:
        mt = ctx.cayley()
    except GroupParamError:
        mt = None  # group too large for the flat table; fall back to mul_idx
    nn = ctx.n
    mul_idx = ctx.mul_idx
    order = list(content)
    size = len(order)
    shuffle = rng.shuffle
    saw_product_one = False
    for _ in range(tries):
        shuffle(order)
        acc = 0
        prefixes = [0] * (size + 1)
        if mt is not None:
            for i in range(size):
                acc = mt[acc * nn + order[i]]
                prefixes[i + 1] = acc
        else:
            for i in range(size):
                acc = mul_idx(acc, order[i])
                prefixes[i + 1] = acc
        if acc != 0:
            continue
        saw_product_one = True
        seen: dict[int, int] = {}
        for i, value in enumerate(prefixes):
            j = seen.get(value)
            if j is not None and not (j == 0 and i == size):
                return True, True
            if j is None:
                seen[value] = i
    return False, saw_product_one


def classify_candidate(
    ctx: GroupCtx,
    content: tuple[int, ...],
    *,
    master_seed: int = 0,
    heuristic_tries: int = 64,
    state_cap: int = DEFAULT_STATE_CAP,
) -> tuple[str, str, AtomVerdict | None]:
    """Classify one candidate multiset: (kind, method, verdict-for-atoms).

    Kinds: ``atom``, ``non_atom``, ``not_product_one``, ``unverified``.
    Atom verdicts come from the exact engine; heuristic and abelian results
    are exact by construction (see :func:`_ordering_witness`).
    """
    if all(idx < ctx.q for idx in content):
        kind = _abelian_verdict(ctx, content)
        if kind != "atom":
            return kind, "abelian", None
        # Confirm the rare abelian atom with the engine to attach a verdict.
        verdict = is_atom(ctx, Sequence.from_indices(content), state_cap=state_cap)
        return "atom", "abelian", verdict
    counts: dict[int, int] = {}
    for idx in content:
        counts[idx] = counts.get(idx, 0) + 1
    lattice_states = 1
    for mult in counts.values():
        lattice_states *= mult + 1
    # For tiny lattices the exact DP beats any amount of ordering search.
    if heuristic_tries > 0 and lattice_states > 256:
        rng = _candidate_rng(master_seed, ctx.params.descriptor(), content)
        found, _ = _ordering_witness(ctx, content, rng, heuristic_tries)
        if found:
            return "non_atom", "ordering", None
    try:
        verdict = is_atom(ctx, Sequence.from_indices(content), state_cap=state_cap)
    except ResourceCapError:
        return "unverified", "dp", None
    if not verdict.product_one:
        return "not_product_one", "dp", None
    if verdict.atom:
        return "atom", "dp", verdict
    return "non_atom", "dp", None


# -- search -------------------------------------------------------------------


@dataclass
class SearchResult:
    stratum: Stratum
    shard: Shard | None
    counters: SearchCounters
    atoms: list[Sequence]
    unverified: list[Sequence]
    digest: int
    complete: bool
    last_rank: int

    @property
    def digest_hex(self) -> str:
        return digest_hex(self.digest)


CHECKPOINT_SCHEMA = "prodone-checkpoint/1"


def checkpoint_record(
    ctx: GroupCtx,
    stratum: Stratum,
    shard: Shard | None,
    seed: int,
    counters: SearchCounters,
    digest: int,
    atoms: list[str],
    unverified: list[str],
    last_rank: int,
    complete: bool,
) -> dict:
    return {
        "schema": CHECKPOINT_SCHEMA,
        "group": ctx.params.descriptor(),
        "stratum": stratum.describe(),
        "shard": shard.describe() if shard else None,
        "seed": seed,
        "counters": counters.to_dict(),
        "digest": digest_hex(digest),
        "atoms": atoms,
        "unverified": unverified,
        "last_rank": last_rank,
        "complete": complete,
    }


def save_checkpoint(path: str, record: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        json.dump(record, handle, sort_keys=True, indent=1)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> dict:
    with open(path, encoding="utf-8") as handle:
        record = json.load(handle)
    if record.get("schema") != CHECKPOINT_SCHEMA:
        raise ValueError(f"unexpected checkpoint schema in {path}")
    return record


def atom_search(
    ctx: GroupCtx,
    stratum: Stratum,
    *,
    mode: str = "raw",
    shard: Shard | None = None,
    seed: int = 0,
    heuristic_tries: int = 64,
    state_cap: int = DEFAULT_STATE_CAP,
    checkpoint_path: str | None = None,
    checkpoint_every: int = 25_000,
    max_candidates: int | None = None,
) -> SearchResult:
    """Find all atoms in a stratum (or one shard of it).

    Every candidate gets an exact verdict; per-candidate resource failures
    are returned in ``unverified`` rather than silently dropped.  With
    ``checkpoint_path`` the scan resumes after the last completed rank and
    ``max_candidates`` bounds the work of a single call (the result is then
    marked incomplete).
    """
    if mode not in ("raw", "up_to_aut"):
        raise ValueError(f"unknown search mode {mode!r}")
    space = StratumSpace(ctx, stratum)
    lo = shard.start_rank if shard else 0
    hi = shard.end_rank if shard else space.total
    counters = SearchCounters()
    digest = digest_empty()
    atom_texts: list[str] = []
    unverified_texts: list[str] = []
    start = lo
    if checkpoint_path and os.path.exists(checkpoint_path):
        record = load_checkpoint(checkpoint_path)
        if record["group"] != ctx.params.descriptor() or record["stratum"] != stratum.describe():
            raise ValueError("checkpoint does not match this search")
        if record["shard"] != (shard.describe() if shard else None):
            raise ValueError("checkpoint belongs to a different shard plan")
        if record["seed"] != seed:
            raise ValueError("checkpoint was produced with a different seed")
        counters = SearchCounters.from_dict(record["counters"])
        digest = int(record["digest"], 16)
        atom_texts = list(record["atoms"])
        unverified_texts = list(record["unverified"])
        start = record["last_rank"] + 1
    processed = 0
    last_rank = start - 1
    truncated = False

    def persist(complete: bool) -> None:
        if checkpoint_path:
            save_checkpoint(
                checkpoint_path,
                checkpoint_record(
                    ctx, stratum, shard, seed, counters, digest,
                    atom_texts, unverified_texts, last_rank, complete,
                ),
            )

    for rank, content in space.iter_range(start, hi):
        if max_candidates is not None and processed >= max_candidates:
            truncated = True
            break
        counters.visited += 1
        if not space.passes_filters(content):
            counters.filtered_out += 1
        else:
            counters.checked += 1
            kind, method, _verdict = classify_candidate(
                ctx, content,
                master_seed=seed,
                heuristic_tries=heuristic_tries,
                state_cap=state_cap,
            )
            counters.note_method(method)
            if kind == "atom":
                counters.atoms += 1
                text = Sequence.from_indices(content).format(ctx)
                atom_texts.append(text)
                digest = digest_add(digest, text)
            elif kind == "non_atom":
                counters.non_atoms += 1
            elif kind == "not_product_one":
                counters.not_product_one += 1
            else:
                counters.unverified += 1
                unverified_texts.append(Sequence.from_indices(content).format(ctx))
        last_rank = rank
        processed += 1
        if checkpoint_path and processed % checkpoint_every == 0:
            persist(False)
    complete = not truncated
    persist(complete)
    atoms = [Sequence.parse(ctx, text) for text in atom_texts]
    if mode == "up_to_aut" and atoms:
        from .group import automorphisms

        auts = automorphisms(ctx)
        atoms = sorted({canonical_form(ctx, seq, auts) for seq in atoms})
    unverified = [Sequence.parse(ctx, text) for text in unverified_texts]
    return SearchResult(
        stratum=stratum,
        shard=shard,
        counters=counters,
        atoms=atoms,
        unverified=unverified,
        digest=digest,
        complete=complete,
        last_rank=last_rank,
    )


# -- canonicalization -----------------------------------------------------------


def canonical_form(ctx: GroupCtx, seq: Sequence, auts: list[tuple[int, ...]]) -> Sequence:
    """Lexicographically least element of the automorphism orbit of ``seq``."""
    return min(seq.map_indices(table) for table in auts)


def orbit(ctx: GroupCtx, seq: Sequence, auts: list[tuple[int, ...]]) -> set[Sequence]:
    return {seq.map_indices(table) for table in auts}


# -- parallel driver -------------------------------------------------------------


def default_workers() -> int:
    env = os.environ.get("PRODONE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _shard_worker(args: tuple) -> dict:
    descriptor, stratum_dict, shard_dict, seed, heuristic_tries, state_cap, ckpt_dir = args
    ctx = make_group(GroupParams.from_descriptor(descriptor))
    stratum = Stratum.from_dict(stratum_dict)
    shard = Shard(**shard_dict)
    path = None
    if ckpt_dir:
        path = os.path.join(ckpt_dir, f"shard-{shard.index:04d}-of-{shard.n_shards:04d}.json")
    result = atom_search(
        ctx, stratum,
        shard=shard, seed=seed,
        heuristic_tries=heuristic_tries, state_cap=state_cap,
        checkpoint_path=path,
    )
    return {
        "counters": result.counters.to_dict(),
        "digest": digest_hex(result.digest),
        "atoms": [seq.format(ctx) for seq in result.atoms],
        "unverified": [seq.format(ctx) for seq in result.unverified],
        "complete": result.complete,
        "last_rank": result.last_rank,
    }


def run_sharded(
    ctx: GroupCtx,
    stratum: Stratum,
    *,
    n_shards: int = 1,
    workers: int | None = None,
    seed: int = 0,
    heuristic_tries: int = 64,
    state_cap: int = DEFAULT_STATE_CAP,
    checkpoint_dir: str | None = None,
    mode: str = "raw",
) -> SearchResult:
    """Process a stratum as disjoint shards, merging digests and counters.

    Aggregation is associative and commutative, so the merged result is
    independent of the shard plan and worker schedule.
    """
    space = StratumSpace(ctx, stratum)
    shards = make_shards(space.total, n_shards)
    workers = workers or default_workers()
    jobs = [
        (
            ctx.params.descriptor(), stratum.describe(),
            shard.describe(), seed, heuristic_tries, state_cap, checkpoint_dir,
        )
        for shard in shards
    ]
    if workers == 1 or len(jobs) == 1:
        outputs = [_shard_worker(job) for job in jobs]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            outputs = list(pool.map(_shard_worker, jobs))
    counters = SearchCounters()
    digest = digest_empty()
    atoms: list[Sequence] = []
    unverified: list[Sequence] = []
    complete = True
    for out in outputs:
        counters.merge(SearchCounters.from_dict(out["counters"]))
        digest = digest_merge(digest, int(out["digest"], 16))
        atoms.extend(Sequence.parse(ctx, text) for text in out["atoms"])
        unverified.extend(Sequence.parse(ctx, text) for text in out["unverified"])
        complete = complete and out["complete"]
    atoms.sort()
    if mode == "up_to_aut" and atoms:
        from .group import automorphisms

        auts = automorphisms(ctx)
        atoms = sorted({canonical_form(ctx, seq, auts) for seq in atoms})
    return SearchResult(
        stratum=stratum,
        shard=None,
        counters=counters,
        atoms=atoms,
        unverified=unverified,
        digest=digest,
        complete=complete,
        last_rank=space.total - 1,
    )
