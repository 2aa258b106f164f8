"""Group-level invariants: Davenport constants, maximal atoms, elasticity.

``small_davenport`` pins the longest product-one-free length by exhaustive
DFS (the prune is sound: supersequences of a non-free sequence stay
non-free).  ``extremal_atom`` realizes the long-atom shape

    y^[q-1] . x . y^[q-1] . x^(p-1) y^(s_eff^(p-1)+1)

for a generator pair (x, y), and ``verify_inverse_theorem`` checks by
stratified exhaustive search that these are the only atoms of length 2q.
The verifier depends only on the search and the sequence engine, never on
the statements it is checking, so the verification is not circular.

The elasticity section builds explicit common multisets with two
factorizations into atoms (witnesses re-checkable from scratch), plus the
closed-form calculator for the k-th elasticities and the lambda table.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .enumeration import (
    Stratum,
    StratumSpace,
    atom_search,
    run_sharded,
)
from .group import Element, GroupCtx, generator_pairs
from .sequences import (
    Sequence,
    cat_all,
    classify,
    is_atom,
    length_set_bounded,
)

# -- small Davenport constant -------------------------------------------------


@dataclass
class SmallDavenportResult:
    """Exact maximum length of a product-one-free sequence, with certificate data."""

    value: int
    extremal: Sequence
    nodes: int

    def to_payload(self, ctx: GroupCtx) -> dict:
        return {
            "value": self.value,
            "extremal": self.extremal.format(ctx),
            "nodes": self.nodes,
            "refuted_length": self.value + 1,
        }


def small_davenport(ctx: GroupCtx) -> SmallDavenportResult:
    """Exact maximum product-one-free length by DFS over nondecreasing sequences.

    The walk prunes a subtree as soon as some sub-multiset of the prefix
    multiplies to the identity in index-sorted order.  That test is sound but
    incomplete in a non-abelian group (a later term can also land in the
    middle of an ordering), so the walk may over-visit; it never skips a
    product-one-free multiset, because prefixes of sorted product-one-free
    sequences stay product-one-free.  Exactness comes from the second check:
    any node that would raise the record is confirmed product-one-free by the
    engine, and nodes that fail are cut (their extensions cannot be free
    either).  The returned value therefore refutes length value+1
    exhaustively.
    """
    ground = list(range(1, ctx.n))
    tables = [ctx.right_shift_table(g) for g in ground]
    shift = ctx.shift_mask
    best_len = 0
    best: list[int] = []
    nodes = 0
    chosen: list[int] = []

    def extend(start: int, sorted_products: int) -> None:
        nonlocal best_len, best, nodes
        nodes += 1
        if len(chosen) > best_len:
            if not classify(ctx, Sequence.from_indices(chosen)).product_one_free:
                return
            best_len = len(chosen)
            best = list(chosen)
        for i in range(start, len(ground)):
            extended = sorted_products | shift(sorted_products | 1, tables[i])
            if extended & 1:
                continue
            chosen.append(ground[i])
            extend(i, extended)
            chosen.pop()

    extend(0, 0)
    return SmallDavenportResult(
        value=best_len,
        extremal=Sequence.from_indices(best),
        nodes=nodes,
    )


# -- the extremal length-2q atoms ----------------------------------------------


@dataclass(frozen=True)
class ExtremalForm:
    """A realized maximal atom together with the generator pair producing it."""

    x: Element
    y: Element
    s_eff: int
    sequence: Sequence


def pair_residue(ctx: GroupCtx, x: Element, y: Element) -> int:
    """The unique t with y*x = x*y^t for a generator pair (x, y)."""
    z = ctx.mul(ctx.mul(ctx.inv(x), y), x)
    if z[0] != 0 or y[0] != 0:
        raise ValueError("not a generator pair: conjugate leaves <a>")
    return z[1] * pow(y[1], -1, ctx.q) % ctx.q


def extremal_atom(ctx: GroupCtx, x: Element, y: Element) -> ExtremalForm:
    """Build y^[q-1].x.y^[q-1].x^(p-1)y^(s_eff^(p-1)+1) for the pair (x, y)."""
    if ctx.order(x) != ctx.p or ctx.order(y) != ctx.q:
        raise ValueError(
            f"invalid generator pair: ord{x} = {ctx.order(x)}, ord{y} = {ctx.order(y)}"
        )
    s_eff = pair_residue(ctx, x, y)
    exponent = pow(s_eff, ctx.p - 1, ctx.q) + 1
    closer = ctx.mul(ctx.power(x, ctx.p - 1), ctx.power(y, exponent))
    seq = Sequence(
        [
            (ctx.idx(y), 2 * ctx.q - 2),
            (ctx.idx(x), 1),
            (ctx.idx(closer), 1),
        ]
    )
    assert len(seq) == 2 * ctx.q
    assert seq.count_in(ctx.outside_commutator_indices) == 2
    return ExtremalForm(x=x, y=y, s_eff=s_eff, sequence=seq)


def extremal_atoms_all(ctx: GroupCtx, *, verify: bool = True) -> list[ExtremalForm]:
    """Distinct realized multisets over all generator pairs, deduplicated.

    With ``verify`` every distinct multiset is confirmed to be an atom by the
    engine before it is returned.
    """
    seen: dict[Sequence, ExtremalForm] = {}
    for x, y, _ in generator_pairs(ctx):
        form = extremal_atom(ctx, x, y)
        if form.sequence not in seen:
            seen[form.sequence] = form
    forms = sorted(seen.values(), key=lambda f: f.sequence)
    if verify:
        for form in forms:
            verdict = is_atom(ctx, form.sequence)
            if not verdict.atom:
                raise AssertionError(
                    f"extremal construction failed atom check: {form.sequence.format(ctx)}"
                )
    return forms


# -- stratified scans -----------------------------------------------------------


@dataclass
class StratumReport:
    k: int
    total: int
    counters: dict
    atoms: list[str]
    unverified: list[str]
    digest: str

    def to_payload(self) -> dict:
        return {
            "k": self.k,
            "total": self.total,
            "counters": self.counters,
            "atoms": self.atoms,
            "unverified": self.unverified,
            "digest": self.digest,
        }


def scan_strata(
    ctx: GroupCtx,
    length: int,
    ks: list[int],
    *,
    seed: int = 0,
    workers: int = 1,
    n_shards: int | None = None,
    heuristic_tries: int = 64,
    checkpoint_dir: str | None = None,
) -> list[StratumReport]:
    reports = []
    for k in ks:
        stratum = Stratum(length=length, k=k)
        space = StratumSpace(ctx, stratum)
        shards = n_shards if n_shards is not None else max(1, workers)
        if shards == 1 and checkpoint_dir is None:
            result = atom_search(ctx, stratum, seed=seed, heuristic_tries=heuristic_tries)
        else:
            stratum_dir = None
            if checkpoint_dir is not None:
                stratum_dir = os.path.join(checkpoint_dir, f"len{length}-k{k}")
                os.makedirs(stratum_dir, exist_ok=True)
            result = run_sharded(
                ctx, stratum,
                n_shards=shards, workers=workers, seed=seed,
                heuristic_tries=heuristic_tries, checkpoint_dir=stratum_dir,
            )
        reports.append(
            StratumReport(
                k=k,
                total=space.total,
                counters=result.counters.to_dict(),
                atoms=[seq.format(ctx) for seq in result.atoms],
                unverified=[seq.format(ctx) for seq in result.unverified],
                digest=result.digest_hex,
            )
        )
    return reports


@dataclass
class InverseReport:
    """Outcome of the stratified scan for atoms of the maximal length 2q.

    An exception here falsifies the run, not the mathematics: any atom that
    does not match a realized extremal multiset is listed for independent
    re-checking.
    """

    group: str
    length: int
    scope: str
    n_f: int
    strata: list[StratumReport]
    matched: int
    exceptions: list[str]
    seed: int

    @property
    def atoms_found(self) -> int:
        return sum(len(rep.atoms) for rep in self.strata)

    @property
    def unverified_total(self) -> int:
        return sum(len(rep.unverified) for rep in self.strata)

    @property
    def verified(self) -> bool:
        if self.exceptions or self.unverified_total:
            return False
        for rep in self.strata:
            if rep.k == 2:
                if len(rep.atoms) != self.n_f:
                    return False
            elif rep.atoms:
                return False
        return True

    def to_payload(self) -> dict:
        return {
            "group": self.group,
            "length": self.length,
            "scope": self.scope,
            "n_f": self.n_f,
            "strata": [rep.to_payload() for rep in self.strata],
            "matched": self.matched,
            "exceptions": self.exceptions,
            "seed": self.seed,
            "atoms_found": self.atoms_found,
            "verified": self.verified,
        }


def verify_inverse_theorem(
    ctx: GroupCtx,
    scope: str = "k_le_2",
    *,
    seed: int = 0,
    workers: int = 1,
    n_shards: int | None = None,
    heuristic_tries: int = 64,
    checkpoint_dir: str | None = None,
) -> InverseReport:
    """Exhaustively match all length-2q atoms against the realized extremal set.

    ``k_le_2`` covers the strata with at most two terms outside the
    commutator subgroup; ``full`` covers every stratum (extended runtime).
    The extremal multiset count is computed and recorded before the search.
    """
    if scope not in ("k_le_2", "full"):
        raise ValueError(f"unknown scope {scope!r}")
    length = 2 * ctx.q
    forms = extremal_atoms_all(ctx)
    n_f = len(forms)
    form_set = {form.sequence.format(ctx) for form in forms}
    ks = [0, 1, 2] if scope == "k_le_2" else list(range(length + 1))
    strata = scan_strata(
        ctx, length, ks,
        seed=seed, workers=workers, n_shards=n_shards,
        heuristic_tries=heuristic_tries, checkpoint_dir=checkpoint_dir,
    )
    matched = 0
    exceptions: list[str] = []
    for rep in strata:
        for text in rep.atoms:
            if text in form_set and rep.k == 2:
                matched += 1
            else:
                exceptions.append(text)
    return InverseReport(
        group=ctx.params.descriptor(),
        length=length,
        scope=scope,
        n_f=n_f,
        strata=strata,
        matched=matched,
        exceptions=exceptions,
        seed=seed,
    )


@dataclass
class LargeDavenportReport:
    group: str
    mode: str
    value: int
    witness: str | None
    strata: list[StratumReport] = field(default_factory=list)
    extra_length_strata: list[StratumReport] = field(default_factory=list)

    def to_payload(self) -> dict:
        return {
            "group": self.group,
            "mode": self.mode,
            "value": self.value,
            "witness": self.witness,
            "strata": [rep.to_payload() for rep in self.strata],
            "extra_length_strata": [rep.to_payload() for rep in self.extra_length_strata],
        }


def large_davenport(
    ctx: GroupCtx,
    mode: str = "lower_witness",
    *,
    seed: int = 0,
    workers: int = 1,
    n_shards: int | None = None,
    heuristic_tries: int = 64,
    checkpoint_dir: str | None = None,
) -> LargeDavenportReport:
    """Maximal atom length evidence at the requested verification depth.

    ``lower_witness`` exhibits one atom of length 2q; ``exhaustive_at_2q``
    enumerates all length-2q atoms stratified by the number of terms outside
    the commutator subgroup; ``exhaustive_full`` additionally confirms that
    no atom of length 2q+1 exists (extended runtime, sharded).
    """
    length = 2 * ctx.q
    if mode == "lower_witness":
        form = extremal_atom(ctx, (1, 0), (0, 1))
        verdict = is_atom(ctx, form.sequence)
        if not verdict.atom:
            raise AssertionError("extremal witness failed the atom check")
        return LargeDavenportReport(
            group=ctx.params.descriptor(),
            mode=mode,
            value=length,
            witness=form.sequence.format(ctx),
        )
    if mode not in ("exhaustive_at_2q", "exhaustive_full"):
        raise ValueError(f"unknown mode {mode!r}")
    kw = dict(
        seed=seed, workers=workers, n_shards=n_shards,
        heuristic_tries=heuristic_tries, checkpoint_dir=checkpoint_dir,
    )
    strata = scan_strata(ctx, length, list(range(length + 1)), **kw)
    extra: list[StratumReport] = []
    if mode == "exhaustive_full":
        extra = scan_strata(ctx, length + 1, list(range(length + 2)), **kw)
    form = extremal_atom(ctx, (1, 0), (0, 1))
    return LargeDavenportReport(
        group=ctx.params.descriptor(),
        mode=mode,
        value=length,
        witness=form.sequence.format(ctx),
        strata=strata,
        extra_length_strata=extra,
    )


# -- elasticity witnesses ---------------------------------------------------------


@dataclass(frozen=True)
class ElasticityWitness:
    """A common multiset with two explicit factorizations into atoms."""

    product: Sequence
    factors_short: tuple[Sequence, ...]
    factors_long: tuple[Sequence, ...]

    @property
    def lengths(self) -> tuple[int, int]:
        return (len(self.factors_short), len(self.factors_long))

    def to_payload(self, ctx: GroupCtx) -> dict:
        return {
            "product": self.product.format(ctx),
            "factors_short": [f.format(ctx) for f in self.factors_short],
            "factors_long": [f.format(ctx) for f in self.factors_long],
            "lengths": list(self.lengths),
        }


def verify_elasticity_witness(ctx: GroupCtx, witness: ElasticityWitness) -> list[str]:
    """Re-verify a witness from scratch; returns a list of problems (empty = ok)."""
    problems = []
    if cat_all(witness.factors_short) != witness.product:
        problems.append("short factorization does not multiply to the product")
    if cat_all(witness.factors_long) != witness.product:
        problems.append("long factorization does not multiply to the product")
    for label, factors in (("short", witness.factors_short), ("long", witness.factors_long)):
        for f in factors:
            verdict = is_atom(ctx, f)
            if not verdict.atom:
                problems.append(f"{label} factor {f.format(ctx)} is not an atom")
    return problems


def _pair(ctx: GroupCtx, g: Element, h: Element) -> Sequence:
    return Sequence.from_elements(ctx, [g, h])


def build_rho_witness(ctx: GroupCtx, kind: str) -> ElasticityWitness:
    """Deterministic witnesses for the even/odd elasticity lower bounds.

    ``rho2``: S . S^(-1) factors as two maximal atoms and as 2q inverse
    pairs, so 2q lies in the union of sets of lengths containing 2.
    ``rho3``: three atoms of lengths (2q, 2q, 4) refactor into 2q+2 atoms of
    length two, so 2q+2 lies in the union containing 3.
    """
    x: Element = (1, 0)
    y: Element = (0, 1)
    q, p = ctx.q, ctx.p
    s_eff = pair_residue(ctx, x, y)
    sigma = pow(s_eff, p - 1, q)
    x_inv = ctx.inv(x)
    y_inv = ctx.inv(y)
    if kind == "rho2":
        base = extremal_atom(ctx, x, y).sequence
        mirrored = base.inverse(ctx)
        product = base.cat(mirrored)
        long_factors = tuple(
            Sequence([(idx, 1), (ctx.inv_table[idx], 1)]) for idx in base.indices()
        )
        witness = ElasticityWitness(product, (base, mirrored), long_factors)
    elif kind == "rho3":
        closer = ctx.mul(x_inv, ctx.power(y, sigma + 1))
        s1 = Sequence(
            [(ctx.idx(y), 2 * q - 2), (ctx.idx(x), 1), (ctx.idx(closer), 1)]
        )
        s2 = Sequence(
            [
                (ctx.idx(y_inv), 2 * q - 2),
                (ctx.idx(ctx.mul(x_inv, y_inv)), 1),
                (ctx.idx(ctx.mul(x, y_inv)), 1),
            ]
        )
        s3 = Sequence.from_elements(
            ctx,
            [
                x_inv,
                ctx.mul(x, ctx.power(y, (-s_eff - 1) % q)),
                ctx.mul(x, ctx.power(y, s_eff)),
                ctx.mul(x_inv, ctx.power(y, sigma)),
            ],
        )
        u1 = _pair(ctx, x, x_inv)
        u2 = _pair(ctx, closer, ctx.mul(x, ctx.power(y, (-s_eff - 1) % q)))
        u3 = _pair(ctx, ctx.mul(x_inv, y_inv), ctx.mul(x, ctx.power(y, s_eff)))
        u4 = _pair(ctx, ctx.mul(x_inv, ctx.power(y, sigma)), ctx.mul(x, y_inv))
        u5 = _pair(ctx, y, y_inv)
        product = cat_all([s1, s2, s3])
        long_factors = (u1, u2, u3, u4) + (u5,) * (2 * q - 2)
        witness = ElasticityWitness(product, (s1, s2, s3), long_factors)
    else:
        raise ValueError(f"unknown witness kind {kind!r}")
    problems = verify_elasticity_witness(ctx, witness)
    if problems:
        raise AssertionError("; ".join(problems))
    return witness


# -- elasticity calculator ---------------------------------------------------------


@dataclass(frozen=True)
class ElasticityTable:
    d_constant: int
    k: int
    rho_even: int
    rho_odd_bounds: tuple[int, int]
    rho_limit: int
    lambda_table: dict[int, tuple[int, int]]

    def to_payload(self) -> dict:
        return {
            "D": self.d_constant,
            "k": self.k,
            "rho_even": self.rho_even,
            "rho_odd_bounds": list(self.rho_odd_bounds),
            "rho_limit": self.rho_limit,
            "lambda_table": {str(n): list(v) for n, v in sorted(self.lambda_table.items())},
        }


def elasticity_calculator(
    d_constant: int,
    k: int,
    *,
    max_lambda_index: int | None = None,
    rho_odd_known: dict[int, int] | None = None,
) -> ElasticityTable:
    """Closed-form elasticities for a group with even maximal atom length D.

    rho_{2k} = k*D exactly; rho_{2k+1} is pinned to [k*D+2, k*D+D/2-1].
    The lambda table maps n = l*D + j to its value (as a (lo, hi) range,
    collapsed when the bounds determine it or when rho_{2l+1} is supplied):
    2l for j = 0, 2l+1 for j in [1, rho_{2l+1}-l*D], 2l+2 up to j = D-1.
    """
    if d_constant % 2 != 0 or d_constant < 4:
        raise ValueError(f"even D >= 4 required, got {d_constant}")
    if k < 1:
        raise ValueError(f"k >= 1 required, got {k}")
    d = d_constant
    rho_even = k * d
    rho_odd_bounds = (k * d + 2, k * d + d // 2 - 1)
    max_index = max_lambda_index if max_lambda_index is not None else 2 * d
    rho_odd_known = rho_odd_known or {}
    table: dict[int, tuple[int, int]] = {}
    for n in range(1, max_index + 1):
        ell, j = divmod(n, d)
        if j == 0:
            table[n] = (2 * ell, 2 * ell)
        elif ell == 0:
            # One atom refactors only as itself, so j = 1 gives 1.
            table[n] = (1, 1) if j == 1 else (2, 2)
        else:
            rho = rho_odd_known.get(ell)
            if rho is not None:
                value = 2 * ell + 1 if j <= rho - ell * d else 2 * ell + 2
                table[n] = (value, value)
            elif j <= 2:
                table[n] = (2 * ell + 1, 2 * ell + 1)
            elif j >= d // 2:
                table[n] = (2 * ell + 2, 2 * ell + 2)
            else:
                table[n] = (2 * ell + 1, 2 * ell + 2)
    return ElasticityTable(
        d_constant=d,
        k=k,
        rho_even=rho_even,
        rho_odd_bounds=rho_odd_bounds,
        rho_limit=d // 2,
        lambda_table=table,
    )


# -- bounded unions of sets of lengths ----------------------------------------------


def atoms_ladder(ctx: GroupCtx) -> dict[int, Sequence]:
    """One verified atom of every length from 2 to 2q.

    Lengths up to q use constant-power atoms inside <a>; longer lengths use
    y^[l-2].x.(x^-1 y^c) with the closing exponent found by direct search.
    """
    q = ctx.q
    y_idx = 1
    x: Element = (1, 0)
    x_idx = ctx.idx(x)
    x_inv = ctx.inv(x)
    ladder: dict[int, Sequence] = {}
    for ell in range(2, q + 1):
        seq = Sequence([(y_idx, ell - 1), (q - ell + 1, 1)])
        if is_atom(ctx, seq).atom:
            ladder[ell] = seq
    for ell in range(q + 1, 2 * q + 1):
        for c in range(q):
            closer = ctx.mul(x_inv, (0, c))
            seq = Sequence([(y_idx, ell - 2), (x_idx, 1), (ctx.idx(closer), 1)])
            if is_atom(ctx, seq).atom:
                ladder[ell] = seq
                break
    missing = [ell for ell in range(2, 2 * q + 1) if ell not in ladder]
    if missing:
        raise AssertionError(f"no ladder atom found for lengths {missing}")
    return ladder


def default_atom_pool(ctx: GroupCtx) -> list[Sequence]:
    pool: set[Sequence] = set()
    for seq in atoms_ladder(ctx).values():
        pool.add(seq)
        pool.add(seq.inverse(ctx))
    rho3 = build_rho_witness(ctx, "rho3")
    pool.update(rho3.factors_short)
    pool.update(rho3.factors_long)
    return sorted(pool, key=lambda s: (len(s), s.entries))


@dataclass
class UkResult:
    """A certified subset of the union of sets of lengths containing k.

    Always a lower approximation: every reported length carries an explicit
    two-sided witness, and no claim of completeness is made.
    """

    k: int
    values: frozenset[int]
    witnesses: dict[int, ElasticityWitness]
    complete: bool
    budget_exhausted: bool


def uk_bounded(
    ctx: GroupCtx,
    k: int,
    *,
    pool: list[Sequence] | None = None,
    max_products: int = 64,
    state_cap: int = 1 << 20,
    seed: int = 0,
) -> UkResult:
    """Witnessed lengths realizable alongside a factorization into k atoms.

    Products of k pool atoms are expanded through the exact length-set DP
    while the budget lasts; mirrored products A . A^(-1) (padded with inverse
    pairs) are tried first since they realize the extreme refactorizations.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        base = pool[0] if pool else extremal_atom(ctx, (1, 0), (0, 1)).sequence
        witness = ElasticityWitness(base, (base,), (base,))
        return UkResult(1, frozenset({1}), {1: witness}, complete=False, budget_exhausted=False)
    if pool is None:
        pool = default_atom_pool(ctx)
    pair = Sequence([(ctx.idx((1, 0)), 1), (ctx.inv_table[ctx.idx((1, 0))], 1)])
    products: list[tuple[Sequence, ...]] = []
    for atom in pool:
        factors = (atom, atom.inverse(ctx)) + (pair,) * (k - 2)
        products.append(factors)
    if k == 3:
        rho3 = build_rho_witness(ctx, "rho3")
        products.insert(0, rho3.factors_short)
    import itertools

    extra = itertools.combinations_with_replacement(pool, k)
    values: set[int] = set()
    witnesses: dict[int, ElasticityWitness] = {}
    budget_exhausted = False
    used = 0
    for factors in itertools.chain(products, extra):
        if used >= max_products:
            budget_exhausted = True
            break
        used += 1
        product = cat_all(factors)
        result = length_set_bounded(ctx, product, max_states=state_cap, seed=seed)
        if not result.exact and not result.lengths:
            budget_exhausted = True
            continue
        for ell in result.lengths:
            if ell in witnesses:
                continue
            long_side = result.factorization(ell)
            if long_side is None:
                continue
            witnesses[ell] = ElasticityWitness(product, tuple(factors), long_side)
            values.add(ell)
    return UkResult(
        k=k,
        values=frozenset(values),
        witnesses=witnesses,
        complete=False,
        budget_exhausted=budget_exhausted,
    )


def order_p_subgroups(ctx: GroupCtx) -> list[frozenset[int]]:
    subs = {
        ctx.subgroup_generated_idx({idx})
        for idx in ctx.outside_commutator_indices
    }
    return sorted(subs, key=sorted)


def max_order_p_multiplicity(ctx: GroupCtx, seq: Sequence) -> int:
    """max_H v_H(S) over the order-p subgroups H."""
    return max(seq.count_in(sub) for sub in order_p_subgroups(ctx))
