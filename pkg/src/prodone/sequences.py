"""Multiset sequences over a group and the subset-product DP engine.

A sequence is an unordered multiset of group elements.  The engine answers,
for a sequence S:

* ``pi_set``         -- the set of full ordered products over all orderings,
* ``subproducts_set``-- the union of those sets over all nonempty subsequences,
* ``classify``       -- the product-one / product-one-free flags,
* ``is_atom``        -- whether S is a minimal product-one sequence, with a
                        re-checkable split witness when it is not,
* ``length_set_bounded`` -- the set of factorization lengths into atoms.

All of these are read off one graded dynamic program over the lattice of
sub-multisets: reach(T) = union over g in supp(T) of reach(T - g) * g, with
reach(empty) = {identity}.  States are mixed-radix indices over the
multiplicity vector, so the table has prod_g (v_g + 1) entries; product sets
are bitsets packed into Python ints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .group import Element, GroupCtx

#: Default cap on DP states.  A sequence of length 2q with all-distinct
#: support would need 2^(2q) states, which must fail loudly, not thrash.
DEFAULT_STATE_CAP = 1 << 26


class ResourceCapError(RuntimeError):
    """The DP state count would exceed the configured cap (sequence too wide)."""


class Sequence:
    """A multiset of group elements, stored as sorted (index, multiplicity) pairs."""

    __slots__ = ("entries",)

    def __init__(self, entries: Iterable[tuple[int, int]]):
        merged: dict[int, int] = {}
        for idx, mult in entries:
            if mult < 0:
                raise ValueError(f"negative multiplicity {mult} for element index {idx}")
            if mult:
                merged[idx] = merged.get(idx, 0) + mult
        self.entries: tuple[tuple[int, int], ...] = tuple(sorted(merged.items()))

    @classmethod
    def empty(cls) -> "Sequence":
        return cls(())

    @classmethod
    def from_indices(cls, indices: Iterable[int]) -> "Sequence":
        return cls((idx, 1) for idx in indices)

    @classmethod
    def from_elements(cls, ctx: GroupCtx, elems: Iterable[Element]) -> "Sequence":
        return cls.from_indices(ctx.idx(g) for g in elems)

    # -- text form -------------------------------------------------------

    @classmethod
    def parse(cls, ctx: GroupCtx, text: str) -> "Sequence":
        """Parse the comma-separated term format, e.g. "(0,1)^12,(1,0),(2,5)"."""
        from .group import parse_element

        text = text.strip()
        if not text:
            return cls.empty()
        terms: list[tuple[int, int]] = []
        depth = 0
        start = 0
        chunks = []
        for pos, ch in enumerate(text):
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            elif ch == "," and depth == 0:
                chunks.append(text[start:pos])
                start = pos + 1
        chunks.append(text[start:])
        for chunk in chunks:
            chunk = chunk.strip()
            if not chunk:
                raise ValueError(f"empty term in sequence literal {text!r}")
            if "^" in chunk and not chunk.startswith("t^"):
                elem_text, _, mult_text = chunk.rpartition("^")
                mult = int(mult_text)
            else:
                elem_text, mult = chunk, 1
            g = parse_element(ctx, elem_text)
            terms.append((ctx.idx(g), mult))
        return cls(terms)

    def format(self, ctx: GroupCtx) -> str:
        from .group import format_element

        parts = []
        for idx, mult in self.entries:
            base = format_element(ctx.coords(idx))
            parts.append(base if mult == 1 else f"{base}^{mult}")
        return ",".join(parts)

    # -- basic multiset algebra -------------------------------------------

    def __len__(self) -> int:
        return sum(m for _, m in self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, Sequence) and self.entries == other.entries

    def __lt__(self, other: "Sequence") -> bool:
        return self.entries < other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Sequence({self.entries!r})"

    @property
    def is_empty(self) -> bool:
        return not self.entries

    def multiplicity(self, idx: int) -> int:
        for i, m in self.entries:
            if i == idx:
                return m
        return 0

    def support(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.entries)

    def indices(self) -> tuple[int, ...]:
        out: list[int] = []
        for i, m in self.entries:
            out.extend([i] * m)
        return tuple(out)

    def cat(self, other: "Sequence") -> "Sequence":
        return Sequence(self.entries + other.entries)

    def contains(self, sub: "Sequence") -> bool:
        mine = dict(self.entries)
        return all(mine.get(i, 0) >= m for i, m in sub.entries)

    def remove(self, sub: "Sequence") -> "Sequence":
        mine = dict(self.entries)
        for i, m in sub.entries:
            have = mine.get(i, 0)
            if have < m:
                raise ValueError("cannot remove: not a subsequence")
            mine[i] = have - m
        return Sequence(mine.items())

    def count_in(self, indices: Iterable[int]) -> int:
        wanted = set(indices)
        return sum(m for i, m in self.entries if i in wanted)

    def map_indices(self, table) -> "Sequence":
        return Sequence((table[i], m) for i, m in self.entries)

    def inverse(self, ctx: GroupCtx) -> "Sequence":
        return Sequence((ctx.inv_table[i], m) for i, m in self.entries)


def cat_all(seqs: Iterable[Sequence]) -> Sequence:
    entries: list[tuple[int, int]] = []
    for seq in seqs:
        entries.extend(seq.entries)
    return Sequence(entries)


@dataclass(frozen=True)
class ProductSet:
    """A subset of the group, packed one bit per element index."""

    mask: int
    group_order: int

    @classmethod
    def from_indices(cls, group_order: int, indices: Iterable[int]) -> "ProductSet":
        mask = 0
        for i in indices:
            mask |= 1 << i
        return cls(mask, group_order)

    def __contains__(self, idx: int) -> bool:
        return bool((self.mask >> idx) & 1)

    def __iter__(self) -> Iterator[int]:
        mask = self.mask
        while mask:
            low = mask & -mask
            yield low.bit_length() - 1
            mask ^= low

    def __len__(self) -> int:
        return self.mask.bit_count()

    def indices(self) -> tuple[int, ...]:
        return tuple(self)

    def union(self, other: "ProductSet") -> "ProductSet":
        return ProductSet(self.mask | other.mask, self.group_order)

    def intersection(self, other: "ProductSet") -> "ProductSet":
        return ProductSet(self.mask & other.mask, self.group_order)

    def product(self, ctx: GroupCtx, other: "ProductSet") -> "ProductSet":
        """The product-set {a*b : a in self, b in other}."""
        out = 0
        for a in self:
            for b in other:
                out |= 1 << ctx.mul_idx(a, b)
        return ProductSet(out, self.group_order)

    @property
    def contains_identity(self) -> bool:
        return bool(self.mask & 1)

    def is_subset_of(self, other: "ProductSet") -> bool:
        return self.mask & ~other.mask == 0


@dataclass(frozen=True)
class SequenceClass:
    product_one: bool
    product_one_free: bool


@dataclass(frozen=True)
class AtomVerdict:
    """Atom/non-atom classification with a re-checkable split witness.

    When ``atom`` is false but ``product_one`` is true, ``witness`` holds the
    split (T1, T2) with S = T1.T2 and both sides product-one; T1 is the
    lexicographically least such part by (length, sorted content).
    """

    product_one: bool
    atom: bool
    witness: tuple[Sequence, Sequence] | None = None


class _Lattice:
    """Reach masks over the mixed-radix lattice of sub-multisets of a sequence."""

    def __init__(self, ctx: GroupCtx, seq: Sequence, state_cap: int):
        self.ctx = ctx
        self.seq = seq
        self.support = [i for i, _ in seq.entries]
        self.mults = [m for _, m in seq.entries]
        self.width = len(self.support)
        nstates = 1
        for m in self.mults:
            nstates *= m + 1
            if nstates > state_cap:
                raise ResourceCapError(
                    f"sequence too wide: {nstates}+ DP states exceed cap {state_cap}"
                )
        self.nstates = nstates
        self.full = nstates - 1
        strides = []
        acc = 1
        for m in self.mults:
            strides.append(acc)
            acc *= m + 1
        self.strides = strides
        self._fill()

    def _fill(self) -> None:
        ctx = self.ctx
        shift = ctx.shift_mask
        tables = [ctx.right_shift_table(g) for g in self.support]
        reach = [0] * self.nstates
        lengths = [0] * self.nstates
        reach[0] = 1
        digits = [0] * self.width
        mults = self.mults
        strides = self.strides
        width = self.width
        for t in range(1, self.nstates):
            i = 0
            while digits[i] == mults[i]:
                digits[i] = 0
                i += 1
            digits[i] += 1
            lengths[t] = lengths[t - strides[i]] + 1
            acc = 0
            for j in range(width):
                if digits[j]:
                    acc |= shift(reach[t - strides[j]], tables[j])
            reach[t] = acc
        self.reach = reach
        self.lengths = lengths

    def digits_of(self, t: int) -> list[int]:
        out = []
        for m in self.mults:
            t, d = divmod(t, m + 1)
            out.append(d)
        return out

    def seq_of(self, t: int) -> Sequence:
        return Sequence(zip(self.support, self.digits_of(t)))

    def product_one_states(self) -> list[int]:
        return [t for t in range(1, self.nstates) if self.reach[t] & 1]

    def sub_states(self, t: int) -> Iterator[int]:
        """All u with u | t componentwise, as linear state indices."""
        digits = self.digits_of(t)
        strides = self.strides

        def rec(pos: int, acc: int):
            if pos == len(digits):
                yield acc
                return
            for d in range(digits[pos] + 1):
                yield from rec(pos + 1, acc + d * strides[pos])

        yield from rec(0, 0)


def _lattice(ctx: GroupCtx, seq: Sequence, state_cap: int | None) -> _Lattice:
    return _Lattice(ctx, seq, DEFAULT_STATE_CAP if state_cap is None else state_cap)


def pi_set(ctx: GroupCtx, seq: Sequence, *, state_cap: int | None = None) -> ProductSet:
    """The set of full ordered products of ``seq`` (identity for the empty one)."""
    lattice = _lattice(ctx, seq, state_cap)
    return ProductSet(lattice.reach[lattice.full], ctx.n)


def subproducts_set(ctx: GroupCtx, seq: Sequence, *, state_cap: int | None = None) -> ProductSet:
    """Union of the product sets of all nonempty subsequences."""
    if seq.is_empty:
        raise ValueError("subproducts of the empty sequence are undefined")
    lattice = _lattice(ctx, seq, state_cap)
    mask = 0
    for t in range(1, lattice.nstates):
        mask |= lattice.reach[t]
    return ProductSet(mask, ctx.n)


def classify(ctx: GroupCtx, seq: Sequence, *, state_cap: int | None = None) -> SequenceClass:
    if seq.is_empty:
        raise ValueError("cannot classify the empty sequence")
    lattice = _lattice(ctx, seq, state_cap)
    product_one = bool(lattice.reach[lattice.full] & 1)
    free = True
    for t in range(1, lattice.nstates):
        if lattice.reach[t] & 1:
            free = False
            break
    return SequenceClass(product_one=product_one, product_one_free=free)


def is_atom(ctx: GroupCtx, seq: Sequence, *, state_cap: int | None = None) -> AtomVerdict:
    """Minimal-product-one check via a single DP table answering both split sides."""
    if seq.is_empty:
        raise ValueError("the empty sequence is not classified")
    lattice = _lattice(ctx, seq, state_cap)
    reach = lattice.reach
    full = lattice.full
    if not reach[full] & 1:
        return AtomVerdict(product_one=False, atom=False)
    best_key: tuple[int, tuple[tuple[int, int], ...]] | None = None
    best_state = -1
    lengths = lattice.lengths
    for t in range(1, full):
        if reach[t] & 1 and reach[full - t] & 1:
            if best_key is not None and lengths[t] > best_key[0]:
                continue
            key = (lengths[t], lattice.seq_of(t).entries)
            if best_key is None or key < best_key:
                best_key = key
                best_state = t
    if best_state < 0:
        return AtomVerdict(product_one=True, atom=True)
    part = lattice.seq_of(best_state)
    return AtomVerdict(product_one=True, atom=False, witness=(part, seq.remove(part)))


def stat_counts(ctx: GroupCtx, seq: Sequence, members: Iterable[Element]) -> int:
    """Number of terms of ``seq`` lying in the element set ``members``."""
    return seq.count_in(ctx.idx(g) for g in members)


@dataclass
class LengthSetResult:
    """Factorization lengths of a product-one sequence into atoms.

    ``exact`` is true when the full divisor-lattice DP ran; otherwise the
    lengths are a witnessed lower approximation found by bounded peeling.
    """

    lengths: frozenset[int]
    exact: bool
    _witnesses: dict[int, tuple[Sequence, ...]] = field(default_factory=dict, repr=False)

    def factorization(self, length: int) -> tuple[Sequence, ...] | None:
        return self._witnesses.get(length)


def length_set_bounded(
    ctx: GroupCtx,
    seq: Sequence,
    *,
    max_states: int = 1 << 20,
    peel_tries: int = 200,
    seed: int = 0,
) -> LengthSetResult:
    """The set of factorization lengths of ``seq`` into atoms.

    Exact when the sub-multiset lattice fits in ``max_states``; otherwise a
    flagged lower approximation is produced by random peeling (every reported
    length still carries an explicit factorization).
    """
    if seq.is_empty:
        raise ValueError("the empty sequence has no factorization lengths")
    try:
        lattice = _Lattice(ctx, seq, max_states)
    except ResourceCapError:
        return _length_set_by_peeling(ctx, seq, peel_tries, seed)

    reach = lattice.reach
    po_states = [t for t in range(1, lattice.nstates) if reach[t] & 1]
    if lattice.full not in po_states:
        raise ValueError("sequence is not product-one")
    po_set = set(po_states)
    # Atom states: product-one with no proper nonempty split into two
    # product-one parts (the complement within t is t - u linearly).
    atoms: list[int] = []
    for t in po_states:
        minimal = True
        for u in lattice.sub_states(t):
            if u == 0 or u == t:
                continue
            if u in po_set and (t - u) in po_set:
                minimal = False
                break
        if minimal:
            atoms.append(t)
    atom_digits = [lattice.digits_of(a) for a in atoms]
    # Forward DP over the divisor lattice: lengths_at[t] = achievable counts.
    lengths_at: dict[int, set[int]] = {0: {0}}
    choice: dict[tuple[int, int], int] = {}
    width = lattice.width
    # Process states in increasing linear order; adding an atom always
    # increases the index, so a simple sorted sweep is enough.
    all_states = sorted(_reachable_states(lattice, atoms, atom_digits))
    for t in all_states:
        if t == 0:
            continue
        td = lattice.digits_of(t)
        found: set[int] = set()
        for a, ad in zip(atoms, atom_digits):
            if a > t:
                break
            ok = True
            for j in range(width):
                if ad[j] > td[j]:
                    ok = False
                    break
            if not ok:
                continue
            prev = lengths_at.get(t - a)
            if not prev:
                continue
            for val in prev:
                if val + 1 not in found:
                    found.add(val + 1)
                    choice[(t, val + 1)] = a
        if found:
            lengths_at[t] = found
    full_lengths = lengths_at.get(lattice.full, set())
    witnesses: dict[int, tuple[Sequence, ...]] = {}
    for ell in full_lengths:
        factors = []
        t, val = lattice.full, ell
        while val:
            a = choice[(t, val)]
            factors.append(lattice.seq_of(a))
            t -= a
            val -= 1
        witnesses[ell] = tuple(factors)
    return LengthSetResult(frozenset(full_lengths), exact=True, _witnesses=witnesses)


def _reachable_states(lattice: _Lattice, atoms: list[int], atom_digits: list[list[int]]) -> set[int]:
    """States expressible as sums of atom states (digitwise-valid)."""
    reached = {0}
    frontier = [0]
    mults = lattice.mults
    width = lattice.width
    digit_cache = {0: [0] * width}
    while frontier:
        t = frontier.pop()
        td = digit_cache[t]
        for a, ad in zip(atoms, atom_digits):
            ok = True
            for j in range(width):
                if td[j] + ad[j] > mults[j]:
                    ok = False
                    break
            if not ok:
                continue
            nt = t + a
            if nt not in reached:
                reached.add(nt)
                digit_cache[nt] = [td[j] + ad[j] for j in range(width)]
                frontier.append(nt)
    return reached


def _length_set_by_peeling(ctx: GroupCtx, seq: Sequence, tries: int, seed: int) -> LengthSetResult:
    """Budget fallback: random product-one orderings cut at returns to the identity."""
    import hashlib
    import random

    lengths: set[int] = set()
    witnesses: dict[int, tuple[Sequence, ...]] = {}
    terms = list(seq.indices())
    mul_idx = ctx.mul_idx
    digest = hashlib.sha256(f"peel:{seed}:{terms}".encode()).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    for _ in range(tries):
        rng.shuffle(terms)
        acc = 0
        blocks: list[list[int]] = []
        current: list[int] = []
        for g in terms:
            acc = mul_idx(acc, g)
            current.append(g)
            if acc == 0:
                blocks.append(current)
                current = []
        if current or not blocks:
            continue
        factors: list[Sequence] = []
        ok = True
        try:
            for block in blocks:
                # Split blocks recursively until atomic.
                stack = [Sequence.from_indices(block)]
                while stack:
                    part = stack.pop()
                    verdict = is_atom(ctx, part, state_cap=1 << 18)
                    if verdict.atom:
                        factors.append(part)
                    elif verdict.witness is not None:
                        stack.extend(verdict.witness)
                    else:
                        ok = False
                        stack.clear()
                if not ok:
                    break
        except ResourceCapError:
            ok = False
        if ok and factors:
            ell = len(factors)
            if ell not in lengths:
                lengths.add(ell)
                witnesses[ell] = tuple(factors)
    return LengthSetResult(frozenset(lengths), exact=False, _witnesses=witnesses)
