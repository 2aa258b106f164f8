import itertools
import math
import os
import random

import pytest

from prodone.enumeration import (
    Stratum,
    StratumSpace,
    atom_search,
    canonical_form,
    classify_candidate,
    digest_add,
    digest_empty,
    digest_hex,
    digest_merge,
    enumerate_stratum,
    load_checkpoint,
    make_shards,
    multiset_count,
    next_multiset,
    orbit,
    rank_multiset,
    run_sharded,
    unrank_multiset,
)
from prodone.group import automorphisms
from prodone.sequences import Sequence, is_atom


# -- ranking ------------------------------------------------------------


@pytest.mark.parametrize("n,k", [(1, 1), (4, 3), (6, 2), (5, 5), (7, 1), (6, 0)])
def test_rank_unrank_match_lex_order(n, k):
    expected = list(itertools.combinations_with_replacement(range(n), k))
    assert multiset_count(n, k) == len(expected)
    for rank, tup in enumerate(expected):
        assert rank_multiset(tup, n) == rank
        assert unrank_multiset(rank, n, k) == tup
    cursor = list(expected[0])
    walked = [tuple(cursor)]
    while next_multiset(cursor, n):
        walked.append(tuple(cursor))
    assert walked == expected


# -- strata --------------------------------------------------------------


def test_stratum_sizes(ctx372):
    assert StratumSpace(ctx372, Stratum(length=2, k=None)).total == 210
    space = StratumSpace(ctx372, Stratum(length=14, k=2))
    assert space.total == math.comb(15, 2) * math.comb(17, 5) == 649_740
    assert StratumSpace(ctx372, Stratum(length=3, k=5)).total == 0


def test_enumerate_visits_each_multiset_once(ctx372):
    seen = []
    enumerate_stratum(ctx372, Stratum(length=2, k=None), lambda c, ok: seen.append(c))
    assert len(seen) == 210
    assert len(set(seen)) == 210
    assert seen == sorted(seen)
    brute = [
        tuple(sorted(c))
        for c in itertools.combinations_with_replacement(range(1, 21), 2)
    ]
    assert seen == sorted(brute)


def test_enumerate_fixed_k_contents(ctx372):
    seen = []
    enumerate_stratum(ctx372, Stratum(length=3, k=1), lambda c, ok: seen.append(c))
    assert len(seen) == StratumSpace(ctx372, Stratum(length=3, k=1)).total
    for content in seen:
        assert sum(1 for i in content if i >= 7) == 1
        assert all(i != 0 for i in content)
        assert content == tuple(sorted(content))
    assert len(set(seen)) == len(seen)


def test_tau_filter(ctx372):
    space = StratumSpace(ctx372, Stratum(length=2, k=2))
    passed = [c for _, c in space.iter_range(0, space.total) if space.passes_filters(c)]
    # Pairs of outer terms with t-degrees summing to 0 mod 3: one from each class.
    assert len(passed) == 49
    for c in passed:
        assert {ctx372.tau_degree_idx(i) for i in c} == {1, 2}


def test_shards_partition(ctx372):
    space = StratumSpace(ctx372, Stratum(length=14, k=2))
    shards = make_shards(space.total, 8)
    assert shards[0].start_rank == 0 and shards[-1].end_rank == space.total
    assert sum(s.end_rank - s.start_rank for s in shards) == space.total
    sizes = [s.end_rank - s.start_rank for s in shards]
    assert max(sizes) - min(sizes) <= 1
    for left, right in zip(shards, shards[1:]):
        assert left.end_rank == right.start_rank


def test_shard_iteration_matches_slices(ctx372):
    stratum = Stratum(length=3, k=1)
    space = StratumSpace(ctx372, stratum)
    whole = [c for _, c in space.iter_range(0, space.total)]
    pieces = []
    for shard in make_shards(space.total, 7):
        pieces.extend(c for _, c in space.iter_range(shard.start_rank, shard.end_rank))
    assert pieces == whole


# -- candidate classification -----------------------------------------------


def test_classify_agrees_with_engine_small(ctx372):
    rng = random.Random(5)
    for _ in range(300):
        content = tuple(sorted(rng.choices(range(1, 21), k=rng.randrange(2, 7))))
        kind, _method, _verdict = classify_candidate(ctx372, content)
        verdict = is_atom(ctx372, Sequence.from_indices(content))
        if kind == "atom":
            assert verdict.atom
        elif kind == "non_atom":
            assert verdict.product_one and not verdict.atom
        else:
            assert kind == "not_product_one" and not verdict.product_one


def test_classify_agrees_with_engine_length_14(ctx372):
    rng = random.Random(6)
    space = StratumSpace(ctx372, Stratum(length=14, k=2))
    for _ in range(40):
        content = space.candidate_at(rng.randrange(space.total))
        kind, _method, _ = classify_candidate(ctx372, content)
        verdict = is_atom(ctx372, Sequence.from_indices(content))
        expected = (
            "atom" if verdict.atom
            else "non_atom" if verdict.product_one
            else "not_product_one"
        )
        assert kind == expected


# -- searches -----------------------------------------------------------------


def test_atom_search_length_two(ctx372):
    result = atom_search(ctx372, Stratum(length=2, k=None))
    assert len(result.atoms) == 10
    for seq in result.atoms:
        a, b = seq.indices()
        assert ctx372.inv_table[a] == b
    assert result.counters.visited == 210


def test_prune_soundness_small_lengths(ctx372):
    # Filters on (identity excluded, residue 0, stratified) find exactly the
    # atoms that a filter-free scan finds, for every length <= 6.
    for length in (2, 3, 4, 5, 6):
        unfiltered = atom_search(
            ctx372,
            Stratum(length=length, k=None, exclude_identity=False, tau_residue=None),
        )
        baseline = {seq.entries for seq in unfiltered.atoms}
        stratified = set()
        for k in range(length + 1):
            result = atom_search(ctx372, Stratum(length=length, k=k))
            stratified.update(seq.entries for seq in result.atoms)
        assert stratified == baseline


def test_pof_dfs_prune_never_loses_free_sequences(ctx372):
    # The DFS prunes when a sub-multiset multiplies to the identity in sorted
    # order.  That can over-visit (a later term may sit mid-ordering) but must
    # never skip a product-one-free multiset; validate against an unpruned scan.
    from prodone.sequences import classify

    ground = list(range(1, 21))
    tables = [ctx372.right_shift_table(g) for g in ground]
    shift = ctx372.shift_mask
    reached = set()

    def extend(start, sorted_products, chosen):
        if len(chosen) == 5:
            return
        for i in range(start, len(ground)):
            extended = sorted_products | shift(sorted_products | 1, tables[i])
            if extended & 1:
                continue
            chosen.append(ground[i])
            reached.add(tuple(chosen))
            extend(i, extended, chosen)
            chosen.pop()

    extend(0, 0, [])
    brute = set()
    for length in range(1, 6):
        for combo in itertools.combinations_with_replacement(ground, length):
            if classify(ctx372, Sequence.from_indices(combo)).product_one_free:
                brute.add(combo)
    assert brute <= reached
    # The walk plus the exact verification step identifies precisely the
    # product-one-free multisets.
    verified = {
        c for c in reached
        if classify(ctx372, Sequence.from_indices(c)).product_one_free
    }
    assert verified == brute


def test_atom_search_constant_runs_at_length_seven(ctx372):
    result = atom_search(ctx372, Stratum(length=7, k=0))
    assert sorted(seq.format(ctx372) for seq in result.atoms) == [
        f"(0,{b})^7" for b in range(1, 7)
    ]
    reps = atom_search(ctx372, Stratum(length=7, k=0), mode="up_to_aut")
    assert len(reps.atoms) == 1


def test_sharded_run_matches_single_run(ctx372):
    stratum = Stratum(length=6, k=2)
    single = atom_search(ctx372, stratum)
    merged = run_sharded(ctx372, stratum, n_shards=5, workers=1)
    assert merged.digest == single.digest
    assert merged.counters.to_dict() == single.counters.to_dict()
    assert [s.entries for s in merged.atoms] == sorted(s.entries for s in single.atoms)
    two_workers = run_sharded(ctx372, stratum, n_shards=4, workers=2)
    assert two_workers.digest == single.digest


def test_checkpoint_resume_equals_uninterrupted(ctx372, tmp_path):
    stratum = Stratum(length=5, k=1)
    baseline = atom_search(ctx372, stratum)
    path = os.path.join(tmp_path, "ckpt.json")
    chunks = 0
    while True:
        result = atom_search(
            ctx372, stratum, checkpoint_path=path, checkpoint_every=97,
            max_candidates=400,
        )
        chunks += 1
        if result.complete:
            break
        assert chunks < 100
    assert chunks > 1  # the run really was interrupted and resumed
    assert result.digest == baseline.digest
    assert result.counters.to_dict() == baseline.counters.to_dict()
    record = load_checkpoint(path)
    assert record["complete"]
    counters = record["counters"]
    assert counters["visited"] == StratumSpace(ctx372, stratum).total
    assert counters["filtered_out"] + counters["checked"] == counters["visited"]


def test_checkpoint_rejects_mismatched_search(ctx372, tmp_path):
    stratum = Stratum(length=4, k=1)
    path = os.path.join(tmp_path, "ckpt.json")
    atom_search(ctx372, stratum, checkpoint_path=path, max_candidates=50)
    with pytest.raises(ValueError):
        atom_search(ctx372, Stratum(length=5, k=1), checkpoint_path=path)
    with pytest.raises(ValueError):
        atom_search(ctx372, stratum, checkpoint_path=path, seed=99)


def test_digest_is_order_independent():
    a = digest_add(digest_empty(), "first")
    ab = digest_add(a, "second")
    ba = digest_add(digest_add(digest_empty(), "second"), "first")
    assert ab == ba
    assert digest_merge(a, digest_add(digest_empty(), "second")) == ab
    assert len(digest_hex(ab)) == 64


# -- canonicalization -----------------------------------------------------------


def test_canonical_form_orbit_constancy(ctx372):
    auts = automorphisms(ctx372)
    rng = random.Random(2)
    for _ in range(25):
        seq = Sequence.from_indices(rng.choices(range(1, 21), k=5))
        canon = canonical_form(ctx372, seq, auts)
        assert canonical_form(ctx372, canon, auts) == canon
        for table in rng.sample(auts, 5):
            assert canonical_form(ctx372, seq.map_indices(table), auts) == canon


def test_extremal_orbit_size_divides_aut_order(ctx372):
    auts = automorphisms(ctx372)
    seq = Sequence.parse(ctx372, "(0,1)^12,(1,0),(2,5)")
    size = len(orbit(ctx372, seq, auts))
    assert len(auts) % size == 0
