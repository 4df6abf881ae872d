import time

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from txembed import walker
from txembed.evalbench.synth import gen_er_graph
from txembed.txgraph import DIRECTED_OUT, UNDIRECTED, TxGraph, TxRecord, aggregate
from txembed.walker import (
    DeadEnd,
    WalkConfig,
    WalkCorpus,
    amount_probs,
    blended_probs,
    generate_corpus,
    precompute_transitions,
    time_probs,
    uniform_probs,
    walk,
)


def star(amounts, stamps, extra=()):
    """Center "c" with leaves "x1".. in order; ``extra`` are filler records."""
    recs = [TxRecord("c", f"x{i + 1}", a, t) for i, (a, t) in enumerate(zip(amounts, stamps))]
    g = aggregate(recs + list(extra), UNDIRECTED)
    leaves = [g.index[f"x{i + 1}"] for i in range(len(amounts))]
    return g, g.index["c"], leaves


def ordered(g, u, probs, leaves):
    nbrs = [x for x, _, _ in g.neighbors(u)]
    return np.array([probs[nbrs.index(x)] for x in leaves])


def test_amount_probs_example():
    g, c, leaves = star([2, 3, 5], [1, 2, 3])
    np.testing.assert_allclose(ordered(g, c, amount_probs(g, c), leaves), [0.2, 0.3, 0.5],
                               rtol=0, atol=1e-15)


def test_single_neighbor():
    g, c, _ = star([7.5], [1])
    assert amount_probs(g, c).tolist() == [1.0]
    assert time_probs(g, c).tolist() == [1.0]


def test_zero_amounts_fall_back_to_uniform():
    g, c, leaves = star([0.0, 0.0, 0.0, 0.0], [1, 2, 3, 4])
    np.testing.assert_array_equal(amount_probs(g, c), np.full(4, 0.25))
    # zero amounts with a positive time bias: amount factor treated as constant
    w = np.sqrt(np.arange(1, 5))
    np.testing.assert_allclose(ordered(g, c, blended_probs(g, c, 0.5), leaves), w / w.sum(),
                               atol=1e-15)


def test_time_probs_ranks_one_three():
    filler = [TxRecord("p", "q", 1, 2)]
    g, c, leaves = star([1, 1], [1, 3], filler)
    np.testing.assert_allclose(ordered(g, c, time_probs(g, c), leaves), [0.25, 0.75], atol=1e-15)


def test_time_probs_ranks_one_two_three():
    g, c, leaves = star([1, 1, 1], [1, 2, 3])
    np.testing.assert_allclose(ordered(g, c, time_probs(g, c), leaves), [1 / 6, 2 / 6, 3 / 6],
                               atol=1e-15)


def test_time_probs_equal_merged_ranks():
    # undirected merge: both leaves end up with rank 2 edges into c? build it directly
    g = TxGraph.from_edges(["c", "x1", "x2"], [0, 0], [1, 2], [1.0, 1.0], [5, 5], UNDIRECTED)
    assert time_probs(g, 0).tolist() == [0.5, 0.5]


def test_blended_example_against_mpmath():
    # PA = {0.25, 0.75}; PT = {0.04, 0.96} from ranks 1 and 24
    filler = [TxRecord(f"p{i:02d}", f"q{i:02d}", 1, 1 + i) for i in range(1, 23)]
    g, c, leaves = star([1, 3], [1, 24], filler)
    np.testing.assert_allclose(ordered(g, c, amount_probs(g, c), leaves), [0.25, 0.75])
    np.testing.assert_allclose(ordered(g, c, time_probs(g, c), leaves), [0.04, 0.96])
    got = ordered(g, c, blended_probs(g, c, 0.5), leaves)
    mpmath.mp.dps = 50
    w = [mpmath.sqrt(mpmath.mpf(a) * mpmath.mpf(t)) for a, t in (("0.25", "0.04"), ("0.75", "0.96"))]
    oracle = [float(x / (w[0] + w[1])) for x in w]
    np.testing.assert_allclose(got, oracle, rtol=0, atol=1e-14)
    np.testing.assert_allclose(got, [0.10543, 0.89457], atol=1e-4)


def test_blended_endpoints_exact():
    g, c, _ = star([2, 3, 5, 0.1], [4, 1, 3, 2])
    assert np.array_equal(blended_probs(g, c, 1.0), amount_probs(g, c))
    assert np.array_equal(blended_probs(g, c, 0.0), time_probs(g, c))


def test_blended_rejects_bad_alpha():
    g, c, _ = star([1, 2], [1, 2])
    with pytest.raises(ValueError):
        blended_probs(g, c, 1.5)


def test_dead_end():
    g = aggregate([TxRecord("a", "b", 1, 1)], DIRECTED_OUT)
    with pytest.raises(DeadEnd):
        amount_probs(g, g.index["b"])


def test_underflow_uses_log_space():
    g, c, leaves = star([1e-300, 1e-300, 1e-290], [1, 2, 3])
    p = ordered(g, c, blended_probs(g, c, 1.0), leaves)
    assert np.all(np.isfinite(p)) and abs(p.sum() - 1) < 1e-12
    np.testing.assert_allclose(p, np.array([1e-10, 1e-10, 1.0]) / (1 + 2e-10), rtol=1e-9)


def test_alpha_monotonicity_on_conflicting_neighbors():
    # amount favors x4 (largest amount, earliest), time favors x1 (latest)
    g, c, leaves = star([1, 2, 3, 10], [40, 30, 20, 10])
    prev = -1.0
    for a in np.linspace(0, 1, 11):
        p = ordered(g, c, blended_probs(g, c, a), leaves)
        rel = p[3] / p[0]
        assert rel > prev
        prev = rel


def test_unit_attribute_er_equals_deepwalk():
    g = gen_er_graph(200, 6, seed=3)
    dw = precompute_transitions(g, WalkConfig(strategy="deepwalk"))
    for s in ("trans2vec", "amount_only", "time_only"):
        t = precompute_transitions(g, WalkConfig(strategy=s, alpha=0.3))
        assert np.array_equal(t.prob, dw.prob)
        assert np.array_equal(t.alias_prob, dw.alias_prob)
        assert np.array_equal(t.alias_idx, dw.alias_idx)


def test_amount_only_alias_expansion():
    from txembed.alias import expand_alias
    g, c, leaves = star([2, 3, 5], [1, 2, 3])
    t = precompute_transitions(g, WalkConfig(strategy="amount_only"))
    ap, ai = t.alias(c)
    np.testing.assert_allclose(ordered(g, c, expand_alias(ap, ai), leaves), [0.2, 0.3, 0.5],
                               atol=1e-15)


def test_deepwalk_regular_node_uniform():
    g, c, _ = star([5, 1, 9, 2, 4], [5, 1, 3, 2, 4])
    t = precompute_transitions(g, WalkConfig(strategy="deepwalk"))
    assert t.probs(c).tolist() == [0.2] * 5
    assert uniform_probs(g, c).tolist() == [0.2] * 5


def test_node2vec_second_order_weights():
    # triangle a-b-c plus pendant d on b; walking a->b, next from b
    g = aggregate([TxRecord("a", "b", 1, 1), TxRecord("b", "c", 1, 2), TxRecord("a", "c", 1, 3),
                   TxRecord("b", "d", 1, 4)], UNDIRECTED)
    cfg = WalkConfig(strategy="node2vec", p=0.25, q=0.75)
    t = precompute_transitions(g, cfg)
    p = t.edge_probs(g.index["a"], g.index["b"])
    nb = [x for x, _, _ in g.neighbors(g.index["b"])]
    w = {g.index["a"]: 1 / 0.25, g.index["c"]: 1.0, g.index["d"]: 1 / 0.75}
    oracle = np.array([w[x] for x in nb])
    np.testing.assert_allclose(p, oracle / oracle.sum(), atol=1e-15)
    with pytest.raises(KeyError):
        t.edge_probs(g.index["a"], g.index["d"])


def test_walk_length_zero():
    g, c, _ = star([1, 2], [1, 2])
    table = precompute_transitions(g, WalkConfig())
    assert walk(g, table, c, 0, 1) == [c]


def test_forced_walk_on_path():
    g = aggregate([TxRecord("a", "b", 1, 1)], UNDIRECTED)
    table = precompute_transitions(g, WalkConfig())
    a, b = g.index["a"], g.index["b"]
    assert walk(g, table, a, 3, 7) == [a, b, a, b]


def test_walk_truncates_at_dead_end():
    g = aggregate([TxRecord("a", "b", 1, 1)], DIRECTED_OUT)
    table = precompute_transitions(g, WalkConfig())
    assert walk(g, table, g.index["a"], 4, 0) == [g.index["a"], g.index["b"]]


def test_skewed_neighbor_frequency():
    g, c, leaves = star([999, 1], [1, 1])
    table = precompute_transitions(g, WalkConfig(strategy="amount_only"))
    corpus = generate_corpus(g, WalkConfig(strategy="amount_only", walks_per_node=100_000,
                                           walk_length=1, seed=11), table)
    from_c = corpus.walks[corpus.walks[:, 0] == c, 1]
    frac = np.mean(from_c == leaves[0])
    assert from_c.size == 100_000 and 0.996 <= frac <= 1.0


def test_corpus_counts_and_shape():
    g = gen_er_graph(10, 4, seed=1)
    corpus = generate_corpus(g, WalkConfig(walks_per_node=20, seed=2))
    assert len(corpus) == 200
    starts = np.sort(corpus.walks[:, 0])
    np.testing.assert_array_equal(starts, np.repeat(np.arange(10), 20))
    single = generate_corpus(g, WalkConfig(walks_per_node=1, walk_length=0))
    assert sorted(w[0] for w in single) == list(range(10)) and set(single.lengths) == {1}


def test_corpus_r_doubling_doubles_walks():
    g = gen_er_graph(30, 4, seed=0)
    a = generate_corpus(g, WalkConfig(walks_per_node=3))
    b = generate_corpus(g, WalkConfig(walks_per_node=6))
    assert len(b) == 2 * len(a) == 2 * 3 * 30


@pytest.mark.parametrize("strategy", walker.STRATEGIES)
def test_corpus_deterministic_and_parallel_identical(strategy):
    g = gen_er_graph(300, 5, seed=4)
    cfg = WalkConfig(strategy=strategy, seed=99)
    a = generate_corpus(g, cfg)
    b = generate_corpus(g, cfg)
    c = generate_corpus(g, cfg, threads=2)
    assert np.array_equal(a.walks, b.walks) and np.array_equal(a.walks, c.walks)
    other = generate_corpus(g, WalkConfig(strategy=strategy, seed=100))
    assert not np.array_equal(a.walks, other.walks)


def test_walks_follow_edges():
    g = gen_er_graph(100, 4, seed=5)
    corpus = generate_corpus(g, WalkConfig(strategy="node2vec"))
    adj = {(int(s), int(d)) for s, d in zip(g.src, g.dst)}
    adj |= {(d, s) for s, d in adj}
    for w in corpus:
        assert len(w) <= 6
        assert all((a, b) in adj for a, b in zip(w, w[1:]))


def test_table_graph_mismatch():
    g1, g2 = gen_er_graph(20, 3, seed=1), gen_er_graph(20, 3, seed=2)
    with pytest.raises(ValueError):
        generate_corpus(g2, WalkConfig(), precompute_transitions(g1, WalkConfig()))


def test_corpus_file_round_trip(tmp_path):
    g = gen_er_graph(15, 3, seed=1)
    cfg = WalkConfig(strategy="time_only", walks_per_node=2, seed=5)
    corpus = generate_corpus(g, cfg)
    corpus.save(tmp_path / "walks.txt")
    back = WalkCorpus.load(tmp_path / "walks.txt")
    assert back.config == cfg and back.graph_fingerprint == corpus.graph_fingerprint
    assert list(back) == list(corpus)
    text = (tmp_path / "walks.txt").read_text().splitlines()
    assert text[0].startswith("# config ") and text[1].startswith("# graph ")


@pytest.mark.parametrize("bad", [dict(alpha=-0.1), dict(alpha=1.1), dict(p=0), dict(q=-1),
                                 dict(walks_per_node=0), dict(strategy="nope")])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        WalkConfig(**bad)


def _stars(k, total=8192):
    """Disjoint stars of degree ``k`` covering about ``total`` nodes."""
    m = max(1, total // (k + 1))
    centers = np.arange(m) * (k + 1)
    src = np.repeat(centers, k)
    dst = src + np.tile(np.arange(1, k + 1), m)
    n = m * (k + 1)
    return TxGraph.from_edges([f"n{i:05d}" for i in range(n)], src, dst,
                              np.arange(1, src.size + 1, dtype=float), np.arange(1, src.size + 1),
                              UNDIRECTED)


@pytest.mark.slow
def test_step_cost_independent_of_degree():
    per_step = {}
    cfg = WalkConfig(walk_length=40, walks_per_node=5)
    for k in (4, 64, 1024):
        g = _stars(k)
        table = precompute_transitions(g, cfg)
        generate_corpus(g, cfg, table)
        best = np.inf
        for _ in range(5):
            t0 = time.perf_counter()
            corpus = generate_corpus(g, cfg, table)
            best = min(best, time.perf_counter() - t0)
        per_step[k] = best / int((corpus.lengths - 1).sum())
    ratio = max(per_step.values()) / min(per_step.values())
    assert ratio < 3.0, per_step


@st.composite
def small_graphs(draw):
    n = draw(st.integers(2, 12))
    m = draw(st.integers(1, 30))
    rows = []
    for _ in range(m):
        a, b = draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1))
        amt = draw(st.one_of(st.just(0.0), st.floats(1e-6, 1e9)))
        rows.append(TxRecord(f"n{a:02d}", f"n{b:02d}", amt, draw(st.integers(0, 6))))
    if all(r.sender == r.receiver for r in rows):
        rows.append(TxRecord("n00", "n01", 1.0, 0))
    return aggregate(rows, draw(st.sampled_from([UNDIRECTED, DIRECTED_OUT])))


@settings(max_examples=100, deadline=None)
@given(small_graphs(), st.floats(0, 1))
def test_probability_vectors_normalized(g, alpha):
    t = precompute_transitions(g, WalkConfig(alpha=alpha))
    for u in range(g.num_nodes):
        if g.degree(u) == 0:
            continue
        p = blended_probs(g, u, alpha)
        assert abs(p.sum() - 1.0) <= 1e-12 and np.all(p >= 0)
        np.testing.assert_array_equal(t.probs(u), p)
        assert np.array_equal(blended_probs(g, u, 1.0), amount_probs(g, u))
        assert np.array_equal(blended_probs(g, u, 0.0), time_probs(g, u))


@settings(max_examples=50, deadline=None)
@given(small_graphs(), st.integers(0, 2**63), st.integers(0, 6))
def test_walk_invariants(g, seed, length):
    table = precompute_transitions(g, WalkConfig())
    for u in range(g.num_nodes):
        w = walk(g, table, u, length, seed)
        assert w[0] == u and 1 <= len(w) <= length + 1
        for a, b in zip(w, w[1:]):
            assert b in {x for x, _, _ in g.neighbors(a)}
        if len(w) < length + 1:
            assert g.degree(w[-1]) == 0
