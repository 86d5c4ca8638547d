import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topkdetect.graph import (
    EdgeListError, GraphError, InfeasibleDegreeError, TailDistribution, from_edges, generate,
    ground_truth, load_edge_list, write_edge_list,
)


def graph_arrays(g):
    return [g.out_indptr, g.out_indices, g.in_degree, g.alive]


def test_complete_star_when_degree_capped():
    g = generate(10, 1, TailDistribution("pure-pareto", 0.5, 10), 0.0, seed=3)
    assert g.in_degree.tolist() == [10]
    assert all(g.out_adj(v).tolist() == [0] for v in range(10))


def test_pareto_log_moment():
    dist = TailDistribution("pure-pareto", 0.5, 1.0)
    x = dist.sample(10**5, np.random.default_rng(0))
    assert abs(np.log(x / dist.x_min).mean() - 0.5) <= 0.02


@pytest.mark.parametrize("seed", range(5))
def test_dead_count_concentrates(seed):
    g = generate(10**5, 10, TailDistribution("pure-pareto", 0.5, 1), 0.3, seed=seed)
    dead = int((~g.alive).sum())
    assert abs(dead - 30000) <= 4 * np.sqrt(10**5 * 0.3 * 0.7)


def test_empirical_survival_matches_pareto():
    gamma, x_min, M = 0.5, 1.0, 10**5
    g = generate(1000, M, TailDistribution("pure-pareto", gamma, x_min), 0.0, seed=11)
    for x in (2, 4, 8):
        s = (x / x_min) ** (-1 / gamma)
        s_hat = np.mean(g.in_degree >= x)
        assert abs(s_hat - s) <= 3 * np.sqrt(s * (1 - s) / M)


def test_generated_graph_is_consistent():
    g = generate(3000, 2000, TailDistribution("pareto-log", 0.6, 3), 0.25, seed=4)
    g.check()
    assert g.out_degree().sum() == g.in_degree.sum() == g.n_edges
    assert not g.out_degree()[~g.alive].any()
    assert g.in_degree.max() <= g.n_alive
    assert not g.directed


def test_generator_is_deterministic():
    dist = TailDistribution("pure-pareto", 0.45, 5)
    a = generate(2000, 2000, dist, 0.3, seed=9)
    b = generate(2000, 2000, dist, 0.3, seed=9)
    c = generate(2000, 2000, dist, 0.3, seed=10)
    for x, y in zip(graph_arrays(a), graph_arrays(b)):
        assert x.tobytes() == y.tobytes()
    assert a.in_degree.tobytes() != c.in_degree.tobytes()
    assert a.directed


def test_generate_rejects_bad_parameters():
    dist = TailDistribution("pure-pareto", 0.5, 1)
    with pytest.raises(GraphError):
        generate(0, 5, dist)
    with pytest.raises(GraphError):
        generate(5, 5, dist, dead_fraction=1.0)
    with pytest.raises(InfeasibleDegreeError):
        generate(5, 5, TailDistribution("pure-pareto", 0.5, 6))
    with pytest.raises(GraphError):
        TailDistribution("pure-pareto", 0.0, 1)
    with pytest.raises(GraphError):
        TailDistribution("pure-pareto", 0.5, 0.5)
    with pytest.raises(GraphError):
        TailDistribution("lognormal", 0.5, 1)


@pytest.mark.parametrize("kind", ["pure-pareto", "pareto-log"])
def test_survival_and_quantile_are_inverse(kind):
    dist = TailDistribution(kind, 0.7, 4.0)
    assert dist.survival(4.0) == 1.0
    assert dist.survival(1.0) == 1.0
    u = np.array([1.0, 0.5, 1e-3, 1e-9])
    np.testing.assert_allclose(dist.survival(dist.quantile(u)), u, rtol=1e-9)


def test_log_variant_has_lighter_tail():
    a = TailDistribution("pure-pareto", 0.5, 1.0)
    b = TailDistribution("pareto-log", 0.5, 1.0)
    x = np.array([2.0, 10.0, 1000.0])
    assert np.all(b.survival(x) < a.survival(x))


def write(tmp_path, text, name="g.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_two_edges(tmp_path):
    g = load_edge_list(write(tmp_path, "0 1\n2 1\n"))
    assert g.n_v == g.n_w == 3
    assert g.in_degree.tolist() == [0, 2, 0]
    assert g.directed


def test_load_collapses_duplicates(tmp_path):
    g = load_edge_list(write(tmp_path, "0 1\n0 1\n"))
    assert g.in_degree[1] == 1
    g.check()


def test_load_densifies_ids(tmp_path):
    g = load_edge_list(write(tmp_path, "# comment\n100 7\n\n7 100\n100 42\n"))
    assert g.id_map.tolist() == [7, 42, 100]
    assert g.in_degree.tolist() == [1, 1, 1]
    assert sorted(g.out_adj(2).tolist()) == [0, 1]


def test_load_matches_independent_degree_count(tmp_path):
    rng = np.random.default_rng(5)
    edges = rng.integers(0, 10**6, size=(5000, 2)) // 1000
    text = "".join(f"{a}\t{b}\n" for a, b in edges)
    g = load_edge_list(write(tmp_path, "# web graph\n" + text))
    # single pass, set-based count on the raw IDs
    seen, count = set(), {}
    for line in text.splitlines():
        a, b = line.split()
        if (a, b) not in seen:
            seen.add((a, b))
            count[b] = count.get(b, 0) + 1
    top_raw = max(count.values())
    assert g.in_degree.max() == top_raw
    top = g.id_map[ground_truth(g, 1).ranked_ids[0]]
    assert count[str(top)] == top_raw


@pytest.mark.parametrize("text,line", [("0 1\n2\n", 2), ("0 1\n0 x\n", 2),
                                        ("#bipartite 3\n0 1\n", 1)])
def test_malformed_lines_report_line_number(tmp_path, text, line):
    with pytest.raises(EdgeListError) as info:
        load_edge_list(write(tmp_path, text))
    assert info.value.lineno == line
    assert f":{line}:" in str(info.value)


def test_unreadable_file(tmp_path):
    with pytest.raises(GraphError):
        load_edge_list(tmp_path / "missing.txt")


def test_round_trip_with_header(tmp_path):
    g = generate(400, 300, TailDistribution("pure-pareto", 0.5, 2), 0.3, seed=2)
    p = tmp_path / "out.txt"
    write_edge_list(g, p)
    h = load_edge_list(p)
    assert (h.n_v, h.n_w, h.seed, h.directed) == (400, 300, 2, False)
    assert np.array_equal(h.in_degree, g.in_degree)
    assert np.array_equal(h.alive, g.alive)
    assert np.array_equal(h.out_indptr, g.out_indptr)
    assert np.array_equal(h.out_indices, g.out_indices)


def test_ground_truth_breaks_ties_by_id():
    g = from_edges([0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1, 2], [0] * 5 + [1] * 5 + [2] * 3, 5, 3)
    assert g.in_degree.tolist() == [5, 5, 3]
    t = ground_truth(g, 2)
    assert t.ranked_ids.tolist() == [0, 1]
    assert t.order_stats.tolist() == [5, 5]
    full = ground_truth(g, 3)
    assert sorted(full.ranked_ids.tolist()) == [0, 1, 2]
    with pytest.raises(GraphError):
        ground_truth(g, 0)
    with pytest.raises(GraphError):
        ground_truth(g, 4)


def test_ground_truth_matches_full_sort():
    g = generate(50, 50, TailDistribution("pure-pareto", 0.8, 1), 0.0, seed=8)
    t = ground_truth(g, 50)
    expected = sorted(range(50), key=lambda w: (-g.in_degree[w], w))
    assert t.ranked_ids.tolist() == expected
    assert np.all(np.diff(t.order_stats) <= 0)


def test_check_detects_corruption():
    g = from_edges([0, 1], [1, 1], 2, 2)
    g.in_degree[1] = 5
    with pytest.raises(GraphError):
        g.check()


def test_undirected_view_unions_in_and_out():
    g = from_edges([0, 1, 2], [1, 2, 0], 3, 3, directed=True)
    assert g.undirected_adj(0).tolist() == [1, 2]
    assert g.undirected_adj(1).tolist() == [0, 2]
    b = from_edges([0], [1], 2, 3)
    with pytest.raises(GraphError):
        b.undirected_adj(0)


@settings(max_examples=30, deadline=None)
@given(n_v=st.integers(1, 60), n_w=st.integers(1, 60), gamma=st.floats(0.1, 2.0),
       x_min=st.integers(1, 5), dead=st.floats(0.0, 0.9), seed=st.integers(0, 2**16))
def test_stored_degrees_match_adjacency(n_v, n_w, gamma, x_min, dead, seed):
    if x_min > n_v:
        return
    g = generate(n_v, n_w, TailDistribution("pure-pareto", gamma, x_min), dead, seed)
    g.check()
    assert np.array_equal(np.bincount(g.out_indices, minlength=n_w), g.in_degree)
    assert np.all(g.in_degree >= np.minimum(x_min, g.n_alive))
