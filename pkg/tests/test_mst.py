import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catews import mst
from catews.errors import InputError, InsufficientDataError, InsufficientStructureError
from catews.synthetic import factor_panel, preferential_attachment_degrees, random_recursive_tree
from catews.timeseries import WindowSpec


def is_tree(n, edges):
    if len(edges) != n - 1:
        return False
    return bool(np.all(mst.hop_distances(n, edges, 0) >= 0))


def snapshot_from_edges(n, edges, center_static=0):
    """Build a snapshot of a given tree by making tree edges the only short distances."""
    d = np.full((n, n), 10.0)
    for k, (i, j) in enumerate(edges):
        d[i, j] = d[j, i] = 1.0 + 1e-6 * k
    np.fill_diagonal(d, 0.0)
    return mst.mst_build(d, center_static=center_static)


def random_distances(rng, n):
    a = rng.uniform(0.1, 2.0, (n, n))
    d = np.triu(a, 1)
    return d + d.T


def test_correlation_examples():
    rng = np.random.default_rng(0)
    r = rng.standard_normal(200)
    cw = mst.correlation_from_returns(np.column_stack([r, r, -r]))
    assert math.isclose(cw.rho[0, 1], 1.0, rel_tol=1e-12)
    assert math.isclose(cw.rho[0, 2], -1.0, rel_tol=1e-12)
    N = 10_000
    cw = mst.correlation_from_returns(rng.standard_normal((N, 2)))
    assert abs(cw.rho[0, 1]) < 3 / math.sqrt(N)


def test_correlation_invariants_and_exclusion():
    rng = np.random.default_rng(1)
    r = rng.standard_normal((50, 6))
    r[:, 3] = 0.0
    with pytest.warns(UserWarning, match="A3"):
        cw = mst.correlation_from_returns(r)
    assert cw.excluded == ("A3",) and len(cw.labels) == 5
    assert np.array_equal(cw.rho, cw.rho.T) and np.all(np.diag(cw.rho) == 1.0)
    assert np.all(np.abs(cw.rho) <= 1.0)
    with pytest.raises(InsufficientDataError):
        mst.correlation_from_returns(r[:2])


def test_correlation_window_from_prices():
    rng = np.random.default_rng(2)
    panel = mst.Panel.from_returns(0.01 * rng.standard_normal((100, 3)), ["a", "b", "c"])
    cw = mst.correlation_window(panel, (10, 60))
    ref = np.corrcoef(panel.log_returns[10:59].T)
    assert np.allclose(cw.rho, ref, atol=1e-12)
    assert cw.span == (10, 60)


def test_three_asset_tree_matches_enumeration():
    rho = np.array([[1, 0.9, 0.1], [0.9, 1, 0.1], [0.1, 0.1, 1]])
    cw = mst.CorrelationWindow(("1", "2", "3"), rho)
    d = cw.distances
    trees = [t for t in itertools.combinations([(0, 1), (0, 2), (1, 2)], 2)]
    best = min(sum(d[i, j] for i, j in t) for t in trees)
    snap = mst.mst_build(cw)
    assert math.isclose(snap.total_weight, best, rel_tol=1e-12)
    pairs = {(i, j) for i, j, _ in snap.edges}
    assert (0, 1) in pairs and pairs in ({(0, 1), (0, 2)}, {(0, 1), (1, 2)})
    # tie on (weight) broken by the smaller label pair
    assert pairs == {(0, 1), (0, 2)}
    assert snap.edges == mst.mst_build(cw, "kruskal").edges


def test_star_distances():
    n = 8
    d = np.full((n, n), 1.0)
    d[0, :] = d[:, 0] = 0.5
    np.fill_diagonal(d, 0.0)
    snap = mst.mst_build(d)
    assert {(i, j) for i, j, _ in snap.edges} == {(0, k) for k in range(1, n)}
    assert snap.center_dynamic == 0
    assert snap.normalized_length == 1.0
    assert snap.center_weight_ratio == 1.0
    assert snap.mol_dynamic == (n - 1) / n


def test_prim_kruskal_total_weight():
    rng = np.random.default_rng(3)
    for _ in range(100):
        d = random_distances(rng, int(rng.integers(2, 40)))
        a, b = mst.mst_prim(d), mst.mst_kruskal(d)
        assert abs(sum(e[2] for e in a) - sum(e[2] for e in b)) <= 1e-12 * max(1, sum(e[2] for e in a))
        assert a == b


def test_ties_are_deterministic():
    d = np.ones((6, 6))
    np.fill_diagonal(d, 0)
    assert mst.mst_prim(d) == mst.mst_kruskal(d) == [(0, k, 1.0) for k in range(1, 6)]


def test_nan_distance_names_pair():
    d = np.ones((4, 4))
    d[1, 2] = d[2, 1] = np.nan
    with pytest.raises(InputError, match="1 and 2"):
        mst.mst_build(d)


def test_mean_occupation_layer_examples():
    snap = snapshot_from_edges(3, [(0, 1), (1, 2)])
    assert mst.mean_occupation_layer(snap, 0) == 1.0
    assert mst.mean_occupation_layer(snap, 1) == 2 / 3
    with pytest.raises(InputError):
        mst.mean_occupation_layer(snap, 5)


def test_superhub_tree_has_smaller_layer_than_hierarchical():
    rng = np.random.default_rng(4)
    n = 200
    hier = snapshot_from_edges(n, random_recursive_tree(n, rng))
    hub_edges = [(0, k) for k in range(1, 120)] + random_recursive_tree(n, rng)[119:]
    hub = snapshot_from_edges(n, hub_edges)
    assert is_tree(n, hub.edges)
    assert hub.mol_dynamic < hier.mol_dynamic
    assert hub.normalized_length < hier.normalized_length


def test_degree_fit_preferential_attachment():
    rng = np.random.default_rng(5)
    fits = [mst.degree_fit(preferential_attachment_degrees(10_000, rng)).exponent for _ in range(5)]
    assert all(abs(f + 3) <= 0.3 for f in fits)


def test_degree_fit_star_is_degenerate():
    with pytest.raises(InsufficientStructureError):
        mst.degree_fit(snapshot_from_edges(10, [(0, k) for k in range(1, 10)]))


def hierarchical_tree(n, rng):
    """Breadth-first tree where every vertex gets one to three children."""
    edges, queue, nxt = [], [0], 1
    while nxt < n:
        u = queue.pop(0)
        for _ in range(int(rng.integers(1, 4))):
            if nxt >= n:
                break
            edges.append((u, nxt))
            queue.append(nxt)
            nxt += 1
    return edges


def test_degree_fit_flags_planted_hub():
    rng = np.random.default_rng(6)
    n = 300
    for _ in range(10):
        edges = hierarchical_tree(n - 50, rng) + [(7, k) for k in range(n - 50, n)]
        snap = snapshot_from_edges(n, edges)
        assert snap.degrees[7] >= 50
        assert mst.degree_fit(snap).outliers == [7]
        assert mst.degree_fit(snapshot_from_edges(n, hierarchical_tree(n, rng))).outliers == []


def test_degree_fit_no_false_hubs_in_scale_free_tree():
    rng = np.random.default_rng(7)
    for _ in range(5):
        assert mst.degree_fit(preferential_attachment_degrees(10_000, rng)).outliers == []


def test_timeline_single_window_and_independent_assets():
    rng = np.random.default_rng(7)
    panel = mst.Panel.from_returns(0.01 * rng.standard_normal((301, 20)))
    rows = mst.structure_timeline(panel, WindowSpec(300, 300))
    assert len(rows) == 1 and rows[0].error is None
    rows = mst.structure_timeline(panel, WindowSpec(60, 30))
    nl = np.array([r.normalized_length for r in rows])
    assert nl.min() > 0.6 * np.median(nl)
    with pytest.raises(InsufficientDataError):
        mst.structure_timeline(panel, WindowSpec(400, 10))


def test_timeline_planted_factor_regime():
    rng = np.random.default_rng(8)
    panel = factor_panel(rng, n_assets=40, n_windows=20, width=60, span=(8, 12))
    rows = mst.structure_timeline(panel, WindowSpec(60, 60))
    mins = mst.timeline_minima(rows)
    for key in ("normalized_length", "mol_static", "mol_dynamic"):
        assert 8 <= mins[key] < 12


def test_timeline_records_zero_variance_window():
    rng = np.random.default_rng(9)
    r = 0.01 * rng.standard_normal((120, 4))
    r[:60, 2] = 0.0
    rows = mst.structure_timeline(mst.Panel.from_returns(r), WindowSpec(60, 60), center_static=0)
    assert rows[0].error and "A2" in rows[0].error
    assert rows[1].error is None


def test_panel_csv_errors(tmp_path):
    p = tmp_path / "panel.csv"
    p.write_text("date,a,b\n2020-01-01,1,2\n2020-01-02,1.1,nan\n")
    with pytest.raises(InputError) as e:
        mst.Panel.from_csv(p)
    assert "'b'" in str(e.value) and "3" in str(e.value)
    with pytest.raises(InputError, match="not found"):
        mst.Panel.from_csv(tmp_path / "missing.csv")


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1))
def test_tree_invariants(n, seed):
    rng = np.random.default_rng(seed)
    snap = mst.mst_build(random_distances(rng, n), center_static=int(rng.integers(n)))
    assert is_tree(n, snap.edges)
    assert snap.degrees.sum() == 2 * (n - 1)
    diameter = max(mst.hop_distances(n, snap.edges, v).max() for v in range(n))
    assert snap.mol_dynamic <= snap.mol_static + diameter
    assert snap.normalized_length >= 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 20), st.integers(0, 2**32 - 1), st.floats(0.01, 0.99))
def test_monotone_transform_invariance(n, seed, eps):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((60, n))
    cw = mst.correlation_from_returns(x)
    squeezed = 1 - eps * (1 - cw.rho)
    np.fill_diagonal(squeezed, 1.0)
    cw2 = mst.CorrelationWindow(cw.labels, squeezed)
    assert np.allclose(cw2.distances, math.sqrt(eps) * cw.distances, atol=1e-12)
    a, b = mst.mst_build(cw), mst.mst_build(cw2)
    assert [e[:2] for e in a.edges] == [e[:2] for e in b.edges]


def test_star_layer_below_path():
    # three vertices: the path is itself a star
    three = [snapshot_from_edges(3, e).mol_dynamic for e in ([(0, 1), (0, 2)], [(0, 1), (1, 2)])]
    assert three[0] == three[1]
    for n in (4, 6, 12):
        star = snapshot_from_edges(n, [(0, k) for k in range(1, n)])
        path = snapshot_from_edges(n, [(k, k + 1) for k in range(n - 1)])
        assert star.mol_dynamic < path.mol_dynamic
