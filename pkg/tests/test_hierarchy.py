import pytest

from app.errors import NoParent
from app.hierarchy import TRIVIAL_LEVEL, build_hierarchy, dump_hierarchy, parent_leader, top_level, verify_partition
from app.metric_graph import all_pairs_distances, build_graph, grid_graph


@pytest.fixture()
def path_h(path5):
    return build_hierarchy(all_pairs_distances(path5))


def test_top_level():
    assert top_level(4, 8) == 1
    assert top_level(8, 8) == 1
    assert top_level(9, 8) == 2
    assert top_level(0, 8) == 0


def test_path_hierarchy_shape(path_h):
    assert path_h.params.h == 1
    assert path_h.params.rho == 8
    assert sorted(path_h.levels) == [-1, 0, 1, 2]
    level0 = path_h.level(0)
    assert [c.leader for c in level0.clusters] == [0, 2, 4]
    assert [sorted(c.members) for c in level0.clusters] == [[0, 1], [2, 3], [4]]
    assert len(path_h.top.clusters) == 1
    assert path_h.top.clusters[0].leader == 0


def test_radii_are_powers_of_rho_capped_at_the_diameter():
    h = build_hierarchy(all_pairs_distances(build_graph(40, [(i, i + 1, 1) for i in range(39)])), 3.0)
    assert h.params.rho == 12
    assert h.params.h == 2
    assert {l: h.level(l).radius for l in sorted(h.levels)} == {-1: 0, 0: 1, 1: 12, 2: 39, 3: 39}


def test_trivial_level_is_singletons(path_h):
    trivial = path_h.level(TRIVIAL_LEVEL)
    assert trivial.radius == 0
    assert [c.members for c in trivial.clusters] == [frozenset({v}) for v in range(5)]


def test_measured_intersection_count(path_h):
    assert path_h.params.I == 2
    assert verify_partition(path_h.metric, path_h.level(0)).measured_I == 2
    assert verify_partition(path_h.metric, path_h.level(TRIVIAL_LEVEL)).measured_I == 1


def test_every_level_partitions_within_sigma_radius():
    d = all_pairs_distances(grid_graph(4, 3))
    h = build_hierarchy(d, sigma=2.0)
    for l in sorted(h.levels):
        report = verify_partition(d, h.level(l))
        assert report.exact_cover
        if l >= 0:
            assert report.max_diameter <= 2.0 * report.radius


def test_parent_leader(path_h):
    cluster = path_h.level(0).cluster_of(3)
    assert cluster.leader == 2
    assert parent_leader(path_h, cluster).leader == 0
    assert parent_leader(path_h, path_h.level(TRIVIAL_LEVEL).cluster_of(4)).leader == 4


def test_parent_leader_at_top_raises(path_h):
    with pytest.raises(NoParent):
        parent_leader(path_h, path_h.top.clusters[0])


def test_children(path_h):
    kids = path_h.children(path_h.top.clusters[0])
    assert sorted(c.leader for c in kids) == [0, 2, 4]
    assert path_h.children(path_h.level(TRIVIAL_LEVEL).clusters[0]) == []


def test_sweep_levels_runs_zero_to_h_plus_one(path_h):
    assert [lvl.level for lvl in path_h.sweep_levels()] == [0, 1, 2]


def test_single_node_hierarchy():
    h = build_hierarchy(all_pairs_distances(build_graph(1, [])))
    assert h.params.h == 0
    assert len(h.top.clusters) == 1


def test_sigma_below_two_rejected(path5):
    with pytest.raises(ValueError, match="sigma"):
        build_hierarchy(all_pairs_distances(path5), sigma=1.5)


def test_dump_hierarchy(path_h):
    lines = dump_hierarchy(path_h)
    assert len(lines) == 5 + 3 + 1 + 1
    assert lines[0] == "-1\t0\t0\t0"
    assert "0\t1\t2\t2 3" in lines


@pytest.fixture(scope="module")
def grid8():
    d = all_pairs_distances(grid_graph(8, 8))
    return d, build_hierarchy(d)


def test_grid_8x8_levels_check_out_exhaustively(grid8):
    d, h = grid8
    assert h.params.rho == 8
    assert d.diameter == 14
    for l in range(TRIVIAL_LEVEL, h.params.h + 2):
        lvl = h.level(l)
        assert lvl.radius == (0 if l == TRIVIAL_LEVEL else min(d.diameter, h.params.rho**l))
        report = verify_partition(d, lvl)
        assert report.exact_cover
        assert report.measured_I <= h.params.I
        for v in range(d.n):
            assert v in lvl.cluster_of(v).members
        for c in lvl.clusters:
            assert c.leader in c.members
            diameter = max(d(u, v) for u in c.members for v in c.members)
            assert diameter <= report.max_diameter
            if l >= 0:
                assert diameter <= h.params.sigma * lvl.radius


def test_rebuilding_gives_the_same_hierarchy(grid8):
    d, h = grid8
    again = build_hierarchy(d)
    assert again == h
    assert dump_hierarchy(again) == dump_hierarchy(h)


def test_parent_chain_reaches_the_top(grid8):
    d, h = grid8
    for v in range(d.n):
        cluster = h.level(TRIVIAL_LEVEL).cluster_of(v)
        for step in range(h.params.h + 1):
            cluster = parent_leader(h, cluster)
            assert cluster.level == TRIVIAL_LEVEL + step + 1
        assert cluster == h.top.clusters[0]
        assert cluster.members == frozenset(range(d.n))
        with pytest.raises(NoParent):
            parent_leader(h, cluster)
