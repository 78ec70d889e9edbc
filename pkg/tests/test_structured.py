import math
import warnings

import numpy as np
import pytest
from scipy.stats import kstest, norm

from fdrlab.errors import (
    DegenerateCombinationWarning,
    TreeStructureError,
    ValidationError,
)
from fdrlab.procedures import bh_step_up, weighted_bh
from fdrlab.structured import (
    ClusterPartition,
    HypothesisTree,
    TreeNode,
    cluster_test,
    combine_pvalues,
    hierarchical_test,
    two_stage_screen,
)


class TestCombinePvalues:
    def test_fisher_pair_of_halves(self):
        # chi2 with 4 df has survival e^{-x/2}(1 + x/2)
        x = -2.0 * (math.log(0.5) + math.log(0.5))
        closed_form = math.exp(-x / 2.0) * (1.0 + x / 2.0)
        got = combine_pvalues([0.5, 0.5], "fisher")
        assert got == pytest.approx(closed_form)
        assert got == pytest.approx(0.5966, abs=5e-5)

    def test_stouffer_pair_of_halves(self):
        assert combine_pvalues([0.5, 0.5], "stouffer") == pytest.approx(0.5)

    def test_simes_pair(self):
        assert combine_pvalues([0.02, 0.9], "simes") == pytest.approx(0.04)

    def test_single_value_identity(self):
        for method in ("fisher", "stouffer", "simes"):
            assert combine_pvalues([0.37], method) == pytest.approx(0.37)

    def test_zero_under_fisher_and_stouffer(self):
        for method in ("fisher", "stouffer"):
            with pytest.warns(DegenerateCombinationWarning):
                assert combine_pvalues([0.0, 0.5], method) == 0.0

    def test_zero_under_simes_needs_no_flag(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert combine_pvalues([0.0, 0.5], "simes") == 0.0

    def test_validation(self):
        with pytest.raises(ValidationError):
            combine_pvalues([], "fisher")
        with pytest.raises(ValidationError):
            combine_pvalues([1.2], "fisher")
        with pytest.raises(ValidationError):
            combine_pvalues([0.5], "tippett")

    def test_uniform_null_stays_uniform(self):
        rng = np.random.default_rng(31)
        for method in ("fisher", "stouffer"):
            combined = np.array(
                [
                    combine_pvalues(rng.uniform(size=4), method)
                    for _ in range(10_000)
                ]
            )
            assert kstest(combined, "uniform").pvalue > 0.05

    def test_simes_stochastically_dominates_uniform(self):
        rng = np.random.default_rng(32)
        combined = np.sort(
            [combine_pvalues(rng.uniform(size=4), "simes") for _ in range(10_000)]
        )
        ecdf = np.arange(1, combined.size + 1) / combined.size
        ks_tol = 1.3581 / math.sqrt(combined.size)
        assert np.max(ecdf - combined) <= ks_tol


class TestClusterPartition:
    def test_labels_in_first_appearance_order(self):
        part = ClusterPartition(assignments=("b", "a", "b"))
        assert part.labels == ("b", "a")
        assert part.sizes == {"b": 2, "a": 1}
        np.testing.assert_array_equal(part.clusters["b"], [0, 2])

    def test_empty_assignments_rejected(self):
        with pytest.raises(ValidationError):
            ClusterPartition(assignments=())


class TestClusterTest:
    def test_singleton_clusters_match_flat_bh(self):
        rng = np.random.default_rng(41)
        for _ in range(300):
            n = rng.integers(1, 12)
            p = rng.uniform(size=n)
            part = ClusterPartition(assignments=tuple(range(n)))
            res = cluster_test(p, part, 0.1)
            assert list(res.rejected) == list(bh_step_up(p, 0.1).rejected)

    def test_one_cluster_is_a_single_combined_test(self):
        p = np.array([0.001, 0.002, 0.9])
        part = ClusterPartition(assignments=("all",) * 3)
        res = cluster_test(p, part, 0.05)
        combined = combine_pvalues(p, "fisher")
        assert res.n == 1
        assert (res.r == 1) == (combined <= 0.05)

    def test_size_weighting_matches_weighted_bh(self):
        # sizes (9, 1) renormalize to weights (1.8, 0.2)
        rng = np.random.default_rng(42)
        p = rng.uniform(size=10)
        assignments = ("big",) * 9 + ("small",)
        part = ClusterPartition(assignments=assignments)
        res = cluster_test(p, part, 0.05, size_weighting=True)
        cluster_p = [
            combine_pvalues(p[:9], "fisher"),
            combine_pvalues(p[9:], "fisher"),
        ]
        oracle = weighted_bh(cluster_p, [9.0, 1.0], 0.05)
        assert list(res.rejected) == list(oracle.rejected)
        assert res.method == "cluster_weighted_bh"

    def test_size_weights_hand_example(self):
        # strong combined signal in the big cluster, nothing in the small
        p = np.array([0.01] * 9 + [0.9])
        part = ClusterPartition(assignments=("big",) * 9 + ("small",))
        res = cluster_test(p, part, 0.05, size_weighting=True)
        assert list(res.rejected) == [0]

    def test_assignment_length_checked(self):
        part = ClusterPartition(assignments=("a", "b"))
        with pytest.raises(ValidationError):
            cluster_test([0.1, 0.2, 0.3], part, 0.05)

    def test_method_passes_through(self):
        p = np.array([0.02, 0.9, 0.5, 0.6])
        part = ClusterPartition(assignments=("a", "a", "b", "b"))
        res = cluster_test(p, part, 0.05, method="simes")
        cluster_p = [
            combine_pvalues(p[:2], "simes"),
            combine_pvalues(p[2:], "simes"),
        ]
        assert list(res.rejected) == list(bh_step_up(cluster_p, 0.05).rejected)


def two_level_tree():
    nodes = [TreeNode("root")]
    for c in range(4):
        nodes.append(
            TreeNode(f"c{c}", "root", members=tuple(range(5 * c, 5 * c + 5)))
        )
        for i in range(5 * c, 5 * c + 5):
            nodes.append(TreeNode(f"leaf{i}", f"c{c}", members=(i,)))
    return HypothesisTree(nodes=tuple(nodes))


class TestHierarchicalTest:
    def test_depth_one_equals_flat_bh(self):
        rng = np.random.default_rng(51)
        for _ in range(300):
            n = int(rng.integers(1, 10))
            p = rng.uniform(size=n)
            nodes = [TreeNode("root")] + [
                TreeNode(f"leaf{i}", "root", members=(i,)) for i in range(n)
            ]
            res = hierarchical_test(HypothesisTree(nodes=tuple(nodes)), p, 0.1)
            flat = {f"leaf{i}" for i in bh_step_up(p, 0.1).rejected}
            assert res.rejected_nodes - {"root"} == flat
            assert res.visited == 1

    def test_two_level_worked_example(self):
        tree = two_level_tree()
        p = np.zeros(20)
        # cluster p-values supplied through the leaves via fisher would
        # entangle the stages; pin them with explicit node p-values instead
        nodes = [TreeNode("root")]
        cluster_p = [0.001, 0.01, 0.2, 0.9]
        leaf_p = {
            0: [0.001, 0.004, 0.03, 0.5, 0.9],
            1: [1.0, 1.0, 1.0, 1.0, 1.0],
            2: [0.001] * 5,
            3: [0.001] * 5,
        }
        p = np.concatenate([leaf_p[c] for c in range(4)])
        for c in range(4):
            nodes.append(
                TreeNode(
                    f"c{c}",
                    "root",
                    members=tuple(range(5 * c, 5 * c + 5)),
                    p_value=cluster_p[c],
                )
            )
            for i in range(5 * c, 5 * c + 5):
                nodes.append(TreeNode(f"leaf{i}", f"c{c}", members=(i,)))
        res = hierarchical_test(HypothesisTree(nodes=tuple(nodes)), p, 0.05)

        # BH over the four cluster p-values rejects the first two, so the
        # tree tests the root family plus those two child families
        assert bh_step_up(cluster_p, 0.05).r == 2
        assert res.visited == 1 + 2
        assert set(res.per_family_traces) == {"root", "c0", "c1"}
        assert "c2" not in res.rejected_nodes and "c3" not in res.rejected_nodes

        # within c0, plain BH over its five leaves rejects three
        expected_leaves = {f"leaf{i}" for i in bh_step_up(leaf_p[0], 0.05).rejected}
        assert expected_leaves == {"leaf0", "leaf1", "leaf2"}
        got_leaves = {x for x in res.rejected_nodes if x.startswith("leaf")}
        assert got_leaves == expected_leaves

    def test_rejected_cluster_with_hopeless_children(self):
        nodes = (
            TreeNode("root"),
            TreeNode("c", "root", members=(0, 1), p_value=0.001),
            TreeNode("leafa", "c", members=(0,)),
            TreeNode("leafb", "c", members=(1,)),
        )
        res = hierarchical_test(HypothesisTree(nodes=nodes), [1.0, 1.0], 0.05)
        assert "c" in res.rejected_nodes
        assert not any(x.startswith("leaf") for x in res.rejected_nodes)
        assert res.visited == 2

    def test_gating_invariant(self):
        rng = np.random.default_rng(52)
        tree = two_level_tree()
        for _ in range(50):
            p = rng.uniform(size=20)
            res = hierarchical_test(tree, p, 0.2)
            for family in res.per_family_traces:
                assert family in res.rejected_nodes
            for node in res.rejected_nodes:
                parent = tree.node(node).parent_id
                if parent is not None:
                    assert parent in res.rejected_nodes

    def test_all_null_visits_about_one_family(self):
        rng = np.random.default_rng(53)
        tree = two_level_tree()
        visits = [
            hierarchical_test(tree, rng.uniform(size=20), 0.05).visited
            for _ in range(300)
        ]
        assert min(visits) >= 1
        assert np.mean(visits) < 1.3

    def test_combining_method_used_for_unpinned_nodes(self):
        nodes = (
            TreeNode("root"),
            TreeNode("c", "root", members=(0, 1)),
        )
        p = [0.02, 0.9]
        by_simes = hierarchical_test(
            HypothesisTree(nodes=nodes), p, 0.05, node_method="simes"
        )
        # simes combination is 0.04 <= q, fisher's is far above it
        assert "c" in by_simes.rejected_nodes
        by_fisher = hierarchical_test(HypothesisTree(nodes=nodes), p, 0.05)
        assert "c" not in by_fisher.rejected_nodes

    def test_family_pvalues_recorded(self):
        tree = two_level_tree()
        p = np.random.default_rng(54).uniform(size=20)
        res = hierarchical_test(tree, p, 0.5)
        for family, trace in res.per_family_traces.items():
            assert len(res.family_pvalues[family]) == trace.n


class TestTreeValidation:
    def test_duplicate_id(self):
        with pytest.raises(TreeStructureError, match="dup"):
            HypothesisTree(
                nodes=(TreeNode("dup"), TreeNode("dup", "dup", members=(0,)))
            )

    def test_orphan_parent(self):
        with pytest.raises(TreeStructureError, match="ghost"):
            HypothesisTree(
                nodes=(TreeNode("root"), TreeNode("kid", "ghost", members=(0,)))
            )

    def test_cycle(self):
        with pytest.raises(TreeStructureError):
            HypothesisTree(
                nodes=(
                    TreeNode("a", "b", members=(0,)),
                    TreeNode("b", "a", members=(0,)),
                )
            )

    def test_non_nested_members(self):
        with pytest.raises(TreeStructureError, match="kid"):
            HypothesisTree(
                nodes=(
                    TreeNode("root"),
                    TreeNode("c", "root", members=(0, 1)),
                    TreeNode("kid", "c", members=(2,)),
                )
            )

    def test_needs_a_root(self):
        with pytest.raises(TreeStructureError):
            HypothesisTree(nodes=())


class TestTwoStageScreen:
    def test_worked_example(self):
        res = two_stage_screen(
            [0.05, 0.5, 0.08, 0.9],
            [0.01, np.nan, 0.3, np.nan],
            alpha1=0.1,
            q=0.05,
        )
        assert list(res.rejected) == [0]
        assert res.n == 4
        np.testing.assert_allclose(res.thresholds, [0.025, 0.05])

    def test_screen_all_equals_flat_bh(self):
        rng = np.random.default_rng(61)
        for _ in range(100):
            stage2 = rng.uniform(size=6)
            res = two_stage_screen(rng.uniform(size=6), stage2, 1.0, 0.05)
            assert list(res.rejected) == list(bh_step_up(stage2, 0.05).rejected)

    def test_no_survivors(self):
        res = two_stage_screen([0.5, 0.9], [0.01, 0.01], 0.01, 0.05)
        assert res.r == 0
        assert res.thresholds.size == 0

    def test_nan_only_allowed_outside_survivors(self):
        with pytest.raises(ValidationError):
            two_stage_screen([0.05, 0.5], [np.nan, 0.3], 0.1, 0.05)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            two_stage_screen([0.05, 0.5], [0.01], 0.1, 0.05)

    def test_alpha1_domain(self):
        with pytest.raises(ValidationError):
            two_stage_screen([0.5], [0.5], 0.0, 0.05)
        with pytest.raises(ValidationError):
            two_stage_screen([0.5], [0.5], 1.2, 0.05)


def test_enrichment_beats_flat_testing_on_clustered_signal():
    # weak per-hypothesis effects that share a cluster: combining gives
    # the clusters a fighting chance while flat BH mostly misses
    rng = np.random.default_rng(71)
    n, members = 100, 25
    assignments = tuple(np.repeat(np.arange(4), members))
    part = ClusterPartition(assignments=assignments)
    signal_clusters = {0, 1}
    mean = np.where(np.isin(np.asarray(assignments), list(signal_clusters)), 0.8, 0.0)
    cluster_hits, flat_hits = [], []
    for _ in range(300):
        z = mean + rng.standard_normal(n)
        p = norm.sf(z)
        res = cluster_test(p, part, 0.05)
        cluster_hits.append(
            sum(1 for c in res.rejected if int(c) in signal_clusters)
        )
        flat = bh_step_up(p, 0.05).rejected
        flat_hits.append(int(np.sum(flat < 2 * members)))
    diff = np.asarray(cluster_hits, dtype=float) - np.asarray(flat_hits, dtype=float)
    se = diff.std(ddof=1) / math.sqrt(diff.size)
    assert diff.mean() >= -3.0 * se
    assert np.mean(cluster_hits) > 1.5
