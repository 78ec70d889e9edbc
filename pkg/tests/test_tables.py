import csv
import json

import numpy as np
import pytest

from fdrlab.errors import ValidationError
from fdrlab.procedures import adjusted_pvalues, bh_step_up, weighted_bh
from fdrlab.selective import EstimateSet, fcr_intervals
from fdrlab.structured import HypothesisTree, TreeNode, hierarchical_test
from fdrlab.tables import (
    build_tree_nodes,
    flatten_dict,
    read_estimate_table,
    read_input_table,
    read_tree_rows,
    write_curve_csv,
    write_hier_files,
    write_intervals_csv,
    write_json_report,
    write_key_value_csv,
    write_rejection_csv,
)
from fdrlab.two_groups import estimate_local_fdr


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def rows_of(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


class TestReadInputTable:
    def test_p_table_with_all_optional_columns(self, tmp_path):
        path = write(
            tmp_path / "t.csv",
            "id,p,weight,cluster,truth\n"
            "a,0.01,2.0,left,true\n"
            "b,0.5,0.5,left,0\n"
            "c,0.9,0.5,right,no\n",
        )
        table = read_input_table(path)
        assert table.ids == ("a", "b", "c")
        assert table.kind == "p"
        np.testing.assert_array_equal(table.values, [0.01, 0.5, 0.9])
        np.testing.assert_array_equal(table.weights, [2.0, 0.5, 0.5])
        assert table.clusters == ("left", "left", "right")
        np.testing.assert_array_equal(table.truth, [True, False, False])

    def test_z_table(self, tmp_path):
        table = read_input_table(
            write(tmp_path / "t.csv", "id,z\na,-1.5\nb,2.25\n")
        )
        assert table.kind == "z"
        np.testing.assert_array_equal(table.values, [-1.5, 2.25])
        assert table.weights is None and table.truth is None

    def test_blank_rows_skipped(self, tmp_path):
        table = read_input_table(
            write(tmp_path / "t.csv", "id,p\na,0.1\n\n , \nb,0.2\n")
        )
        assert table.ids == ("a", "b")

    def test_empty_file_gives_empty_table(self, tmp_path):
        table = read_input_table(write(tmp_path / "t.csv", ""))
        assert table.n == 0 and table.kind is None
        header_only = read_input_table(write(tmp_path / "h.csv", "id,p\n"))
        assert header_only.n == 0 and header_only.kind == "p"

    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("id,p,z\na,0.1,1.0\n", "not both"),
            ("id,value\na,0.1\n", "'p' or a 'z'"),
            ("name,p\na,0.1\n", "'id'"),
            ("id,p\na,0.1\nb,oops\n", "line 3"),
            ("id,p\na,0.1\nb\n", "line 3"),
            ("id,p\na,1.5\n", "outside [0, 1]"),
            ("id,p\na,0.1\na,0.2\n", "unique"),
            ("id,p,truth\na,0.1,maybe\n", "line 2"),
        ],
    )
    def test_malformed_tables(self, tmp_path, text, fragment):
        with pytest.raises(ValidationError, match=None) as err:
            read_input_table(write(tmp_path / "t.csv", text))
        assert fragment in str(err.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            read_input_table(tmp_path / "absent.csv")


class TestReadEstimateTable:
    def test_round_trip(self, tmp_path):
        path = write(
            tmp_path / "e.csv",
            "id,estimate,std_error\ng1,2.5,0.5\ng2,-0.25,1.0\n",
        )
        ids, estimates, errors = read_estimate_table(path)
        assert ids == ("g1", "g2")
        np.testing.assert_array_equal(estimates, [2.5, -0.25])
        np.testing.assert_array_equal(errors, [0.5, 1.0])

    def test_missing_column(self, tmp_path):
        with pytest.raises(ValidationError) as err:
            read_estimate_table(write(tmp_path / "e.csv", "id,estimate\ng1,2.5\n"))
        assert "std_error" in str(err.value)

    def test_non_numeric_cites_line(self, tmp_path):
        with pytest.raises(ValidationError) as err:
            read_estimate_table(
                write(
                    tmp_path / "e.csv",
                    "id,estimate,std_error\ng1,2.5,0.5\ng2,x,1.0\n",
                )
            )
        assert "line 3" in str(err.value)


class TestTreeFiles:
    TEXT = (
        "node_id,parent_id,members,p_value\n"
        "root,,a;b;c;d,\n"
        "left,root,a;b,0.01\n"
        "right,root,c;d,\n"
        "a,left,a,\n"
        "b,left,b,\n"
    )

    def test_parse(self, tmp_path):
        rows = read_tree_rows(write(tmp_path / "tree.csv", self.TEXT))
        assert rows[0] == ("root", None, ("a", "b", "c", "d"), None)
        assert rows[1] == ("left", "root", ("a", "b"), 0.01)

    def test_build_nodes_resolves_ids_then_indices(self, tmp_path):
        rows = read_tree_rows(write(tmp_path / "tree.csv", self.TEXT))
        nodes = build_tree_nodes(rows, {"a": 0, "b": 1, "c": 2, "d": 3})
        assert nodes[0].members == (0, 1, 2, 3)
        assert nodes[1].p_value == 0.01
        bare = build_tree_nodes([("n", None, ("0", "2"), None)], {})
        assert bare[0].members == (0, 2)

    def test_unknown_member(self, tmp_path):
        with pytest.raises(ValidationError) as err:
            build_tree_nodes([("n", None, ("ghost",), None)], {"a": 0})
        assert "ghost" in str(err.value) and "'n'" in str(err.value)

    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("", "empty"),
            ("node_id,parent_id\nroot,\n", "members"),
            ("node_id,parent_id,members\n,,a\n", "empty node_id"),
            ("node_id,parent_id,members\nroot,\n", "line 2"),
        ],
    )
    def test_malformed_tree_files(self, tmp_path, text, fragment):
        with pytest.raises(ValidationError) as err:
            read_tree_rows(write(tmp_path / "tree.csv", text))
        assert fragment in str(err.value)


class TestWriteRejectionCsv:
    def test_unweighted_with_adjusted(self, tmp_path):
        p = np.array([0.01, 0.9, 0.02, 1 / 3])
        result = bh_step_up(p, 0.05)
        adjusted = adjusted_pvalues(p, "bh")
        path = tmp_path / "out.csv"
        write_rejection_csv(path, result, ("a", "b", "c", "d"), p, adjusted=adjusted)
        rows = rows_of(path)
        assert rows[0] == [
            "id", "p", "weight", "rank", "threshold", "rejected", "adjusted_p",
        ]
        by_id = {row[0]: row for row in rows[1:]}
        assert float(by_id["d"][1]) == 1 / 3  # repr fidelity
        assert all(row[2] == "1.0" for row in rows[1:])
        assert sorted(int(row[3]) for row in rows[1:]) == [1, 2, 3, 4]
        rejected = {id_ for id_, row in by_id.items() if row[5] == "true"}
        assert rejected == {("a", "b", "c", "d")[i] for i in result.rejected}
        for id_, row in by_id.items():
            rank = int(row[3])
            assert float(row[4]) == pytest.approx(0.05 * rank / 4)
            i = ("a", "b", "c", "d").index(id_)
            assert float(row[6]) == adjusted[i]

    def test_weight_column_passes_through(self, tmp_path):
        p = np.array([0.01, 0.02, 0.9])
        weights = np.array([3.0, 0.5, 0.5])
        result = weighted_bh(p, weights, 0.05)
        path = tmp_path / "out.csv"
        write_rejection_csv(path, result, ("a", "b", "c"), p, weights=weights)
        rows = rows_of(path)
        assert rows[0] == ["id", "p", "weight", "rank", "threshold", "rejected"]
        assert [row[2] for row in rows[1:]] == ["3.0", "0.5", "0.5"]


class TestWriteCurveCsv:
    def test_header_and_rows(self, tmp_path):
        rng = np.random.default_rng(0)
        z = rng.normal(size=500)
        curve = estimate_local_fdr(z, 1.0)
        path = tmp_path / "curve.csv"
        write_curve_csv(path, curve, "theoretical")
        rows = rows_of(path)
        assert rows[0] == ["grid", "local_fdr", "raw_ratio", "tail_fdr", "null_kind"]
        assert len(rows) == 1 + curve.grid.size
        assert rows[1][4] == "theoretical"
        assert float(rows[1][0]) == curve.grid[0]


class TestWriteIntervalsCsv:
    def test_rows_match_interval_set(self, tmp_path):
        estimates = np.array([5.0, 0.1, 4.0])
        std_errors = np.array([1.0, 1.0, 1.0])
        intervals = fcr_intervals(EstimateSet(estimates, std_errors), 0.05)
        path = tmp_path / "iv.csv"
        write_intervals_csv(path, intervals, ("a", "b", "c"))
        rows = rows_of(path)
        assert rows[0] == ["id", "estimate", "lower", "upper", "marginal_level"]
        assert len(rows) == 1 + intervals.r
        for pos, row in enumerate(rows[1:]):
            assert row[0] == ("a", "b", "c")[int(intervals.selected[pos])]
            assert float(row[2]) == intervals.lower[pos]
            assert float(row[3]) == intervals.upper[pos]

    def test_empty_selection_writes_header_only(self, tmp_path):
        intervals = fcr_intervals(
            EstimateSet(np.array([0.1, 0.2]), np.array([1.0, 1.0])), 0.05
        )
        path = tmp_path / "iv.csv"
        write_intervals_csv(path, intervals, ("a", "b"))
        assert rows_of(path) == [["id", "estimate", "lower", "upper", "marginal_level"]]


class TestWriteHierFiles:
    def test_two_level_layout(self, tmp_path):
        nodes = [TreeNode("root")]
        for c in range(4):
            nodes.append(
                TreeNode(f"c{c}", "root", members=tuple(range(5 * c, 5 * c + 5)))
            )
            for i in range(5 * c, 5 * c + 5):
                nodes.append(TreeNode(f"leaf{i}", f"c{c}", members=(i,)))
        tree = HypothesisTree(nodes=tuple(nodes))
        rng = np.random.default_rng(3)
        leaf_p = np.where(np.arange(20) < 5, 1e-5, rng.uniform(0.2, 1.0, size=20))
        result = hierarchical_test(tree, leaf_p, 0.05)
        nodes_path = tmp_path / "nodes.csv"
        families_path = tmp_path / "families.csv"
        write_hier_files(nodes_path, families_path, tree, result)
        node_rows = rows_of(nodes_path)
        assert node_rows[0] == ["node_id", "parent_id", "level", "tested", "rejected"]
        assert len(node_rows) == 1 + len(tree.nodes)
        by_id = {row[0]: row for row in node_rows[1:]}
        root = tree.roots[0]
        assert by_id[root][1] == "NA"
        assert by_id[root][3] == "false"  # roots are granted, not tested
        assert by_id[root][4] == "true"
        tested = sum(row[3] == "true" for row in node_rows[1:])
        rejected_below_root = sum(
            row[4] == "true" for row in node_rows[1:] if row[0] != root
        )
        assert rejected_below_root == len(result.rejected_nodes) - 1
        assert tested > 0
        family_rows = rows_of(families_path)
        assert family_rows[0] == [
            "family_id", "child_id", "p_value", "rank", "threshold", "rejected",
        ]
        family_ids = {row[0] for row in family_rows[1:]}
        assert family_ids == set(result.family_children)


class TestKeyValueAndJson:
    PAYLOAD = {
        "rates": {"fdr_hat": 1 / 3, "pfdr_hat": None},
        "flags": [True, False],
        "name": "demo",
    }

    def test_flatten(self):
        flat = flatten_dict(self.PAYLOAD)
        assert flat == {
            "rates.fdr_hat": 1 / 3,
            "rates.pfdr_hat": None,
            "flags.0": True,
            "flags.1": False,
            "name": "demo",
        }

    def test_key_value_csv_sorted_with_na(self, tmp_path):
        path = tmp_path / "kv.csv"
        write_key_value_csv(path, flatten_dict(self.PAYLOAD))
        rows = rows_of(path)
        assert rows[0] == ["key", "value"]
        keys = [row[0] for row in rows[1:]]
        assert keys == sorted(keys)
        cells = dict(rows[1:])
        assert cells["rates.pfdr_hat"] == "NA"
        assert cells["flags.0"] == "true"
        assert float(cells["rates.fdr_hat"]) == 1 / 3

    def test_json_report_round_trip(self, tmp_path):
        path = tmp_path / "report.json"
        write_json_report(path, self.PAYLOAD)
        text = path.read_text(encoding="utf-8")
        assert text.endswith("\n")
        again = json.loads(text)
        assert again["rates"]["fdr_hat"] == 1 / 3
        assert again["rates"]["pfdr_hat"] is None
        keys = list(again)
        assert keys == sorted(keys)
