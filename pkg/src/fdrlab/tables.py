"""CSV and JSON input/output.

One dialect everywhere: comma separators, a header row, '.' decimals,
UTF-8.  Floats are written with repr-fidelity so every serialized
report re-parses to equal values.  Missing or undefined numbers are
"NA" in CSV and null in JSON.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .structured import TreeNode

__all__ = [
    "InputTable",
    "read_input_table",
    "read_estimate_table",
    "read_tree_rows",
    "build_tree_nodes",
    "write_rejection_csv",
    "write_curve_csv",
    "write_intervals_csv",
    "write_hier_files",
    "write_key_value_csv",
    "write_json_report",
]

_NA = "NA"


@dataclass(frozen=True, eq=False)
class InputTable:
    """Parsed per-hypothesis table.

    kind says whether values are p-values or z-values; weights,
    clusters, and truth are present only when their columns are.
    """

    ids: tuple
    values: np.ndarray
    kind: str | None
    weights: np.ndarray | None = None
    clusters: tuple | None = None
    truth: np.ndarray | None = None

    @property
    def n(self):
        return len(self.ids)


def _parse_float(token, path, line_no, column):
    try:
        return float(token)
    except (TypeError, ValueError):
        raise ValidationError(
            f"{path}, line {line_no}: column {column!r} has non-numeric "
            f"value {token!r}"
        ) from None


def _parse_truth(token, path, line_no):
    lowered = (token or "").strip().lower()
    if lowered in ("1", "true", "t", "yes"):
        return True
    if lowered in ("0", "false", "f", "no"):
        return False
    raise ValidationError(
        f"{path}, line {line_no}: truth flag must be boolean-like, got {token!r}"
    )


def read_input_table(path):
    """Read a per-hypothesis table: id, p or z, optional weight/cluster/truth.

    Exactly one of the columns "p" and "z" must be present; their
    presence declares the value kind.  A file with no data rows yields
    an empty table.  Malformed rows are reported with line numbers.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ValidationError(f"cannot read table {path}: {exc}") from exc
    if not rows:
        return InputTable(ids=(), values=np.empty(0), kind=None)
    header = [h.strip() for h in rows[0]]
    if "id" not in header:
        raise ValidationError(f"{path}: header must contain an 'id' column")
    has_p = "p" in header
    has_z = "z" in header
    if has_p and has_z:
        raise ValidationError(f"{path}: table must declare either 'p' or 'z', not both")
    if not has_p and not has_z:
        raise ValidationError(f"{path}: table must have a 'p' or a 'z' column")
    kind = "p" if has_p else "z"
    col = {name: header.index(name) for name in header}
    ids = []
    values = []
    weights = [] if "weight" in col else None
    clusters = [] if "cluster" in col else None
    truth = [] if "truth" in col else None
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ValidationError(
                f"{path}, line {line_no}: expected {len(header)} columns, got {len(row)}"
            )
        ids.append(row[col["id"]].strip())
        value = _parse_float(row[col[kind]], path, line_no, kind)
        if kind == "p" and not 0.0 <= value <= 1.0:
            raise ValidationError(
                f"{path}, line {line_no}: p-value {value} outside [0, 1]"
            )
        values.append(value)
        if weights is not None:
            weights.append(_parse_float(row[col["weight"]], path, line_no, "weight"))
        if clusters is not None:
            clusters.append(row[col["cluster"]].strip())
        if truth is not None:
            truth.append(_parse_truth(row[col["truth"]], path, line_no))
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: ids must be unique")
    return InputTable(
        ids=tuple(ids),
        values=np.asarray(values, dtype=np.float64),
        kind=kind,
        weights=np.asarray(weights, dtype=np.float64) if weights is not None else None,
        clusters=tuple(clusters) if clusters is not None else None,
        truth=np.asarray(truth, dtype=bool) if truth is not None else None,
    )


def read_estimate_table(path):
    """Read an estimate table: id, estimate, std_error."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ValidationError(f"cannot read table {path}: {exc}") from exc
    if not rows:
        return (), np.empty(0), np.empty(0)
    header = [h.strip() for h in rows[0]]
    for name in ("id", "estimate", "std_error"):
        if name not in header:
            raise ValidationError(f"{path}: header must contain {name!r}")
    col = {name: header.index(name) for name in header}
    ids, estimates, errors = [], [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ValidationError(
                f"{path}, line {line_no}: expected {len(header)} columns, got {len(row)}"
            )
        ids.append(row[col["id"]].strip())
        estimates.append(_parse_float(row[col["estimate"]], path, line_no, "estimate"))
        errors.append(_parse_float(row[col["std_error"]], path, line_no, "std_error"))
    return tuple(ids), np.asarray(estimates), np.asarray(errors)


def read_tree_rows(path):
    """Read a tree edge list: node_id, parent_id, members (semicolon-joined).

    An empty parent_id marks a root.  An optional p_value column gives
    a node an explicit p-value.  Member tokens are returned unresolved;
    build_tree_nodes maps them to hypothesis indices.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ValidationError(f"cannot read tree file {path}: {exc}") from exc
    if not rows:
        raise ValidationError(f"{path}: tree file is empty")
    header = [h.strip() for h in rows[0]]
    for name in ("node_id", "parent_id", "members"):
        if name not in header:
            raise ValidationError(f"{path}: tree header must contain {name!r}")
    col = {name: header.index(name) for name in header}
    out = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ValidationError(
                f"{path}, line {line_no}: expected {len(header)} columns, got {len(row)}"
            )
        node_id = row[col["node_id"]].strip()
        if not node_id:
            raise ValidationError(f"{path}, line {line_no}: empty node_id")
        parent = row[col["parent_id"]].strip() or None
        members_cell = row[col["members"]].strip()
        members = tuple(t.strip() for t in members_cell.split(";") if t.strip())
        p_value = None
        if "p_value" in col and row[col["p_value"]].strip():
            p_value = _parse_float(row[col["p_value"]], path, line_no, "p_value")
        out.append((node_id, parent, members, p_value))
    return out


def build_tree_nodes(rows, id_to_index):
    """Resolve member tokens against table ids (or bare indices)."""
    nodes = []
    for node_id, parent, member_tokens, p_value in rows:
        members = []
        for token in member_tokens:
            if token in id_to_index:
                members.append(id_to_index[token])
            elif token.lstrip("-").isdigit():
                members.append(int(token))
            else:
                raise ValidationError(
                    f"node {node_id!r}: member {token!r} matches no table id"
                )
        nodes.append(
            TreeNode(
                node_id=node_id,
                parent_id=parent,
                members=tuple(members),
                p_value=p_value,
            )
        )
    return nodes


def _cell(value):
    if value is None:
        return _NA
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _open_writer(path):
    fh = open(path, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh)


def write_rejection_csv(path, result, ids, pvalues, weights=None, adjusted=None):
    """Serialize a RejectionResult against its input table.

    Ranks follow the procedure's own ordering (effective p-values for
    weighted scans); each row shows the bound its rank was compared to.
    Unweighted procedures report weight 1.0 for every row.
    """
    rank_of = np.empty(result.n, dtype=np.int64)
    rank_of[result.order] = np.arange(1, result.n + 1)
    rejected = set(int(i) for i in result.rejected)
    header = ["id", "p", "weight", "rank", "threshold", "rejected"]
    if adjusted is not None:
        header.append("adjusted_p")
    fh, writer = _open_writer(path)
    with fh:
        writer.writerow(header)
        for i, id_ in enumerate(ids):
            rank = int(rank_of[i])
            threshold = (
                result.thresholds[rank - 1] if rank <= result.thresholds.size else None
            )
            row = [
                id_,
                _cell(float(pvalues[i])),
                _cell(1.0 if weights is None else float(weights[i])),
                rank,
                _cell(threshold),
                _cell(i in rejected),
            ]
            if adjusted is not None:
                row.append(_cell(float(adjusted[i])))
            writer.writerow(row)


def write_curve_csv(path, curve, null_kind):
    fh, writer = _open_writer(path)
    with fh:
        writer.writerow(["grid", "local_fdr", "raw_ratio", "tail_fdr", "null_kind"])
        for i in range(curve.grid.size):
            writer.writerow(
                [
                    _cell(float(curve.grid[i])),
                    _cell(float(curve.local_fdr[i])),
                    _cell(float(curve.raw_ratio[i])),
                    _cell(float(curve.tail_fdr[i])),
                    null_kind,
                ]
            )


def write_intervals_csv(path, intervals, ids):
    """IntervalSet serialization: id, estimate, lower, upper, marginal_level."""
    fh, writer = _open_writer(path)
    with fh:
        writer.writerow(["id", "estimate", "lower", "upper", "marginal_level"])
        for pos, idx in enumerate(intervals.selected):
            writer.writerow(
                [
                    ids[int(idx)],
                    _cell(float(intervals.estimates[pos])),
                    _cell(float(intervals.lower[pos])),
                    _cell(float(intervals.upper[pos])),
                    _cell(float(intervals.marginal_level)),
                ]
            )


def write_hier_files(nodes_path, families_path, tree, result):
    """Node-level and family-trace serialization of a hierarchical run."""
    tested_nodes = set()
    for parent, kids in result.family_children.items():
        tested_nodes.update(kids)
    fh, writer = _open_writer(nodes_path)
    with fh:
        writer.writerow(["node_id", "parent_id", "level", "tested", "rejected"])
        for node in tree.nodes:
            writer.writerow(
                [
                    node.node_id,
                    node.parent_id if node.parent_id is not None else _NA,
                    tree.levels[node.node_id],
                    _cell(node.node_id in tested_nodes),
                    _cell(node.node_id in result.rejected_nodes),
                ]
            )
    fh, writer = _open_writer(families_path)
    with fh:
        writer.writerow(
            ["family_id", "child_id", "p_value", "rank", "threshold", "rejected"]
        )
        for parent, kids in result.family_children.items():
            trace = result.per_family_traces[parent]
            family_p = result.family_pvalues[parent]
            rank_of = np.empty(trace.n, dtype=np.int64)
            rank_of[trace.order] = np.arange(1, trace.n + 1)
            rejected = set(int(i) for i in trace.rejected)
            for pos, child in enumerate(kids):
                rank = int(rank_of[pos])
                writer.writerow(
                    [
                        parent,
                        child,
                        _cell(float(family_p[pos])),
                        rank,
                        _cell(float(trace.thresholds[rank - 1])),
                        _cell(pos in rejected),
                    ]
                )


def write_key_value_csv(path, flat):
    """Two-column key,value CSV with deterministic key order."""
    fh, writer = _open_writer(path)
    with fh:
        writer.writerow(["key", "value"])
        for key in sorted(flat):
            writer.writerow([key, _cell(flat[key])])


def flatten_dict(d, prefix=""):
    """Collapse nested dicts/lists to dotted scalar keys."""
    out = {}
    for key, value in d.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten_dict(value, f"{name}."))
        elif isinstance(value, (list, tuple)):
            for i, item in enumerate(value):
                if isinstance(item, dict):
                    out.update(flatten_dict(item, f"{name}.{i}."))
                else:
                    out[f"{name}.{i}"] = item
        else:
            out[name] = value
    return out


def write_json_report(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
